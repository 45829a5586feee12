//! Germs of the height family at envelope points and their recognition
//! among the simple singularities.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Serialize, Serializer};

use crate::envelope::{envelope_point, family_jets};
use crate::error::{Error, Result};
use crate::expr::MAX_ORDER;
use crate::jet::{layout, Jet};
use crate::linalg;
use crate::scene::Scene;

/// Relative threshold for Taylor coefficients.
pub const COEFF_TOL: f64 = 1e-9;
/// Relative singular-value threshold for rank decisions.
pub const RANK_TOL: f64 = 1e-8;

/// Jet of `t ↦ F(t, x₀)` at `t₀`, in displacement variables.
#[derive(Debug, Clone)]
pub struct Germ {
    pub n: usize,
    pub order: usize,
    pub jet: Jet<f64>,
    pub scene: Option<String>,
    pub t0: Vec<f64>,
    pub x0: Vec<f64>,
    pub warnings: Vec<String>,
}

impl Germ {
    pub fn from_jet(jet: Jet<f64>) -> Germ {
        Germ {
            n: jet.vars(),
            order: jet.order(),
            t0: vec![0.0; jet.vars()],
            x0: Vec::new(),
            scene: None,
            warnings: Vec::new(),
            jet,
        }
    }

    /// Largest absolute coefficient.
    pub fn scale(&self) -> f64 {
        self.jet.scale_max()
    }

    fn zero_tol(&self) -> f64 {
        COEFF_TOL * self.scale()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnresolvedReason {
    CorankTooHigh,
    OrderExceeded,
    ModalitySuspected,
}

impl UnresolvedReason {
    pub fn as_str(self) -> &'static str {
        match self {
            UnresolvedReason::CorankTooHigh => "corank > 2",
            UnresolvedReason::OrderExceeded => "order exceeded",
            UnresolvedReason::ModalitySuspected => "modality suspected",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingularityClass {
    Regular,
    Morse,
    A(usize),
    /// `D_k`; the sign is `-` when the cubic has three real linear factors.
    D(usize, Sign),
    E6,
    E7,
    E8,
    Unresolved(UnresolvedReason),
}

impl SingularityClass {
    /// Class name without the `D₄` sign.
    pub fn label(&self) -> String {
        match self {
            SingularityClass::Regular => "Regular".into(),
            SingularityClass::Morse => "Morse".into(),
            SingularityClass::A(k) => format!("A{k}"),
            SingularityClass::D(k, _) => format!("D{k}"),
            SingularityClass::E6 => "E6".into(),
            SingularityClass::E7 => "E7".into(),
            SingularityClass::E8 => "E8".into(),
            SingularityClass::Unresolved(_) => "Unresolved".into(),
        }
    }

    pub fn milnor(&self) -> Option<usize> {
        match self {
            SingularityClass::Regular => Some(0),
            SingularityClass::Morse => Some(1),
            SingularityClass::A(k) | SingularityClass::D(k, _) => Some(*k),
            SingularityClass::E6 => Some(6),
            SingularityClass::E7 => Some(7),
            SingularityClass::E8 => Some(8),
            SingularityClass::Unresolved(_) => None,
        }
    }

    /// Corank of the Hessian implied by the class.
    pub fn corank(&self) -> Option<usize> {
        match self {
            SingularityClass::Regular | SingularityClass::Morse => Some(0),
            SingularityClass::A(_) => Some(1),
            SingularityClass::D(..) | SingularityClass::E6 | SingularityClass::E7 | SingularityClass::E8 => Some(2),
            SingularityClass::Unresolved(_) => None,
        }
    }
}

impl fmt::Display for SingularityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SingularityClass::D(4, s) => write!(f, "D4{}", s.symbol()),
            SingularityClass::Unresolved(r) => write!(f, "Unresolved({})", r.as_str()),
            other => f.write_str(&other.label()),
        }
    }
}

impl Serialize for SingularityClass {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Jet of `F(·, x₀)` at `t₀` to order `k`.
pub fn germ_jet(scene: &Scene, t0: &[f64], x0: &[f64], k: usize) -> Result<Germ> {
    if k < 2 {
        return Err(Error::Invalid(format!("germ order must be at least 2, got {k}")));
    }
    if x0.len() != scene.ambient() {
        return Err(Error::Dimension(format!(
            "point has {} coordinates, ambient dimension is {}",
            x0.len(),
            scene.ambient()
        )));
    }
    scene.check_point(t0)?;
    let (c, phi) = family_jets(scene, t0, k)?;
    let n = scene.n();
    let mut jet = Jet::zero(n, k);
    for j in 0..n + 2 {
        jet = &jet + &(&c[j] * &(-&phi[j]).add_scalar(&x0[j]));
    }
    let mut germ = Germ {
        n,
        order: k,
        jet,
        scene: None,
        t0: t0.to_vec(),
        x0: x0.to_vec(),
        warnings: Vec::new(),
    };
    let low = low_order_size(&germ.jet);
    let s = germ.scale();
    if low > COEFF_TOL * s && low < 1e-6 * s {
        germ.warnings.push(format!(
            "point is near but not on the discriminant (|j^1 F| = {low:.3e})"
        ));
    }
    Ok(germ)
}

fn low_order_size(j: &Jet<f64>) -> f64 {
    j.value().abs().max(j.gradient().iter().fold(0.0f64, |m, x| m.max(x.abs())))
}

/// Splitting-lemma decomposition `f(s) = g(u(s)) + Σ λ_j ŵ_j(s)² / 2`.
#[derive(Debug, Clone)]
pub struct Splitting {
    pub corank: usize,
    /// Orthogonal matrix with `s = Q w`, kernel directions first.
    pub rotation: Vec<Vec<f64>>,
    /// Hessian eigenvalues in the order of `rotation`'s columns.
    pub eigenvalues: Vec<f64>,
    /// Second derivatives of the split-off squares.
    pub lambdas: Vec<f64>,
    /// Reduced germ in the `corank` kernel variables.
    pub reduced: Jet<f64>,
    /// Square coordinates `ŵ_j` as jets in the original variables.
    pub squares: Vec<Jet<f64>>,
    /// Critical section `u ↦ s(u)` (jets in the kernel variables, zero at 0).
    pub section: Vec<Jet<f64>>,
    order: usize,
}

/// Hessian eigen-decomposition, sorted by `|λ|` with ties kept in index order.
fn sorted_hessian(f: &Jet<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = f.vars();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut e = vec![0u32; n];
            e[i] += 1;
            e[j] += 1;
            let c = f.coeff(&e);
            h[(i, j)] = if i == j { 2.0 * c } else { c };
        }
    }
    let eig = SymmetricEigen::new(h);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .abs()
            .partial_cmp(&eig.eigenvalues[b].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = idx.iter().map(|&k| eig.eigenvalues[k]).collect();
    // rotation[i][k] = i-th component of the k-th sorted eigenvector
    let rotation = (0..n)
        .map(|i| idx.iter().map(|&k| eig.eigenvectors[(i, k)]).collect())
        .collect();
    (values, rotation)
}

fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if a.is_empty() {
        return Vec::new();
    }
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// `G / w_j²`, assuming `G` has no monomials of `w_j`-degree below two.
fn divide_by_square(g: &Jet<f64>, j: usize) -> Jet<f64> {
    let n = g.vars();
    let k = g.order() - 2;
    let mut out = Jet::zero(n, k);
    let lay = layout(n, k);
    for i in 0..lay.len() {
        let mut e = lay.monomial(i).to_vec();
        e[j] += 2;
        out.coefficients_mut()[i] = g.coeff(&e);
    }
    out
}

fn identity_inner(n: usize, order: usize) -> Vec<Jet<f64>> {
    (0..n).map(|i| Jet::variable(n, order, i, 0.0)).collect()
}

/// Removes variable `j` from `h` by completing the square.
///
/// Returns `(h̃, φ, ŵ, λ)` with `h = h̃ + λ ŵ² / 2`, where `h̃` and `φ` do not
/// depend on `w_j`, and the critical set `∂_j h = 0` is `w_j = φ`.
fn complete_square(h: &Jet<f64>, j: usize) -> Result<(Jet<f64>, Jet<f64>, Jet<f64>, f64)> {
    let (n, k) = (h.vars(), h.order());
    let mut e = vec![0u32; n];
    e[j] = 2;
    let lambda = 2.0 * h.coeff(&e);
    let dh = h.derivative(j);
    let mut phi = Jet::zero(n, k - 1);
    for _ in 0..k {
        let mut inner = identity_inner(n, k - 1);
        inner[j] = phi.clone();
        let r = dh.compose(&inner)?;
        phi = (&phi - &r.scale(&(1.0 / lambda))).nilpotent();
    }
    let phi = phi.lift(k);
    let mut inner = identity_inner(n, k);
    inner[j] = phi.clone();
    let reduced = h.compose(&inner)?;
    inner[j] = &Jet::variable(n, k, j, 0.0) + &phi;
    let shifted = &h.compose(&inner)? - &reduced;
    let ratio = divide_by_square(&shifted, j).scale(&(2.0 / lambda));
    let root = ratio.sqrt()?.lift(k - 1);
    let w_shifted = &Jet::variable(n, k - 1, j, 0.0) * &root;
    let mut back = identity_inner(n, k);
    back[j] = &Jet::variable(n, k, j, 0.0) - &phi;
    let w = w_shifted.compose(&back)?;
    Ok((reduced, phi, w, lambda))
}

/// Splitting-lemma reduction of a germ with vanishing linear part.
pub fn split(germ: &Germ) -> Result<Splitting> {
    let (n, k) = (germ.n, germ.order);
    if k < 2 {
        return Err(Error::UnresolvedOrder { min_order: 2 });
    }
    let z = germ.zero_tol();
    let mut f = germ.jet.clone();
    for i in f.layout().degree_range(1) {
        f.coefficients_mut()[i] = 0.0;
    }
    let (eigenvalues, rotation) = sorted_hessian(&f);
    let corank = eigenvalues.iter().filter(|l| l.abs() <= 2.0 * z).count();
    let mut h = f.linear_substitution(&rotation, n)?;
    let mut phis = Vec::new();
    let mut squares_w = Vec::new();
    let mut lambdas = Vec::new();
    for j in corank..n {
        let (next, phi, w, lambda) = complete_square(&h, j)?;
        h = next;
        phis.push(phi);
        squares_w.push(w);
        lambdas.push(lambda);
    }
    // reduced germ: the coefficients of h free of the split variables
    let c = corank;
    let mut reduced = Jet::zero(c, k);
    let lay = layout(c, k);
    for i in 0..lay.len() {
        let mut e = lay.monomial(i).to_vec();
        e.resize(n, 0);
        reduced.coefficients_mut()[i] = h.coeff(&e);
    }
    let qt = transpose(&rotation);
    let squares = squares_w
        .iter()
        .map(|w| w.linear_substitution(&qt, n))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    // back-substitute the critical section, last split variable first
    let mut sec_w: Vec<Jet<f64>> = (0..n)
        .map(|i| {
            if i < c {
                Jet::variable(c, k, i, 0.0)
            } else {
                Jet::zero(c, k)
            }
        })
        .collect();
    if c > 0 {
        for j in (c..n).rev() {
            let mut inner = sec_w.clone();
            for item in inner.iter_mut().take(j + 1).skip(c) {
                *item = Jet::zero(c, k);
            }
            sec_w[j] = phis[j - c].compose(&inner)?.nilpotent();
        }
    }
    let section = (0..n)
        .map(|i| {
            let mut acc = Jet::zero(c, k);
            for (q, s) in rotation[i].iter().zip(&sec_w) {
                acc = &acc + &s.scale(q);
            }
            acc
        })
        .collect();
    Ok(Splitting {
        corank,
        rotation,
        eigenvalues,
        lambdas,
        reduced,
        squares,
        section,
        order: k,
    })
}

impl Splitting {
    /// `g(u(s)) + Σ λ_j ŵ_j(s)² / 2` in the original variables.
    pub fn reconstruct(&self) -> Result<Jet<f64>> {
        let n = self.rotation.len();
        let qt = transpose(&self.rotation);
        let mut acc = self.reduced.linear_substitution(&qt[..self.corank], n)?;
        for (w, l) in self.squares.iter().zip(&self.lambdas) {
            let w = w.lift(self.order);
            acc = &acc + &(&w * &w).scale(&(0.5 * l));
        }
        Ok(acc)
    }
}

/// Milnor number of a germ, or a lower bound when the jet is too short.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Milnor {
    /// `μ`, certified by `m^degree ⊂ J`.
    Exact { mu: usize, degree: usize },
    AtLeast(usize),
}

/// Rows `m · ∂_i f` truncated to total degree `t ≥ 1`, in the basis of `layout(n, t)`.
fn jacobian_rows(f: &Jet<f64>, t: usize) -> Vec<Vec<f64>> {
    let n = f.vars();
    let lay = layout(n, t);
    let mut rows = Vec::new();
    for i in 0..n {
        let d = f.derivative(i);
        for m in 0..lay.degree_range(t - 1).end {
            let dm = lay.degree(m);
            let mut row = vec![0.0; lay.len()];
            let dl = d.layout();
            for b in 0..dl.len() {
                if dm + dl.degree(b) > t {
                    break;
                }
                let e: Vec<u32> = lay.monomial(m).iter().zip(dl.monomial(b)).map(|(x, y)| x + y).collect();
                row[lay.index_of(&e).expect("monomial within degree bound")] = d.coefficients()[b];
            }
            rows.push(row);
        }
    }
    rows
}

/// Milnor number via the Jacobian quotient of the polynomial jet.
///
/// For each `t < order`, `codim(J + m^{t+1})` is a lower bound for `μ`; it
/// equals `μ` once every degree-`t` monomial lies in `J + m^{t+1}`.
pub fn milnor_number(f: &Jet<f64>) -> Milnor {
    let n = f.vars();
    let mut bound = 0;
    for t in 1..f.order() {
        let rows = jacobian_rows(f, t);
        let lay = layout(n, t);
        let r = linalg::rank(&rows, RANK_TOL);
        let codim = lay.len() - r;
        bound = bound.max(codim);
        let mut extended = rows;
        for i in lay.degree_range(t) {
            let mut row = vec![0.0; lay.len()];
            row[i] = 1.0;
            extended.push(row);
        }
        if linalg::rank(&extended, RANK_TOL) == r {
            return Milnor::Exact { mu: codim, degree: t };
        }
    }
    Milnor::AtLeast(bound)
}

/// Binary cubic `a x³ + b x²y + c xy² + d y³` of a two-variable jet.
fn cubic_of(g: &Jet<f64>) -> [f64; 4] {
    [g.coeff(&[3, 0]), g.coeff(&[2, 1]), g.coeff(&[1, 2]), g.coeff(&[0, 3])]
}

fn discriminant([a, b, c, d]: [f64; 4]) -> f64 {
    b * b * c * c - 4.0 * a * c * c * c - 4.0 * b * b * b * d - 27.0 * a * a * d * d + 18.0 * a * b * c * d
}

/// Hessian covariant; it vanishes exactly for perfect cubes.
fn hessian_covariant([a, b, c, d]: [f64; 4]) -> [f64; 3] {
    [3.0 * a * c - b * b, 9.0 * a * d - b * c, 3.0 * b * d - c * c]
}

/// Full result of [`classify_germ`], with the intermediate data.
#[derive(Debug, Clone)]
pub struct Classification {
    pub class: SingularityClass,
    pub corank: usize,
    pub milnor: Option<Milnor>,
    pub splitting: Option<Splitting>,
}

pub fn classify_germ(germ: &Germ) -> Result<SingularityClass> {
    classify_detailed(germ).map(|c| c.class)
}

pub fn classify_detailed(germ: &Germ) -> Result<Classification> {
    let z = germ.zero_tol();
    let f = &germ.jet;
    if f.value().abs() > z {
        return Err(Error::NotOnDiscriminant(format!(
            "germ has nonzero value {:.6e}",
            f.value()
        )));
    }
    let simple = |class, corank| Classification {
        class,
        corank,
        milnor: None,
        splitting: None,
    };
    if f.gradient().iter().any(|x| x.abs() > z) {
        return Ok(simple(SingularityClass::Regular, 0));
    }
    if germ.order < 2 {
        return Err(Error::UnresolvedOrder { min_order: 2 });
    }
    let sp = split(germ)?;
    let corank = sp.corank;
    let k = germ.order;
    let class = match corank {
        0 => SingularityClass::Morse,
        1 => {
            let g = &sp.reduced;
            match (3..=k).find(|&d| g.coeff(&[d as u32]).abs() > z) {
                Some(d) => SingularityClass::A(d - 1),
                None => return Err(Error::UnresolvedOrder { min_order: k + 1 }),
            }
        }
        2 => {
            if k < 3 {
                return Err(Error::UnresolvedOrder { min_order: 3 });
            }
            let cubic = cubic_of(&sp.reduced);
            let m = cubic.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            if m <= z {
                SingularityClass::Unresolved(UnresolvedReason::ModalitySuspected)
            } else {
                let disc = discriminant(cubic);
                if disc.abs() > 1e-8 * m.powi(4) {
                    let sign = if disc > 0.0 { Sign::Minus } else { Sign::Plus };
                    SingularityClass::D(4, sign)
                } else {
                    let hc = hessian_covariant(cubic);
                    let triple = hc.iter().all(|x| x.abs() <= 1e-7 * m * m);
                    let mu = milnor_number(&sp.reduced);
                    let class = match (triple, mu) {
                        (false, Milnor::Exact { mu, .. }) if mu >= 5 => SingularityClass::D(mu, Sign::Plus),
                        (true, Milnor::Exact { mu: 6, .. }) => SingularityClass::E6,
                        (true, Milnor::Exact { mu: 7, .. }) => SingularityClass::E7,
                        (true, Milnor::Exact { mu: 8, .. }) => SingularityClass::E8,
                        (true, Milnor::Exact { .. }) => {
                            SingularityClass::Unresolved(UnresolvedReason::ModalitySuspected)
                        }
                        (true, Milnor::AtLeast(b)) if b > 8 => {
                            SingularityClass::Unresolved(UnresolvedReason::ModalitySuspected)
                        }
                        _ => return Err(Error::UnresolvedOrder { min_order: k + 1 }),
                    };
                    return Ok(Classification {
                        class,
                        corank,
                        milnor: Some(mu),
                        splitting: Some(sp),
                    });
                }
            }
        }
        c => return Err(Error::CorankTooHigh { corank: c }),
    };
    Ok(Classification {
        class,
        corank,
        milnor: None,
        splitting: Some(sp),
    })
}

/// Classifies `F(·, x₀)` at `t₀`, raising the jet order until it suffices.
pub fn classify_at(scene: &Scene, t0: &[f64], x0: &[f64], start: usize) -> Result<(Germ, Classification)> {
    let mut k = start.max(2);
    loop {
        let germ = germ_jet(scene, t0, x0, k)?;
        match classify_detailed(&germ) {
            Err(Error::UnresolvedOrder { min_order }) if k < MAX_ORDER => {
                k = min_order.max(k + 1).min(MAX_ORDER);
            }
            other => return other.map(|c| (germ, c)),
        }
    }
}

/// Coefficient rows of `u ↦ c_j(t₀ + s(u))` along the critical section.
fn covector_on_section(scene: &Scene, t0: &[f64], sp: &Splitting) -> Result<Vec<Jet<f64>>> {
    let (c, _) = family_jets(scene, t0, sp.order)?;
    Ok(c.iter()
        .map(|cj| cj.compose(&sp.section))
        .collect::<std::result::Result<Vec<_>, _>>()?)
}

/// Versality matrix of an `A_k` point and its numerical rank.
pub fn versality_matrix(scene: &Scene, t0: &[f64], x0: &[f64], k: usize) -> Result<(Vec<Vec<f64>>, usize)> {
    let (_, cl) = classify_at(scene, t0, x0, (k + 1).max(3))?;
    if cl.class != SingularityClass::A(k) {
        return Err(Error::NotAkPoint { class: cl.class.to_string() });
    }
    let sp = cl.splitting.expect("A_k classification keeps its splitting");
    versality_rows(scene, t0, &sp, k)
}

#[derive(Debug, Clone, Serialize)]
pub struct Versality {
    pub method: String,
    pub rank: usize,
    pub required: usize,
    pub versal: bool,
}

/// Infinitesimal versality `J_g + ⟨c_j⟩ = O` checked modulo `m^degree ⊂ J_g`.
pub fn quotient_versality(g: &Jet<f64>, along: &[Jet<f64>]) -> Option<Versality> {
    let Milnor::Exact { degree, .. } = milnor_number(g) else {
        return None;
    };
    let t = degree - 1;
    let lay = layout(g.vars(), t);
    let mut rows = if t == 0 { Vec::new() } else { jacobian_rows(g, t) };
    for c in along {
        rows.push(c.truncate(t).coefficients().to_vec());
    }
    let rank = linalg::rank(&rows, RANK_TOL);
    Some(Versality {
        method: "jacobian-quotient".into(),
        rank,
        required: lay.len(),
        versal: rank == lay.len(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MilnorCorank {
    pub milnor: Option<usize>,
    pub corank: Option<usize>,
}

/// Classification of one envelope point.
#[derive(Debug, Clone, Serialize)]
pub struct ClassReport {
    pub t: Vec<f64>,
    pub u: f64,
    pub point: Vec<f64>,
    pub class: SingularityClass,
    pub milnor_corank: MilnorCorank,
    pub versal: Option<bool>,
    pub versality: Option<Versality>,
    pub order: usize,
    pub diagnostics: Vec<String>,
}

/// Classifies the germ at `x₀ = φ(t₀) + u ξ(t₀)`.
pub fn classify_envelope_point(scene: &Scene, t0: &[f64], u: f64) -> Result<ClassReport> {
    classify_envelope_point_from(scene, t0, u, 4)
}

/// As [`classify_envelope_point`], starting the jet order at `start`.
pub fn classify_envelope_point_from(scene: &Scene, t0: &[f64], u: f64, start: usize) -> Result<ClassReport> {
    scene.check_point(t0)?;
    let x0 = envelope_point(scene, t0, u)?;
    let mut diagnostics = Vec::new();
    let (class, corank, versality, order) = match classify_at(scene, t0, &x0, start) {
        Ok((germ, cl)) => {
            diagnostics.extend(germ.warnings.iter().cloned());
            let versality = match (&cl.class, &cl.splitting) {
                (SingularityClass::A(k), Some(sp)) => {
                    let (_, rank) = versality_rows(scene, t0, sp, *k)?;
                    Some(Versality {
                        method: "kernel-jet-rank".into(),
                        rank,
                        required: *k,
                        versal: rank == *k,
                    })
                }
                (SingularityClass::D(..) | SingularityClass::E6 | SingularityClass::E7 | SingularityClass::E8, Some(sp)) => {
                    let along = covector_on_section(scene, t0, sp)?;
                    let v = quotient_versality(&sp.reduced, &along);
                    if v.is_none() {
                        diagnostics.push("jet too short to certify versality".into());
                    }
                    v
                }
                _ => None,
            };
            (cl.class, Some(cl.corank), versality, germ.order)
        }
        Err(Error::UnresolvedOrder { min_order }) => {
            diagnostics.push(format!("undecided at order {MAX_ORDER}; needs order {min_order}"));
            (SingularityClass::Unresolved(UnresolvedReason::OrderExceeded), None, None, MAX_ORDER)
        }
        Err(Error::CorankTooHigh { corank }) => {
            diagnostics.push(format!("Hessian corank {corank}"));
            (SingularityClass::Unresolved(UnresolvedReason::CorankTooHigh), Some(corank), None, start)
        }
        Err(e) => return Err(e),
    };
    Ok(ClassReport {
        t: t0.to_vec(),
        u,
        point: x0,
        milnor_corank: MilnorCorank {
            milnor: class.milnor(),
            corank,
        },
        versal: versality.as_ref().map(|v| v.versal),
        versality,
        class,
        order,
        diagnostics,
    })
}

fn versality_rows(scene: &Scene, t0: &[f64], sp: &Splitting, k: usize) -> Result<(Vec<Vec<f64>>, usize)> {
    let along = covector_on_section(scene, t0, sp)?;
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|r| along.iter().map(|c| c.coeff(&[r as u32])).collect())
        .collect();
    let rank = linalg::rank(&rows, RANK_TOL);
    Ok((rows, rank))
}

/// Classifies many `(t, u)` points in parallel.
pub fn classify_batch(scene: &Scene, points: &[(Vec<f64>, f64)]) -> Vec<Result<ClassReport>> {
    use rayon::prelude::*;
    points
        .par_iter()
        .map(|(t, u)| classify_envelope_point(scene, t, *u))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{eval_jet, Expr};
    use crate::scene::load_bundled;

    fn poly(text: &str, vars: &[&str], k: usize) -> Germ {
        let e = Expr::parse(text, vars).unwrap();
        Germ::from_jet(eval_jet(&e, &vec![0.0; vars.len()], k).unwrap())
    }

    fn class_of(text: &str, vars: &[&str], k: usize) -> SingularityClass {
        classify_germ(&poly(text, vars, k)).unwrap()
    }

    #[test]
    fn a_series_normal_forms() {
        for k in 1..=7usize {
            for sign in ["", "-"] {
                let text = format!("{sign}t^{}", k + 1);
                let expect = if k == 1 { SingularityClass::Morse } else { SingularityClass::A(k) };
                assert_eq!(class_of(&text, &["t"], 9), expect, "{text}");
            }
        }
    }

    #[test]
    fn d_and_e_normal_forms() {
        let v = ["x", "y"];
        assert_eq!(class_of("x^3 - x*y^2", &v, 5), SingularityClass::D(4, Sign::Minus));
        assert_eq!(class_of("x^3 + x*y^2", &v, 5), SingularityClass::D(4, Sign::Plus));
        for k in 5..=8 {
            let text = format!("x^2*y + y^{}", k - 1);
            assert_eq!(class_of(&text, &v, 9).label(), format!("D{k}"), "{text}");
        }
        assert_eq!(class_of("x^3 + y^4", &v, 7), SingularityClass::E6);
        assert_eq!(class_of("x^3 - y^4", &v, 7), SingularityClass::E6);
        assert_eq!(class_of("x^3 + x*y^3", &v, 8), SingularityClass::E7);
        assert_eq!(class_of("x^3 + y^5", &v, 8), SingularityClass::E8);
        assert_eq!(class_of("x^3 + y^7", &v, 10), SingularityClass::Unresolved(UnresolvedReason::ModalitySuspected));
    }

    #[test]
    fn short_jets_report_needed_order() {
        let g = poly("t^5", &["t"], 4);
        assert!(matches!(classify_germ(&g), Err(Error::UnresolvedOrder { min_order: 5 })));
        let g = poly("x^2 + y^2 + z^2 + w^3 + x*y*w", &["x", "y", "z", "w"], 3);
        assert_eq!(classify_germ(&g).unwrap(), SingularityClass::A(2));
        let g = poly("x^3 + y^3 + z^3", &["x", "y", "z"], 4);
        assert!(matches!(classify_germ(&g), Err(Error::CorankTooHigh { corank: 3 })));
    }

    #[test]
    fn constant_and_linear_parts() {
        assert!(matches!(classify_germ(&poly("1 + t^2", &["t"], 3)), Err(Error::NotOnDiscriminant(_))));
        assert_eq!(classify_germ(&poly("t + t^2", &["t"], 3)).unwrap(), SingularityClass::Regular);
    }

    #[test]
    fn splitting_reconstructs_the_jet() {
        let g = poly("x^2 - 2*y^2 + x*y^2 + y^3*x + x^4 + y^2*x^2", &["x", "y"], 6);
        let sp = split(&g).unwrap();
        assert_eq!(sp.corank, 0);
        let back = sp.reconstruct().unwrap();
        for (a, b) in back.coefficients().iter().zip(g.jet.coefficients()) {
            assert!((a - b).abs() < 1e-10);
        }
        let g = poly("x^3 + y^2 + z^2*x + x^2*y + y*z + 2*z^2", &["x", "y", "z"], 6);
        let sp = split(&g).unwrap();
        assert_eq!(sp.corank, 1);
        let back = sp.reconstruct().unwrap();
        for (a, b) in back.coefficients().iter().zip(g.jet.coefficients()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn milnor_numbers() {
        let j = poly("x^2*y + y^4", &["x", "y"], 7).jet;
        assert_eq!(milnor_number(&j), Milnor::Exact { mu: 5, degree: 4 });
        let j = poly("x^3 + y^4", &["x", "y"], 3).jet;
        assert!(matches!(milnor_number(&j), Milnor::AtLeast(_)));
    }

    #[test]
    fn bundled_curve_germs() {
        let s = load_bundled("a2").unwrap();
        let g = germ_jet(&s, &[0.0], &[0.0, 1.0, 0.0], 4).unwrap();
        let c = g.jet.coefficients();
        assert!(c[..3].iter().all(|x| x.abs() < 1e-12));
        assert!((c[3] + 1.0 / 3.0).abs() < 1e-12 && c[4].abs() < 1e-12, "{c:?}");
        let s = load_bundled("a3").unwrap();
        let g = germ_jet(&s, &[0.0], &[0.0, 1.0, 0.0], 5).unwrap();
        let c = g.jet.coefficients();
        assert!((c[4] + 0.125).abs() < 1e-12 && c[3].abs() < 1e-12, "{c:?}");
    }

    #[test]
    fn d4_germ_matches_closed_form() {
        let s = load_bundled("d4").unwrap();
        let g = germ_jet(&s, &[0.0, 0.0], &[0.0, 0.0, 1.0, 0.0], 4).unwrap();
        let j = &g.jet;
        assert!((j.coeff(&[3, 0]) + 2.0).abs() < 1e-12);
        assert!((j.coeff(&[1, 2]) + 2.0).abs() < 1e-12);
        assert!(j.coeff(&[2, 1]).abs() < 1e-12 && j.coeff(&[0, 3]).abs() < 1e-12);
        assert_eq!(classify_germ(&g).unwrap().label(), "D4");
    }

    #[test]
    fn curve_versality_ranks() {
        let s = load_bundled("a2").unwrap();
        let (m, r) = versality_matrix(&s, &[0.0], &[0.0, 1.0, 0.0], 2).unwrap();
        assert_eq!((m.len(), r), (2, 2));
        let s = load_bundled("a3").unwrap();
        assert_eq!(versality_matrix(&s, &[0.0], &[0.0, 1.0, 0.0], 3).unwrap().1, 3);
        assert!(matches!(
            versality_matrix(&s, &[0.0], &[0.0, 1.0, 0.0], 2),
            Err(Error::NotAkPoint { .. })
        ));
    }

    #[test]
    fn bundled_catalog() {
        for b in crate::scene::BUNDLED {
            let (Some(u), Some(class)) = (b.u, b.class) else { continue };
            let s = crate::scene::Scene::parse_file(b.source).unwrap();
            let t0 = vec![0.0; s.n()];
            let r = classify_envelope_point(&s, &t0, u).unwrap();
            assert_eq!(r.class.label(), class, "{} {:?}", b.name, r);
            assert_eq!(r.versal, Some(true), "{} {:?}", b.name, r);
        }
    }
}
