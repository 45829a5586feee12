//! Tangent frames, the osculating Darboux direction and structure coefficients.
//!
//! Every quantity is carried as a jet in the displacement `δ = t - t0`, so
//! derivatives along `N` are exact up to truncation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{eval_jet, Expr};
use crate::jet::Jet;
use crate::linalg::{self, Mat};
use crate::scene::Scene;

pub type JVec = Vec<Jet<f64>>;

/// Normalization of the Darboux field `ξ = λ ξ_graph`.
#[derive(Debug, Clone)]
pub enum Gauge {
    /// Unit `ψ_y` coefficient in the coordinate basis `{ψ_t, ψ_y}` of `TM`.
    Graph,
    /// Multiply the graph field by an expression in the `t` variables.
    Scale(Expr),
    /// `ω(ξ) = 1` for a constant covector `ω` of `R^{n+2}`.
    Conormal(Vec<f64>),
    /// `ξ(p) = O - p`; only meaningful when all Darboux lines meet at `O`.
    Center(Vec<f64>),
    /// Unit length for the Blaschke metric of `M`.
    Blaschke,
    /// Curves only: unit bracket in the adapted parameterization based at `t0`.
    CurveAdapted,
}

impl Gauge {
    pub fn label(&self) -> String {
        match self {
            Gauge::Graph => "graph".into(),
            Gauge::Scale(e) => format!("scale({e})"),
            Gauge::Conormal(w) => format!("conormal({w:?})"),
            Gauge::Center(o) => format!("center({o:?})"),
            Gauge::Blaschke => "blaschke".into(),
            Gauge::CurveAdapted => "curve-adapted".into(),
        }
    }

    fn extra_order(&self) -> usize {
        match self {
            Gauge::CurveAdapted => 2,
            _ => 0,
        }
    }
}

fn cst(n: usize, k: usize, v: f64) -> Jet<f64> {
    Jet::constant(n, k, v)
}

fn values(v: &[Jet<f64>]) -> Vec<f64> {
    v.iter().map(|j| j.value()).collect()
}

/// Jets of the immersion and of `f` and its derivatives along `N`.
#[derive(Debug, Clone)]
pub struct Track {
    pub n: usize,
    pub order: usize,
    pub t0: Vec<f64>,
    /// `φ`, `n + 2` components.
    pub phi: JVec,
    /// `X_i = ∂φ/∂t_i`.
    pub x: Vec<JVec>,
    /// `∂f/∂w_a` along `N`, `w = (t, y)`.
    pub fw: JVec,
    /// Hessian of `f` in `w` along `N`.
    pub hess: Mat<Jet<f64>>,
    /// `∂g/∂t_i`.
    pub gt: JVec,
}

impl Track {
    pub fn new(scene: &Scene, t0: &[f64], order: usize) -> Result<Track> {
        scene.check_point(t0)?;
        let n = scene.n();
        let k = order;
        if k > crate::expr::MAX_ORDER {
            return Err(crate::error::JetError::Order {
                requested: k,
                max: crate::expr::MAX_ORDER,
            }
            .into());
        }
        let t: JVec = (0..n).map(|i| Jet::variable(n, k, i, t0[i])).collect();
        let tmpl = Jet::zero(n, k);
        let gj = scene.g().eval(&t, &tmpl)?;
        let mut w = t.clone();
        w.push(gj.clone());
        let fj = scene.f().eval(&w, &tmpl)?;
        let fw: JVec = (0..=n)
            .map(|a| scene.df(a).eval(&w, &tmpl))
            .collect::<Result<_>>()?;
        let hess: Mat<Jet<f64>> = (0..=n)
            .map(|a| {
                (0..=n)
                    .map(|b| scene.ddf(a, b).eval(&w, &tmpl))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let gt: JVec = (0..n)
            .map(|i| scene.dg(i).eval(&t, &tmpl))
            .collect::<Result<_>>()?;
        let mut phi = t;
        phi.push(gj);
        phi.push(fj);
        let x = (0..n)
            .map(|i| {
                let mut v: JVec = (0..n).map(|j| cst(n, k, (i == j) as u8 as f64)).collect();
                v.push(gt[i].clone());
                v.push(&fw[i] + &(&gt[i] * &fw[n]));
                v
            })
            .collect();
        Ok(Track {
            n,
            order: k,
            t0: t0.to_vec(),
            phi,
            x,
            fw,
            hess,
            gt,
        })
    }

    fn zero(&self) -> Jet<f64> {
        Jet::zero(self.n, self.order)
    }

    /// `X̂_i = (e_i, g_{t_i})` in `w`-coordinates.
    pub fn xhat(&self, i: usize) -> JVec {
        let mut v: JVec = (0..self.n)
            .map(|j| cst(self.n, self.order, (i == j) as u8 as f64))
            .collect();
        v.push(self.gt[i].clone());
        v
    }

    /// `H(a, b)` for `w`-space vectors.
    pub fn hess_form(&self, a: &[Jet<f64>], b: &[Jet<f64>]) -> Jet<f64> {
        let mut acc = self.zero();
        for (r, ar) in a.iter().enumerate() {
            for (c, bc) in b.iter().enumerate() {
                acc = &acc + &(&(ar * &self.hess[r][c]) * bc);
            }
        }
        acc
    }

    /// Co-normal `ν = (-f_t, -f_y, 1)` of `M` along `N`.
    pub fn conormal(&self) -> JVec {
        let mut v: JVec = self.fw.iter().map(|j| -j).collect();
        v.push(cst(self.n, self.order, 1.0));
        v
    }

    /// Second fundamental form for the transversal `e_{n+2}`: `H(X̂_i, X̂_j)`.
    pub fn h2_provisional(&self) -> Mat<Jet<f64>> {
        let xs: Vec<JVec> = (0..self.n).map(|i| self.xhat(i)).collect();
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.hess_form(&xs[i], &xs[j])).collect())
            .collect()
    }

    /// Tangent vector of `M` with `w`-components `v`.
    pub fn lift(&self, v: &[Jet<f64>]) -> JVec {
        let mut out = v.to_vec();
        let mut z = self.zero();
        for (a, va) in v.iter().enumerate() {
            z = &z + &(va * &self.fw[a]);
        }
        out.push(z);
        out
    }

    /// `w`-components of the graph-gauge Darboux field.
    pub fn graph_xi_hat(&self) -> Result<JVec> {
        let n = self.n;
        let h2 = self.h2_provisional();
        let hv: Mat<f64> = h2.iter().map(|r| values(r)).collect();
        let det = linalg::det(&hv);
        let scale = linalg::row_norm_product(&hv);
        if scale == 0.0 || det.abs() < 1e-9 * scale || !det.is_finite() {
            return Err(Error::Degenerate { det, scale });
        }
        // H(ξ̂, X̂_i) = 0 with ξ̂ = (a, 1)
        let mut m: Mat<Jet<f64>> = Vec::with_capacity(n);
        let mut rhs: Mat<Jet<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let xh = self.xhat(i);
            let row: JVec = (0..n)
                .map(|j| {
                    let mut acc = self.zero();
                    for (r, xr) in xh.iter().enumerate() {
                        acc = &acc + &(xr * &self.hess[r][j]);
                    }
                    acc
                })
                .collect();
            let mut b = self.zero();
            for (r, xr) in xh.iter().enumerate() {
                b = &b - &(xr * &self.hess[r][n]);
            }
            m.push(row);
            rhs.push(vec![b]);
        }
        let sol = linalg::solve(&m, &rhs).ok_or_else(|| {
            let mv: Mat<f64> = m.iter().map(|r| values(r)).collect();
            Error::Degenerate {
                det: linalg::det(&mv),
                scale: linalg::row_norm_product(&mv),
            }
        })?;
        let mut xi: JVec = sol.into_iter().map(|mut r| r.remove(0)).collect();
        xi.push(cst(n, self.order, 1.0));
        Ok(xi)
    }

    /// Scalar `λ` with `ξ = λ ξ_graph` for the requested gauge.
    pub fn gauge_factor(&self, gauge: &Gauge, xi_hat: &[Jet<f64>], xi_g: &[Jet<f64>]) -> Result<Jet<f64>> {
        let (n, k) = (self.n, self.order);
        Ok(match gauge {
            Gauge::Graph => cst(n, k, 1.0),
            Gauge::Scale(e) => {
                if e.vars().len() != n {
                    return Err(Error::Dimension("scale expression must use the t variables".into()));
                }
                eval_jet(e, &self.t0, k)?
            }
            Gauge::Conormal(w) => {
                if w.len() != n + 2 {
                    return Err(Error::Dimension("conormal must have n + 2 components".into()));
                }
                let mut acc = self.zero();
                for (wi, xi) in w.iter().zip(xi_g) {
                    acc = &acc + &xi.scale(wi);
                }
                acc.recip()?
            }
            Gauge::Center(o) => {
                if o.len() != n + 2 {
                    return Err(Error::Dimension("center must have n + 2 components".into()));
                }
                // the y-component of ξ_graph is identically 1
                (&self.phi[n] * &cst(n, k, -1.0)).add_scalar(&o[n])
            }
            Gauge::Blaschke => {
                let det = hess_det(&self.hess);
                if det.value() == 0.0 {
                    return Err(Error::DegenerateHypersurface { det: 0.0 });
                }
                let absdet = if det.value() < 0.0 { -det } else { det };
                let hxx = self.hess_form(xi_hat, xi_hat);
                let hxx = if hxx.value() < 0.0 { -hxx } else { hxx };
                let h = &hxx * &absdet.powf(-1.0 / (n as f64 + 3.0))?;
                h.powf(-0.5)?
            }
            Gauge::CurveAdapted => {
                if n != 1 {
                    return Err(Error::Dimension("curve-adapted gauge needs n = 1".into()));
                }
                let g1 = &self.x[0];
                let g2: JVec = g1.iter().map(|c| c.derivative(0)).collect();
                let g3: JVec = g2.iter().map(|c| c.derivative(0)).collect();
                let nu = self.conormal();
                let pair = |v: &JVec| {
                    let mut acc = Jet::zero(1, v[0].order());
                    for (a, b) in nu.iter().zip(v) {
                        acc = &acc + &(a * b);
                    }
                    acc
                };
                let a = pair(&g3);
                let b = pair(&g2);
                if b.value().abs() < 1e-12 {
                    return Err(Error::OsculatingDegenerate { value: b.value() });
                }
                let log_p3 = a.checked_div(&b)?.integrate(0);
                let br = linalg::bracket(&[g1.clone(), g2, xi_g.to_vec()]);
                let br = if br.value() < 0.0 { -br } else { br };
                log_p3.exp().checked_div(&br)?
            }
        })
    }
}

fn hess_det(h: &Mat<Jet<f64>>) -> Jet<f64> {
    linalg::det(h)
}

/// Darboux field and frame data along `N` at one base point.
#[derive(Debug, Clone)]
pub struct FrameJets {
    pub n: usize,
    pub t0: Vec<f64>,
    pub phi: JVec,
    /// Tangent frame `E_a = Σ_i P_ia X_i`.
    pub e: Vec<JVec>,
    pub p: Mat<Jet<f64>>,
    pub xi: JVec,
    pub eta: JVec,
    /// `w`-components of `ξ`.
    pub xi_hat: JVec,
    pub gauge: String,
}

impl FrameJets {
    pub fn order(&self) -> usize {
        self.xi[0].order().min(self.eta[0].order()).min(self.e[0][0].order())
    }

    /// `D_{E_a} V = Σ_i P_ia ∂_i V`.
    pub fn directional(&self, a: usize, v: &[Jet<f64>]) -> JVec {
        v.iter()
            .map(|c| {
                let mut acc: Option<Jet<f64>> = None;
                for i in 0..self.n {
                    let term = &self.p[i][a] * &c.derivative(i);
                    acc = Some(match acc {
                        None => term,
                        Some(s) => &s + &term,
                    });
                }
                acc.expect("n >= 1")
            })
            .collect()
    }

    pub fn point(&self) -> FramePoint {
        FramePoint {
            t: self.t0.clone(),
            x: self.e.iter().map(|v| values(v)).collect(),
            xi: values(&self.xi),
            eta: values(&self.eta),
            gauge: self.gauge.clone(),
        }
    }
}

/// Frame at a single point.
#[derive(Debug, Clone, Serialize)]
pub struct FramePoint {
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
    pub gauge: String,
}

impl FramePoint {
    /// Validates raw vectors: the tangent vectors must be independent and
    /// `{X, η, ξ}` must be a basis.
    pub fn from_vectors(t: Vec<f64>, x: Vec<Vec<f64>>, xi: Vec<f64>, eta: Vec<f64>) -> Result<FramePoint> {
        let dim = xi.len();
        if eta.len() != dim || x.len() + 2 != dim || x.iter().any(|v| v.len() != dim) {
            return Err(Error::Dimension("frame vectors have inconsistent sizes".into()));
        }
        if linalg::rank(&x, 1e-12) < x.len() {
            return Err(Error::Rank { t });
        }
        let mut cols = x.clone();
        cols.push(eta.clone());
        cols.push(xi.clone());
        let det = linalg::bracket(&cols);
        let scale: f64 = cols.iter().map(|c| linalg::norm(c)).product();
        if det.abs() < 1e-12 * scale {
            return Err(Error::SingularBasis { det });
        }
        Ok(FramePoint {
            t,
            x,
            xi,
            eta,
            gauge: "given".into(),
        })
    }

    /// `[X_1, .., X_n, η, ξ]`.
    pub fn bracket(&self) -> f64 {
        let mut cols = self.x.clone();
        cols.push(self.eta.clone());
        cols.push(self.xi.clone());
        linalg::bracket(&cols)
    }
}

/// Provisional frame: `X_i`, `ξ₁ = ψ_y`, `η = e_{n+2}`.
pub fn tangent_frame(scene: &Scene, t: &[f64]) -> Result<FramePoint> {
    let tr = Track::new(scene, t, 1)?;
    let n = scene.n();
    let x: Vec<Vec<f64>> = tr.x.iter().map(|v| values(v)).collect();
    let mut xi = vec![0.0; n + 2];
    xi[n] = 1.0;
    xi[n + 1] = tr.fw[n].value();
    let mut eta = vec![0.0; n + 2];
    eta[n + 1] = 1.0;
    let mut fp = FramePoint::from_vectors(t.to_vec(), x, xi, eta)?;
    fp.gauge = "provisional".into();
    Ok(fp)
}

/// `det h²(X_i, X_j)` for the transversal `e_{n+2}`.
pub fn nondegeneracy(scene: &Scene, t: &[f64]) -> Result<f64> {
    let tr = Track::new(scene, t, 0)?;
    let h: Mat<f64> = tr.h2_provisional().iter().map(|r| values(r)).collect();
    Ok(linalg::det(&h))
}

/// Darboux frame jets of order `order` in the coordinate frame `E = X`.
pub fn frame_jets(scene: &Scene, t0: &[f64], order: usize, gauge: &Gauge) -> Result<FrameJets> {
    let tr = Track::new(scene, t0, order + gauge.extra_order())?;
    let n = tr.n;
    let xi_hat_g = tr.graph_xi_hat()?;
    let xi_g = tr.lift(&xi_hat_g);
    let lambda = tr.gauge_factor(gauge, &xi_hat_g, &xi_g)?.truncate(order);
    if lambda.value() == 0.0 || !lambda.value().is_finite() {
        return Err(Error::Degenerate {
            det: lambda.value(),
            scale: 1.0,
        });
    }
    let tr_xi: JVec = xi_g.iter().map(|c| &c.truncate(order) * &lambda).collect();
    let xi_hat: JVec = xi_hat_g.iter().map(|c| &c.truncate(order) * &lambda).collect();
    let e: Vec<JVec> = tr
        .x
        .iter()
        .map(|v| v.iter().map(|c| c.truncate(order)).collect())
        .collect();
    let eta = unit_eta(&e, &tr_xi)?;
    let p = identity(n, order);
    Ok(FrameJets {
        n,
        t0: t0.to_vec(),
        phi: tr.phi.iter().map(|c| c.truncate(order)).collect(),
        e,
        p,
        xi: tr_xi,
        eta,
        xi_hat,
        gauge: gauge.label(),
    })
}

pub(crate) fn identity(n: usize, order: usize) -> Mat<Jet<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| cst(n, order, (i == j) as u8 as f64)).collect())
        .collect()
}

/// `e_{n+2} / |[E, e_{n+2}, ξ]|`, so that `|[E, η, ξ]| = 1` and `ν(η) > 0`.
pub fn unit_eta(e: &[JVec], xi: &[Jet<f64>]) -> Result<JVec> {
    let dim = xi.len();
    let (n, k) = (xi[0].vars(), xi[0].order());
    let mut ez: JVec = (0..dim).map(|_| Jet::zero(n, k)).collect();
    ez[dim - 1] = cst(n, k, 1.0);
    let mut cols: Vec<JVec> = e.to_vec();
    cols.push(ez.clone());
    cols.push(xi.to_vec());
    let b = linalg::bracket(&cols);
    if b.value().abs() < 1e-300 {
        return Err(Error::SingularBasis { det: b.value() });
    }
    let b = if b.value() < 0.0 { -b } else { b };
    let inv = b.recip()?;
    Ok(ez.iter().map(|c| c * &inv).collect())
}

/// Darboux direction at `t` in the graph gauge.
pub fn darboux_direction(scene: &Scene, t: &[f64]) -> Result<Vec<f64>> {
    let tr = Track::new(scene, t, 0)?;
    let xi = tr.lift(&tr.graph_xi_hat()?);
    Ok(values(&xi))
}

/// Structure coefficients as jets; indices follow the frame `E`.
#[derive(Debug, Clone)]
pub struct StructureJets {
    /// `gamma[a][b][c]`: coefficient of `E_c` in `D_{E_a} E_b`.
    pub gamma: Vec<Vec<JVec>>,
    pub h1: Mat<Jet<f64>>,
    pub h2: Mat<Jet<f64>>,
    /// `s1[c][a]`: `S₁ E_a = Σ_c s1[c][a] E_c`.
    pub s1: Mat<Jet<f64>>,
    pub s2: Mat<Jet<f64>>,
    pub tau11: JVec,
    pub tau12: JVec,
    pub tau21: JVec,
    pub tau22: JVec,
}

/// Solves `D_{E_a} E_b`, `D_{E_a} ξ`, `D_{E_a} η` in the basis `{E, ξ, η}`.
pub fn structure_jets(fr: &FrameJets) -> Result<StructureJets> {
    let n = fr.n;
    let mut basis: Vec<JVec> = fr.e.clone();
    basis.push(fr.xi.clone());
    basis.push(fr.eta.clone());
    let mut rhs: Vec<JVec> = Vec::with_capacity(n * n + 2 * n);
    for a in 0..n {
        for b in 0..n {
            rhs.push(fr.directional(a, &fr.e[b]));
        }
    }
    for a in 0..n {
        rhs.push(fr.directional(a, &fr.xi));
    }
    for a in 0..n {
        rhs.push(fr.directional(a, &fr.eta));
    }
    let k = rhs[0][0].order();
    let basis: Vec<JVec> = basis
        .iter()
        .map(|v| v.iter().map(|c| c.truncate(k)).collect())
        .collect();
    let coords = linalg::coordinates(&basis, &rhs).ok_or_else(|| {
        let bv: Vec<Vec<f64>> = basis.iter().map(|v| values(v)).collect();
        Error::SingularBasis {
            det: linalg::bracket(&bv),
        }
    })?;
    // coords[row][col]: component `row` of right-hand side `col`
    let comp = |col: usize, row: usize| coords[row][col].clone();
    let mut gamma = vec![vec![Vec::new(); n]; n];
    let mut h1 = vec![Vec::new(); n];
    let mut h2 = vec![Vec::new(); n];
    for a in 0..n {
        for b in 0..n {
            let col = a * n + b;
            gamma[a][b] = (0..n).map(|c| comp(col, c)).collect();
            h1[a].push(comp(col, n));
            h2[a].push(comp(col, n + 1));
        }
    }
    let base_xi = n * n;
    let base_eta = n * n + n;
    let s1 = (0..n)
        .map(|c| (0..n).map(|a| -comp(base_xi + a, c)).collect())
        .collect();
    let s2 = (0..n)
        .map(|c| (0..n).map(|a| -comp(base_eta + a, c)).collect())
        .collect();
    Ok(StructureJets {
        gamma,
        h1,
        h2,
        s1,
        s2,
        tau11: (0..n).map(|a| comp(base_xi + a, n)).collect(),
        tau12: (0..n).map(|a| comp(base_xi + a, n + 1)).collect(),
        tau21: (0..n).map(|a| comp(base_eta + a, n)).collect(),
        tau22: (0..n).map(|a| comp(base_eta + a, n + 1)).collect(),
    })
}

/// Structure coefficients at a point.
#[derive(Debug, Clone, Serialize)]
pub struct StructureCoeffs {
    pub gamma: Vec<Vec<Vec<f64>>>,
    pub h1: Vec<Vec<f64>>,
    pub h2: Vec<Vec<f64>>,
    pub s1: Vec<Vec<f64>>,
    pub s2: Vec<Vec<f64>>,
    pub tau11: Vec<f64>,
    pub tau12: Vec<f64>,
    pub tau21: Vec<f64>,
    pub tau22: Vec<f64>,
}

impl StructureJets {
    pub fn at_point(&self) -> StructureCoeffs {
        let m = |x: &Mat<Jet<f64>>| x.iter().map(|r| values(r)).collect::<Vec<_>>();
        StructureCoeffs {
            gamma: self
                .gamma
                .iter()
                .map(|r| r.iter().map(|v| values(v)).collect())
                .collect(),
            h1: m(&self.h1),
            h2: m(&self.h2),
            s1: m(&self.s1),
            s2: m(&self.s2),
            tau11: values(&self.tau11),
            tau12: values(&self.tau12),
            tau21: values(&self.tau21),
            tau22: values(&self.tau22),
        }
    }
}

/// Structure coefficients at `t` in the coordinate frame for the given gauge.
pub fn structure_coefficients(scene: &Scene, t: &[f64], gauge: &Gauge) -> Result<(FramePoint, StructureCoeffs)> {
    let fr = frame_jets(scene, t, 2, gauge)?;
    let st = structure_jets(&fr)?;
    Ok((fr.point(), st.at_point()))
}

/// `τ₁¹(X_i)` at `t`.
pub fn tau_form(scene: &Scene, t: &[f64], gauge: &Gauge) -> Result<Vec<f64>> {
    Ok(structure_coefficients(scene, t, gauge)?.1.tau11)
}
