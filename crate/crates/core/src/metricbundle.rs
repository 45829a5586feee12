//! Affine metric, affine normal plane bundle, cubic forms, Blaschke data of
//! the hypersurface and the parallel-field test.

use serde::Serialize;

use crate::error::{Error, JetError, Result};
use crate::expr::{eval_jet, Expr};
use crate::frame::{frame_jets, structure_jets, unit_eta, FrameJets, Gauge, JVec, StructureJets};
use crate::jet::Jet;
use crate::linalg::{self, Mat};
use crate::scene::Scene;

pub type Tensor3 = Vec<Vec<Vec<f64>>>;

fn values(v: &[Jet<f64>]) -> Vec<f64> {
    v.iter().map(|c| c.value()).collect()
}

fn mat_values(m: &Mat<Jet<f64>>) -> Vec<Vec<f64>> {
    m.iter().map(|r| values(r)).collect()
}

fn cut(v: &[Jet<f64>], k: usize) -> JVec {
    v.iter().map(|c| c.truncate(k)).collect()
}

fn abs_jet(j: Jet<f64>) -> Jet<f64> {
    if j.value() < 0.0 {
        -j
    } else {
        j
    }
}

/// `G_ij = ε [X_1, .., X_n, ∂_i X_j, ξ]` with `ε = sign [X, e_{n+2}, ξ]`.
fn big_g(fr: &FrameJets) -> Mat<Jet<f64>> {
    let n = fr.n;
    let k = fr.order() - 1;
    let xs: Vec<JVec> = fr.e.iter().map(|v| cut(v, k)).collect();
    let xi = cut(&fr.xi, k);
    let mut ez: JVec = (0..n + 2).map(|_| Jet::zero(n, k)).collect();
    ez[n + 1] = Jet::constant(n, k, 1.0);
    let mut cols = xs.clone();
    cols.push(ez);
    cols.push(xi.clone());
    let eps = linalg::bracket(&cols).value().signum();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut cols = xs.clone();
                    cols.push(fr.e[j].iter().map(|c| c.derivative(i)).collect());
                    cols.push(xi.clone());
                    linalg::bracket(&cols).scale(&eps)
                })
                .collect()
        })
        .collect()
}

/// Normalized metric `g = G / |det G|^{1/(n+2)}` as jets, with `det G`.
fn metric_from(fr: &FrameJets) -> Result<(Mat<Jet<f64>>, Jet<f64>)> {
    let n = fr.n;
    let g = big_g(fr);
    let det = linalg::det(&g);
    let scale = linalg::row_norm_product(&mat_values(&g));
    if det.value().abs() <= 1e-12 * scale || scale == 0.0 {
        return Err(Error::Degenerate { det: det.value(), scale });
    }
    let c = abs_jet(det.clone()).powf(-1.0 / (n as f64 + 2.0))?;
    Ok((g.iter().map(|r| r.iter().map(|x| x * &c).collect()).collect(), det))
}

fn signature(g: &[Vec<f64>]) -> (usize, usize) {
    let eig = nalgebra::SymmetricEigen::new(linalg::to_nalgebra(g));
    let pos = eig.eigenvalues.iter().filter(|l| **l > 0.0).count();
    (pos, g.len() - pos)
}

fn form(g: &Mat<Jet<f64>>, u: &[Jet<f64>], v: &[Jet<f64>]) -> Jet<f64> {
    let mut acc = Jet::zero(u[0].vars(), u[0].order());
    for (i, ui) in u.iter().enumerate() {
        for (j, vj) in v.iter().enumerate() {
            acc = &acc + &(&(ui * &g[i][j]) * vj);
        }
    }
    acc
}

/// Pseudo-orthonormal Gram–Schmidt on the coordinate directions, in index
/// order. Returns the columns of the upper-triangular `P` and the signs.
fn gram_schmidt(g: &Mat<Jet<f64>>) -> Result<(Mat<Jet<f64>>, Vec<f64>)> {
    let n = g.len();
    let (vars, k) = (g[0][0].vars(), g[0][0].order());
    let scale = mat_values(g).iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut cols: Vec<JVec> = Vec::with_capacity(n);
    let mut signs = Vec::with_capacity(n);
    for a in 0..n {
        let mut v: JVec = (0..n).map(|i| Jet::constant(vars, k, (i == a) as u8 as f64)).collect();
        for (b, eb) in cols.iter().enumerate() {
            let proj = form(g, &v, eb).scale(&signs[b]);
            v = v.iter().zip(eb).map(|(x, y)| x - &(&proj * y)).collect();
        }
        let nn = form(g, &v, &v);
        if nn.value().abs() <= 1e-12 * scale {
            return Err(Error::Degenerate { det: nn.value(), scale });
        }
        let s = nn.value().signum();
        let inv = abs_jet(nn).powf(-0.5)?;
        v = v.iter().map(|x| x * &inv).collect();
        cols.push(v);
        signs.push(s);
    }
    // P[i][a] = i-th coefficient of E_a
    let p = (0..n).map(|i| (0..n).map(|a| cols[a][i].clone()).collect()).collect();
    Ok((p, signs))
}

/// Re-expresses a coordinate-frame bundle in the tangent frame `E = X P`.
fn with_frame(fr: &FrameJets, p: &Mat<Jet<f64>>, eta: Option<JVec>) -> Result<FrameJets> {
    let n = fr.n;
    let k = p[0][0].order();
    let x: Vec<JVec> = fr.e.iter().map(|v| cut(v, k)).collect();
    let e: Vec<JVec> = (0..n)
        .map(|a| {
            (0..n + 2)
                .map(|r| {
                    let mut acc = Jet::zero(n, k);
                    for i in 0..n {
                        acc = &acc + &(&p[i][a] * &x[i][r]);
                    }
                    acc
                })
                .collect()
        })
        .collect();
    let xi = cut(&fr.xi, k);
    let eta = match eta {
        Some(v) => v,
        None => unit_eta(&e, &xi)?,
    };
    Ok(FrameJets {
        n,
        t0: fr.t0.clone(),
        phi: cut(&fr.phi, k),
        e,
        p: p.clone(),
        xi,
        eta,
        xi_hat: cut(&fr.xi_hat, k),
        gauge: fr.gauge.clone(),
    })
}

/// Affine metric on the coordinate frame.
#[derive(Debug, Clone, Serialize)]
pub struct AffineMetric {
    pub g: Vec<Vec<f64>>,
    /// `det G_ξ(X_i, X_j)` before normalization.
    pub det: f64,
    pub signature: (usize, usize),
    pub warnings: Vec<String>,
}

pub fn affine_metric(scene: &Scene, t: &[f64], gauge: &Gauge) -> Result<AffineMetric> {
    let fr = frame_jets(scene, t, 1, gauge)?;
    let (g, det) = metric_from(&fr)?;
    let g = mat_values(&g);
    let signature = signature(&g);
    let mut warnings = Vec::new();
    if det.value() < 0.0 {
        warnings.push("indefinite: det G < 0, normalized by |det G|".into());
    }
    Ok(AffineMetric {
        g,
        det: det.value(),
        signature,
        warnings,
    })
}

/// Everything attached to `ξ` at one point, in the normal-plane gauge.
#[derive(Debug, Clone, Serialize)]
pub struct MetricBundle {
    pub point: Vec<f64>,
    pub gauge: String,
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
    /// Coordinate-frame metric `g_ξ(X_i, X_j)`.
    pub g: Vec<Vec<f64>>,
    pub signature: (usize, usize),
    /// `g`-orthonormal frame `E_a = Σ_i P_ia X_i`.
    pub frame: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    /// Signs `g(E_a, E_a)`.
    pub signs: Vec<f64>,
    /// Second fundamental forms in the frame `E`.
    pub h1: Vec<Vec<f64>>,
    pub h2: Vec<Vec<f64>>,
    pub c1: Tensor3,
    pub c2: Tensor3,
    pub apolarity_defect: Vec<f64>,
    pub equiaffine_defect: Vec<f64>,
    /// `τ₁¹(E_a)`.
    pub tau: Vec<f64>,
    pub tau12: Vec<f64>,
    pub tau22: Vec<f64>,
    /// `[E_1, .., E_n, η, ξ]`.
    pub bracket: f64,
    /// Volume of the coordinate frame, `sqrt |det g(X_i, X_j)|`.
    pub omega_g: f64,
    pub warnings: Vec<String>,
}

/// Frames and structure jets of the normal-plane gauge.
pub struct BundleJets {
    pub frame: FrameJets,
    pub structure: StructureJets,
    pub g: Mat<Jet<f64>>,
    pub det: Jet<f64>,
    pub signs: Vec<f64>,
}

pub fn bundle_jets(scene: &Scene, t: &[f64], gauge: &Gauge, order: usize) -> Result<BundleJets> {
    let fr = frame_jets(scene, t, order, gauge)?;
    let (g, det) = metric_from(&fr)?;
    let (p, signs) = gram_schmidt(&g)?;
    let first = with_frame(&fr, &p, None)?;
    let st = structure_jets(&first)?;
    let n = fr.n;
    let k = st.tau22[0].order();
    // η = η₁ - Σ c_k E_k with h²(E, E) c = τ₂²(E)
    let h2: Mat<Jet<f64>> = st.h2.iter().map(|r| cut(r, k)).collect();
    let rhs: Mat<Jet<f64>> = st.tau22.iter().map(|c| vec![c.clone()]).collect();
    let c = linalg::solve(&h2, &rhs).ok_or(Error::SingularBasis {
        det: linalg::det(&mat_values(&h2)),
    })?;
    let eta: JVec = (0..n + 2)
        .map(|r| {
            let mut acc = first.eta[r].truncate(k);
            for a in 0..n {
                acc = &acc - &(&c[a][0] * &first.e[a][r].truncate(k));
            }
            acc
        })
        .collect();
    let p_k: Mat<Jet<f64>> = p.iter().map(|r| cut(r, k)).collect();
    let frame = with_frame(&fr, &p_k, Some(eta))?;
    let structure = structure_jets(&frame)?;
    Ok(BundleJets {
        frame,
        structure,
        g,
        det,
        signs,
    })
}

/// `(∇_{E_a} h)(E_b, E_c)` plus `α(E_a) h¹ + β(E_a) h²` terms.
fn cubic(
    bj: &BundleJets,
    h: &Mat<Jet<f64>>,
    alpha: &[Jet<f64>],
    other: (&[Jet<f64>], &Mat<Jet<f64>>),
) -> Tensor3 {
    let n = bj.frame.n;
    let st = &bj.structure;
    let gv = |a: usize, b: usize, c: usize| st.gamma[a][b][c].value();
    (0..n)
        .map(|a| {
            (0..n)
                .map(|b| {
                    (0..n)
                        .map(|c| {
                            let mut v = bj.frame.directional(a, std::slice::from_ref(&h[b][c]))[0].value();
                            for d in 0..n {
                                v -= gv(a, b, d) * h[d][c].value() + gv(a, c, d) * h[b][d].value();
                            }
                            v + alpha[a].value() * h[b][c].value() + other.0[a].value() * other.1[b][c].value()
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

pub fn metric_bundle(scene: &Scene, t: &[f64], gauge: &Gauge) -> Result<MetricBundle> {
    let bj = bundle_jets(scene, t, gauge, 4)?;
    let st = &bj.structure;
    let fr = &bj.frame;
    let n = fr.n;
    let c1 = cubic(&bj, &st.h1, &st.tau11, (&st.tau21, &st.h2));
    let c2 = cubic(&bj, &st.h2, &st.tau12, (&st.tau22, &st.h2));
    let h2 = mat_values(&st.h2);
    let apolarity_defect = (0..n)
        .map(|a| (0..n).map(|b| c2[a][b][b] * bj.signs[b]).sum())
        .collect();
    let equiaffine_defect = (0..n).map(|a| (0..n).map(|k| st.gamma[a][k][k].value()).sum()).collect();
    let g = mat_values(&bj.g);
    let mut cols: Vec<Vec<f64>> = fr.e.iter().map(|v| values(v)).collect();
    cols.push(values(&fr.eta));
    cols.push(values(&fr.xi));
    let mut warnings = Vec::new();
    if bj.det.value() < 0.0 {
        warnings.push("indefinite: det G < 0, normalized by |det G|".into());
    }
    Ok(MetricBundle {
        point: t.to_vec(),
        gauge: gauge.label(),
        xi: values(&fr.xi),
        eta: values(&fr.eta),
        signature: signature(&g),
        omega_g: linalg::det(&g).abs().sqrt(),
        g,
        frame: fr.e.iter().map(|v| values(v)).collect(),
        p: mat_values(&fr.p),
        signs: bj.signs.clone(),
        h1: mat_values(&st.h1),
        h2,
        c1,
        c2,
        apolarity_defect,
        equiaffine_defect,
        tau: values(&st.tau11),
        tau12: values(&st.tau12),
        tau22: values(&st.tau22),
        bracket: linalg::bracket(&cols),
        warnings,
    })
}

/// `(ξ, η)` spanning the affine normal plane at `t`.
pub fn affine_normal_plane(scene: &Scene, t: &[f64], gauge: &Gauge) -> Result<(Vec<f64>, Vec<f64>)> {
    let bj = bundle_jets(scene, t, gauge, 2)?;
    Ok((values(&bj.frame.xi), values(&bj.frame.eta)))
}

pub fn cubic_forms(scene: &Scene, t: &[f64], gauge: &Gauge) -> Result<(Tensor3, Tensor3)> {
    let b = metric_bundle(scene, t, gauge)?;
    Ok((b.c1, b.c2))
}

/// `tr_{h²} C²(E_a, ·, ·)` in the `g`-orthonormal frame.
pub fn apolarity_defect(scene: &Scene, t: &[f64], gauge: &Gauge) -> Result<Vec<f64>> {
    Ok(metric_bundle(scene, t, gauge)?.apolarity_defect)
}

/// `Σ_k Γ_{ak}^k` in the `g`-orthonormal frame.
pub fn equiaffine_defect(scene: &Scene, t: &[f64], gauge: &Gauge) -> Result<Vec<f64>> {
    Ok(metric_bundle(scene, t, gauge)?.equiaffine_defect)
}

/// `τ₁¹` as jets on the coordinate frame.
fn tau_jets(scene: &Scene, t: &[f64], gauge: &Gauge, order: usize) -> Result<JVec> {
    let fr = frame_jets(scene, t, order, gauge)?;
    Ok(structure_jets(&fr)?.tau11)
}

/// `τ₁¹(X_i)` of the graph-gauge field on the coordinate frame.
pub fn tau_coefficients(scene: &Scene, t: &[f64]) -> Result<Vec<f64>> {
    Ok(values(&tau_jets(scene, t, &Gauge::Graph, 1)?))
}

/// `dτ₁¹(X_i, X_j) = ∂_j τ(X_i) - ∂_i τ(X_j)` on the coordinate frame.
pub fn normal_curvature(scene: &Scene, t: &[f64], gauge: &Gauge) -> Result<Vec<Vec<f64>>> {
    let tau = tau_jets(scene, t, gauge, 2)?;
    let n = tau.len();
    Ok((0..n)
        .map(|i| {
            (0..n)
                .map(|j| tau[i].derivative(j).value() - tau[j].derivative(i).value())
                .collect()
        })
        .collect())
}

/// Blaschke structure of `M` at `w = (t, g(t))`, on the coordinate frame
/// `∂_a + F_a e_z` of the graph `z = F(w)`.
#[derive(Debug, Clone, Serialize)]
pub struct BlaschkeData {
    pub w: Vec<f64>,
    /// `|det Hess F|^{1/(m+2)}`.
    pub phi: f64,
    pub h: Vec<Vec<f64>>,
    /// Blaschke normal in ambient coordinates.
    pub zeta: Vec<f64>,
    /// Cubic form `C = ∇h`.
    pub c: Tensor3,
}

/// Blaschke data of the graph hypersurface `z = f(w)` at `w`.
pub fn graph_blaschke(f: &Expr, w: &[f64]) -> Result<BlaschkeData> {
    blaschke_from_jet(&eval_jet(f, w, 4)?, w)
}

/// Same as [`graph_blaschke`] from a jet of `F` at `w` of order at least 3.
pub fn blaschke_from_jet(fj: &Jet<f64>, w: &[f64]) -> Result<BlaschkeData> {
    let m = w.len();
    if fj.order() < 3 {
        return Err(JetError::Order { requested: 3, max: fj.order() }.into());
    }
    let grad: JVec = (0..m).map(|a| fj.derivative(a)).collect();
    let hess: Mat<Jet<f64>> = (0..m)
        .map(|a| (0..m).map(|b| grad[a].derivative(b)).collect())
        .collect();
    let det = linalg::det(&hess);
    let scale = linalg::row_norm_product(&mat_values(&hess));
    if det.value().abs() <= 1e-12 * scale || scale == 0.0 {
        return Err(Error::DegenerateHypersurface { det: det.value() });
    }
    let phi = abs_jet(det).powf(1.0 / (m as f64 + 2.0))?;
    let inv = phi.recip()?;
    let h: Mat<Jet<f64>> = hess.iter().map(|r| r.iter().map(|x| x * &inv).collect()).collect();
    let dphi: Vec<f64> = (0..m).map(|a| phi.derivative(a).value()).collect();
    let hv = mat_values(&hess);
    let col: Vec<Vec<f64>> = dphi.iter().map(|d| vec![*d]).collect();
    let v = linalg::solve(&hv, &col).ok_or(Error::DegenerateHypersurface {
        det: linalg::det(&hv),
    })?;
    let fz: Vec<f64> = values(&grad);
    let mut zeta = vec![0.0; m + 1];
    zeta[m] = phi.value();
    for a in 0..m {
        zeta[a] -= v[a][0];
        zeta[m] -= v[a][0] * fz[a];
    }
    let p = phi.value();
    let hval = mat_values(&h);
    let c = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    (0..m)
                        .map(|k| {
                            h[j][k].derivative(i).value()
                                - (hval[i][j] * dphi[k] + hval[i][k] * dphi[j]) / p
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(BlaschkeData {
        w: w.to_vec(),
        phi: p,
        h: hval,
        zeta,
        c,
    })
}

pub fn blaschke_data(scene: &Scene, t: &[f64]) -> Result<BlaschkeData> {
    scene.check_point(t)?;
    let mut w = t.to_vec();
    w.push(scene.g().eval(t, &0.0)?);
    graph_blaschke(scene.f(), &w)
}

pub const COMPAT_TOL: f64 = 1e-7;

/// The six compatibility conditions between `ξ` and the Blaschke structure.
#[derive(Debug, Clone, Serialize)]
pub struct Compatibility {
    pub point: Vec<f64>,
    pub gauge: String,
    /// `h(ξ, ξ) = 1`.
    pub unit_length: bool,
    /// `{X', ξ}` is `h`-orthonormal.
    pub orthonormal: bool,
    /// `|[X', ζ, ξ]| = 1`.
    pub unit_bracket: bool,
    /// `g_ξ(X'_a, X'_b) = δ_ab`.
    pub metric_orthonormal: bool,
    /// `g_ξ = h` on `TN`.
    pub metric_equal: bool,
    /// `ζ ∈ span{ξ, η}`.
    pub normal_in_plane: bool,
    pub h_xi_xi: f64,
    pub bracket: f64,
    /// `C(X'_a, ξ, ξ)`.
    pub c_xi_xi: Vec<f64>,
    pub residuals: Vec<f64>,
    pub tolerance: f64,
}

impl Compatibility {
    pub fn items(&self) -> [bool; 6] {
        [
            self.unit_length,
            self.orthonormal,
            self.unit_bracket,
            self.metric_orthonormal,
            self.metric_equal,
            self.normal_in_plane,
        ]
    }
}

fn bilinear(h: &[Vec<f64>], u: &[f64], v: &[f64]) -> f64 {
    let m = h.len();
    let mut acc = 0.0;
    for i in 0..m {
        for j in 0..m {
            acc += u[i] * h[i][j] * v[j];
        }
    }
    acc
}

pub fn blaschke_compatibility(scene: &Scene, t: &[f64], gauge: &Gauge) -> Result<Compatibility> {
    let n = scene.n();
    let m = n + 1;
    let bd = blaschke_data(scene, t)?;
    let bj = bundle_jets(scene, t, gauge, 2)?;
    let coord = frame_jets(scene, t, 0, gauge)?;
    let w = |v: &[f64]| v[..m].to_vec();
    let xi = values(&bj.frame.xi);
    let xs: Vec<Vec<f64>> = coord.e.iter().map(|v| values(v)).collect();
    let h = &bd.h;
    let hxx = bilinear(h, &w(&xi), &w(&xi));
    let r1 = (hxx - 1.0).abs();

    // h-orthonormal frame X' of TN by Gram–Schmidt on the coordinate frame
    let mut xp: Vec<Vec<f64>> = Vec::new();
    let mut sg: Vec<f64> = Vec::new();
    let mut pcols: Vec<Vec<f64>> = Vec::new();
    for a in 0..n {
        let mut c = vec![0.0; n];
        c[a] = 1.0;
        let mut v = xs[a].clone();
        for (b, eb) in xp.iter().enumerate() {
            let proj = bilinear(h, &w(&v), &w(eb)) * sg[b];
            for r in 0..v.len() {
                v[r] -= proj * eb[r];
            }
            for r in 0..n {
                c[r] -= proj * pcols[b][r];
            }
        }
        let nn = bilinear(h, &w(&v), &w(&v));
        if nn.abs() < 1e-14 {
            return Err(Error::DegenerateHypersurface { det: nn });
        }
        let s = nn.abs().sqrt();
        xp.push(v.iter().map(|x| x / s).collect());
        pcols.push(c.iter().map(|x| x / s).collect());
        sg.push(nn.signum());
    }
    let r2 = xp
        .iter()
        .map(|x| bilinear(h, &w(x), &w(&xi)).abs())
        .fold(r1, f64::max);
    let mut cols = xp.clone();
    cols.push(bd.zeta.clone());
    cols.push(xi.clone());
    let bracket = linalg::bracket(&cols);
    let r3 = (bracket.abs() - 1.0).abs();

    let g = mat_values(&bj.g);
    let mut r4: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            let gab = bilinear(&g, &pcols[a], &pcols[b]);
            r4 = r4.max((gab - (a == b) as u8 as f64).abs());
        }
    }
    let mut r5: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            r5 = r5.max((g[i][j] - bilinear(h, &w(&xs[i]), &w(&xs[j]))).abs());
        }
    }
    // ζ in the basis {E, η, ξ}
    let mut basis: Vec<Vec<f64>> = bj.frame.e.iter().map(|v| values(v)).collect();
    basis.push(values(&bj.frame.eta));
    basis.push(xi.clone());
    let co = linalg::coordinates(&basis, std::slice::from_ref(&bd.zeta))
        .ok_or(Error::SingularBasis { det: linalg::bracket(&basis) })?;
    let znorm = linalg::norm(&bd.zeta).max(1.0);
    let r6 = (0..n).map(|a| co[a][0].abs()).fold(0.0, f64::max) / znorm;

    let c_xi_xi = xp
        .iter()
        .map(|x| {
            let (x, e) = (w(x), w(&xi));
            let mut acc = 0.0;
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        acc += bd.c[i][j][k] * x[i] * e[j] * e[k];
                    }
                }
            }
            acc
        })
        .collect();
    let tol = COMPAT_TOL;
    Ok(Compatibility {
        point: t.to_vec(),
        gauge: gauge.label(),
        unit_length: r1 <= tol,
        orthonormal: r2 <= tol,
        unit_bracket: r3 <= tol,
        metric_orthonormal: r4 <= tol,
        metric_equal: r5 <= tol,
        normal_in_plane: r6 <= tol,
        h_xi_xi: hxx,
        bracket,
        c_xi_xi,
        residuals: vec![r1, r2, r3, r4, r5, r6],
        tolerance: tol,
    })
}

/// Existence verdict for a parallel Darboux field on a rectangular region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParallelVerdict {
    Exists,
    NotExists,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParallelReport {
    pub verdict: ParallelVerdict,
    pub points: Vec<Vec<f64>>,
    /// `τ₁¹(X_i)` in the graph gauge at every grid point.
    pub tau: Vec<Vec<f64>>,
    /// `dτ₁¹` at the first grid point.
    pub dtau: Vec<Vec<f64>>,
    pub dtau_max: f64,
    pub threshold: f64,
    /// `λ` with `λ ξ_graph` parallel, normalized to 1 at the first point.
    pub lambda: Option<Vec<f64>>,
    pub loop_residual: Option<f64>,
    /// Non-tangential part of `D_{X_i}(λξ)` at the sampled grid points.
    pub certificate: Option<Vec<f64>>,
    pub certified: bool,
}

pub const PARALLEL_TOL: f64 = 1e-6;
const FD_STEP: f64 = 1e-4;

/// `∫_0^s τ(X_i)(t0 + r e_i) dr` from the Taylor jet at `t0`.
fn axis_integral(tau: &Jet<f64>, axis: usize, s: f64) -> f64 {
    let n = tau.vars();
    let mut acc = 0.0;
    let mut pow = s;
    for k in 0..=tau.order() {
        let mut alpha = vec![0u32; n];
        alpha[axis] = k as u32;
        acc += tau.coeff(&alpha) * pow / (k + 1) as f64;
        pow *= s;
    }
    acc
}

fn dtau_at(tau: &[Jet<f64>]) -> Vec<Vec<f64>> {
    let n = tau.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| tau[i].derivative(j).value() - tau[j].derivative(i).value())
                .collect()
        })
        .collect()
}

/// Parallel field decision for the Darboux direction over a grid.
pub fn parallel_field_exists(scene: &Scene, axes: &[crate::envelope::Axis]) -> Result<ParallelReport> {
    use rayon::prelude::*;
    let n = scene.n();
    if axes.len() != n {
        return Err(Error::Dimension(format!("grid has {} axes, scene has n = {n}", axes.len())));
    }
    let points = crate::envelope::grid_points(axes);
    if points.is_empty() {
        return Err(Error::Invalid("empty grid".into()));
    }
    let jets: Vec<JVec> = points
        .par_iter()
        .map(|t| tau_jets(scene, t, &Gauge::Graph, 7))
        .collect::<Result<_>>()?;
    let tau: Vec<Vec<f64>> = jets.iter().map(|j| values(j)).collect();
    let dtaus: Vec<Vec<Vec<f64>>> = jets.iter().map(|j| dtau_at(j)).collect();
    let dtau_max = dtaus.iter().flatten().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = tau.iter().flatten().fold(1.0f64, |m, x| m.max(x.abs()));
    let threshold = PARALLEL_TOL * scale;
    let mut report = ParallelReport {
        verdict: ParallelVerdict::NotExists,
        points: points.clone(),
        tau,
        dtau: dtaus[0].clone(),
        dtau_max,
        threshold,
        lambda: None,
        loop_residual: None,
        certificate: None,
        certified: false,
    };
    if dtau_max > 0.1 * threshold && dtau_max < 10.0 * threshold {
        return Err(Error::InconclusiveTolerance {
            value: dtau_max,
            threshold,
        });
    }
    if dtau_max >= 10.0 * threshold {
        return Ok(report);
    }

    // grid index helpers, first axis slowest as in grid_points
    let counts: Vec<usize> = axes.iter().map(|a| a.count).collect();
    let samples: Vec<Vec<f64>> = axes.iter().map(|a| a.samples()).collect();
    let flat = |idx: &[usize]| idx.iter().zip(&counts).fold(0, |acc, (i, c)| acc * c + i);
    // ∫ τ(X_i) from node idx to idx + e_i, averaged from both ends
    let segment = |idx: &[usize], i: usize| {
        let mut next = idx.to_vec();
        next[i] += 1;
        let h = samples[i][idx[i] + 1] - samples[i][idx[i]];
        0.5 * (axis_integral(&jets[flat(idx)][i], i, h) - axis_integral(&jets[flat(&next)][i], i, -h))
    };
    let mut log_lambda = vec![0.0; points.len()];
    let mut idx = vec![0usize; n];
    for (p, slot) in log_lambda.iter_mut().enumerate() {
        let mut rem = p;
        for i in (0..n).rev() {
            idx[i] = rem % counts[i];
            rem /= counts[i];
        }
        let mut walk = vec![0usize; n];
        let mut acc = 0.0;
        for i in 0..n {
            while walk[i] < idx[i] {
                acc += segment(&walk, i);
                walk[i] += 1;
            }
        }
        *slot = -acc;
    }
    let mut loop_residual: f64 = 0.0;
    for p in 0..points.len() {
        let mut rem = p;
        for i in (0..n).rev() {
            idx[i] = rem % counts[i];
            rem /= counts[i];
        }
        for i in 0..n {
            for j in i + 1..n {
                if idx[i] + 1 >= counts[i] || idx[j] + 1 >= counts[j] {
                    continue;
                }
                let mut ei = idx.clone();
                ei[i] += 1;
                let mut ej = idx.clone();
                ej[j] += 1;
                let r = segment(&idx, i) + segment(&ei, j) - segment(&ej, i) - segment(&idx, j);
                loop_residual = loop_residual.max(r.abs());
            }
        }
    }
    let lambda: Vec<f64> = log_lambda.iter().map(|l| l.exp()).collect();

    // finite-difference check that D(λξ) is tangent to N
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let mut picks: Vec<usize> = (0..points.len()).collect();
    picks.shuffle(&mut rng);
    picks.truncate(5);
    let certificate = picks
        .iter()
        .map(|&p| {
            let t = &points[p];
            let base = frame_jets(scene, t, 0, &Gauge::Graph)?;
            let mut basis: Vec<Vec<f64>> = base.e.iter().map(|v| values(v)).collect();
            basis.push(values(&base.eta));
            basis.push(values(&base.xi));
            let size = linalg::norm(&values(&base.xi)) * lambda[p];
            let mut worst: f64 = 0.0;
            for i in 0..n {
                let field = |s: f64| -> Result<Vec<f64>> {
                    let mut q = t.clone();
                    q[i] += s;
                    let fr = frame_jets(scene, &q, 0, &Gauge::Graph)?;
                    let l = lambda[p] * (-axis_integral(&jets[p][i], i, s)).exp();
                    Ok(values(&fr.xi).iter().map(|x| x * l).collect())
                };
                let (a, b) = (field(FD_STEP)?, field(-FD_STEP)?);
                let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * FD_STEP)).collect();
                let co = linalg::coordinates(&basis, std::slice::from_ref(&d))
                    .ok_or(Error::SingularBasis { det: linalg::bracket(&basis) })?;
                worst = worst.max(co[n][0].abs().max(co[n + 1][0].abs()) / size.max(1e-300));
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>>>()?;
    report.certified = loop_residual < PARALLEL_TOL && certificate.iter().all(|r| *r < PARALLEL_TOL);
    report.verdict = ParallelVerdict::Exists;
    report.lambda = Some(lambda);
    report.loop_residual = Some(loop_residual);
    report.certificate = Some(certificate);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{build_scene, load_bundled};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn monkey(c: &str) -> Scene {
        let f = format!("(x^2 + y^2)/2 + {c}*(x^3 - 3*x*y^2)/6");
        Scene::new(&f, "0", 1, Some(vec!["x".into(), "y".into()])).unwrap()
    }

    #[test]
    fn curve_normal_form_has_unit_metric() {
        let s = build_scene("t^2/2 + y^2/2 + y*t^3", "t^2/2", 1).unwrap();
        let m = affine_metric(&s, &[0.0], &Gauge::Graph).unwrap();
        let big = frame_jets(&s, &[0.0], 1, &Gauge::Graph).map(|f| big_g(&f)).unwrap();
        assert!(close(m.g[0][0], big[0][0].value().abs().powf(2.0 / 3.0), 1e-12));
    }

    #[test]
    fn metric_scales_with_the_field() {
        let s = load_bundled("nonflat").unwrap();
        let t = [0.2, -0.1];
        let a = affine_metric(&s, &t, &Gauge::Graph).unwrap();
        let two = Gauge::Scale(crate::parse_expression("2", &["t1", "t2"]).unwrap());
        let b = affine_metric(&s, &t, &two).unwrap();
        let r = 2f64.powf(2.0 / 4.0);
        for i in 0..2 {
            for j in 0..2 {
                assert!(close(b.g[i][j], r * a.g[i][j], 1e-10 * a.g[i][j].abs().max(1.0)));
            }
        }
        assert_eq!(a.signature, (2, 0));
    }

    #[test]
    fn monkey_affine_normal_plane() {
        let (_, eta) = affine_normal_plane(&monkey("3"), &[0.0], &Gauge::Graph).unwrap();
        for (a, b) in eta.iter().zip([-1.0, 0.0, 1.0]) {
            assert!(close(*a, b, 1e-9), "{eta:?}");
        }
        let (_, eta) = affine_normal_plane(&monkey("0"), &[0.0], &Gauge::Graph).unwrap();
        for (a, b) in eta.iter().zip([0.0, 0.0, 1.0]) {
            assert!(close(*a, b, 1e-9), "{eta:?}");
        }
    }

    #[test]
    fn bundle_satisfies_the_normalizations() {
        let scenes = [
            load_bundled("nonflat").unwrap(),
            load_bundled("hyperquadric").unwrap(),
            build_scene("t1^2/2 + t2^2 + y^2/2 + t1*t2*y + t2^3/5", "t1^2/3 - t2*t1/4", 2).unwrap(),
        ];
        for s in &scenes {
            for t in [[0.0, 0.0], [0.1, 0.1], [-0.2, 0.15]] {
                let b = metric_bundle(s, &t, &Gauge::Graph).unwrap();
                assert!(close(b.bracket.abs(), 1.0, 1e-9));
                for a in 0..2 {
                    assert!(b.tau12[a].abs() < 1e-9 && b.tau22[a].abs() < 1e-9);
                    assert!(close(b.equiaffine_defect[a], -b.tau[a], 1e-9));
                    assert!(close(b.apolarity_defect[a], 2.0 * b.tau[a], 1e-8));
                    for c in 0..2 {
                        let d = if a == c { b.signs[a] } else { 0.0 };
                        assert!(close(b.h2[a][c], d, 1e-9));
                        for e in 0..2 {
                            for c2 in [&b.c1, &b.c2] {
                                assert!(close(c2[a][c][e], c2[c][a][e], 1e-8));
                                assert!(close(c2[a][c][e], c2[a][e][c], 1e-8));
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn quadric_cubic_form_vanishes() {
        let s = load_bundled("hyperquadric").unwrap();
        let b = metric_bundle(&s, &[0.1, -0.2], &Gauge::Blaschke).unwrap();
        assert!(b.c2.iter().flatten().flatten().all(|x| x.abs() < 1e-9), "{:?}", b.c2);
        assert!(b.equiaffine_defect.iter().all(|x| x.abs() < 1e-9));
        let n = load_bundled("nonflat").unwrap();
        let b = metric_bundle(&n, &[0.1, 0.1], &Gauge::Graph).unwrap();
        assert!(b.c2.iter().flatten().flatten().any(|x| x.abs() > 1e-4));
    }

    #[test]
    fn normal_curvature_of_nonflat_scene() {
        let s = load_bundled("nonflat").unwrap();
        let d = normal_curvature(&s, &[0.0, 0.0], &Gauge::Graph).unwrap();
        assert!(close(d[0][1], 1.0, 1e-7) && close(d[1][0], -1.0, 1e-7), "{d:?}");
        let lam = Gauge::Scale(crate::parse_expression("1 + t1^2", &["t1", "t2"]).unwrap());
        for t in [[0.1, 0.2], [-0.3, 0.05]] {
            let a = normal_curvature(&s, &t, &Gauge::Graph).unwrap();
            let b = normal_curvature(&s, &t, &lam).unwrap();
            assert!(close(a[0][1], b[0][1], 1e-7));
        }
    }

    /// The explicit field of the flatness counterexample, with `N: y = x₁x₂`.
    fn explicit_xi(k1: f64, k2: f64, x1: f64, x2: f64) -> [f64; 4] {
        let q = k1 * x1 * x1 + 2.0 * x1 * x2 + k2 * x2 * x2;
        [
            k2 * k2 * x2.powi(3) - k2 * x1 * x2 * x2 - 2.0 * k1 * k2 * x1 * x1 * x2 - k1 * x1 - x2,
            k1 * k1 * x1.powi(3) - k1 * x1 * x1 * x2 - 2.0 * k1 * k2 * x1 * x2 * x2 - k2 * x2 - x1,
            1.0 + 2.0 * (k1 + k2) * x1 * x2 + 3.0 * k1 * k2 * x1 * x1 * x2 * x2,
            -0.5 * q
                + (k1 * k1 - k1 * k2) * x1.powi(3) * x2
                + (k2 * k2 - k1 * k2) * x1 * x2.powi(3)
                + 0.5 * k1 * k2 * x1 * x1 * x2 * x2 * q,
        ]
    }

    // The explicit field is μ times the graph field, so its τ is τ + d log μ.
    #[test]
    fn flatness_example_in_its_own_gauge() {
        let h = 1e-3;
        for (k1, k2) in [(1.0, 1.0), (2.0, 1.0), (3.0, 1.0)] {
            let f = format!("(x1^2 + x2^2 + y^2)/2 + ({k1}*x1^2*y + {k2}*x2^2*y)/2");
            let s = Scene::new(&f, "x1*x2", 2, Some(vec!["x1".into(), "x2".into(), "y".into()])).unwrap();
            let log_mu = |p: [f64; 2]| {
                let xi = crate::frame::darboux_direction(&s, &p).unwrap();
                let e = explicit_xi(k1, k2, p[0], p[1]);
                let mu = e[2] / xi[2];
                for i in 0..4 {
                    assert!(close(e[i], mu * xi[i], 1e-12), "not parallel at {p:?}");
                }
                mu.ln()
            };
            let tau = |p: [f64; 2]| -> Vec<f64> {
                let t = tau_coefficients(&s, &p).unwrap();
                (0..2)
                    .map(|j| {
                        let (mut a, mut b) = (p, p);
                        a[j] += h;
                        b[j] -= h;
                        t[j] + (log_mu(a) - log_mu(b)) / (2.0 * h)
                    })
                    .collect()
            };
            let d = |i: usize, j: usize| {
                let (mut a, mut b) = ([0.0; 2], [0.0; 2]);
                a[j] = h;
                b[j] = -h;
                (tau(a)[i] - tau(b)[i]) / (2.0 * h)
            };
            assert!(close(d(0, 0), 1.0, 1e-4) && close(d(1, 1), 1.0, 1e-4));
            assert!(close(d(0, 1), 3.0 * k1 + 2.0 * k2, 1e-4), "{}", d(0, 1));
            assert!(close(d(1, 0), 2.0 * k1 + 3.0 * k2, 1e-4), "{}", d(1, 0));
            if k1 == k2 {
                // the remainder along the x₁ axis is cubic, about -4x₁³
                for x in [0.1, 0.0125] {
                    let r = (tau([x, 0.0])[0] - x) / x.powi(3);
                    assert!(r < -3.9 && r > -4.01, "{r}");
                }
            }
        }
    }

    #[test]
    fn paraboloid_blaschke_data() {
        let f = crate::parse_expression("(x1^2 + x2^2 + x3^2)/2", &["x1", "x2", "x3"]).unwrap();
        let b = graph_blaschke(&f, &[0.0; 3]).unwrap();
        assert_eq!(b.zeta, vec![0.0, 0.0, 0.0, 1.0]);
        for i in 0..3 {
            assert!(close(b.h[i][i], 1.0, 1e-12));
        }
        let m = monkey("3");
        let b = blaschke_data(&m, &[0.0]).unwrap();
        for (a, e) in b.zeta.iter().zip([0.0, 0.0, 1.0]) {
            assert!(close(*a, e, 1e-12));
        }
        let deg = crate::parse_expression("x*y", &["x", "y", "z"]).unwrap();
        assert!(matches!(graph_blaschke(&deg, &[0.0; 3]), Err(Error::DegenerateHypersurface { .. })));
    }

    #[test]
    fn blaschke_structure_is_apolar() {
        let f = crate::parse_expression("x^2/2 + y^2 + x*y*z + z^2/2 + x^3/3 - y^2*z/4", &["x", "y", "z"]).unwrap();
        for w in [[0.0, 0.0, 0.0], [0.1, -0.2, 0.05], [0.2, 0.1, -0.1]] {
            let b = graph_blaschke(&f, &w).unwrap();
            let hinv = nalgebra::DMatrix::from_fn(3, 3, |i, j| b.h[i][j]).try_inverse().unwrap();
            for x in 0..3 {
                let mut tr = 0.0;
                for j in 0..3 {
                    for k in 0..3 {
                        tr += hinv[(j, k)] * b.c[x][j][k];
                    }
                }
                assert!(tr.abs() < 1e-7, "{tr}");
            }
        }
    }

    #[test]
    fn compatibility_items_on_quadric_and_monkey() {
        let s = load_bundled("hyperquadric").unwrap();
        for t in [[0.0, 0.0], [0.1, -0.2]] {
            let c = blaschke_compatibility(&s, &t, &Gauge::Blaschke).unwrap();
            assert_eq!(c.items(), [true; 6], "{c:?}");
        }
        let m = monkey("3");
        let c = blaschke_compatibility(&m, &[0.0], &Gauge::Graph).unwrap();
        assert!(close(c.h_xi_xi, 1.0, 1e-12));
        assert!(!c.normal_in_plane, "{c:?}");
        assert!(c.c_xi_xi[0].abs() > 1e-3);
    }

    #[test]
    fn parallel_field_decisions() {
        use crate::envelope::Axis;
        let grid = [Axis::new(0.1, 0.3, 3), Axis::new(0.1, 0.3, 3)];
        let r = parallel_field_exists(&load_bundled("nonflat").unwrap(), &grid).unwrap();
        assert_eq!(r.verdict, ParallelVerdict::NotExists);
        assert!(close(r.dtau[0][1], -r.dtau[1][0], 0.0));

        let flat = build_scene("t1^2/2 + t2^2/2 + t1*t2/3 + y^2/2", "0", 2).unwrap();
        let r = parallel_field_exists(&flat, &grid).unwrap();
        assert_eq!(r.verdict, ParallelVerdict::Exists);
        assert!(r.certified, "{r:?}");

        let q = load_bundled("hyperquadric").unwrap();
        let grid = [Axis::new(-0.2, 0.2, 5), Axis::new(-0.1, 0.3, 5)];
        let r = parallel_field_exists(&q, &grid).unwrap();
        assert_eq!(r.verdict, ParallelVerdict::Exists);
        assert!(r.certified, "{r:?}");
        // λ ξ_graph against the unit-length field: constant ratio
        let lam = r.lambda.unwrap();
        let ratios: Vec<f64> = r
            .points
            .iter()
            .zip(&lam)
            .map(|(t, l)| {
                let c = blaschke_compatibility(&q, t, &Gauge::Graph).unwrap();
                l * c.h_xi_xi.sqrt()
            })
            .collect();
        for x in &ratios {
            assert!(close(*x, ratios[0], 1e-6 * ratios[0]), "{ratios:?}");
        }
    }
}
