//! Curves on surfaces (`n = 1`): adapted parameters, the affine Darboux
//! frame and the singularities of the tangent developable.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::envelope::Axis;
use crate::error::{Error, Result};
use crate::frame::{JVec, Track};
use crate::jet::Jet;
use crate::linalg;
use crate::mesh::{Mesh, SINGULAR_TOL};
use crate::scene::Scene;
use crate::singular::{classify_at, SingularityClass};

/// Relative size of `ν(γ'')` below which the osculating plane counts as tangent.
pub const OSCULATING_TOL: f64 = 1e-10;

/// A curve scene together with the raw parameter value where the adapted
/// parameter starts (`s(0) = base`, `s_t(0) = 1`).
#[derive(Debug, Clone)]
pub struct CurveScene {
    pub scene: Scene,
    pub base: f64,
}

impl CurveScene {
    pub fn new(scene: Scene, base: f64) -> Result<CurveScene> {
        if scene.n() != 1 {
            return Err(Error::Dimension(format!("curve scenes need n = 1, got {}", scene.n())));
        }
        let c = CurveScene { scene, base };
        c.osculating(base)?;
        Ok(c)
    }

    /// `A = ν(γ_sss)` and `B = ν(γ_ss)` at a raw parameter value.
    pub fn osculating(&self, s: f64) -> Result<(f64, f64)> {
        let raw = RawJets::new(&self.scene, s, 3)?;
        Ok((raw.a.value(), raw.b.value()))
    }
}

fn pair(a: &[Jet<f64>], b: &[Jet<f64>]) -> Jet<f64> {
    let k = a[0].order().min(b[0].order());
    let mut acc = Jet::zero(1, k);
    for (x, y) in a.iter().zip(b) {
        acc = &acc + &(x * y);
    }
    acc
}

fn deriv(v: &[Jet<f64>]) -> JVec {
    v.iter().map(|c| c.derivative(0)).collect()
}

fn values(v: &[Jet<f64>]) -> Vec<f64> {
    v.iter().map(|c| c.value()).collect()
}

/// Jets in the raw parameter at one point.
struct RawJets {
    phi: JVec,
    xi_g: JVec,
    /// `ν(γ''')`, `ν(γ'')`.
    a: Jet<f64>,
    b: Jet<f64>,
}

impl RawJets {
    fn new(scene: &Scene, s: f64, order: usize) -> Result<RawJets> {
        let tr = Track::new(scene, &[s], order)?;
        let xi_g = tr.lift(&tr.graph_xi_hat()?);
        let nu = tr.conormal();
        let g1 = deriv(&tr.phi);
        let g2 = deriv(&g1);
        let g3 = deriv(&g2);
        let a = pair(&nu, &g3);
        let b = pair(&nu, &g2);
        let size = linalg::norm(&values(&g2)) * linalg::norm(&values(&nu));
        if b.value().abs() <= OSCULATING_TOL * size.max(f64::MIN_POSITIVE) {
            return Err(Error::OsculatingDegenerate { value: b.value() });
        }
        Ok(RawJets { phi: tr.phi, xi_g, a, b })
    }

    /// `k = -A / (3B)`, so that adapted parameters solve `s_tt = k(s) s_t²`.
    fn k(&self) -> Result<Jet<f64>> {
        Ok(self.a.checked_div(&self.b)?.scale(&(-1.0 / 3.0)))
    }
}

fn rhs(c: &CurveScene, s: f64, st: f64) -> Result<(f64, f64)> {
    let (a, b) = c.osculating(s)?;
    Ok((st, -a / (3.0 * b) * st * st))
}

fn rk4_step(c: &CurveScene, (s, st): (f64, f64), h: f64) -> Result<(f64, f64)> {
    let k1 = rhs(c, s, st)?;
    let k2 = rhs(c, s + 0.5 * h * k1.0, st + 0.5 * h * k1.1)?;
    let k3 = rhs(c, s + 0.5 * h * k2.0, st + 0.5 * h * k2.1)?;
    let k4 = rhs(c, s + h * k3.0, st + h * k3.1)?;
    Ok((
        s + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        st + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    ))
}

/// `(s, s_t)` at each target, marching out from `t = 0` with steps at most `h`.
fn march(c: &CurveScene, targets: &[f64], h: f64) -> Result<Vec<(f64, f64)>> {
    let mut out = vec![(0.0, 0.0); targets.len()];
    for dir in [1.0, -1.0] {
        let mut idx: Vec<usize> = (0..targets.len()).filter(|&i| targets[i] * dir >= 0.0).collect();
        idx.sort_by(|&a, &b| (targets[a] * dir).total_cmp(&(targets[b] * dir)));
        let (mut t, mut state) = (0.0, (c.base, 1.0));
        for i in idx {
            let span = targets[i] - t;
            let steps = (span.abs() / h).ceil() as usize;
            for _ in 0..steps {
                state = rk4_step(c, state, span / steps as f64)?;
                if !(state.0.is_finite() && state.1.is_finite()) || state.1 <= 0.0 {
                    return Err(Error::Invalid(format!(
                        "adapted parameter blows up before t = {}",
                        targets[i]
                    )));
                }
            }
            t = targets[i];
            out[i] = state;
        }
    }
    Ok(out)
}

/// Sampled adapted re-parameterization.
#[derive(Debug, Clone, Serialize)]
pub struct AdaptedCurve {
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    pub s_t: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    /// `|ν(γ_ttt)| / |ν(γ_tt)|` at each sample.
    pub residual: Vec<f64>,
    pub step: f64,
}

/// Solves `A s_t² + 3 B s_tt = 0` on `[lo, hi]` of the new parameter.
pub fn adapt_parameterization(c: &CurveScene, lo: f64, hi: f64, samples: usize) -> Result<AdaptedCurve> {
    let axis = Axis::new(lo, hi, samples.max(2));
    let t = axis.samples();
    let mut h = ((hi - lo).abs() / samples.max(2) as f64).clamp(1e-3, 0.05);
    let mut coarse = march(c, &t, h)?;
    let mut fine;
    let mut halvings = 0;
    loop {
        fine = march(c, &t, h / 2.0)?;
        let change = coarse
            .iter()
            .zip(&fine)
            .map(|(a, b)| (a.0 - b.0).abs().max((a.1 - b.1).abs()))
            .fold(0.0, f64::max);
        h /= 2.0;
        halvings += 1;
        if change < 1e-8 {
            break;
        }
        if !change.is_finite() || halvings >= 10 {
            return Err(Error::Invalid(format!(
                "adapted parameter ODE did not converge on [{lo}, {hi}] (step change {change:.3e}); \
                 the interval likely reaches a point where the osculating plane is tangent"
            )));
        }
        coarse = fine.clone();
    }
    let mut out = AdaptedCurve {
        t: t.clone(),
        s: Vec::new(),
        s_t: Vec::new(),
        points: Vec::new(),
        residual: Vec::new(),
        step: h,
    };
    for &(s, st) in &fine {
        let (g, _) = adapted_jets(c, s, st, 3)?;
        let nu = Track::new(&c.scene, &[s], 0)?.conormal();
        let g2 = deriv(&deriv(&g));
        let g3 = deriv(&g2);
        let nuv = values(&nu);
        let b = linalg::dot(&nuv, &values(&g2));
        let a = linalg::dot(&nuv, &values(&g3));
        out.s.push(s);
        out.s_t.push(st);
        out.points.push(values(&g));
        out.residual.push(a.abs() / b.abs());
    }
    Ok(out)
}

/// Jets in the adapted parameter `δ` around the raw point `s` with speed
/// `s_t`: the curve and the Darboux field with unit bracket.
fn adapted_jets(c: &CurveScene, s: f64, st: f64, order: usize) -> Result<(JVec, JVec)> {
    let raw = RawJets::new(&c.scene, s, order + 3)?;
    let k = raw.k()?;
    let lin = Jet::variable(1, order, 0, 0.0).scale(&st);
    let mut sig = lin.clone();
    for _ in 0..order {
        let kk = k.compose(std::slice::from_ref(&sig))?;
        let d = sig.derivative(0);
        let acc = &(&kk.truncate(d.order()) * &d) * &d;
        sig = &lin + &acc.integrate(0).integrate(0).truncate(order);
    }
    let inner = [sig];
    let g: JVec = raw.phi.iter().map(|p| p.compose(&inner)).collect::<std::result::Result<_, _>>()?;
    let xi_g: JVec = raw.xi_g.iter().map(|p| p.compose(&inner)).collect::<std::result::Result<_, _>>()?;
    let g1 = deriv(&g);
    let g2 = deriv(&g1);
    let br = linalg::bracket(&[g1, g2, xi_g.clone()]);
    let xi = xi_g.iter().map(|x| x.checked_div(&br)).collect::<std::result::Result<_, _>>()?;
    Ok((g, xi))
}

/// Affine Darboux frame invariants in the adapted gauge.
#[derive(Debug, Clone, Serialize)]
pub struct CurveInvariants {
    /// Adapted parameter.
    pub t: f64,
    /// Raw scene parameter.
    pub s: f64,
    pub sigma: f64,
    pub mu: f64,
    pub tau: f64,
    /// `ξ`-component of `ξ'`; zero for an adapted parameter.
    pub tau11: f64,
    /// `γ''`-component of `γ'''`; zero for an adapted parameter.
    pub osculating_residual: f64,
    pub xi: Vec<f64>,
    pub gauge: String,
}

/// `σ, μ, τ` at the adapted parameter value `t`.
pub fn curve_invariants(c: &CurveScene, t: f64) -> Result<CurveInvariants> {
    let h = (t.abs() / 200.0).clamp(1e-4, 1e-3);
    let (s, st) = march(c, &[t], h)?[0];
    invariants_at(c, t, s, st)
}

fn invariants_at(c: &CurveScene, t: f64, s: f64, st: f64) -> Result<CurveInvariants> {
    let (g, xi) = adapted_jets(c, s, st, 4)?;
    let g1 = deriv(&g);
    let g2 = deriv(&g1);
    let g3 = values(&deriv(&g2));
    let basis = [values(&g1), values(&g2), values(&xi)];
    let coords = |v: Vec<f64>| -> Result<Vec<f64>> {
        let cols: Vec<Vec<f64>> = basis.to_vec();
        let m = linalg::coordinates(&cols, &[v]).ok_or(Error::SingularBasis { det: 0.0 })?;
        Ok(m.iter().map(|r| r[0]).collect())
    };
    let dxi = coords(values(&deriv(&xi)))?;
    let d3 = coords(g3)?;
    Ok(CurveInvariants {
        t,
        s,
        sigma: -dxi[0],
        mu: -d3[0],
        tau: d3[2],
        tau11: dxi[2],
        osculating_residual: d3[1],
        xi: values(&xi),
        gauge: "adapted, [γ', γ'', ξ] = 1".into(),
    })
}

/// Invariants table as CSV.
pub fn invariants_csv(rows: &[CurveInvariants]) -> String {
    let mut s = String::from("t,sigma,mu,tau\n");
    for r in rows {
        let _ = writeln!(s, "{:.17e},{:.17e},{:.17e},{:.17e}", r.t, r.sigma, r.mu, r.tau);
    }
    s
}

/// Invariants at every sample of an adapted curve, in parallel.
pub fn invariants_table(c: &CurveScene, curve: &AdaptedCurve) -> Result<Vec<CurveInvariants>> {
    (0..curve.t.len())
        .into_par_iter()
        .map(|i| invariants_at(c, curve.t[i], curve.s[i], curve.s_t[i]))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CurveSingularity {
    CuspidalEdge,
    Swallowtail,
    Higher,
    NonSingular,
}

/// `σ`, `τ₁¹` as jets in the raw parameter for the frame `{γ', γ'', ξ}` with
/// `[γ', γ'', ξ] = 1`.
fn raw_sigma_tau(scene: &Scene, t0: f64, order: usize) -> Result<(Jet<f64>, Jet<f64>, JVec, JVec)> {
    let tr = Track::new(scene, &[t0], order + 3)?;
    let xi_g = tr.lift(&tr.graph_xi_hat()?);
    let g1 = deriv(&tr.phi);
    let g2 = deriv(&g1);
    let br = linalg::bracket(&[g1.clone(), g2.clone(), xi_g.clone()]);
    let xi: JVec = xi_g.iter().map(|x| x.checked_div(&br)).collect::<std::result::Result<_, _>>()?;
    let dxi = deriv(&xi);
    let k = dxi[0].order();
    let cut = |v: &[Jet<f64>]| -> JVec { v.iter().map(|c| c.truncate(k)).collect() };
    let cols = vec![cut(&g1), cut(&g2), cut(&xi)];
    let m = linalg::coordinates(&cols, std::slice::from_ref(&dxi)).ok_or(Error::SingularBasis { det: 0.0 })?;
    let sigma = -m[0][0].clone();
    let tau11 = m[2][0].clone();
    Ok((sigma, tau11, tr.phi, xi))
}

/// Verdict of the `σ_t - σ τ₁¹` criterion at `t₀` and the regression point.
#[derive(Debug, Clone, Serialize)]
pub struct CurveSingularityReport {
    pub t: f64,
    pub sigma: f64,
    pub tau11: f64,
    pub q: f64,
    pub q_t: f64,
    pub u: f64,
    pub point: Vec<f64>,
    pub verdict: CurveSingularity,
}

pub fn curve_singularity(c: &CurveScene, t0: f64) -> Result<CurveSingularity> {
    curve_singularity_report(c, t0).map(|r| r.verdict)
}

pub fn curve_singularity_report(c: &CurveScene, t0: f64) -> Result<CurveSingularityReport> {
    let (sigma, tau, phi, xi) = raw_sigma_tau(&c.scene, t0, 4)?;
    let s0 = sigma.value();
    if s0.abs() < 1e-10 {
        return Err(Error::SigmaZero { sigma: s0 });
    }
    let st = sigma.derivative(0);
    let q = &st - &(&sigma.truncate(st.order()) * &tau.truncate(st.order()));
    let qt = q.derivative(0);
    let tv = tau.value();
    let tt = tau.derivative(0).value();
    let scale = s0.abs() + st.value().abs() + (s0 * tv).abs();
    let scale_t = s0.abs() + st.derivative(0).value().abs() + (st.value() * tv).abs() + (s0 * tt).abs();
    let verdict = if q.value().abs() > 1e-8 * scale {
        CurveSingularity::CuspidalEdge
    } else if qt.value().abs() > 1e-8 * scale_t {
        CurveSingularity::Swallowtail
    } else {
        CurveSingularity::Higher
    };
    let u = 1.0 / s0;
    let point = phi.iter().zip(&xi).map(|(p, x)| p.value() + u * x.value()).collect();
    Ok(CurveSingularityReport {
        t: t0,
        sigma: s0,
        tau11: tv,
        q: q.value(),
        q_t: qt.value(),
        u,
        point,
        verdict,
    })
}

/// Germ class of the height family at the regression point over `t₀`.
pub fn regression_germ_class(c: &CurveScene, t0: f64) -> Result<SingularityClass> {
    let r = curve_singularity_report(c, t0)?;
    Ok(classify_at(&c.scene, &[t0], &r.point, 4)?.1.class)
}

/// `OD(t, u) = γ(t) + u ξ(t)` with `[γ', γ'', ξ] = 1` in the scene parameter.
pub fn tangent_developable(c: &CurveScene, t_axis: Axis, u_axis: Axis) -> Result<Mesh> {
    let ts = t_axis.samples();
    let us = u_axis.samples();
    let rows: Vec<Result<Vec<(Vec<f64>, Vec<f64>, f64)>>> = ts
        .par_iter()
        .map(|&t| {
            let (sigma, _, phi, xi) = raw_sigma_tau(&c.scene, t, 1)?;
            let s = sigma.value();
            Ok(us
                .iter()
                .map(|&u| {
                    let v = phi.iter().zip(&xi).map(|(p, x)| p.value() + u * x.value()).collect();
                    (v, vec![t, u], u * s - 1.0)
                })
                .collect())
        })
        .collect();
    let mut mesh = Mesh {
        dim: 3,
        vertices: Vec::new(),
        params: Vec::new(),
        faces: Vec::new(),
        regression_gap: Vec::new(),
        singular: Vec::new(),
        diagnostics: Vec::new(),
    };
    for row in rows {
        for (v, p, gap) in row? {
            mesh.vertices.push(v);
            mesh.params.push(p);
            mesh.singular.push(gap.abs() < SINGULAR_TOL);
            mesh.regression_gap.push(gap);
        }
    }
    let nu = us.len();
    for i in 0..ts.len().saturating_sub(1) {
        for j in 0..nu.saturating_sub(1) {
            let a = i * nu + j;
            mesh.faces.push([a, a + nu, a + nu + 1, a + 1]);
        }
    }
    Ok(mesh)
}
