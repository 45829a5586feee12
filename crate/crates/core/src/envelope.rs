//! Envelope of tangent spaces `φ(t) + u ξ(t)`, its defining family and regression locus.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::{self, Gauge, JVec, Track};
use crate::jet::Jet;
use crate::linalg;
use crate::mesh::{Mesh, SINGULAR_TOL};
use crate::scene::Scene;

/// One axis of a sampling grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, count: usize) -> Axis {
        Axis { lo, hi, count }
    }

    pub fn samples(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.lo],
            c => (0..c)
                .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (c - 1) as f64)
                .collect(),
        }
    }

    /// Parses `lo:hi:count`.
    pub fn parse(text: &str) -> Result<Axis> {
        let parts: Vec<&str> = text.split(':').collect();
        let bad = || Error::Invalid(format!("grid axis must be `lo:hi:count`, got `{text}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if !lo.is_finite() || !hi.is_finite() || count > 1_000_000 {
            return Err(bad());
        }
        Ok(Axis { lo, hi, count })
    }
}

/// Points of the tensor grid, first axis slowest.
pub fn grid_points(axes: &[Axis]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for a in axes {
        let s = a.samples();
        out = out
            .into_iter()
            .flat_map(|p| {
                s.iter().map(move |x| {
                    let mut q = p.clone();
                    q.push(*x);
                    q
                })
            })
            .collect();
    }
    out
}

/// `φ(t) + u ξ(t)` with `ξ` in the graph gauge.
pub fn envelope_point(scene: &Scene, t: &[f64], u: f64) -> Result<Vec<f64>> {
    let tr = Track::new(scene, t, 0)?;
    let xi = tr.lift(&tr.graph_xi_hat()?);
    Ok(tr
        .phi
        .iter()
        .zip(&xi)
        .map(|(p, x)| p.value() + u * x.value())
        .collect())
}

/// Cofactor covector `c_j = [X_1, .., X_n, e_j, ξ]`, so `F(t, x) = Σ c_j (x - φ)_j`.
///
/// Since `X` and `ξ` span `TM`, `c` is the co-normal scaled by `[X, e_{n+2}, ξ]`.
pub fn family_covector(tr: &Track, xi: &JVec) -> JVec {
    let n = tr.n;
    let k = xi[0].order();
    let mut ez: JVec = (0..n + 2).map(|_| Jet::zero(n, k)).collect();
    ez[n + 1] = Jet::constant(n, k, 1.0);
    let mut cols: Vec<JVec> = tr
        .x
        .iter()
        .map(|v| v.iter().map(|c| c.truncate(k)).collect())
        .collect();
    cols.push(ez);
    cols.push(xi.clone());
    let beta = linalg::bracket(&cols);
    tr.conormal().iter().map(|c| &c.truncate(k) * &beta).collect()
}

/// `F(t, ·)` as jets in `t`: returns `(covector c(t), φ(t))`.
pub fn family_jets(scene: &Scene, t0: &[f64], order: usize) -> Result<(JVec, JVec)> {
    let tr = Track::new(scene, t0, order)?;
    let xi = tr.lift(&tr.graph_xi_hat()?);
    Ok((family_covector(&tr, &xi), tr.phi.clone()))
}

/// Jet of `t ↦ F(t, x)`.
pub fn family_germ(scene: &Scene, t0: &[f64], x: &[f64], order: usize) -> Result<Jet<f64>> {
    if x.len() != scene.ambient() {
        return Err(Error::Dimension(format!(
            "point has {} coordinates, ambient dimension is {}",
            x.len(),
            scene.ambient()
        )));
    }
    let (c, phi) = family_jets(scene, t0, order)?;
    let n = scene.n();
    let mut acc = Jet::zero(n, order);
    for j in 0..n + 2 {
        let d = (-&phi[j]).add_scalar(&x[j]);
        acc = &acc + &(&c[j] * &d);
    }
    Ok(acc)
}

/// `F(t, x)` and `(F_{t_1}, .., F_{t_n})`.
pub fn family_value(scene: &Scene, t: &[f64], x: &[f64]) -> Result<(f64, Vec<f64>)> {
    let g = family_germ(scene, t, x, 1)?;
    Ok((g.value(), g.gradient()))
}

/// Real eigenvalues of a square matrix, ascending.
pub fn real_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let scale = a
        .iter()
        .flatten()
        .fold(0.0_f64, |m, x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    let mut out: Vec<f64> = match n {
        0 => Vec::new(),
        1 => vec![a[0][0]],
        2 => {
            let tr = a[0][0] + a[1][1];
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            let disc = tr * tr / 4.0 - det;
            if disc < -1e-18 * scale * scale {
                Vec::new()
            } else {
                let r = disc.max(0.0).sqrt();
                vec![tr / 2.0 - r, tr / 2.0 + r]
            }
        }
        _ => {
            let m = linalg::to_nalgebra(a);
            m.complex_eigenvalues()
                .iter()
                .filter(|z| z.im.abs() <= 1e-9 * scale)
                .map(|z| z.re)
                .collect()
        }
    };
    out.sort_by(|x, y| x.total_cmp(y));
    out
}

/// Shape operator `S₁` at `t` for the graph gauge.
pub fn shape_operator(scene: &Scene, t: &[f64]) -> Result<Vec<Vec<f64>>> {
    Ok(frame::structure_coefficients(scene, t, &Gauge::Graph)?.1.s1)
}

/// `{1/κ}` over the real nonzero eigenvalues `κ` of `S₁`, ascending, deduplicated.
pub fn regression_values(scene: &Scene, t: &[f64]) -> Result<Vec<f64>> {
    Ok(regression_from_s1(&shape_operator(scene, t)?))
}

pub fn regression_from_s1(s1: &[Vec<f64>]) -> Vec<f64> {
    let scale = s1.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()));
    let mut us: Vec<f64> = real_eigenvalues(s1)
        .into_iter()
        .filter(|k| k.abs() > 1e-12 * scale.max(1e-300) && k.abs() > 1e-14)
        .map(|k| 1.0 / k)
        .collect();
    us.sort_by(|x, y| x.total_cmp(y));
    us.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0));
    us
}

/// `det(u S₁ - I)`.
pub fn regression_gap(s1: &[Vec<f64>], u: f64) -> f64 {
    let n = s1.len();
    let m: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| u * s1[i][j] - (i == j) as u8 as f64).collect())
        .collect();
    linalg::det(&m)
}

/// Samples `φ(t) + u ξ(t)` over `t_axes × u_axis`.
pub fn envelope_mesh(scene: &Scene, t_axes: &[Axis], u_axis: Axis) -> Result<Mesh> {
    let n = scene.n();
    if t_axes.len() != n {
        return Err(Error::Dimension(format!(
            "need {} t axes, got {}",
            n,
            t_axes.len()
        )));
    }
    if u_axis.count == 0 {
        return Err(Error::EmptyGrid("u range has no samples".into()));
    }
    if t_axes.iter().any(|a| a.count == 0) {
        return Err(Error::EmptyGrid("a t axis has no samples".into()));
    }
    let ts = grid_points(t_axes);
    let us = u_axis.samples();
    let rows: Vec<std::result::Result<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>), String>> = ts
        .par_iter()
        .map(|t| {
            let go = || -> Result<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
                let (fp, st) = frame::structure_coefficients(scene, t, &Gauge::Graph)?;
                let phi = scene.immersion(t)?;
                Ok((phi, fp.xi, st.s1))
            };
            go().map_err(|e| format!("t = {t:?}: {e}"))
        })
        .collect();
    let dim = n + 2;
    let mut mesh = Mesh {
        dim,
        vertices: Vec::with_capacity(ts.len() * us.len()),
        params: Vec::with_capacity(ts.len() * us.len()),
        faces: Vec::new(),
        regression_gap: Vec::new(),
        singular: Vec::new(),
        diagnostics: Vec::new(),
    };
    for (t, row) in ts.iter().zip(&rows) {
        for &u in &us {
            let mut p = t.clone();
            p.push(u);
            mesh.params.push(p);
            match row {
                Ok((phi, xi, s1)) => {
                    mesh.vertices
                        .push(phi.iter().zip(xi).map(|(a, b)| a + u * b).collect());
                    let gap = regression_gap(s1, u);
                    mesh.regression_gap.push(gap);
                    mesh.singular.push(gap.abs() < SINGULAR_TOL);
                }
                Err(_) => {
                    mesh.vertices.push(vec![f64::NAN; dim]);
                    mesh.regression_gap.push(f64::NAN);
                    mesh.singular.push(false);
                }
            }
        }
        if let Err(msg) = row {
            mesh.diagnostics.push(msg.clone());
        }
    }
    if n == 1 {
        let (ct, cu) = (ts.len(), us.len());
        for i in 0..ct.saturating_sub(1) {
            for j in 0..cu.saturating_sub(1) {
                let v = |a: usize, b: usize| a * cu + b;
                mesh.faces.push([v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)]);
            }
        }
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{build_scene, load_bundled};

    #[test]
    fn envelope_points_of_normal_forms() {
        let a2 = load_bundled("a2").unwrap();
        assert_eq!(envelope_point(&a2, &[0.0], 1.0).unwrap(), vec![0.0, 1.0, 0.0]);
        assert_eq!(envelope_point(&a2, &[0.3], 0.0).unwrap(), a2.immersion(&[0.3]).unwrap());
        let a4 = load_bundled("a4").unwrap();
        assert_eq!(
            envelope_point(&a4, &[0.0, 0.0], 1.0).unwrap(),
            vec![0.0, 0.0, 1.0, 0.0]
        );
    }

    #[test]
    fn family_sign_and_zero() {
        let a2 = load_bundled("a2").unwrap();
        let (f, _) = family_value(&a2, &[0.0], &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(f, 0.0);
        let (f, _) = family_value(&a2, &[0.0], &[0.0, 1.0, 1.0]).unwrap();
        assert_eq!(f, -1.0);
    }

    #[test]
    fn regression_values_of_normal_forms() {
        let s = build_scene("t^2/2 + t^3/6 + t^2*y", "0", 1).unwrap();
        let r = regression_values(&s, &[0.0]).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0] - 0.5).abs() < 1e-12);
        let a4 = load_bundled("a4").unwrap();
        let r = regression_values(&a4, &[0.0, 0.0]).unwrap();
        assert!(r.len() == 1 && (r[0] - 1.0).abs() < 1e-12);
        let flat = build_scene("(t1^2 + t2^2 + y^2)/2", "0", 2).unwrap();
        assert!(regression_values(&flat, &[0.1, 0.2]).unwrap().is_empty());
    }

    #[test]
    fn mesh_counts_and_empty_grid() {
        let a2 = load_bundled("a2").unwrap();
        let m = envelope_mesh(&a2, &[Axis::new(-0.5, 0.5, 10)], Axis::new(0.0, 2.0, 10)).unwrap();
        assert_eq!(m.vertices.len(), 100);
        assert_eq!(m.faces.len(), 81);
        assert!(matches!(
            envelope_mesh(&a2, &[Axis::new(-0.5, 0.5, 10)], Axis::new(0.0, 1.0, 0)),
            Err(Error::EmptyGrid(_))
        ));
    }

    #[test]
    fn axis_parsing() {
        assert_eq!(Axis::parse("-1:1:5").unwrap(), Axis::new(-1.0, 1.0, 5));
        assert!(Axis::parse("1:2").is_err());
        assert!(Axis::parse("a:2:3").is_err());
    }
}
