//! Hyperplane sections through `T_{p0}N`, their Blaschke normals and the
//! Transon plane.
//!
//! The hyperplanes are `H_λ = p0 + span{X_1, .., X_n, λξ(p0) + e_z}` where
//! `ξ` is the Darboux direction in the graph gauge. Each section `M ∩ H_λ`
//! is solved as a graph `s = S(u)` over the affine coordinates `(u, s)` of
//! that basis, and its Blaschke normal is re-embedded through the same basis.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::{frame_jets, Gauge, JVec, Track};
use crate::jet::Jet;
use crate::linalg;
use crate::metricbundle::{affine_normal_plane, blaschke_from_jet};
use crate::scene::Scene;

/// Jet order of the section graphs.
pub const SECTION_ORDER: usize = 4;
pub const DEFAULT_LAMBDAS: [f64; 5] = [-0.2, -0.1, 0.0, 0.1, 0.2];
pub const ANGLE_TOL: f64 = 1e-6;

/// Base point data shared by all sections at `t0`.
struct Base {
    p0: Vec<f64>,
    x: Vec<Vec<f64>>,
    xi: Vec<f64>,
    /// `∂f/∂w` at `p0`.
    fw: Vec<f64>,
}

fn base(scene: &Scene, t0: &[f64]) -> Result<Base> {
    let fr = frame_jets(scene, t0, 0, &Gauge::Graph)?;
    let tr = Track::new(scene, t0, 0)?;
    let v = |j: &[Jet<f64>]| j.iter().map(|c| c.value()).collect::<Vec<f64>>();
    Ok(Base {
        p0: v(&fr.phi),
        x: fr.e.iter().map(|e| v(e)).collect(),
        xi: v(&fr.xi),
        fw: v(&tr.fw),
    })
}

/// `M ∩ H_λ` as the graph `s = S(u)`, a jet at `u = 0`.
#[derive(Debug, Clone)]
pub struct Section {
    pub lambda: f64,
    pub p0: Vec<f64>,
    /// `X_1, .., X_n, λξ + e_z`.
    pub basis: Vec<Vec<f64>>,
    pub jet: Jet<f64>,
}

impl Section {
    /// Ambient point of the section over `u`, from the jet.
    pub fn point(&self, u: &[f64]) -> Vec<f64> {
        let s = self.jet.eval_at(u);
        let n = u.len();
        (0..self.p0.len())
            .map(|r| {
                let mut x = self.p0[r] + s * self.basis[n][r];
                for i in 0..n {
                    x += u[i] * self.basis[i][r];
                }
                x
            })
            .collect()
    }
}

fn solve_section(scene: &Scene, b: &Base, lambda: f64, order: usize) -> Result<Section> {
    let n = scene.n();
    let d: Vec<f64> = (0..n + 2)
        .map(|r| lambda * b.xi[r] + if r == n + 1 { 1.0 } else { 0.0 })
        .collect();
    // ∂G/∂s at the base point, G = z - f(t, y)
    let gs = d[n + 1] - (0..=n).map(|a| b.fw[a] * d[a]).sum::<f64>();
    if gs.abs() < 1e-9 {
        return Err(Error::ReversionFailure(format!(
            "hyperplane with lambda = {lambda} is tangent to the hypersurface"
        )));
    }
    let u: JVec = (0..n).map(|i| Jet::variable(n, order, i, 0.0)).collect();
    let tmpl = Jet::zero(n, order);
    let mut s = Jet::zero(n, order);
    let residual = |s: &Jet<f64>| -> Result<Jet<f64>> {
        let q: JVec = (0..n + 2)
            .map(|r| {
                let mut acc = s.scale(&d[r]).add_scalar(&b.p0[r]);
                for i in 0..n {
                    acc = &acc + &u[i].scale(&b.x[i][r]);
                }
                acc
            })
            .collect();
        let fq = scene.f().eval(&q[..=n], &tmpl)?;
        Ok(&q[n + 1] - &fq)
    };
    for _ in 0..order + 2 {
        let g = residual(&s)?;
        s = &s - &g.scale(&(1.0 / gs));
    }
    let g = residual(&s)?;
    let size = s.scale_max().max(1.0);
    if g.scale_max() > 1e-9 * size || !s.coefficients().iter().all(|c| c.is_finite()) {
        return Err(Error::ReversionFailure(format!(
            "implicit solve for lambda = {lambda} left residual {:e}",
            g.scale_max()
        )));
    }
    let mut basis = b.x.clone();
    basis.push(d);
    Ok(Section {
        lambda,
        p0: b.p0.clone(),
        basis,
        jet: s,
    })
}

/// The section `M ∩ H_λ` at `φ(t0)` to order 4.
pub fn hyperplane_section(scene: &Scene, t0: &[f64], lambda: f64) -> Result<Section> {
    solve_section(scene, &base(scene, t0)?, lambda, SECTION_ORDER)
}

fn embed(basis: &[Vec<f64>], c: &[f64]) -> Vec<f64> {
    let dim = basis[0].len();
    (0..dim)
        .map(|r| basis.iter().zip(c).map(|(v, a)| v[r] * a).sum())
        .collect()
}

fn section_normal(sec: &Section) -> Result<Vec<f64>> {
    let n = sec.basis.len() - 1;
    let bd = blaschke_from_jet(&sec.jet, &vec![0.0; n]).map_err(|e| match e {
        Error::DegenerateHypersurface { det } => Error::DegenerateSection { det },
        e => e,
    })?;
    Ok(embed(&sec.basis, &bd.zeta))
}

/// Blaschke normal of `M ∩ H_λ` at `φ(t0)`, in ambient coordinates.
pub fn section_blaschke_normal(scene: &Scene, t0: &[f64], lambda: f64) -> Result<Vec<f64>> {
    section_normal(&hyperplane_section(scene, t0, lambda)?)
}

fn normals(scene: &Scene, t0: &[f64], lambdas: &[f64]) -> Result<Vec<Vec<f64>>> {
    let b = base(scene, t0)?;
    lambdas
        .par_iter()
        .map(|l| section_normal(&solve_section(scene, &b, *l, SECTION_ORDER)?))
        .collect()
}

fn unit(v: &[f64]) -> Vec<f64> {
    let r = linalg::norm(v);
    v.iter().map(|x| x / r).collect()
}

/// Orthonormal basis of the plane spanned by `η(H_0)` and `η(H_0.1)`.
pub fn transon_plane(scene: &Scene, t0: &[f64]) -> Result<Vec<Vec<f64>>> {
    let ns = normals(scene, t0, &[0.0, 0.1])?;
    let q = linalg::orthonormalize(&ns, 1e-9);
    if q.len() < 2 {
        return Err(Error::DegenerateSection { det: 0.0 });
    }
    Ok(q)
}

/// Best-fit 2-plane through the normalized directions and the largest
/// distance of any direction from it.
fn fit_plane(dirs: &[Vec<f64>]) -> (Vec<Vec<f64>>, f64) {
    let dim = dirs[0].len();
    let m = nalgebra::DMatrix::from_fn(dim, dirs.len(), |r, c| dirs[c][r]);
    let svd = m.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|a, b| svd.singular_values[*b].total_cmp(&svd.singular_values[*a]));
    let plane: Vec<Vec<f64>> = order[..2]
        .iter()
        .map(|&k| (0..dim).map(|r| u[(r, k)]).collect())
        .collect();
    (plane.clone(), max_distance(&plane, dirs))
}

fn max_distance(plane: &[Vec<f64>], dirs: &[Vec<f64>]) -> f64 {
    dirs.iter()
        .map(|v| {
            let mut w = v.clone();
            for q in plane {
                let c = linalg::dot(q, v);
                for (x, y) in w.iter_mut().zip(q) {
                    *x -= c * y;
                }
            }
            linalg::norm(&w)
        })
        .fold(0.0, f64::max)
}

/// Largest distance of the normalized `η(H_λ)` from their best-fit plane.
pub fn transon_planarity_residual(scene: &Scene, t0: &[f64], lambdas: &[f64]) -> Result<f64> {
    if lambdas.len() < 3 {
        return Err(Error::NeedMoreSections {
            needed: 3,
            got: lambdas.len(),
        });
    }
    let dirs: Vec<Vec<f64>> = normals(scene, t0, lambdas)?.iter().map(|v| unit(v)).collect();
    Ok(fit_plane(&dirs).1)
}

/// Blaschke normal at `p0` of the projection of `N` along `ξ(p0)` into the
/// hyperplane `p0 + span{X_1, .., X_n, e_z}`.
pub fn projected_normal(scene: &Scene, t0: &[f64]) -> Result<Vec<f64>> {
    let n = scene.n();
    let k = SECTION_ORDER;
    let b = base(scene, t0)?;
    let tr = Track::new(scene, t0, k)?;
    let mut ez = vec![0.0; n + 2];
    ez[n + 1] = 1.0;
    let mut cols = b.x.clone();
    cols.push(ez.clone());
    cols.push(b.xi.clone());
    let m = nalgebra::DMatrix::from_fn(n + 2, n + 2, |r, c| cols[c][r]);
    let inv = m.try_inverse().ok_or(Error::SingularBasis {
        det: linalg::bracket(&cols),
    })?;
    // coordinates of φ(t) - p0 in {X, e_z, ξ}; a = first n, b = next
    let coord: JVec = (0..n + 1)
        .map(|i| {
            let mut acc = Jet::zero(n, k);
            for r in 0..n + 2 {
                acc = &acc + &tr.phi[r].add_scalar(&-b.p0[r]).scale(&inv[(i, r)]);
            }
            acc
        })
        .collect();
    // invert t ↦ a(t); its linear part is the identity
    let a_vars: JVec = (0..n).map(|i| Jet::variable(n, k, i, 0.0)).collect();
    let mut delta = a_vars.clone();
    for _ in 0..k + 1 {
        let next: Result<JVec> = (0..n)
            .map(|i| {
                let ai = coord[i].compose(&delta)?;
                Ok(&a_vars[i] - &(&ai - &delta[i]))
            })
            .collect();
        delta = next?;
    }
    let graph = coord[n].compose(&delta)?;
    let bd = blaschke_from_jet(&graph, &vec![0.0; n]).map_err(|e| match e {
        Error::DegenerateHypersurface { det } => Error::DegenerateSection { det },
        e => e,
    })?;
    let mut basis = b.x.clone();
    basis.push(ez);
    Ok(embed(&basis, &bd.zeta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlaneVerdict {
    Coincide,
    Distinct,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransonReport {
    pub p0: Vec<f64>,
    pub t: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub normals: Vec<Vec<f64>>,
    /// Best-fit plane of the normalized section normals.
    pub plane_basis: Vec<Vec<f64>>,
    pub residual: f64,
    /// Orthonormal basis of `span{ξ, η}` for the requested gauge.
    pub normal_plane: Vec<Vec<f64>>,
    pub principal_angles: Vec<f64>,
    pub verdict: PlaneVerdict,
}

/// Principal angles between the Transon plane and the affine normal plane.
pub fn transon_vs_normal_plane(scene: &Scene, t: &[f64], gauge: &Gauge) -> Result<(Vec<f64>, PlaneVerdict)> {
    let tp = transon_plane(scene, t)?;
    let (xi, eta) = affine_normal_plane(scene, t, gauge)?;
    let np = linalg::orthonormalize(&[xi, eta], 1e-12);
    let angles = linalg::principal_angles(&tp, &np);
    Ok((angles.clone(), verdict(&angles)))
}

fn verdict(angles: &[f64]) -> PlaneVerdict {
    if angles.iter().all(|a| *a < ANGLE_TOL) {
        PlaneVerdict::Coincide
    } else {
        PlaneVerdict::Distinct
    }
}

pub fn transon_report(scene: &Scene, t: &[f64], lambdas: &[f64], gauge: &Gauge) -> Result<TransonReport> {
    if lambdas.len() < 3 {
        return Err(Error::NeedMoreSections {
            needed: 3,
            got: lambdas.len(),
        });
    }
    let ns = normals(scene, t, lambdas)?;
    let dirs: Vec<Vec<f64>> = ns.iter().map(|v| unit(v)).collect();
    let (plane, residual) = fit_plane(&dirs);
    let (xi, eta) = affine_normal_plane(scene, t, gauge)?;
    let normal_plane = linalg::orthonormalize(&[xi, eta], 1e-12);
    let angles = linalg::principal_angles(&transon_plane(scene, t)?, &normal_plane);
    Ok(TransonReport {
        p0: base(scene, t)?.p0,
        t: t.to_vec(),
        lambdas: lambdas.to_vec(),
        normals: ns,
        plane_basis: plane,
        residual,
        normal_plane,
        verdict: verdict(&angles),
        principal_angles: angles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metricbundle::{blaschke_data, tau_coefficients};
    use crate::scene::{build_scene, load_bundled};

    fn monkey() -> Scene {
        Scene::new("(x^2 + y^2)/2 + 3*(x^3 - 3*x*y^2)/6", "0", 1, Some(vec!["x".into(), "y".into()])).unwrap()
    }

    fn cubic() -> Scene {
        build_scene(
            "(t1^2 + 2*t2^2 + y^2)/2 + t1*t2*y/3 + t1^3/5 - t2^2*y/4 + y^3/7",
            "t1*t2/2 + t1^2/5",
            2,
        )
        .unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn monkey_section_normal() {
        let v = section_blaschke_normal(&monkey(), &[0.0], 0.0).unwrap();
        assert!(close(&v, &[-1.0, 0.0, 1.0], 1e-12), "{v:?}");
    }

    #[test]
    fn rotational_scene_sections() {
        let s = build_scene("(t1^2 + t2^2 + y^2)/2", "0", 2).unwrap();
        for l in DEFAULT_LAMBDAS {
            let sec = hyperplane_section(&s, &[0.0, 0.0], l).unwrap();
            for d in 0..=3 {
                for i in sec.jet.layout().degree_range(d) {
                    let m = sec.jet.layout().monomial(i);
                    let want = if d == 2 && m.iter().any(|e| *e == 2) { 0.5 } else { 0.0 };
                    assert!((sec.jet.coefficients()[i] - want).abs() < 1e-14);
                }
            }
            let v = section_normal(&sec).unwrap();
            assert!(v[0].abs() < 1e-14 && v[1].abs() < 1e-14, "{v:?}");
        }
        assert!(transon_planarity_residual(&s, &[0.0, 0.0], &DEFAULT_LAMBDAS).unwrap() < 1e-12);
    }

    #[test]
    fn section_jet_matches_root_finding() {
        let s = cubic();
        let t0 = [0.1, -0.05];
        let sec = hyperplane_section(&s, &t0, 0.2).unwrap();
        let d = &sec.basis[2];
        for u in [[1e-2, 0.0], [0.0, -1e-2], [7e-3, 5e-3]] {
            // Newton on z - f(t, y) along the line p0 + Xu + s d
            let at = |s_: f64| {
                let mut q = sec.p0.clone();
                for r in 0..4 {
                    q[r] += u[0] * sec.basis[0][r] + u[1] * sec.basis[1][r] + s_ * d[r];
                }
                q[3] - s.f().eval(&q[..3], &0.0).unwrap()
            };
            let mut x = 0.0;
            for _ in 0..50 {
                let h = 1e-7;
                x -= at(x) / ((at(x + h) - at(x - h)) / (2.0 * h));
            }
            assert!((sec.jet.eval_at(&u) - x).abs() < 1e-8, "{} vs {x}", sec.jet.eval_at(&u));
        }
    }

    #[test]
    fn sections_are_transversal() {
        let s = cubic();
        let sec = hyperplane_section(&s, &[0.0, 0.0], 0.1).unwrap();
        let v = section_normal(&sec).unwrap();
        let mut cols = sec.basis[..2].to_vec();
        cols.push(v);
        assert_eq!(linalg::rank(&cols, 1e-9), 3);
    }

    #[test]
    fn planarity_and_projection() {
        for s in [cubic(), load_bundled("nonflat").unwrap(), load_bundled("hyperquadric").unwrap()] {
            for t in [[0.0, 0.0], [0.1, 0.05]] {
                let r = transon_planarity_residual(&s, &t, &DEFAULT_LAMBDAS).unwrap();
                assert!(r < 1e-6, "{r}");
                let plane = transon_plane(&s, &t).unwrap();
                let p = unit(&projected_normal(&s, &t).unwrap());
                assert!(max_distance(&plane, &[p]) < 1e-6);
            }
        }
        assert!(matches!(
            transon_planarity_residual(&cubic(), &[0.0, 0.0], &[0.1]),
            Err(Error::NeedMoreSections { needed: 3, got: 1 })
        ));
    }

    #[test]
    fn monkey_transon_plane() {
        let plane = transon_plane(&monkey(), &[0.0]).unwrap();
        let want = linalg::orthonormalize(&[vec![0.0, 1.0, 0.0], vec![-1.0, 0.0, 1.0]], 1e-12);
        assert!(linalg::principal_angles(&plane, &want).iter().all(|a| *a < 1e-9));
        let (_, v) = transon_vs_normal_plane(&monkey(), &[0.0], &Gauge::Graph).unwrap();
        assert_eq!(v, PlaneVerdict::Coincide);
    }

    #[test]
    fn planes_against_parallelism() {
        let s = load_bundled("nonflat").unwrap();
        let t = [0.1, 0.1];
        assert!(tau_coefficients(&s, &t).unwrap().iter().any(|x| x.abs() > 1e-3));
        let (a, v) = transon_vs_normal_plane(&s, &t, &Gauge::Graph).unwrap();
        assert_eq!(v, PlaneVerdict::Distinct);
        assert!(a.iter().cloned().fold(0.0, f64::max) > 1e-4);

        let q = load_bundled("hyperquadric").unwrap();
        let t = [0.1, -0.15];
        let (_, v) = transon_vs_normal_plane(&q, &t, &Gauge::Blaschke).unwrap();
        assert_eq!(v, PlaneVerdict::Coincide);
        let zeta = unit(&blaschke_data(&q, &t).unwrap().zeta);
        assert!(max_distance(&transon_plane(&q, &t).unwrap(), &[zeta]) < 1e-6);
    }
}
