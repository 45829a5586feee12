//! Small dense linear algebra over floats and jets.

use crate::jet::Jet;

/// Entries usable in Gaussian elimination.
pub trait Scalar: Clone {
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    /// Division by an element whose leading value is nonzero.
    fn div(&self, o: &Self) -> Self;
    /// Magnitude of the leading value, for pivoting.
    fn size(&self) -> f64;
}

impl Scalar for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn one_like(&self) -> Self {
        1.0
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn size(&self) -> f64 {
        self.abs()
    }
}

impl Scalar for Jet<f64> {
    fn zero_like(&self) -> Self {
        Jet::zero(self.vars(), self.order())
    }
    fn one_like(&self) -> Self {
        Jet::constant(self.vars(), self.order(), 1.0)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn size(&self) -> f64 {
        self.value().abs()
    }
}

pub type Mat<S> = Vec<Vec<S>>;

/// Product of the Euclidean row norms (leading values), used as a determinant scale.
pub fn row_norm_product<S: Scalar>(a: &Mat<S>) -> f64 {
    a.iter()
        .map(|r| r.iter().map(|x| x.size() * x.size()).sum::<f64>().sqrt())
        .product()
}

/// Solves `a · x = b` column by column; returns `None` when a pivot vanishes.
///
/// Partial pivoting on leading values, ties broken by the lowest row index.
pub fn solve<S: Scalar>(a: &Mat<S>, b: &Mat<S>) -> Option<Mat<S>> {
    let n = a.len();
    let m = b.first().map_or(0, |r| r.len());
    let mut a = a.clone();
    let mut b = b.clone();
    let scale = row_norm_product(&a).max(f64::MIN_POSITIVE);
    let tol = 1e-14 * scale.powf(1.0 / n.max(1) as f64);
    for col in 0..n {
        let mut best = col;
        for r in col + 1..n {
            if a[r][col].size() > a[best][col].size() {
                best = r;
            }
        }
        if a[best][col].size() <= tol {
            return None;
        }
        a.swap(col, best);
        b.swap(col, best);
        for r in col + 1..n {
            let factor = a[r][col].div(&a[col][col]);
            for c in col..n {
                let v = a[r][c].sub(&factor.mul(&a[col][c]));
                a[r][c] = v;
            }
            for c in 0..m {
                let v = b[r][c].sub(&factor.mul(&b[col][c]));
                b[r][c] = v;
            }
        }
    }
    let mut x = b.clone();
    for row in (0..n).rev() {
        for c in 0..m {
            let mut acc = b[row][c].clone();
            for k in row + 1..n {
                acc = acc.sub(&a[row][k].mul(&x[k][c]));
            }
            x[row][c] = acc.div(&a[row][row]);
        }
    }
    Some(x)
}

/// Determinant by elimination (sign tracked through row swaps).
pub fn det<S: Scalar>(a: &Mat<S>) -> S {
    let n = a.len();
    let one = a[0][0].one_like();
    let mut a = a.clone();
    let mut d = one;
    for col in 0..n {
        let mut best = col;
        for r in col + 1..n {
            if a[r][col].size() > a[best][col].size() {
                best = r;
            }
        }
        if a[best][col].size() == 0.0 {
            return det_expansion(&a);
        }
        if best != col {
            a.swap(col, best);
            d = d.zero_like().sub(&d);
        }
        d = d.mul(&a[col][col]);
        for r in col + 1..n {
            let factor = a[r][col].div(&a[col][col]);
            for c in col..n {
                let v = a[r][c].sub(&factor.mul(&a[col][c]));
                a[r][c] = v;
            }
        }
    }
    d
}

/// Laplace expansion; used when elimination hits a zero leading value,
/// which for jets does not mean the determinant jet is zero.
fn det_expansion<S: Scalar>(a: &Mat<S>) -> S {
    let n = a.len();
    if n == 1 {
        return a[0][0].clone();
    }
    let mut acc = a[0][0].zero_like();
    for c in 0..n {
        let minor: Mat<S> = a[1..]
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(k, _)| *k != c)
                    .map(|(_, v)| v.clone())
                    .collect()
            })
            .collect();
        let term = a[0][c].mul(&det_expansion(&minor));
        acc = if c % 2 == 0 { acc.add(&term) } else { acc.sub(&term) };
    }
    acc
}

/// Determinant of the matrix whose columns are the given vectors.
pub fn bracket<S: Scalar>(cols: &[Vec<S>]) -> S {
    let n = cols.len();
    let a: Mat<S> = (0..n)
        .map(|r| cols.iter().map(|c| c[r].clone()).collect())
        .collect();
    det(&a)
}

/// Solves for the coefficients of `v` in the basis given by `cols`.
pub fn coordinates<S: Scalar>(cols: &[Vec<S>], v: &[Vec<S>]) -> Option<Mat<S>> {
    let n = cols.len();
    let a: Mat<S> = (0..n)
        .map(|r| cols.iter().map(|c| c[r].clone()).collect())
        .collect();
    let b: Mat<S> = (0..n)
        .map(|r| v.iter().map(|c| c[r].clone()).collect())
        .collect();
    solve(&a, &b)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn to_nalgebra(a: &[Vec<f64>]) -> nalgebra::DMatrix<f64> {
    let r = a.len();
    let c = a.first().map_or(0, |x| x.len());
    nalgebra::DMatrix::from_fn(r, c, |i, j| a[i][j])
}

/// Singular values in descending order.
pub fn singular_values(a: &[Vec<f64>]) -> Vec<f64> {
    let m = to_nalgebra(a);
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Numerical rank with a threshold relative to the largest singular value.
pub fn rank(a: &[Vec<f64>], rel: f64) -> usize {
    let s = singular_values(a);
    let top = s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rel * top).count()
}

/// Orthonormal basis (Gram–Schmidt, index order) of the span of `vs`.
pub fn orthonormalize(vs: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vs {
        let mut w = v.clone();
        for _ in 0..2 {
            for e in &out {
                let c = dot(&w, e);
                for (wi, ei) in w.iter_mut().zip(e) {
                    *wi -= c * ei;
                }
            }
        }
        let nw = norm(&w);
        if nw > tol * norm(v).max(1.0) {
            out.push(w.iter().map(|x| x / nw).collect());
        }
    }
    out
}

/// Principal angles (ascending) between the spans of two orthonormal bases.
pub fn principal_angles(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<f64> {
    let m: Vec<Vec<f64>> = a
        .iter()
        .map(|x| b.iter().map(|y| dot(x, y)).collect())
        .collect();
    let mut s = singular_values(&m);
    s.iter_mut().for_each(|x| *x = x.min(1.0));
    let mut angles: Vec<f64> = s.iter().map(|x| x.acos()).collect();
    // acos loses accuracy near 0; refine with the sine of the residual
    for (angle, ai) in angles.iter_mut().zip(residual_sines(a, b)) {
        if *angle < 1e-4 {
            *angle = ai.asin();
        }
    }
    angles.sort_by(|x, y| x.total_cmp(y));
    angles
}

fn residual_sines(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<f64> {
    // singular values of (I - B Bᵀ) A give the sines of the principal angles
    let r: Vec<Vec<f64>> = a
        .iter()
        .map(|x| {
            let mut w = x.clone();
            for e in b {
                let c = dot(x, e);
                for (wi, ei) in w.iter_mut().zip(e) {
                    *wi -= c * ei;
                }
            }
            w
        })
        .collect();
    let mut s = singular_values(&r);
    s.iter_mut().for_each(|x| *x = x.min(1.0));
    s.sort_by(|x, y| x.total_cmp(y));
    s
}
