//! Truncated multivariate Taylor expansions.
//!
//! A [`Jet`] stores the Taylor coefficients `∂^α u(p) / α!` of a function at a
//! point `p`, for every multi-index with `|α| ≤ K`. Coefficients are indexed by
//! multi-indices in graded lexicographic order: degree first, then exponent
//! vectors in descending lexicographic order, so `1, x1, x2, x1^2, x1 x2, x2^2, ...`.
//!
//! All arithmetic truncates at the smaller order of the two operands.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::JetError;

/// Coefficient ring of a jet.
pub trait Coeff:
    Clone
    + PartialEq
    + fmt::Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    fn from_rational(r: &BigRational) -> Self;
    fn is_zero(&self) -> bool;
    /// Rough magnitude, used for pivot selection.
    fn magnitude(&self) -> f64;
}

impl Coeff for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_rational(r: &BigRational) -> Self {
        rational_to_f64(r)
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Coeff for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn magnitude(&self) -> f64 {
        rational_to_f64(&self.abs())
    }
}

pub(crate) fn rational_to_f64(r: &BigRational) -> f64 {
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => r.to_f64().unwrap_or(f64::NAN),
    }
}

/// Monomial bookkeeping shared by all jets with the same `(vars, order)`.
#[derive(Debug)]
pub struct Layout {
    vars: usize,
    order: usize,
    monomials: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
    degree_start: Vec<usize>,
    products: OnceLock<Vec<(u32, u32, u32)>>,
}

impl Layout {
    fn build(vars: usize, order: usize) -> Layout {
        let mut monomials = Vec::new();
        let mut degree_start = Vec::with_capacity(order + 2);
        for d in 0..=order {
            degree_start.push(monomials.len());
            let mut exps = vec![0u32; vars];
            push_graded(&mut monomials, &mut exps, 0, d as u32);
        }
        degree_start.push(monomials.len());
        let index = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        Layout {
            vars,
            order,
            monomials,
            index,
            degree_start,
            products: OnceLock::new(),
        }
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomial(&self, i: usize) -> &[u32] {
        &self.monomials[i]
    }

    pub fn monomials(&self) -> &[Vec<u32>] {
        &self.monomials
    }

    pub fn index_of(&self, exps: &[u32]) -> Option<usize> {
        self.index.get(exps).copied()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.monomials[i].iter().sum::<u32>() as usize
    }

    /// Range of indices holding monomials of total degree `d`.
    pub fn degree_range(&self, d: usize) -> std::ops::Range<usize> {
        self.degree_start[d]..self.degree_start[d + 1]
    }

    fn products(&self) -> &[(u32, u32, u32)] {
        self.products.get_or_init(|| {
            let mut table = Vec::new();
            let mut sum = vec![0u32; self.vars];
            for (i, a) in self.monomials.iter().enumerate() {
                let da = self.degree(i);
                for j in 0..self.degree_start[self.order - da + 1] {
                    for (s, (x, y)) in sum.iter_mut().zip(a.iter().zip(&self.monomials[j])) {
                        *s = x + y;
                    }
                    let k = self.index[&sum];
                    table.push((i as u32, j as u32, k as u32));
                }
            }
            table
        })
    }
}

fn push_graded(out: &mut Vec<Vec<u32>>, exps: &mut [u32], pos: usize, remaining: u32) {
    if pos + 1 == exps.len() {
        exps[pos] = remaining;
        out.push(exps.to_vec());
        exps[pos] = 0;
        return;
    }
    if exps.is_empty() {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for e in (0..=remaining).rev() {
        exps[pos] = e;
        push_graded(out, exps, pos + 1, remaining - e);
    }
    exps[pos] = 0;
}

/// Shared layout for `(vars, order)`.
pub fn layout(vars: usize, order: usize) -> Arc<Layout> {
    thread_local! {
        static LOCAL: std::cell::RefCell<HashMap<(usize, usize), Arc<Layout>>> =
            std::cell::RefCell::new(HashMap::new());
    }
    if let Some(l) = LOCAL.with(|c| c.borrow().get(&(vars, order)).cloned()) {
        return l;
    }
    let l = shared_layout(vars, order);
    LOCAL.with(|c| c.borrow_mut().insert((vars, order), l.clone()));
    l
}

fn shared_layout(vars: usize, order: usize) -> Arc<Layout> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Layout>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry((vars, order))
        .or_insert_with(|| Arc::new(Layout::build(vars, order)))
        .clone()
}

/// Truncated Taylor expansion in `vars` displacement variables.
#[derive(Clone)]
pub struct Jet<T: Coeff = f64> {
    layout: Arc<Layout>,
    coef: Vec<T>,
}

impl<T: Coeff> fmt::Debug for Jet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut list = f.debug_map();
        for (m, c) in self.layout.monomials.iter().zip(&self.coef) {
            if !c.is_zero() {
                list.entry(m, c);
            }
        }
        list.finish()
    }
}

impl<T: Coeff> PartialEq for Jet<T> {
    fn eq(&self, other: &Self) -> bool {
        self.vars() == other.vars() && self.order() == other.order() && self.coef == other.coef
    }
}

impl<T: Coeff> Jet<T> {
    pub fn zero(vars: usize, order: usize) -> Self {
        let layout = layout(vars, order);
        let coef = vec![T::zero(); layout.len()];
        Jet { layout, coef }
    }

    pub fn constant(vars: usize, order: usize, value: T) -> Self {
        let mut j = Self::zero(vars, order);
        j.coef[0] = value;
        j
    }

    /// Jet of the coordinate function `p_var + δ_var`.
    pub fn variable(vars: usize, order: usize, var: usize, value: T) -> Self {
        assert!(var < vars, "variable index out of range");
        let mut j = Self::constant(vars, order, value);
        if order >= 1 {
            j.coef[1 + var] = T::one();
        }
        j
    }

    pub fn from_coefficients(vars: usize, order: usize, coef: Vec<T>) -> Result<Self, JetError> {
        let layout = layout(vars, order);
        if coef.len() != layout.len() {
            return Err(JetError::ShapeMismatch(format!(
                "expected {} coefficients for {} variables at order {}, got {}",
                layout.len(),
                vars,
                order,
                coef.len()
            )));
        }
        Ok(Jet { layout, coef })
    }

    pub fn vars(&self) -> usize {
        self.layout.vars
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coef
    }

    pub fn coefficients_mut(&mut self) -> &mut [T] {
        &mut self.coef
    }

    /// Coefficient of the monomial `δ^α`; zero above the stored order.
    pub fn coeff(&self, alpha: &[u32]) -> T {
        self.layout
            .index_of(alpha)
            .map(|i| self.coef[i].clone())
            .unwrap_or_else(T::zero)
    }

    pub fn set_coeff(&mut self, alpha: &[u32], value: T) {
        if let Some(i) = self.layout.index_of(alpha) {
            self.coef[i] = value;
        }
    }

    pub fn value(&self) -> T {
        self.coef[0].clone()
    }

    /// Same jet with the constant term replaced.
    pub fn with_value(&self, value: T) -> Self {
        let mut j = self.clone();
        j.coef[0] = value;
        j
    }

    /// Nilpotent part (constant term removed).
    pub fn nilpotent(&self) -> Self {
        self.with_value(T::zero())
    }

    pub fn truncate(&self, order: usize) -> Self {
        if order >= self.order() {
            return self.clone();
        }
        let layout = layout(self.vars(), order);
        let coef = self.coef[..layout.len()].to_vec();
        Jet { layout, coef }
    }

    pub fn lift(&self, order: usize) -> Self {
        if order <= self.order() {
            return self.truncate(order);
        }
        let mut j = Self::zero(self.vars(), order);
        j.coef[..self.coef.len()].clone_from_slice(&self.coef);
        j
    }

    fn aligned(a: &Self, b: &Self) -> (Self, Self) {
        assert_eq!(a.vars(), b.vars(), "jets over different variable sets");
        if a.order() == b.order() {
            (a.clone(), b.clone())
        } else {
            let k = a.order().min(b.order());
            (a.truncate(k), b.truncate(k))
        }
    }

    pub fn scale(&self, s: &T) -> Self {
        Jet {
            layout: self.layout.clone(),
            coef: self.coef.iter().map(|c| c.clone() * s.clone()).collect(),
        }
    }

    pub fn add_scalar(&self, s: &T) -> Self {
        let mut j = self.clone();
        j.coef[0] = j.coef[0].clone() + s.clone();
        j
    }

    fn mul_ref(&self, other: &Self) -> Self {
        assert_eq!(self.vars(), other.vars(), "jets over different variable sets");
        let order = self.order().min(other.order());
        let layout = if self.order() == order {
            self.layout.clone()
        } else {
            other.layout.clone()
        };
        let n = layout.len();
        let (a, b) = (&self.coef[..n], &other.coef[..n]);
        let mut out = vec![T::zero(); layout.len()];
        for &(i, j, k) in layout.products() {
            let (x, y) = (&a[i as usize], &b[j as usize]);
            if x.is_zero() || y.is_zero() {
                continue;
            }
            let k = k as usize;
            out[k] = out[k].clone() + x.clone() * y.clone();
        }
        Jet { layout, coef: out }
    }

    pub fn powi(&self, e: u32) -> Self {
        let mut result = Self::constant(self.vars(), self.order(), T::one());
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul_ref(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_ref(&base);
            }
        }
        result
    }

    /// `Σ_k c_k (self - self(0))^k`, the composition of a univariate Taylor
    /// series with this jet.
    pub fn compose_series(&self, series: &[T]) -> Self {
        let nil = self.nilpotent();
        let mut acc = Self::zero(self.vars(), self.order());
        for c in series.iter().take(self.order() + 1).rev() {
            acc = acc.mul_ref(&nil).add_scalar(c);
        }
        acc
    }

    pub fn recip(&self) -> Result<Self, JetError> {
        let a0 = self.value();
        if a0.is_zero() {
            return Err(JetError::Domain("reciprocal of a jet with zero value".into()));
        }
        let inv = T::one() / a0;
        let mut series = Vec::with_capacity(self.order() + 1);
        let mut c = inv.clone();
        for _ in 0..=self.order() {
            series.push(c.clone());
            c = -(c * inv.clone());
        }
        Ok(self.compose_series(&series))
    }

    pub fn checked_div(&self, other: &Self) -> Result<Self, JetError> {
        Ok(self.mul_ref(&other.recip()?))
    }

    /// Partial derivative in `var`; the result has order `K - 1`.
    pub fn derivative(&self, var: usize) -> Self {
        assert!(var < self.vars());
        let order = self.order().saturating_sub(1);
        let out_layout = layout(self.vars(), order);
        let mut out = vec![T::zero(); out_layout.len()];
        if self.order() == 0 {
            return Jet {
                layout: out_layout,
                coef: out,
            };
        }
        let mut shifted = vec![0u32; self.vars()];
        for (k, m) in out_layout.monomials.iter().enumerate() {
            shifted.copy_from_slice(m);
            shifted[var] += 1;
            let i = self.layout.index[&shifted];
            out[k] = self.coef[i].clone() * T::from_i64(shifted[var] as i64);
        }
        Jet {
            layout: out_layout,
            coef: out,
        }
    }

    /// Gradient at the base point.
    pub fn gradient(&self) -> Vec<T> {
        (0..self.vars())
            .map(|i| {
                if self.order() >= 1 {
                    self.coef[1 + i].clone()
                } else {
                    T::zero()
                }
            })
            .collect()
    }

    /// Antiderivative in `var` vanishing on `δ_var = 0`; order grows by one.
    pub fn integrate(&self, var: usize) -> Self {
        let out_layout = layout(self.vars(), self.order() + 1);
        let mut out = vec![T::zero(); out_layout.len()];
        let mut shifted = vec![0u32; self.vars()];
        for (i, m) in self.layout.monomials.iter().enumerate() {
            shifted.copy_from_slice(m);
            shifted[var] += 1;
            let k = out_layout.index[&shifted];
            out[k] = self.coef[i].clone() / T::from_i64(shifted[var] as i64);
        }
        Jet {
            layout: out_layout,
            coef: out,
        }
    }

    /// Substitutes displacement jets for each variable: `Σ_α c_α Π inner_i^α_i`.
    ///
    /// Every inner jet must have zero constant term (it is a displacement of
    /// the outer base point).
    pub fn compose(&self, inner: &[Jet<T>]) -> Result<Jet<T>, JetError> {
        if inner.len() != self.vars() {
            return Err(JetError::ShapeMismatch(format!(
                "outer jet has {} variables, {} inner jets supplied",
                self.vars(),
                inner.len()
            )));
        }
        let Some(first) = inner.first() else {
            return Err(JetError::ShapeMismatch("no inner jets supplied".into()));
        };
        let (vars, mut order) = (first.vars(), first.order());
        for j in inner {
            if j.vars() != vars {
                return Err(JetError::ShapeMismatch(
                    "inner jets have different variable counts".into(),
                ));
            }
            if j.value().magnitude() > 0.0 {
                return Err(JetError::ShapeMismatch(
                    "inner displacement jets must vanish at the base point".into(),
                ));
            }
            order = order.min(j.order());
        }
        // outer monomials above its own order are unknown
        order = order.min(self.order());
        let inner: Vec<Jet<T>> = inner.iter().map(|j| j.truncate(order)).collect();
        // powers[v][e] = inner[v]^e
        let mut powers: Vec<Vec<Jet<T>>> = Vec::with_capacity(inner.len());
        for j in &inner {
            let mut p = vec![Jet::constant(vars, order, T::one())];
            for e in 1..=self.order() {
                let next = p[e - 1].mul_ref(j);
                p.push(next);
            }
            powers.push(p);
        }
        let mut acc = Jet::zero(vars, order);
        for (m, c) in self.layout.monomials.iter().zip(&self.coef) {
            if c.is_zero() {
                continue;
            }
            let deg: u32 = m.iter().sum();
            if deg as usize > order {
                // each inner factor has no constant term, so the product vanishes
                continue;
            }
            let mut term = Jet::constant(vars, order, c.clone());
            for (v, &e) in m.iter().enumerate() {
                if e > 0 {
                    term = term.mul_ref(&powers[v][e as usize]);
                }
            }
            acc = &acc + &term;
        }
        Ok(acc)
    }

    /// Linear change of displacement variables `δ = A s` (row-major `A`, `vars × new_vars`).
    pub fn linear_substitution(&self, a: &[Vec<T>], new_vars: usize) -> Result<Self, JetError> {
        if a.len() != self.vars() || a.iter().any(|r| r.len() != new_vars) {
            return Err(JetError::ShapeMismatch(
                "linear substitution matrix has the wrong shape".into(),
            ));
        }
        let inner: Vec<Jet<T>> = a
            .iter()
            .map(|row| {
                let mut j = Jet::zero(new_vars, self.order());
                if self.order() >= 1 {
                    for (k, c) in row.iter().enumerate() {
                        j.coef[1 + k] = c.clone();
                    }
                }
                j
            })
            .collect();
        if inner.is_empty() {
            return Ok(Jet::constant(new_vars, self.order(), self.value()));
        }
        self.compose(&inner)
    }

    /// Coefficients of total degree `d` paired with their exponents.
    pub fn homogeneous_part(&self, d: usize) -> Vec<(&[u32], &T)> {
        if d > self.order() {
            return Vec::new();
        }
        self.layout
            .degree_range(d)
            .map(|i| (self.layout.monomials[i].as_slice(), &self.coef[i]))
            .collect()
    }

    pub fn map<U: Coeff>(&self, f: impl Fn(&T) -> U) -> Jet<U> {
        Jet {
            layout: self.layout.clone(),
            coef: self.coef.iter().map(f).collect(),
        }
    }
}

impl Jet<f64> {
    fn checked_positive(&self, what: &str) -> Result<f64, JetError> {
        let a0 = self.value();
        if a0.is_nan() || a0 <= 0.0 {
            return Err(JetError::Domain(format!(
                "{what} of non-positive value {a0}"
            )));
        }
        Ok(a0)
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        let mut series = Vec::with_capacity(self.order() + 1);
        let mut c = e;
        for k in 0..=self.order() {
            if k > 0 {
                c /= k as f64;
            }
            series.push(c);
        }
        self.compose_series(&series)
    }

    pub fn ln(&self) -> Result<Self, JetError> {
        let a0 = self.checked_positive("log")?;
        let mut series = vec![a0.ln()];
        for k in 1..=self.order() {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            series.push(sign / (k as f64 * a0.powi(k as i32)));
        }
        Ok(self.compose_series(&series))
    }

    /// `self^r` for real `r`; requires a positive value.
    pub fn powf(&self, r: f64) -> Result<Self, JetError> {
        let a0 = self.checked_positive("fractional power")?;
        let mut series = Vec::with_capacity(self.order() + 1);
        let mut binom = 1.0;
        for k in 0..=self.order() {
            if k > 0 {
                binom *= (r - (k as f64 - 1.0)) / k as f64;
            }
            series.push(binom * a0.powf(r - k as f64));
        }
        Ok(self.compose_series(&series))
    }

    pub fn sqrt(&self) -> Result<Self, JetError> {
        self.checked_positive("sqrt")?;
        self.powf(0.5)
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        self.compose_series(&trig_series(&cycle, self.order()))
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        self.compose_series(&trig_series(&cycle, self.order()))
    }

    /// Evaluates the Taylor polynomial at displacement `delta`.
    pub fn eval_at(&self, delta: &[f64]) -> f64 {
        assert_eq!(delta.len(), self.vars());
        self.layout
            .monomials
            .iter()
            .zip(&self.coef)
            .map(|(m, c)| {
                c * m
                    .iter()
                    .zip(delta)
                    .map(|(&e, x)| x.powi(e as i32))
                    .product::<f64>()
            })
            .sum()
    }

    /// Largest absolute coefficient.
    pub fn scale_max(&self) -> f64 {
        self.coef.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Re-expands the Taylor polynomial about `base + delta` (exact for
    /// the truncated polynomial).
    pub fn shift(&self, delta: &[f64]) -> Self {
        let inner: Vec<Jet<f64>> = (0..self.vars())
            .map(|v| Jet::variable(self.vars(), self.order(), v, delta[v]))
            .collect();
        let mut acc = Jet::zero(self.vars(), self.order());
        for (m, c) in self.layout.monomials.iter().zip(&self.coef) {
            if *c == 0.0 {
                continue;
            }
            let mut term = Jet::constant(self.vars(), self.order(), *c);
            for (v, &e) in m.iter().enumerate() {
                if e > 0 {
                    term = term.mul_ref(&inner[v].powi(e));
                }
            }
            acc = &acc + &term;
        }
        acc
    }
}

fn trig_series(cycle: &[f64; 4], order: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(order + 1);
    let mut fact = 1.0;
    for k in 0..=order {
        if k > 0 {
            fact *= k as f64;
        }
        out.push(cycle[k % 4] / fact);
    }
    out
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $body:expr) => {
        impl<T: Coeff> $trait<&Jet<T>> for &Jet<T> {
            type Output = Jet<T>;
            fn $method(self, rhs: &Jet<T>) -> Jet<T> {
                let f: fn(&Jet<T>, &Jet<T>) -> Jet<T> = $body;
                f(self, rhs)
            }
        }
        impl<T: Coeff> $trait<Jet<T>> for Jet<T> {
            type Output = Jet<T>;
            fn $method(self, rhs: Jet<T>) -> Jet<T> {
                (&self).$method(&rhs)
            }
        }
        impl<T: Coeff> $trait<&Jet<T>> for Jet<T> {
            type Output = Jet<T>;
            fn $method(self, rhs: &Jet<T>) -> Jet<T> {
                (&self).$method(rhs)
            }
        }
        impl<T: Coeff> $trait<Jet<T>> for &Jet<T> {
            type Output = Jet<T>;
            fn $method(self, rhs: Jet<T>) -> Jet<T> {
                self.$method(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, |a, b| {
    let (a, b) = Jet::aligned(a, b);
    let coef = a
        .coef
        .into_iter()
        .zip(b.coef)
        .map(|(x, y)| x + y)
        .collect();
    Jet {
        layout: a.layout,
        coef,
    }
});

forward_binop!(Sub, sub, |a, b| {
    let (a, b) = Jet::aligned(a, b);
    let coef = a
        .coef
        .into_iter()
        .zip(b.coef)
        .map(|(x, y)| x - y)
        .collect();
    Jet {
        layout: a.layout,
        coef,
    }
});

forward_binop!(Mul, mul, |a, b| a.mul_ref(b));

/// Panics when the divisor has zero value; use [`Jet::checked_div`] otherwise.
impl<T: Coeff> Div<&Jet<T>> for &Jet<T> {
    type Output = Jet<T>;
    fn div(self, rhs: &Jet<T>) -> Jet<T> {
        self.checked_div(rhs).expect("jet division by a zero-valued jet")
    }
}

impl<T: Coeff> Div<Jet<T>> for Jet<T> {
    type Output = Jet<T>;
    fn div(self, rhs: Jet<T>) -> Jet<T> {
        &self / &rhs
    }
}

impl<T: Coeff> Neg for &Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Jet<T> {
        self.map(|c| -c.clone())
    }
}

impl<T: Coeff> Neg for Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Jet<T> {
        -&self
    }
}
