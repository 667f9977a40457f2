//! Truncated multivariate Taylor ("jet") arithmetic.
//!
//! A [`Jet`] stores the Taylor coefficients of a scalar with respect to its
//! chart variables `(u, v)` or ambient variables `(x, y, z)` up to a fixed
//! total degree. All arithmetic propagates derivatives exactly; the only
//! approximation is the truncation order itself. Coefficients are stored
//! densely in graded-lexicographic order, which at the largest supported
//! shape (3 variables, order 6) is 84 entries, small enough that dense
//! storage beats any sparse scheme.
//!
//! Jets are generic over their coefficient scalar. `Jet<f64>` is the
//! ordinary case; `Jet<Jet<f64>>` nests an ambient jet over chart jets so
//! that every ambient partial derivative of a field composed with an
//! immersion is itself carried as an exact chart jet.
//!
//! Differentiating a jet in place ([`Jet::derive`]) keeps the shape but only
//! the coefficients of total degree `order - 1` and below remain meaningful;
//! callers track the "valid order" of derived quantities.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::DomainError;

/// Highest supported truncation order.
pub const MAX_ORDER: usize = 6;
/// Highest supported variable count.
pub const MAX_VARS: usize = 3;

/// Scalar types jets can be built over: plain `f64` or another jet.
///
/// Binary operations require both operands to carry the same shape; the
/// shape-carrying constructors [`Scalar::like`] and [`Scalar::scale`] exist
/// because a bare `0.0` does not know what shape it should have.
pub trait Scalar:
    Clone
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    /// A constant with the same shape as `self`.
    fn like(&self, value: f64) -> Self;
    /// Multiplication by a plain constant.
    fn scale(&self, factor: f64) -> Self;
    /// The fully contracted constant term (the plain value of the quantity).
    fn value(&self) -> f64;
    fn all_finite(&self) -> bool;
    fn try_div(&self, rhs: &Self) -> Result<Self, DomainError>;
    fn try_recip(&self) -> Result<Self, DomainError>;
    fn exp(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn try_ln(&self) -> Result<Self, DomainError>;
    fn try_sqrt(&self) -> Result<Self, DomainError>;
    fn try_powi(&self, n: i32) -> Result<Self, DomainError>;
}

impl Scalar for f64 {
    fn like(&self, value: f64) -> Self {
        value
    }
    fn scale(&self, factor: f64) -> Self {
        self * factor
    }
    fn value(&self) -> f64 {
        *self
    }
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
    fn try_div(&self, rhs: &Self) -> Result<Self, DomainError> {
        if *rhs == 0.0 {
            return Err(DomainError::new("div", "division by zero"));
        }
        Ok(self / rhs)
    }
    fn try_recip(&self) -> Result<Self, DomainError> {
        if *self == 0.0 {
            return Err(DomainError::new("recip", "reciprocal of zero"));
        }
        Ok(1.0 / self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn try_ln(&self) -> Result<Self, DomainError> {
        if *self <= 0.0 {
            return Err(DomainError::new("ln", format!("ln of {self}")));
        }
        Ok(f64::ln(*self))
    }
    fn try_sqrt(&self) -> Result<Self, DomainError> {
        if *self < 0.0 {
            return Err(DomainError::new("sqrt", format!("sqrt of {self}")));
        }
        Ok(f64::sqrt(*self))
    }
    fn try_powi(&self, n: i32) -> Result<Self, DomainError> {
        if n < 0 && *self == 0.0 {
            return Err(DomainError::new("powi", "negative power of zero"));
        }
        Ok(f64::powi(*self, n))
    }
}

/// Shape of a jet (variable count and truncation order) together with the
/// index tables shared by every jet of that shape.
pub struct JetShape {
    num_vars: usize,
    order: usize,
    monomials: Vec<[u8; MAX_VARS]>,
    degrees: Vec<u8>,
    /// `alpha!` per monomial, for converting Taylor coefficients to partials.
    factorials: Vec<f64>,
    /// Dense exponent-box lookup; `u16::MAX` marks degree overflow.
    position: Vec<u16>,
    /// All `(i, j, k)` with `monomial[i] + monomial[j] = monomial[k]`.
    prod: Vec<(u16, u16, u16)>,
}

fn shape_cache() -> &'static Mutex<HashMap<(usize, usize), Arc<JetShape>>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetShape>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl JetShape {
    /// Fetch (or build) the shared shape for `num_vars` variables at `order`.
    pub fn get(num_vars: usize, order: usize) -> Arc<JetShape> {
        assert!(
            (1..=MAX_VARS).contains(&num_vars),
            "jet num_vars must be 1..={MAX_VARS}, got {num_vars}"
        );
        assert!(
            (1..=MAX_ORDER).contains(&order),
            "jet order must be 1..={MAX_ORDER}, got {order}"
        );
        let mut cache = shape_cache().lock().unwrap();
        cache
            .entry((num_vars, order))
            .or_insert_with(|| Arc::new(JetShape::build(num_vars, order)))
            .clone()
    }

    fn build(num_vars: usize, order: usize) -> JetShape {
        let mut monomials = Vec::new();
        for deg in 0..=order {
            enumerate_degree(num_vars, deg, &mut monomials);
        }
        let stride = order + 1;
        let mut position = vec![u16::MAX; stride.pow(num_vars as u32)];
        for (idx, m) in monomials.iter().enumerate() {
            position[box_index(m, num_vars, stride)] = idx as u16;
        }
        let degrees: Vec<u8> = monomials
            .iter()
            .map(|m| m.iter().take(num_vars).sum())
            .collect();
        let factorials: Vec<f64> = monomials
            .iter()
            .map(|m| {
                m.iter()
                    .take(num_vars)
                    .map(|&e| factorial(e as usize))
                    .product()
            })
            .collect();
        let mut prod = Vec::new();
        for i in 0..monomials.len() {
            for j in 0..monomials.len() {
                if (degrees[i] + degrees[j]) as usize > order {
                    continue;
                }
                let mut sum = [0u8; MAX_VARS];
                for a in 0..num_vars {
                    sum[a] = monomials[i][a] + monomials[j][a];
                }
                let k = position[box_index(&sum, num_vars, stride)];
                prod.push((i as u16, j as u16, k));
            }
        }
        JetShape {
            num_vars,
            order,
            monomials,
            degrees,
            factorials,
            position,
            prod,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of stored coefficients (monomials of total degree <= order).
    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn monomial(&self, idx: usize) -> &[u8] {
        &self.monomials[idx][..self.num_vars]
    }

    pub fn degree(&self, idx: usize) -> usize {
        self.degrees[idx] as usize
    }

    /// Index of the coefficient for the given exponent tuple, if within order.
    pub fn index_of(&self, exponents: &[u8]) -> Option<usize> {
        assert_eq!(exponents.len(), self.num_vars);
        let deg: u8 = exponents.iter().sum();
        if deg as usize > self.order {
            return None;
        }
        let mut m = [0u8; MAX_VARS];
        m[..self.num_vars].copy_from_slice(exponents);
        let p = self.position[box_index(&m, self.num_vars, self.order + 1)];
        (p != u16::MAX).then_some(p as usize)
    }

    fn linear_index(&self, var: usize) -> usize {
        assert!(var < self.num_vars);
        // degree-1 monomials sit right after the constant, var 0 first
        1 + var
    }
}

fn box_index(m: &[u8; MAX_VARS], num_vars: usize, stride: usize) -> usize {
    let mut idx = 0usize;
    for a in 0..num_vars {
        idx = idx * stride + m[a] as usize;
    }
    idx
}

fn enumerate_degree(num_vars: usize, deg: usize, out: &mut Vec<[u8; MAX_VARS]>) {
    fn rec(
        num_vars: usize,
        var: usize,
        remaining: usize,
        current: &mut [u8; MAX_VARS],
        out: &mut Vec<[u8; MAX_VARS]>,
    ) {
        if var + 1 == num_vars {
            current[var] = remaining as u8;
            out.push(*current);
            current[var] = 0;
            return;
        }
        for e in (0..=remaining).rev() {
            current[var] = e as u8;
            rec(num_vars, var + 1, remaining - e, current, out);
        }
        current[var] = 0;
    }
    let mut current = [0u8; MAX_VARS];
    rec(num_vars, 0, deg, &mut current, out);
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// A truncated multivariate Taylor expansion.
///
/// `coeffs[idx]` is the Taylor coefficient of `shape.monomial(idx)`, i.e.
/// the partial derivative divided by the factorial of the multi-index.
#[derive(Clone)]
pub struct Jet<T = f64> {
    shape: Arc<JetShape>,
    coeffs: Vec<T>,
}

impl<T: Scalar> Jet<T> {
    /// A constant jet; `value` supplies the coefficient shape for nesting.
    pub fn constant(shape: Arc<JetShape>, value: T) -> Self {
        let zero = value.like(0.0);
        let mut coeffs = vec![zero; shape.len()];
        coeffs[0] = value;
        Jet { shape, coeffs }
    }

    /// Build a jet directly from Taylor coefficients.
    pub fn from_coeffs(shape: Arc<JetShape>, coeffs: Vec<T>) -> Self {
        assert_eq!(coeffs.len(), shape.len(), "coefficient count mismatch");
        Jet { shape, coeffs }
    }

    /// The jet of the `var`-th coordinate function at base value `value`.
    pub fn variable(shape: Arc<JetShape>, var: usize, value: T) -> Self {
        let one = value.like(1.0);
        let mut jet = Jet::constant(shape, value);
        let idx = jet.shape.linear_index(var);
        jet.coeffs[idx] = one;
        jet
    }

    pub fn shape(&self) -> &Arc<JetShape> {
        &self.shape
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeff(&self, idx: usize) -> &T {
        &self.coeffs[idx]
    }

    /// Taylor coefficient of the given exponent tuple.
    pub fn taylor(&self, exponents: &[u8]) -> T {
        let idx = self
            .shape
            .index_of(exponents)
            .expect("exponent tuple exceeds jet order");
        self.coeffs[idx].clone()
    }

    /// Partial derivative (Taylor coefficient times the multi-index factorial).
    pub fn partial(&self, exponents: &[u8]) -> T {
        let idx = self
            .shape
            .index_of(exponents)
            .expect("exponent tuple exceeds jet order");
        self.coeffs[idx].scale(self.shape.factorials[idx])
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(&T, &T) -> T) -> Self {
        assert!(
            Arc::ptr_eq(&self.shape, &rhs.shape)
                || (self.shape.num_vars == rhs.shape.num_vars
                    && self.shape.order == rhs.shape.order),
            "jet shape mismatch: ({}, {}) vs ({}, {})",
            self.shape.num_vars,
            self.shape.order,
            rhs.shape.num_vars,
            rhs.shape.order
        );
        Jet {
            shape: self.shape.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(rhs.coeffs.iter())
                .map(|(a, b)| f(a, b))
                .collect(),
        }
    }

    fn map(&self, f: impl Fn(&T) -> T) -> Self {
        Jet {
            shape: self.shape.clone(),
            coeffs: self.coeffs.iter().map(f).collect(),
        }
    }

    pub fn mul_jets(&self, rhs: &Self) -> Self {
        assert_eq!(self.shape.num_vars, rhs.shape.num_vars, "jet shape mismatch");
        assert_eq!(self.shape.order, rhs.shape.order, "jet shape mismatch");
        let zero = self.coeffs[0].like(0.0);
        let mut out = vec![zero; self.shape.len()];
        for &(i, j, k) in &self.shape.prod {
            let term = self.coeffs[i as usize].clone() * rhs.coeffs[j as usize].clone();
            out[k as usize] = out[k as usize].clone() + term;
        }
        Jet {
            shape: self.shape.clone(),
            coeffs: out,
        }
    }

    /// Compose a univariate power series with the non-constant part of `self`.
    ///
    /// `series[k]` must be the degree-`k` Taylor coefficient of the outer
    /// function around the constant term of `self`. Because the non-constant
    /// part is nilpotent at the truncation order, the sum is exact.
    pub fn compose_series(&self, series: &[T]) -> Self {
        assert_eq!(series.len(), self.shape.order + 1);
        let mut tilde = self.clone();
        tilde.coeffs[0] = tilde.coeffs[0].like(0.0);
        let mut acc = Jet::constant(self.shape.clone(), series[self.shape.order].clone());
        for k in (0..self.shape.order).rev() {
            acc = acc.mul_jets(&tilde);
            acc.coeffs[0] = acc.coeffs[0].clone() + series[k].clone();
        }
        acc
    }

    /// Derivative along `var`. The result keeps the shape; coefficients of
    /// top total degree are set to zero and are no longer meaningful, so the
    /// valid order drops by one.
    pub fn derive(&self, var: usize) -> Self {
        assert!(var < self.shape.num_vars);
        let zero = self.coeffs[0].like(0.0);
        let mut out = vec![zero; self.shape.len()];
        for idx in 0..self.shape.len() {
            if self.shape.degree(idx) >= self.shape.order {
                continue;
            }
            let mut exps = [0u8; MAX_VARS];
            exps[..self.shape.num_vars].copy_from_slice(self.shape.monomial(idx));
            exps[var] += 1;
            let src = self.shape.position[box_index(&exps, self.shape.num_vars, self.shape.order + 1)];
            debug_assert_ne!(src, u16::MAX);
            out[idx] = self.coeffs[src as usize].scale(exps[var] as f64);
        }
        Jet {
            shape: self.shape.clone(),
            coeffs: out,
        }
    }

    /// Truncate to a lower order (graded storage makes this a prefix copy).
    pub fn truncate(&self, order: usize) -> Self {
        assert!(order <= self.shape.order);
        let shape = JetShape::get(self.shape.num_vars, order);
        let coeffs = self.coeffs[..shape.len()].to_vec();
        Jet { shape, coeffs }
    }
}

impl<T: Scalar> Scalar for Jet<T> {
    fn like(&self, value: f64) -> Self {
        Jet::constant(self.shape.clone(), self.coeffs[0].like(value))
    }

    fn scale(&self, factor: f64) -> Self {
        self.map(|c| c.scale(factor))
    }

    fn value(&self) -> f64 {
        self.coeffs[0].value()
    }

    fn all_finite(&self) -> bool {
        self.coeffs.iter().all(Scalar::all_finite)
    }

    fn try_div(&self, rhs: &Self) -> Result<Self, DomainError> {
        Ok(self.mul_jets(&rhs.try_recip()?))
    }

    fn try_recip(&self) -> Result<Self, DomainError> {
        let c0 = &self.coeffs[0];
        if c0.value() == 0.0 {
            return Err(DomainError::new(
                "recip",
                "jet has zero constant term",
            ));
        }
        let r = c0.try_recip()?;
        // 1/u = sum_k (-1)^k u0^{-(k+1)} (u - u0)^k
        let mut series = Vec::with_capacity(self.shape.order + 1);
        let mut c = r.clone();
        for _ in 0..=self.shape.order {
            series.push(c.clone());
            c = -(c * r.clone());
        }
        Ok(self.compose_series(&series))
    }

    fn exp(&self) -> Self {
        let e0 = self.coeffs[0].exp();
        let series: Vec<T> = (0..=self.shape.order)
            .map(|k| e0.scale(1.0 / factorial(k)))
            .collect();
        self.compose_series(&series)
    }

    fn sin(&self) -> Self {
        let (s0, c0) = (self.coeffs[0].sin(), self.coeffs[0].cos());
        let series: Vec<T> = (0..=self.shape.order)
            .map(|k| {
                let base = match k % 4 {
                    0 => s0.clone(),
                    1 => c0.clone(),
                    2 => -s0.clone(),
                    _ => -c0.clone(),
                };
                base.scale(1.0 / factorial(k))
            })
            .collect();
        self.compose_series(&series)
    }

    fn cos(&self) -> Self {
        let (s0, c0) = (self.coeffs[0].sin(), self.coeffs[0].cos());
        let series: Vec<T> = (0..=self.shape.order)
            .map(|k| {
                let base = match k % 4 {
                    0 => c0.clone(),
                    1 => -s0.clone(),
                    2 => -c0.clone(),
                    _ => s0.clone(),
                };
                base.scale(1.0 / factorial(k))
            })
            .collect();
        self.compose_series(&series)
    }

    fn try_ln(&self) -> Result<Self, DomainError> {
        let c0 = &self.coeffs[0];
        if c0.value() <= 0.0 {
            return Err(DomainError::new(
                "ln",
                format!("jet constant term {} is not positive", c0.value()),
            ));
        }
        let l0 = c0.try_ln()?;
        let r = c0.try_recip()?;
        // ln u = ln u0 + sum_{k>=1} (-1)^{k+1} / k * (u - u0)^k / u0^k
        let mut series = Vec::with_capacity(self.shape.order + 1);
        series.push(l0);
        let mut p = r.clone();
        for k in 1..=self.shape.order {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            series.push(p.scale(sign / k as f64));
            p = p * r.clone();
        }
        Ok(self.compose_series(&series))
    }

    fn try_sqrt(&self) -> Result<Self, DomainError> {
        let c0 = &self.coeffs[0];
        if c0.value() <= 0.0 {
            return Err(DomainError::new(
                "sqrt",
                format!("jet constant term {} is not positive", c0.value()),
            ));
        }
        let s0 = c0.try_sqrt()?;
        let r = c0.try_recip()?;
        // sqrt u = sqrt(u0) * sum_k binom(1/2, k) (u/u0 - 1)^k
        let mut series = Vec::with_capacity(self.shape.order + 1);
        let mut binom = 1.0f64;
        let mut p = s0.clone();
        for k in 0..=self.shape.order {
            series.push(p.scale(binom));
            binom *= (0.5 - k as f64) / (k as f64 + 1.0);
            p = p * r.clone();
        }
        Ok(self.compose_series(&series))
    }

    fn try_powi(&self, n: i32) -> Result<Self, DomainError> {
        if n == 0 {
            return Ok(self.like(1.0));
        }
        let mut base = if n < 0 { self.try_recip()? } else { self.clone() };
        let mut e = n.unsigned_abs();
        let mut acc: Option<Self> = None;
        while e > 0 {
            if e & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a.mul_jets(&base),
                });
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_jets(&base);
            }
        }
        Ok(acc.expect("n != 0"))
    }
}

impl<T: Scalar + PartialEq> PartialEq for Jet<T> {
    fn eq(&self, other: &Self) -> bool {
        self.shape.num_vars == other.shape.num_vars
            && self.shape.order == other.shape.order
            && self.coeffs == other.coeffs
    }
}

impl<T: Scalar + std::fmt::Debug> std::fmt::Debug for Jet<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Jet")
            .field("num_vars", &self.shape.num_vars)
            .field("order", &self.shape.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl<T: Scalar> Add for Jet<T> {
    type Output = Jet<T>;
    fn add(self, rhs: Self) -> Jet<T> {
        self.zip_with(&rhs, |a, b| a.clone() + b.clone())
    }
}

impl<T: Scalar> Sub for Jet<T> {
    type Output = Jet<T>;
    fn sub(self, rhs: Self) -> Jet<T> {
        self.zip_with(&rhs, |a, b| a.clone() - b.clone())
    }
}

impl<T: Scalar> Mul for Jet<T> {
    type Output = Jet<T>;
    fn mul(self, rhs: Self) -> Jet<T> {
        self.mul_jets(&rhs)
    }
}

impl<T: Scalar> Neg for Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Jet<T> {
        self.map(|c| -c.clone())
    }
}

impl<T: Scalar> Add for &Jet<T> {
    type Output = Jet<T>;
    fn add(self, rhs: Self) -> Jet<T> {
        self.zip_with(rhs, |a, b| a.clone() + b.clone())
    }
}

impl<T: Scalar> Sub for &Jet<T> {
    type Output = Jet<T>;
    fn sub(self, rhs: Self) -> Jet<T> {
        self.zip_with(rhs, |a, b| a.clone() - b.clone())
    }
}

impl<T: Scalar> Mul for &Jet<T> {
    type Output = Jet<T>;
    fn mul(self, rhs: Self) -> Jet<T> {
        self.mul_jets(rhs)
    }
}

impl<T: Scalar> Neg for &Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Jet<T> {
        self.map(|c| -c.clone())
    }
}

/// Chart jet in two variables, the workhorse of the surface pipeline.
pub type Jet2 = Jet<f64>;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn jet1d(order: usize, at: f64) -> Jet {
        Jet::variable(JetShape::get(1, order), 0, at)
    }

    #[test]
    fn shape_sizes_match_binomials() {
        assert_eq!(JetShape::get(3, 6).len(), 84);
        assert_eq!(JetShape::get(2, 6).len(), 28);
        assert_eq!(JetShape::get(2, 4).len(), 15);
        assert_eq!(JetShape::get(3, 2).len(), 10);
    }

    #[test]
    fn monomial_index_round_trip() {
        let shape = JetShape::get(3, 4);
        for idx in 0..shape.len() {
            let m = shape.monomial(idx).to_vec();
            assert_eq!(shape.index_of(&m), Some(idx));
        }
        assert_eq!(shape.index_of(&[5, 0, 0]), None);
    }

    #[test]
    fn exp_taylor_series() {
        let x = jet1d(2, 0.0);
        let e = x.exp();
        assert_relative_eq!(e.coeffs[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(e.coeffs[1], 1.0, epsilon = 1e-15);
        assert_relative_eq!(e.coeffs[2], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn ln_sqrt_sin_series_at_one() {
        let x = jet1d(5, 1.0);
        let l = x.try_ln().unwrap();
        // ln(1 + t): 0, 1, -1/2, 1/3, -1/4, 1/5
        let expect = [0.0, 1.0, -0.5, 1.0 / 3.0, -0.25, 0.2];
        for (c, e) in l.coeffs.iter().zip(expect) {
            assert_relative_eq!(*c, e, epsilon = 1e-14);
        }
        let s = x.try_sqrt().unwrap();
        // sqrt(1 + t): 1, 1/2, -1/8, 1/16, -5/128
        let expect = [1.0, 0.5, -0.125, 0.0625, -5.0 / 128.0];
        for (c, e) in s.coeffs.iter().take(5).zip(expect) {
            assert_relative_eq!(*c, e, epsilon = 1e-14);
        }
        let x0 = jet1d(5, 0.0);
        let sn = x0.sin();
        let expect = [0.0, 1.0, 0.0, -1.0 / 6.0, 0.0, 1.0 / 120.0];
        for (c, e) in sn.coeffs.iter().zip(expect) {
            assert_relative_eq!(*c, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn product_constant_term_is_product_of_constants() {
        let shape = JetShape::get(2, 3);
        let a = Jet::variable(shape.clone(), 0, 1.7);
        let b = Jet::variable(shape, 1, -0.4);
        let p = &a * &b;
        assert_relative_eq!(p.value(), 1.7 * -0.4, epsilon = 1e-15);
    }

    #[test]
    fn multivariate_partials_of_polynomial() {
        // f(x, y) = x^2 y + 3 y at (2, 3)
        let shape = JetShape::get(2, 3);
        let x = Jet::variable(shape.clone(), 0, 2.0);
        let y = Jet::variable(shape.clone(), 1, 3.0);
        let f = &(&(&x * &x) * &y) + &y.scale(3.0);
        assert_relative_eq!(f.value(), 21.0);
        assert_relative_eq!(f.partial(&[1, 0]), 12.0); // 2xy
        assert_relative_eq!(f.partial(&[0, 1]), 7.0); // x^2 + 3
        assert_relative_eq!(f.partial(&[2, 0]), 6.0); // 2y
        assert_relative_eq!(f.partial(&[1, 1]), 4.0); // 2x
        assert_relative_eq!(f.partial(&[2, 1]), 2.0);
    }

    #[test]
    fn division_matches_multiplication() {
        let shape = JetShape::get(2, 4);
        let x = Jet::variable(shape.clone(), 0, 0.3);
        let y = Jet::variable(shape.clone(), 1, -1.2);
        let a = &(&x * &x) + &y.scale(2.0);
        let b = &x.exp() + &x.like(2.0);
        let q = a.try_div(&b).unwrap();
        let back = &q * &b;
        for (c, e) in back.coeffs.iter().zip(a.coeffs.iter()) {
            assert_relative_eq!(*c, *e, epsilon = 1e-13);
        }
    }

    #[test]
    fn domain_errors_are_raised() {
        let shape = JetShape::get(1, 2);
        let zero = Jet::constant(shape.clone(), 0.0);
        assert!(zero.try_recip().is_err());
        assert!(zero.try_ln().is_err());
        let neg = Jet::constant(shape.clone(), -1.0);
        assert!(neg.try_sqrt().is_err());
        assert!(neg.try_ln().is_err());
        assert!(Jet::variable(shape, 0, 1.0).try_powi(3).is_ok());
    }

    #[test]
    fn derive_drops_one_order() {
        // f = x^3 y at (1, 2); df/dx = 3x^2 y
        let shape = JetShape::get(2, 4);
        let x = Jet::variable(shape.clone(), 0, 1.0);
        let y = Jet::variable(shape, 1, 2.0);
        let f = &x.try_powi(3).unwrap() * &y;
        let fx = f.derive(0);
        assert_relative_eq!(fx.value(), 6.0);
        assert_relative_eq!(fx.partial(&[1, 0]), 12.0); // 6xy
        assert_relative_eq!(fx.partial(&[0, 1]), 3.0); // 3x^2
        assert_relative_eq!(fx.partial(&[2, 0]), 12.0); // 6y, still valid at order 2
    }

    #[test]
    fn nested_jets_carry_chart_derivatives_of_ambient_partials() {
        // sigma(x) = x^2 with x = u * v as a chart function. The nested jet's
        // first ambient coefficient must be the chart jet of d(sigma)/dx = 2x.
        let chart = JetShape::get(2, 3);
        let ambient = JetShape::get(3, 2);
        let u = Jet::variable(chart.clone(), 0, 0.7);
        let v = Jet::variable(chart.clone(), 1, -1.3);
        let x_chart = &u * &v;
        let x = Jet::variable(ambient.clone(), 0, x_chart.clone());
        let y = Jet::constant(ambient.clone(), x_chart.like(0.0));
        let sigma = &x * &x + y;
        let d_dx = sigma.partial(&[1, 0, 0]);
        let expect = x_chart.scale(2.0);
        for (c, e) in d_dx.coeffs().iter().zip(expect.coeffs().iter()) {
            assert_relative_eq!(*c, *e, epsilon = 1e-14);
        }
        let d2_dx2 = sigma.partial(&[2, 0, 0]);
        assert_relative_eq!(d2_dx2.value(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn truncate_keeps_low_order_coefficients() {
        let shape = JetShape::get(2, 4);
        let x = Jet::variable(shape.clone(), 0, 0.4);
        let f = x.exp();
        let t = f.truncate(2);
        assert_eq!(t.shape().order(), 2);
        assert_relative_eq!(t.value(), f.value());
        assert_relative_eq!(t.partial(&[1, 0]), f.partial(&[1, 0]));
        assert_relative_eq!(t.partial(&[2, 0]), f.partial(&[2, 0]));
    }
}
