//! Sparse multivariate polynomials over a [`Scalar`] field.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::scalar::Scalar;

/// Exponent multi-index, one entry per variable.
pub type Monomial = Vec<u16>;

/// Weighted degree `Σ α_i w_i` of a multi-index.
pub fn weighted_degree(exps: &[u16], weights: &[u32]) -> u32 {
    exps.iter().zip(weights).map(|(&e, &w)| e as u32 * w).sum()
}

/// A polynomial in `nvars` variables stored as a map from multi-index to
/// coefficient. Exactly-zero coefficients are never stored.
#[derive(Clone, PartialEq)]
pub struct Poly<T: Scalar> {
    nvars: usize,
    terms: BTreeMap<Monomial, T>,
}

impl<T: Scalar> Poly<T> {
    pub fn zero(nvars: usize) -> Self {
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: T) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, T::one())
    }

    /// The coordinate function `x_i` (0-based).
    pub fn var(nvars: usize, i: usize) -> Self {
        assert!(i < nvars, "variable index {i} out of range for {nvars} variables");
        let mut e = vec![0; nvars];
        e[i] = 1;
        Self::monomial(e, T::one())
    }

    pub fn monomial(exps: Monomial, c: T) -> Self {
        let mut p = Self::zero(exps.len());
        p.add_term(exps, c);
        p
    }

    pub fn from_terms<I: IntoIterator<Item = (Monomial, T)>>(nvars: usize, terms: I) -> Self {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            p.add_term(e, c);
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &T)> {
        self.terms.iter()
    }

    pub fn coeff(&self, exps: &[u16]) -> T {
        self.terms.get(exps).cloned().unwrap_or_else(T::zero)
    }

    /// Adds `c·x^exps`, dropping the entry if the sum cancels exactly.
    pub fn add_term(&mut self, exps: Monomial, c: T) {
        assert_eq!(exps.len(), self.nvars, "monomial arity mismatch");
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&exps) {
            Some(v) => {
                *v += c;
                if v.is_zero() {
                    self.terms.remove(&exps);
                }
            }
            None => {
                self.terms.insert(exps, c);
            }
        }
    }

    pub fn constant_term(&self) -> T {
        self.coeff(&vec![0; self.nvars])
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().map(|&x| x as u32).sum()).max()
    }

    pub fn weighted_degree(&self, weights: &[u32]) -> Option<u32> {
        self.terms.keys().map(|e| weighted_degree(e, weights)).max()
    }

    pub fn min_weighted_degree(&self, weights: &[u32]) -> Option<u32> {
        self.terms.keys().map(|e| weighted_degree(e, weights)).min()
    }

    pub fn scale(&self, c: &T) -> Self {
        if c.is_zero() {
            return Self::zero(self.nvars);
        }
        let terms = self
            .terms
            .iter()
            .map(|(e, v)| (e.clone(), v.clone() * c.clone()))
            .filter(|(_, v)| !v.is_zero())
            .collect();
        Poly { nvars: self.nvars, terms }
    }

    pub fn derivative(&self, i: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut d = e.clone();
            let k = d[i];
            d[i] -= 1;
            out.add_term(d, c.clone() * T::from_u16(k).unwrap());
        }
        out
    }

    /// Keeps the terms whose weighted degree satisfies `keep`.
    pub fn filter_weighted<F: Fn(u32) -> bool>(&self, weights: &[u32], keep: F) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|(e, _)| keep(weighted_degree(e, weights)))
            .map(|(e, c)| (e.clone(), c.clone()))
            .collect();
        Poly { nvars: self.nvars, terms }
    }

    pub fn homogeneous_part(&self, weights: &[u32], degree: u32) -> Self {
        self.filter_weighted(weights, |d| d == degree)
    }

    pub fn truncate_weighted(&self, weights: &[u32], max_degree: u32) -> Self {
        self.filter_weighted(weights, |d| d <= max_degree)
    }

    /// Product, discarding terms of weighted degree above `max_degree` when a
    /// truncation is given.
    pub fn mul_truncated(&self, other: &Self, trunc: Option<(&[u32], u32)>) -> Self {
        assert_eq!(self.nvars, other.nvars, "polynomial arity mismatch");
        let mut out = Self::zero(self.nvars);
        for (ea, ca) in &self.terms {
            let da = trunc.map(|(w, _)| weighted_degree(ea, w));
            for (eb, cb) in &other.terms {
                if let (Some((w, max)), Some(da)) = (trunc, da) {
                    if da + weighted_degree(eb, w) > max {
                        continue;
                    }
                }
                let e: Monomial = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca.clone() * cb.clone());
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one(self.nvars);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    pub fn eval(&self, x: &[T]) -> T {
        assert_eq!(x.len(), self.nvars, "evaluation point arity mismatch");
        let mut acc = T::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (xi, &k) in x.iter().zip(e) {
                for _ in 0..k {
                    t *= xi.clone();
                }
            }
            acc += t;
        }
        acc
    }

    /// Substitutes `subs[i]` for variable `i`. All substitutes must share an
    /// arity, which becomes the arity of the result.
    pub fn compose(&self, subs: &[Poly<T>], trunc: Option<(&[u32], u32)>) -> Self {
        assert_eq!(subs.len(), self.nvars, "substitution arity mismatch");
        let nout = subs.first().map(|s| s.nvars).unwrap_or(0);
        let mut powers: Vec<Vec<Poly<T>>> = subs.iter().map(|_| vec![Poly::one(nout)]).collect();
        let mut out = Self::zero(nout);
        for (e, c) in &self.terms {
            let mut t = Poly::constant(nout, c.clone());
            for (i, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                while powers[i].len() <= k as usize {
                    let next = powers[i].last().unwrap().mul_truncated(&subs[i], trunc);
                    powers[i].push(next);
                }
                t = t.mul_truncated(&powers[i][k as usize], trunc);
                if t.is_zero() {
                    break;
                }
            }
            out += &t;
        }
        out
    }

    pub fn map_coeffs<U: Scalar, F: Fn(&T) -> U>(&self, f: F) -> Poly<U> {
        let mut out = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), f(c));
        }
        out
    }

    pub fn to_f64(&self) -> Poly<f64> {
        self.map_coeffs(|c| c.to_f64_lossy())
    }

    /// Largest coefficient magnitude, 0 for the zero polynomial.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(|c| c.to_f64_lossy().abs()).fold(0.0, f64::max)
    }

    /// Embeds into a ring with more variables; the new variables come last.
    pub fn extend_vars(&self, nvars: usize) -> Self {
        assert!(nvars >= self.nvars);
        let mut out = Self::zero(nvars);
        for (e, c) in &self.terms {
            let mut ne = e.clone();
            ne.resize(nvars, 0);
            out.add_term(ne, c.clone());
        }
        out
    }

    /// Renames variables: variable `i` of `self` becomes variable `map[i]` in
    /// a ring with `nvars` variables.
    pub fn remap_vars(&self, nvars: usize, map: &[usize]) -> Self {
        let mut out = Self::zero(nvars);
        for (e, c) in &self.terms {
            let mut ne = vec![0u16; nvars];
            for (i, &k) in e.iter().enumerate() {
                ne[map[i]] += k;
            }
            out.add_term(ne, c.clone());
        }
        out
    }
}

impl Poly<f64> {
    /// Drops coefficients with magnitude at most `tol`.
    pub fn chop(&self, tol: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|(_, c)| c.abs() > tol)
            .map(|(e, c)| (e.clone(), *c))
            .collect();
        Poly { nvars: self.nvars, terms }
    }

    /// Fast evaluation for `f64` polynomials.
    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            let mut t = *c;
            for (xi, &k) in x.iter().zip(e) {
                if k > 0 {
                    t *= xi.powi(k as i32);
                }
            }
            acc += t;
        }
        acc
    }
}

impl<T: Scalar> fmt::Debug for Poly<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly({})", self)
    }
}

impl<T: Scalar> fmt::Display for Poly<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (e, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            if k == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let vars: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(i, &k)| if k == 1 { format!("x{}", i + 1) } else { format!("x{}^{}", i + 1, k) })
                .collect();
            if vars.is_empty() {
                write!(f, "{}", mag)?;
            } else if mag.is_one() {
                write!(f, "{}", vars.join("*"))?;
            } else {
                write!(f, "{}*{}", mag, vars.join("*"))?;
            }
        }
        Ok(())
    }
}

impl<T: Scalar> AddAssign<&Poly<T>> for Poly<T> {
    fn add_assign(&mut self, rhs: &Poly<T>) {
        assert_eq!(self.nvars, rhs.nvars, "polynomial arity mismatch");
        for (e, c) in &rhs.terms {
            self.add_term(e.clone(), c.clone());
        }
    }
}

impl<T: Scalar> SubAssign<&Poly<T>> for Poly<T> {
    fn sub_assign(&mut self, rhs: &Poly<T>) {
        assert_eq!(self.nvars, rhs.nvars, "polynomial arity mismatch");
        for (e, c) in &rhs.terms {
            self.add_term(e.clone(), -c.clone());
        }
    }
}

impl<T: Scalar> Add for &Poly<T> {
    type Output = Poly<T>;
    fn add(self, rhs: &Poly<T>) -> Poly<T> {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl<T: Scalar> Sub for &Poly<T> {
    type Output = Poly<T>;
    fn sub(self, rhs: &Poly<T>) -> Poly<T> {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl<T: Scalar> Mul for &Poly<T> {
    type Output = Poly<T>;
    fn mul(self, rhs: &Poly<T>) -> Poly<T> {
        self.mul_truncated(rhs, None)
    }
}

impl<T: Scalar> Neg for &Poly<T> {
    type Output = Poly<T>;
    fn neg(self) -> Poly<T> {
        self.scale(&-T::one())
    }
}

impl<T: Scalar> Add for Poly<T> {
    type Output = Poly<T>;
    fn add(mut self, rhs: Poly<T>) -> Poly<T> {
        self += &rhs;
        self
    }
}

impl<T: Scalar> Sub for Poly<T> {
    type Output = Poly<T>;
    fn sub(mut self, rhs: Poly<T>) -> Poly<T> {
        self -= &rhs;
        self
    }
}

impl<T: Scalar> Mul for Poly<T> {
    type Output = Poly<T>;
    fn mul(self, rhs: Poly<T>) -> Poly<T> {
        &self * &rhs
    }
}

impl<T: Scalar> Neg for Poly<T> {
    type Output = Poly<T>;
    fn neg(self) -> Poly<T> {
        -&self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use num_traits::FromPrimitive;

    fn x(i: usize) -> Poly<f64> {
        Poly::var(3, i)
    }

    #[test]
    fn zero_has_no_terms() {
        let p = &x(0) - &x(0);
        assert!(p.is_zero());
        assert_eq!(p.len(), 0);
        assert_eq!(p.degree(), None);
    }

    #[test]
    fn product_and_derivative() {
        // (x1 + x2)^2 = x1^2 + 2 x1 x2 + x2^2
        let s = &x(0) + &x(1);
        let sq = s.pow(2);
        assert_eq!(sq.coeff(&[1, 1, 0]), 2.0);
        assert_eq!(sq.degree(), Some(2));
        let d = sq.derivative(0);
        assert_eq!(d.coeff(&[1, 0, 0]), 2.0);
        assert_eq!(d.coeff(&[0, 1, 0]), 2.0);
    }

    #[test]
    fn weighted_truncation() {
        let w = [1, 1, 2];
        let p = &(&x(0) * &x(1)) + &x(2).pow(2);
        assert_eq!(p.weighted_degree(&w), Some(4));
        assert_eq!(p.truncate_weighted(&w, 3).len(), 1);
        let t = x(2).mul_truncated(&x(2), Some((&w, 3)));
        assert!(t.is_zero());
    }

    #[test]
    fn compose_substitutes() {
        // p(y) = y1*y2, y1 = x1 + 1, y2 = x1 - 1  => x1^2 - 1
        let p = Poly::<f64>::var(2, 0) * Poly::var(2, 1);
        let one = Poly::constant(1, 1.0);
        let t = Poly::var(1, 0);
        let c = p.compose(&[&t + &one, &t - &one], None);
        assert_eq!(c.coeff(&[2]), 1.0);
        assert_eq!(c.coeff(&[0]), -1.0);
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn exact_rational_arithmetic() {
        let half = BigRational::from_f64(0.5).unwrap();
        let p = Poly::<BigRational>::var(2, 0).scale(&half);
        let q = &p + &p;
        assert_eq!(q, Poly::var(2, 0));
    }

    #[test]
    fn display_is_readable() {
        let p = &x(0).scale(&-0.5) + &Poly::constant(3, 2.0);
        assert_eq!(format!("{}", p), "2 - 0.5*x1");
    }
}
