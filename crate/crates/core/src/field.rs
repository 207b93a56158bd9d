//! Polynomial vector fields on ℝⁿ and their Lie brackets.

use std::fmt;

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::scalar::Scalar;

/// A vector field `Σ_j c_j(x) ∂_j` with polynomial coefficients.
#[derive(Clone, PartialEq)]
pub struct VectorField<T: Scalar> {
    coeffs: Vec<Poly<T>>,
}

impl<T: Scalar> VectorField<T> {
    pub fn new(coeffs: Vec<Poly<T>>) -> Result<Self> {
        let dim = coeffs.len();
        if dim == 0 {
            return Err(Error::InvalidInput("vector field needs at least one coefficient".into()));
        }
        if let Some(bad) = coeffs.iter().find(|c| c.nvars() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: bad.nvars() });
        }
        Ok(VectorField { coeffs })
    }

    pub fn zero(dim: usize) -> Self {
        VectorField { coeffs: (0..dim).map(|_| Poly::zero(dim)).collect() }
    }

    /// The coordinate field `∂_k` (0-based).
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut f = Self::zero(dim);
        f.coeffs[k] = Poly::one(dim);
        f
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[Poly<T>] {
        &self.coeffs
    }

    pub fn coeff(&self, j: usize) -> &Poly<T> {
        &self.coeffs[j]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Poly::is_zero)
    }

    /// Directional derivative `X f = Σ_j c_j ∂_j f`.
    pub fn apply(&self, f: &Poly<T>) -> Poly<T> {
        let mut out = Poly::zero(self.dim());
        for (j, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let d = f.derivative(j);
            if !d.is_zero() {
                out += &(c * &d);
            }
        }
        out
    }

    pub fn eval(&self, x: &[T]) -> Vec<T> {
        self.coeffs.iter().map(|c| c.eval(x)).collect()
    }

    pub fn scale(&self, s: &T) -> Self {
        VectorField { coeffs: self.coeffs.iter().map(|c| c.scale(s)).collect() }
    }

    pub fn mul_poly(&self, f: &Poly<T>) -> Self {
        VectorField { coeffs: self.coeffs.iter().map(|c| c * f).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(VectorField { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(VectorField { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect() })
    }

    /// Linear combination `Σ a_i F_i` of fields of equal dimension.
    pub fn combination(fields: &[&Self], weights: &[T]) -> Result<Self> {
        let dim = fields.first().map(|f| f.dim()).ok_or_else(|| Error::InvalidInput("empty combination".into()))?;
        let mut out = Self::zero(dim);
        for (f, w) in fields.iter().zip(weights) {
            out = out.add(&f.scale(w))?;
        }
        Ok(out)
    }

    /// Largest coefficient magnitude over all components.
    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(Poly::max_abs_coeff).fold(0.0, f64::max)
    }

    pub fn to_f64(&self) -> VectorField<f64> {
        VectorField { coeffs: self.coeffs.iter().map(Poly::to_f64).collect() }
    }

    pub fn map_coeffs<U: Scalar, F: Fn(&T) -> U + Copy>(&self, f: F) -> VectorField<U> {
        VectorField { coeffs: self.coeffs.iter().map(|c| c.map_coeffs(f)).collect() }
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }
}

impl VectorField<f64> {
    pub fn eval_f64(&self, x: &[f64]) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.eval_f64(x)).collect()
    }

    pub fn chop(&self, tol: f64) -> Self {
        VectorField { coeffs: self.coeffs.iter().map(|c| c.chop(tol)).collect() }
    }
}

/// `[X, Y] = (X·∇)Y − (Y·∇)X`, computed by exact polynomial differentiation.
pub fn lie_bracket<T: Scalar>(x: &VectorField<T>, y: &VectorField<T>) -> Result<VectorField<T>> {
    x.check_dim(y)?;
    let coeffs = (0..x.dim()).map(|k| &x.apply(&y.coeffs[k]) - &y.apply(&x.coeffs[k])).collect();
    Ok(VectorField { coeffs })
}

/// Left-normed iterated bracket `[…[[X_{i1}, X_{i2}], X_{i3}], …]` for a
/// 0-based index word.
pub fn iterated_bracket<T: Scalar>(fields: &[VectorField<T>], word: &[usize]) -> Result<VectorField<T>> {
    let (&first, rest) = word.split_first().ok_or_else(|| Error::InvalidInput("empty bracket word".into()))?;
    let mut acc = fields.get(first).cloned().ok_or_else(|| Error::InvalidInput(format!("bracket index {first} out of range")))?;
    for &i in rest {
        let f = fields.get(i).ok_or_else(|| Error::InvalidInput(format!("bracket index {i} out of range")))?;
        acc = lie_bracket(&acc, f)?;
    }
    Ok(acc)
}

impl<T: Scalar> fmt::Debug for VectorField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VectorField({})", self)
    }
}

impl<T: Scalar> fmt::Display for VectorField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(j, c)| format!("({})*d{}", c, j + 1))
            .collect();
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heisenberg() -> (VectorField<f64>, VectorField<f64>) {
        let x = Poly::<f64>::var(3, 0);
        let y = Poly::<f64>::var(3, 1);
        let one = Poly::one(3);
        let zero = Poly::zero(3);
        let x1 = VectorField::new(vec![one.clone(), zero.clone(), y.scale(&-0.5)]).unwrap();
        let x2 = VectorField::new(vec![zero, one, x.scale(&0.5)]).unwrap();
        (x1, x2)
    }

    #[test]
    fn heisenberg_bracket_is_vertical() {
        let (x1, x2) = heisenberg();
        let b = lie_bracket(&x1, &x2).unwrap();
        assert_eq!(b, VectorField::basis(3, 2));
    }

    #[test]
    fn self_bracket_vanishes() {
        let (x1, _) = heisenberg();
        assert!(lie_bracket(&x1, &x1).unwrap().is_zero());
    }

    #[test]
    fn engel_brackets() {
        let x1 = VectorField::<f64>::basis(4, 0);
        let one = Poly::one(4);
        let zero = Poly::zero(4);
        let x2 = VectorField::new(vec![zero.clone(), one, Poly::var(4, 0), Poly::var(4, 2)]).unwrap();
        let fields = [x1, x2];
        assert_eq!(iterated_bracket(&fields, &[0, 1]).unwrap(), VectorField::basis(4, 2));
        assert_eq!(iterated_bracket(&fields, &[0, 1, 1]).unwrap(), VectorField::basis(4, 3));
        assert!(iterated_bracket(&fields, &[0, 1, 0]).unwrap().is_zero());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = VectorField::<f64>::basis(2, 0);
        let b = VectorField::<f64>::basis(3, 0);
        assert!(matches!(lie_bracket(&a, &b), Err(Error::DimensionMismatch { .. })));
    }
}
