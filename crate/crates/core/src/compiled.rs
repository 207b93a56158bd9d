//! Flattened polynomial evaluation for the numerical hot loops.

use crate::field::VectorField;
use crate::poly::Poly;
use crate::scalar::Scalar;

/// A batch of polynomials in the same variables, evaluated together so the
/// table of variable powers is built once per point.
#[derive(Clone, Debug)]
pub struct PolySet {
    nvars: usize,
    offsets: Vec<usize>,
    max_exp: Vec<usize>,
    table_len: usize,
    coeffs: Vec<f64>,
    term_start: Vec<usize>,
    factors: Vec<usize>,
    poly_start: Vec<usize>,
}

impl PolySet {
    pub fn new<T: Scalar>(nvars: usize, polys: &[Poly<T>]) -> Self {
        let mut max_exp = vec![0usize; nvars];
        for p in polys {
            assert_eq!(p.nvars(), nvars, "polynomial arity mismatch");
            for (m, _) in p.terms() {
                for (i, &e) in m.iter().enumerate() {
                    max_exp[i] = max_exp[i].max(e as usize);
                }
            }
        }
        let mut offsets = Vec::with_capacity(nvars);
        let mut table_len = 0;
        for &e in &max_exp {
            offsets.push(table_len);
            table_len += e + 1;
        }
        let mut coeffs = Vec::new();
        let mut term_start = vec![0];
        let mut factors = Vec::new();
        let mut poly_start = vec![0];
        for p in polys {
            for (m, c) in p.terms() {
                coeffs.push(c.to_f64_lossy());
                for (i, &e) in m.iter().enumerate() {
                    if e > 0 {
                        factors.push(offsets[i] + e as usize);
                    }
                }
                term_start.push(factors.len());
            }
            poly_start.push(coeffs.len());
        }
        PolySet { nvars, offsets, max_exp, table_len, coeffs, term_start, factors, poly_start }
    }

    pub fn len(&self) -> usize {
        self.poly_start.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Whether polynomial `k` has no terms.
    pub fn is_zero(&self, k: usize) -> bool {
        self.poly_start[k] == self.poly_start[k + 1]
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nvars);
        debug_assert_eq!(out.len(), self.len());
        let mut table = vec![1.0; self.table_len];
        for i in 0..self.nvars {
            let off = self.offsets[i];
            for e in 1..=self.max_exp[i] {
                table[off + e] = table[off + e - 1] * x[i];
            }
        }
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for t in self.poly_start[k]..self.poly_start[k + 1] {
                let mut v = self.coeffs[t];
                for &f in &self.factors[self.term_start[t]..self.term_start[t + 1]] {
                    v *= table[f];
                }
                acc += v;
            }
            *o = acc;
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(x, &mut out);
        out
    }
}

/// Values and derivatives of a list of vector fields, laid out for the
/// Hamiltonian and variational right-hand sides.
#[derive(Clone, Debug)]
pub struct FieldKernel {
    dim: usize,
    count: usize,
    order: usize,
    set: PolySet,
}

/// Evaluation of a [`FieldKernel`] at one point.
#[derive(Clone, Debug)]
pub struct FieldEval {
    dim: usize,
    count: usize,
    data: Vec<f64>,
}

impl FieldKernel {
    /// `order` is the highest derivative order needed (0, 1 or 2).
    pub fn new<T: Scalar>(fields: &[VectorField<T>], order: usize) -> Self {
        assert!(order <= 2);
        let dim = fields.first().map_or(0, |f| f.dim());
        let mut polys: Vec<Poly<T>> = Vec::new();
        for f in fields {
            polys.extend(f.coeffs().iter().cloned());
        }
        if order >= 1 {
            for f in fields {
                for c in f.coeffs() {
                    for l in 0..dim {
                        polys.push(c.derivative(l));
                    }
                }
            }
        }
        if order >= 2 {
            for f in fields {
                for c in f.coeffs() {
                    for l in 0..dim {
                        let d = c.derivative(l);
                        for j in 0..dim {
                            polys.push(d.derivative(j));
                        }
                    }
                }
            }
        }
        FieldKernel { dim, count: fields.len(), order, set: PolySet::new(dim, &polys) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn eval(&self, x: &[f64]) -> FieldEval {
        FieldEval { dim: self.dim, count: self.count, data: self.set.eval(x) }
    }

    /// Whether the second derivative block is identically zero.
    pub fn second_derivatives_vanish(&self) -> bool {
        if self.order < 2 {
            return true;
        }
        let start = self.count * self.dim * (1 + self.dim);
        (start..self.set.len()).all(|k| self.set.is_zero(k))
    }
}

impl FieldEval {
    /// Component `k` of field `i`.
    #[inline]
    pub fn value(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.dim + k]
    }

    /// `∂_l X_i^k`.
    #[inline]
    pub fn d1(&self, i: usize, k: usize, l: usize) -> f64 {
        let base = self.count * self.dim;
        self.data[base + (i * self.dim + k) * self.dim + l]
    }

    /// `∂_l ∂_j X_i^k`.
    #[inline]
    pub fn d2(&self, i: usize, k: usize, l: usize, j: usize) -> f64 {
        let n = self.dim;
        let base = self.count * n * (1 + n);
        self.data[base + ((i * n + k) * n + l) * n + j]
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_symbolic_eval() {
        let x = Poly::<f64>::var(3, 0);
        let y = Poly::<f64>::var(3, 1);
        let p = &(&x * &x) * &y + y.scale(&3.0) - Poly::constant(3, 0.5);
        let q = Poly::<f64>::var(3, 2).pow(3);
        let set = PolySet::new(3, &[p.clone(), Poly::zero(3), q.clone()]);
        let pt = [0.3, -1.2, 0.7];
        let v = set.eval(&pt);
        assert!((v[0] - p.eval_f64(&pt)).abs() < 1e-14);
        assert_eq!(v[1], 0.0);
        assert!((v[2] - q.eval_f64(&pt)).abs() < 1e-14);
    }

    #[test]
    fn kernel_derivatives() {
        let x = Poly::<f64>::var(2, 0);
        let f = VectorField::new(vec![Poly::one(2), &x * &x]).unwrap();
        let k = FieldKernel::new(&[f], 2);
        let e = k.eval(&[0.5, 0.0]);
        assert_eq!(e.value(0, 1), 0.25);
        assert_eq!(e.d1(0, 1, 0), 1.0);
        assert_eq!(e.d2(0, 1, 0, 0), 2.0);
        assert_eq!(e.d1(0, 0, 0), 0.0);
        assert!(!k.second_derivatives_vanish());
    }
}
