//! Truncated Taylor series and exact Taylor recursions for flows of
//! polynomial fields.

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::poly::Poly;
use crate::scalar::Scalar;

/// Taylor expansion at 0 of one scalar function, truncated at weighted
/// degree `order`.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet<T: Scalar> {
    pub weights: Vec<u32>,
    pub order: u32,
    pub poly: Poly<T>,
}

impl<T: Scalar> Jet<T> {
    pub fn new(poly: Poly<T>, weights: &[u32], order: u32) -> Self {
        Jet { poly: poly.truncate_weighted(weights, order), weights: weights.to_vec(), order }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn add(&self, other: &Self) -> Self {
        let order = self.order.min(other.order);
        Jet::new(&self.poly + &other.poly, &self.weights, order)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let order = self.order.min(other.order);
        Jet { poly: self.poly.mul_truncated(&other.poly, Some((&self.weights, order))), weights: self.weights.clone(), order }
    }

    /// Part of weighted degree exactly `d`.
    pub fn homogeneous_part(&self, d: u32) -> Poly<T> {
        self.poly.homogeneous_part(&self.weights, d)
    }

    /// Coefficients of weighted degree below `d`.
    pub fn below(&self, d: u32) -> Poly<T> {
        self.poly.filter_weighted(&self.weights, |k| k < d)
    }
}

/// Taylor expansion of `x ↦ exp(Σ_i y_i X_i)(base)` where `base` is a point
/// given by polynomials in `nvars` variables and the `y_i` are the variables
/// listed in `dir_vars`.
///
/// Uses `k G_k = [Σ_i y_i X_i(G_0 + … + G_{k−1})]_k`, where `[·]_k` is the part
/// of degree `k` in the direction variables, up to degree `max_degree`.
/// `trunc` truncates every intermediate product by weighted degree.
pub fn exp_series<T: Scalar>(
    fields: &[VectorField<T>],
    base: &[Poly<T>],
    dir_vars: &[usize],
    max_degree: u32,
    trunc: Option<(&[u32], u32)>,
) -> Vec<Poly<T>> {
    let n = base.len();
    let nvars = base.first().map_or(0, Poly::nvars);
    let mut dir_weights = vec![0u32; nvars];
    for &v in dir_vars {
        dir_weights[v] = 1;
    }
    let ys: Vec<Poly<T>> = dir_vars.iter().map(|&v| Poly::var(nvars, v)).collect();
    let embedded: Vec<Vec<Poly<T>>> = fields.iter().map(|f| f.coeffs().to_vec()).collect();
    let mut acc: Vec<Poly<T>> = base.to_vec();
    let trim = |p: Poly<T>| match trunc {
        Some((w, d)) => p.truncate_weighted(w, d),
        None => p,
    };
    for k in 1..=max_degree {
        let mut next = acc.clone();
        for l in 0..n {
            let mut rhs = Poly::zero(nvars);
            for (i, comps) in embedded.iter().enumerate() {
                let c = &comps[l];
                if c.is_zero() {
                    continue;
                }
                // Only the degree-(k−1) part in y of X_i^l(acc) contributes.
                let composed = c.compose(&acc, trunc).homogeneous_part(&dir_weights, k - 1);
                if composed.is_zero() {
                    continue;
                }
                rhs += &ys[i].mul_truncated(&composed, trunc);
            }
            let inv_k = T::one() / T::from_u32(k).expect("degree fits");
            next[l] += &trim(rhs).scale(&inv_k);
        }
        acc = next;
    }
    acc
}

/// Matrix of polynomials, row-major.
pub type PolyMatrix<T> = Vec<Vec<Poly<T>>>;

fn mat_mul<T: Scalar>(a: &PolyMatrix<T>, b: &PolyMatrix<T>, trunc: Option<(&[u32], u32)>) -> PolyMatrix<T> {
    let n = a.len();
    let p = b[0].len();
    let nvars = a[0][0].nvars();
    let mut out = vec![vec![Poly::zero(nvars); p]; n];
    for i in 0..n {
        for k in 0..b.len() {
            if a[i][k].is_zero() {
                continue;
            }
            for j in 0..p {
                if !b[k][j].is_zero() {
                    out[i][j] += &a[i][k].mul_truncated(&b[k][j], trunc);
                }
            }
        }
    }
    out
}

/// Inverse of a constant matrix by Gauss–Jordan elimination with partial
/// pivoting, exact for exact scalars.
pub fn invert_constant<T: Scalar>(m: &[Vec<T>]) -> Option<Vec<Vec<T>>> {
    let n = m.len();
    let mut a: Vec<Vec<T>> = m.to_vec();
    let mut inv: Vec<Vec<T>> = (0..n).map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect()).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap_or(std::cmp::Ordering::Equal))?;
        if a[piv][col].is_zero() {
            return None;
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let p = a[col][col].clone();
        for j in 0..n {
            a[col][j] = a[col][j].clone() / p.clone();
            inv[col][j] = inv[col][j].clone() / p.clone();
        }
        for i in 0..n {
            if i == col || a[i][col].is_zero() {
                continue;
            }
            let f = a[i][col].clone();
            for j in 0..n {
                let t = a[col][j].clone() * f.clone();
                a[i][j] -= t;
                let t = inv[col][j].clone() * f.clone();
                inv[i][j] -= t;
            }
        }
    }
    Some(inv)
}

/// Weighted jets at 0 of the coefficients `a_ij` of the coordinate frame
/// `X̃_i = Σ_j a_ij ∂_j` in exponential coordinates centred at `q`.
///
/// The expansion of `F_q` comes from the exact Taylor recursion; `dF_q⁻¹` is
/// expanded as a Neumann series around `dF_q(0)`. Entry `[i][j]` is `a_ij`.
pub fn coordinate_frame_jets<T: Scalar>(fields: &[VectorField<T>], weights: &[u32], q: &[T], order: u32) -> Result<Vec<Vec<Jet<T>>>> {
    let n = fields.len();
    if n == 0 || weights.len() != n || q.len() != n {
        return Err(Error::InvalidInput("frame, weights and base point must share the dimension".into()));
    }
    let step = *weights.iter().max().expect("nonempty");
    let full = order + step;
    let tr: Option<(&[u32], u32)> = Some((weights, full));
    let base: Vec<Poly<T>> = q.iter().map(|c| Poly::constant(n, c.clone())).collect();
    let all: Vec<usize> = (0..n).collect();
    let f = exp_series(fields, &base, &all, full, tr);

    let tk: Option<(&[u32], u32)> = Some((weights, order));
    // dF[k][j] = ∂_j F^k.
    let df: PolyMatrix<T> = (0..n).map(|k| (0..n).map(|j| f[k].derivative(j).truncate_weighted(weights, order)).collect()).collect();
    let m0: Vec<Vec<T>> = df.iter().map(|row| row.iter().map(Poly::constant_term).collect()).collect();
    let m0_inv = invert_constant(&m0).ok_or_else(|| Error::SingularFrame(q.iter().map(|v| v.to_f64_lossy()).collect()))?;
    let m0_inv_p: PolyMatrix<T> = m0_inv.iter().map(|row| row.iter().map(|c| Poly::constant(n, c.clone())).collect()).collect();
    let m1: PolyMatrix<T> = df.iter().map(|row| row.iter().map(|p| p - &Poly::constant(n, p.constant_term())).collect()).collect();
    // N = −M0⁻¹ M1; dF⁻¹ = Σ_k N^k M0⁻¹.
    let mut neg = mat_mul(&m0_inv_p, &m1, tk);
    for row in neg.iter_mut() {
        for p in row.iter_mut() {
            *p = -&*p;
        }
    }
    let mut term = m0_inv_p.clone();
    let mut inv = m0_inv_p;
    for _ in 0..order {
        term = mat_mul(&neg, &term, tk);
        if term.iter().all(|r| r.iter().all(Poly::is_zero)) {
            break;
        }
        for (ri, rt) in inv.iter_mut().zip(&term) {
            for (a, b) in ri.iter_mut().zip(rt) {
                *a += b;
            }
        }
    }
    // Columns X_i(F(x)).
    let xf: PolyMatrix<T> = (0..n)
        .map(|k| (0..n).map(|i| fields[i].coeff(k).compose(&f, tk).truncate_weighted(weights, order)).collect())
        .collect();
    let a = mat_mul(&inv, &xf, tk);
    // a[j][i] is component j of X̃_i.
    Ok((0..n).map(|i| (0..n).map(|j| Jet::new(a[j][i].clone(), weights, order)).collect()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jet_product_truncates() {
        let w = [1, 2];
        let x = Jet::new(Poly::<f64>::var(2, 0), &w, 2);
        let y = Jet::new(Poly::<f64>::var(2, 1), &w, 2);
        assert!(x.mul(&y).poly.is_zero());
        assert_eq!(x.mul(&x).poly, Poly::var(2, 0).pow(2));
    }

    #[test]
    fn exp_series_of_linear_field_is_exponential() {
        // X = x ∂x: exp(y X)(x0) = x0 e^y.
        let f = VectorField::new(vec![Poly::<f64>::var(1, 0).extend_vars(1)]).unwrap();
        let base = vec![Poly::constant(1, 2.0)];
        let s = exp_series(&[f], &base, &[0], 6, None);
        let mut expected = 0.0;
        let mut fact = 1.0;
        for k in 0..=6 {
            if k > 0 {
                fact *= k as f64;
            }
            expected += 2.0 * 0.3f64.powi(k) / fact;
        }
        assert!((s[0].eval_f64(&[0.3]) - expected).abs() < 1e-14);
    }

    #[test]
    fn constant_inverse() {
        let m = vec![vec![2.0f64, 1.0], vec![1.0, 1.0]];
        let inv = invert_constant(&m).unwrap();
        assert!((inv[0][0] - 1.0).abs() < 1e-15 && (inv[0][1] + 1.0).abs() < 1e-15);
        assert!(invert_constant(&[vec![1.0, 2.0], vec![2.0, 4.0]]).is_none());
    }
}
