//! Small dense linear-algebra helpers over nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value threshold used for every rank decision.
pub const RANK_TOL: f64 = 1e-9;

pub fn from_columns(cols: &[Vec<f64>]) -> DMatrix<f64> {
    let n = cols.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
}

pub fn from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let m = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j])
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Numerical rank with threshold `RANK_TOL × σ_max`.
pub fn rank(m: &DMatrix<f64>) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().filter(|&&v| v > RANK_TOL * smax).count(),
        _ => 0,
    }
}

/// Moore–Penrose pseudo-inverse, discarding singular values below
/// `rel_tol × σ_max`.
pub fn pinv(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = rel_tol * smax;
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            out += vt.row(k).transpose() * u.column(k).transpose() / s;
        }
    }
    out
}

pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    a.clone().lu().solve(b).ok_or_else(|| Error::InvalidInput("singular linear system".into()))
}

pub fn inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    a.clone().try_inverse()
}

/// Orthonormal basis (as columns) of the Euclidean orthogonal complement of
/// the column span of `a`.
pub fn orthogonal_complement(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let r = rank(a);
    if a.ncols() == 0 || r == 0 {
        return DMatrix::identity(n, n);
    }
    // Full SVD through the square matrix [a | 0].
    let mut sq = DMatrix::zeros(n, n.max(a.ncols()));
    sq.view_mut((0, 0), (n, a.ncols())).copy_from(a);
    let svd = sq.svd(true, false);
    let u = svd.u.expect("u requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let cols: Vec<DVector<f64>> = idx[r..n].iter().map(|&k| u.column(k).into_owned()).collect();
    DMatrix::from_columns(&cols)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_and_pinv() {
        let m = from_columns(&[vec![1.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]]);
        assert_eq!(rank(&m), 1);
        let p = pinv(&m, 1e-12);
        let back = &m * &p * &m;
        assert!((back - &m).norm() < 1e-12);
    }

    #[test]
    fn complement_is_orthogonal() {
        let m = from_columns(&[vec![1.0, 1.0, 0.0]]);
        let c = orthogonal_complement(&m);
        assert_eq!(c.ncols(), 2);
        assert!((m.transpose() * &c).norm() < 1e-12);
        assert!((c.transpose() * &c - DMatrix::identity(2, 2)).norm() < 1e-12);
    }
}
