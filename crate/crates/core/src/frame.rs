//! Flag computation, privileged frames and Riemannian extensions of the
//! sub-Riemannian metric.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::field::{lie_bracket, VectorField};
use crate::linalg;
use crate::poly::Poly;
use crate::scalar::Scalar;

/// Growth vector of the flag at a set of probe points.
#[derive(Clone, Debug, PartialEq)]
pub struct FlagReport {
    /// `n_1 ≤ … ≤ n_s = n` at the first probe point.
    pub growth: Vec<usize>,
    pub step: usize,
    pub equiregular: bool,
    /// First probe point whose growth vector differs, with that vector.
    pub mismatch: Option<(Vec<f64>, Vec<usize>)>,
}

/// A bracket of the horizontal fields, tagged by its left-normed word.
#[derive(Clone, Debug)]
pub struct Bracket<T: Scalar> {
    pub word: Vec<usize>,
    pub field: VectorField<T>,
}

/// All nonzero left-normed brackets of length `1..=max_len`, grouped by
/// length and listed in lexicographic word order.
pub fn bracket_layers<T: Scalar>(horizontal: &[VectorField<T>], max_len: usize) -> Result<Vec<Vec<Bracket<T>>>> {
    let mut layers: Vec<Vec<Bracket<T>>> = Vec::new();
    let first: Vec<Bracket<T>> =
        horizontal.iter().enumerate().map(|(i, f)| Bracket { word: vec![i], field: f.clone() }).collect();
    layers.push(first);
    for _ in 1..max_len {
        let prev = layers.last().expect("nonempty");
        let mut next = Vec::new();
        for b in prev {
            for (j, h) in horizontal.iter().enumerate() {
                if b.word.len() == 1 && b.word[0] == j {
                    continue;
                }
                let f = lie_bracket(&b.field, h)?;
                if !f.is_zero() {
                    let mut word = b.word.clone();
                    word.push(j);
                    next.push(Bracket { word, field: f });
                }
            }
        }
        layers.push(next);
    }
    Ok(layers)
}

fn eval_f64<T: Scalar>(f: &VectorField<T>, x: &[f64]) -> Vec<f64> {
    f.coeffs().iter().map(|c| eval_poly_f64(c, x)).collect()
}

fn eval_poly_f64<T: Scalar>(p: &Poly<T>, x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (m, c) in p.terms() {
        let mut v = c.to_f64_lossy();
        for (i, &e) in m.iter().enumerate() {
            if e > 0 {
                v *= x[i].powi(e as i32);
            }
        }
        acc += v;
    }
    acc
}

fn growth_at<T: Scalar>(layers: &[Vec<Bracket<T>>], x: &[f64], n: usize) -> Vec<usize> {
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut growth = Vec::new();
    for layer in layers {
        cols.extend(layer.iter().map(|b| eval_f64(&b.field, x)));
        let r = linalg::rank(&linalg::from_columns(&cols));
        growth.push(r);
        if r == n {
            break;
        }
    }
    growth
}

/// Computes the growth vector of the flag generated by `horizontal` at every
/// probe point.
pub fn compute_flag<T: Scalar>(horizontal: &[VectorField<T>], probe_points: &[Vec<f64>], max_step: usize) -> Result<FlagReport> {
    let n = horizontal.first().ok_or_else(|| Error::InvalidInput("at least one horizontal field".into()))?.dim();
    if probe_points.is_empty() {
        return Err(Error::InvalidInput("no probe points".into()));
    }
    let layers = bracket_layers(horizontal, max_step.max(1))?;
    let mut first: Option<Vec<usize>> = None;
    let mut mismatch = None;
    for p in probe_points {
        if p.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: p.len() });
        }
        let cols: Vec<Vec<f64>> = horizontal.iter().map(|f| eval_f64(f, p)).collect();
        if linalg::rank(&linalg::from_columns(&cols)) < horizontal.len() {
            return Err(Error::SingularFrame(p.clone()));
        }
        let g = growth_at(&layers, p, n);
        if *g.last().expect("nonempty") < n {
            return Err(Error::ChowFailure { point: p.clone(), max_step });
        }
        match &first {
            None => first = Some(g),
            Some(f) if *f != g && mismatch.is_none() => mismatch = Some((p.clone(), g)),
            _ => {}
        }
    }
    let growth = first.expect("at least one probe");
    Ok(FlagReport { step: growth.len(), growth, equiregular: mismatch.is_none(), mismatch })
}

/// Weights `w_i = j` for `n_{j−1} < i ≤ n_j`.
pub fn weights_from_growth(growth: &[usize]) -> Vec<u32> {
    let mut w = Vec::new();
    let mut prev = 0;
    for (j, &nj) in growth.iter().enumerate() {
        for _ in prev..nj {
            w.push(j as u32 + 1);
        }
        prev = nj;
    }
    w
}

/// Riemannian metric extending the sub-Riemannian one.
#[derive(Clone, Debug, PartialEq)]
pub enum MetricExtension {
    /// The privileged frame is declared orthonormal everywhere.
    FrameOrthonormal,
    /// A symmetric positive definite polynomial matrix `G(x)`.
    UserMatrix(Vec<Vec<Poly<f64>>>),
}

impl MetricExtension {
    /// Extension that declares the frame `(X_1, …, X_n)` orthogonal with
    /// `g(X_i, X_i) = scales[i]²`; returned as a user matrix so that
    /// evaluation does not depend on which frame is passed later.
    pub fn scaled_frame(frame_matrix_inverse: &[Vec<Poly<f64>>], scales: &[f64]) -> Self {
        // G = A⁻ᵀ diag(s²) A⁻¹ with A⁻¹ given row-major as polynomials.
        let n = scales.len();
        let mut g = vec![vec![Poly::zero(n); n]; n];
        for (a, row) in g.iter_mut().enumerate() {
            for (b, entry) in row.iter_mut().enumerate() {
                let mut acc = Poly::zero(n);
                for (k, s) in scales.iter().enumerate() {
                    acc += &(&frame_matrix_inverse[k][a] * &frame_matrix_inverse[k][b]).scale(&(s * s));
                }
                *entry = acc;
            }
        }
        MetricExtension::UserMatrix(g)
    }
}

/// Ordered privileged frame with weights and bracket recipe.
#[derive(Clone, Debug)]
pub struct PrivilegedFrame<T: Scalar> {
    pub fields: Vec<VectorField<T>>,
    pub weights: Vec<u32>,
    pub growth: Vec<usize>,
    pub step: usize,
    pub homogeneous_dim: u32,
    /// Left-normed bracket word producing each field (a single index for
    /// horizontal fields).
    pub bracket_recipe: Vec<Vec<usize>>,
    pub metric: MetricExtension,
    pub base_point: Vec<f64>,
}

impl<T: Scalar> PrivilegedFrame<T> {
    pub fn dim(&self) -> usize {
        self.fields.len()
    }

    /// Number of horizontal fields `m = n_1`.
    pub fn rank(&self) -> usize {
        self.growth[0]
    }

    pub fn horizontal(&self) -> &[VectorField<T>] {
        &self.fields[..self.rank()]
    }

    /// Columns `X_1(x), …, X_n(x)`.
    pub fn matrix_at(&self, x: &[f64]) -> DMatrix<f64> {
        let cols: Vec<Vec<f64>> = self.fields.iter().map(|f| eval_f64(f, x)).collect();
        linalg::from_columns(&cols)
    }

    pub fn to_f64(&self) -> PrivilegedFrame<f64> {
        PrivilegedFrame {
            fields: self.fields.iter().map(VectorField::to_f64).collect(),
            weights: self.weights.clone(),
            growth: self.growth.clone(),
            step: self.step,
            homogeneous_dim: self.homogeneous_dim,
            bracket_recipe: self.bracket_recipe.clone(),
            metric: self.metric.clone(),
            base_point: self.base_point.clone(),
        }
    }
}

impl PrivilegedFrame<f64> {
    /// Replaces the horizontal fields by `Σ_j rot[i][j] X_j` (constant
    /// coefficients) and recomputes the bracket completion.
    pub fn rotate_horizontal(&self, rot: &[Vec<f64>]) -> Result<Self> {
        let m = self.rank();
        let mut h = Vec::with_capacity(m);
        for row in rot.iter().take(m) {
            let refs: Vec<&VectorField<f64>> = self.horizontal().iter().collect();
            h.push(VectorField::combination(&refs, row)?);
        }
        build_privileged_frame(&h, &self.metric, &self.base_point)
    }
}

/// Completes the horizontal frame with iterated brackets chosen greedily at
/// `base_point`, then orthonormalizes layer by layer against the metric.
pub fn build_privileged_frame<T: Scalar>(
    horizontal: &[VectorField<T>],
    metric: &MetricExtension,
    base_point: &[f64],
) -> Result<PrivilegedFrame<T>> {
    let n = horizontal.first().ok_or_else(|| Error::InvalidInput("at least one horizontal field".into()))?.dim();
    let flag = compute_flag(horizontal, &[base_point.to_vec()], n)?;
    let layers = bracket_layers(horizontal, flag.step)?;
    let mut fields: Vec<VectorField<T>> = horizontal.to_vec();
    let mut recipe: Vec<Vec<usize>> = (0..horizontal.len()).map(|i| vec![i]).collect();
    let mut cols: Vec<Vec<f64>> = fields.iter().map(|f| eval_f64(f, base_point)).collect();
    for (k, &target) in flag.growth.iter().enumerate().skip(1) {
        let candidates = &layers[k];
        let mut used = vec![false; candidates.len()];
        while cols.len() < target {
            let basis = linalg::from_columns(&cols);
            let complement = linalg::orthogonal_complement(&basis);
            let mut best: Option<(usize, f64)> = None;
            for (c, b) in candidates.iter().enumerate() {
                if used[c] {
                    continue;
                }
                let v = DVector::from_vec(eval_f64(&b.field, base_point));
                let score = (complement.transpose() * &v).norm();
                let better = match best {
                    None => true,
                    Some((_, s)) => score > s * (1.0 + 1e-12) + 1e-300,
                };
                if better {
                    best = Some((c, score));
                }
            }
            let (c, score) = best.ok_or_else(|| Error::SingularFrame(base_point.to_vec()))?;
            let scale = cols.iter().map(|v| linalg::norm(v)).fold(0.0, f64::max).max(1.0);
            if score <= linalg::RANK_TOL * scale {
                return Err(Error::SingularFrame(base_point.to_vec()));
            }
            used[c] = true;
            cols.push(eval_f64(&candidates[c].field, base_point));
            fields.push(candidates[c].field.clone());
            recipe.push(candidates[c].word.clone());
        }
    }
    let weights = weights_from_growth(&flag.growth);
    if let MetricExtension::UserMatrix(_) = metric {
        fields = orthonormalize_layers(fields, &weights, metric, base_point)?;
    }
    Ok(PrivilegedFrame {
        homogeneous_dim: weights.iter().sum(),
        fields,
        weights,
        growth: flag.growth,
        step: flag.step,
        bracket_recipe: recipe,
        metric: metric.clone(),
        base_point: base_point.to_vec(),
    })
}

/// Gram–Schmidt at `base_point` with constant coefficients, so the fields
/// stay polynomial. Layer one is the given orthonormal horizontal frame and
/// is left untouched.
fn orthonormalize_layers<T: Scalar>(
    fields: Vec<VectorField<T>>,
    weights: &[u32],
    metric: &MetricExtension,
    base_point: &[f64],
) -> Result<Vec<VectorField<T>>> {
    let g = user_matrix_at(metric, base_point).expect("user matrix");
    let inner = |a: &[f64], b: &[f64]| -> f64 { (DVector::from_row_slice(a).transpose() * &g * DVector::from_row_slice(b))[(0, 0)] };
    let mut out: Vec<VectorField<T>> = Vec::with_capacity(fields.len());
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(fields.len());
    for (i, f) in fields.into_iter().enumerate() {
        let v = eval_f64(&f, base_point);
        if weights[i] == 1 {
            values.push(v);
            out.push(f);
            continue;
        }
        let mut field = f;
        let mut val = v;
        for (prev_f, prev_v) in out.iter().zip(&values) {
            let c = inner(&val, prev_v);
            field = field.sub(&prev_f.scale(&T::from_f64_lossy(c)))?;
            val = val.iter().zip(prev_v).map(|(a, b)| a - c * b).collect();
        }
        let norm = inner(&val, &val).sqrt();
        if !(norm > 0.0) {
            return Err(Error::SingularFrame(base_point.to_vec()));
        }
        field = field.scale(&T::from_f64_lossy(1.0 / norm));
        values.push(val.iter().map(|a| a / norm).collect());
        out.push(field);
    }
    Ok(out)
}

fn user_matrix_at(metric: &MetricExtension, q: &[f64]) -> Option<DMatrix<f64>> {
    match metric {
        MetricExtension::FrameOrthonormal => None,
        MetricExtension::UserMatrix(g) => {
            let n = g.len();
            Some(DMatrix::from_fn(n, n, |a, b| g[a][b].eval_f64(q)))
        }
    }
}

/// Gram matrix `G(q)` of the extension in chart coordinates.
pub fn metric_matrix<T: Scalar>(metric: &MetricExtension, frame: &PrivilegedFrame<T>, q: &[f64]) -> Result<DMatrix<f64>> {
    match user_matrix_at(metric, q) {
        Some(g) => Ok(g),
        None => {
            let a = frame.matrix_at(q);
            let inv = linalg::inverse(&a).ok_or_else(|| Error::SingularFrame(q.to_vec()))?;
            Ok(inv.transpose() * inv)
        }
    }
}

/// `g_q(v, w)`.
pub fn evaluate_metric<T: Scalar>(metric: &MetricExtension, frame: &PrivilegedFrame<T>, q: &[f64], v: &[f64], w: &[f64]) -> Result<f64> {
    match metric {
        MetricExtension::FrameOrthonormal => {
            let a = frame.matrix_at(q);
            let lu = a.lu();
            let cv = lu.solve(&DVector::from_row_slice(v)).ok_or_else(|| Error::SingularFrame(q.to_vec()))?;
            let cw = lu.solve(&DVector::from_row_slice(w)).ok_or_else(|| Error::SingularFrame(q.to_vec()))?;
            Ok(cv.dot(&cw))
        }
        MetricExtension::UserMatrix(_) => {
            let g = metric_matrix(metric, frame, q)?;
            Ok((DVector::from_row_slice(v).transpose() * g * DVector::from_row_slice(w))[(0, 0)])
        }
    }
}

/// Residuals of the defining properties of a privileged orthonormal frame at
/// a probe point.
#[derive(Clone, Debug)]
pub struct FrameCheck {
    /// Whether the first `n_j` fields span a space of dimension `n_j` that
    /// contains every bracket of length `≤ j`.
    pub spans_flag: bool,
    /// `max |g(X_i, X_j) − δ_ij|` over horizontal pairs.
    pub horizontal_orthonormality: f64,
    /// `max |g(X_i, X_j) − δ_ij|` over all pairs.
    pub full_orthonormality: f64,
}

pub fn check_frame<T: Scalar>(frame: &PrivilegedFrame<T>, x: &[f64]) -> Result<FrameCheck> {
    let n = frame.dim();
    let layers = bracket_layers(frame.horizontal(), frame.step)?;
    let mut spans_flag = true;
    let mut bracket_cols: Vec<Vec<f64>> = Vec::new();
    for (j, &nj) in frame.growth.iter().enumerate() {
        bracket_cols.extend(layers[j].iter().map(|b| eval_f64(&b.field, x)));
        let own: Vec<Vec<f64>> = frame.fields[..nj].iter().map(|f| eval_f64(f, x)).collect();
        let r_own = linalg::rank(&linalg::from_columns(&own));
        let mut joint = own.clone();
        joint.extend(bracket_cols.iter().cloned());
        let r_joint = linalg::rank(&linalg::from_columns(&joint));
        if r_own != nj || r_joint != nj {
            spans_flag = false;
        }
    }
    let g = metric_matrix(&frame.metric, frame, x)?;
    let a = frame.matrix_at(x);
    let gram = a.transpose() * g * &a;
    let m = frame.rank();
    let mut h = 0.0f64;
    let mut full = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let d = (gram[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs();
            full = full.max(d);
            if i < m && j < m {
                h = h.max(d);
            }
        }
    }
    Ok(FrameCheck { spans_flag, horizontal_orthonormality: h, full_orthonormality: full })
}

/// Checks that a user-supplied extension is positive definite and restricts to
/// the sub-Riemannian metric at `q`.
pub fn validate_extension<T: Scalar>(metric: &MetricExtension, horizontal: &[VectorField<T>], q: &[f64], tol: f64) -> Result<f64> {
    let Some(g) = user_matrix_at(metric, q) else { return Ok(0.0) };
    let n = g.nrows();
    if (&g - g.transpose()).norm() > tol * (1.0 + g.norm()) {
        return Err(Error::InvalidInput("metric extension is not symmetric".into()));
    }
    if g.clone().cholesky().is_none() {
        return Err(Error::InvalidInput(format!("metric extension is not positive definite at {q:?}")));
    }
    let cols: Vec<Vec<f64>> = horizontal.iter().map(|f| eval_f64(f, q)).collect();
    let a = linalg::from_columns(&cols);
    if a.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, found: a.nrows() });
    }
    let gram = a.transpose() * g * &a;
    let resid = (gram - DMatrix::identity(cols.len(), cols.len())).abs().max();
    if resid > tol {
        return Err(Error::InvalidInput(format!("metric extension does not restrict to the horizontal metric (residual {resid:e})")));
    }
    Ok(resid)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn heisenberg() -> Vec<VectorField<f64>> {
        let x = Poly::<f64>::var(3, 0);
        let y = Poly::<f64>::var(3, 1);
        vec![
            VectorField::new(vec![Poly::one(3), Poly::zero(3), y.scale(&-0.5)]).unwrap(),
            VectorField::new(vec![Poly::zero(3), Poly::one(3), x.scale(&0.5)]).unwrap(),
        ]
    }

    #[test]
    fn heisenberg_flag() {
        let f = compute_flag(&heisenberg(), &[vec![0.0; 3], vec![1.0; 3]], 4).unwrap();
        assert_eq!(f.growth, vec![2, 3]);
        assert_eq!(f.step, 2);
        assert!(f.equiregular);
    }

    #[test]
    fn heisenberg_frame() {
        let pf = build_privileged_frame(&heisenberg(), &MetricExtension::FrameOrthonormal, &[0.0; 3]).unwrap();
        assert_eq!(pf.weights, vec![1, 1, 2]);
        assert_eq!(pf.homogeneous_dim, 4);
        assert_eq!(pf.bracket_recipe[2], vec![0, 1]);
        assert_eq!(pf.fields[2], VectorField::basis(3, 2));
    }

    #[test]
    fn metric_examples() {
        let pf = build_privileged_frame(&heisenberg(), &MetricExtension::FrameOrthonormal, &[0.0; 3]).unwrap();
        let q = [0.3, -0.4, 0.2];
        let x1 = pf.fields[0].eval_f64(&q);
        let x2 = pf.fields[1].eval_f64(&q);
        let m = &MetricExtension::FrameOrthonormal;
        assert!((evaluate_metric(m, &pf, &q, &x1, &x1).unwrap() - 1.0).abs() < 1e-14);
        assert!(evaluate_metric(m, &pf, &q, &x1, &x2).unwrap().abs() < 1e-14);
        let dz = [0.0, 0.0, 1.0];
        assert!((evaluate_metric(m, &pf, &[0.0; 3], &dz, &dz).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn non_bracket_generating_fails() {
        let f = vec![VectorField::<f64>::basis(3, 0), VectorField::basis(3, 1)];
        assert!(matches!(compute_flag(&f, &[vec![0.0; 3]], 3), Err(Error::ChowFailure { .. })));
    }
}
