//! Nilpotent approximation of a privileged frame and checks of the resulting
//! stratified structure.

use crate::error::{Error, Result};
use crate::field::{iterated_bracket, lie_bracket, VectorField};
use crate::frame::{bracket_layers, PrivilegedFrame};
use crate::jet::{coordinate_frame_jets, Jet};
use crate::linalg;
use crate::poly::Poly;
use crate::scalar::Scalar;

/// Tolerance separating roundoff from a genuine failure of `b_ii = 1`,
/// `b_ij = 0` on equal weights.
pub const PRIVILEGED_TOL: f64 = 1e-6;

/// The δ-homogeneous frame `X̂_i = Σ_j b_ij ∂_j` at a base point.
#[derive(Clone, Debug)]
pub struct NilpotentFrame<T: Scalar> {
    pub fields: Vec<VectorField<T>>,
    pub weights: Vec<u32>,
    /// `structure_constants[i][j][k] = c^k_ij` with `[X̂_i, X̂_j] = Σ_k c^k_ij X̂_k`.
    pub structure_constants: Vec<Vec<Vec<f64>>>,
    pub base_point: Vec<f64>,
}

impl<T: Scalar> NilpotentFrame<T> {
    pub fn dim(&self) -> usize {
        self.fields.len()
    }

    pub fn step(&self) -> u32 {
        *self.weights.iter().max().expect("nonempty frame")
    }

    /// Number of weight-one fields.
    pub fn rank(&self) -> usize {
        self.weights.iter().filter(|&&w| w == 1).count()
    }

    pub fn horizontal(&self) -> &[VectorField<T>] {
        &self.fields[..self.rank()]
    }

    pub fn homogeneous_dim(&self) -> u32 {
        self.weights.iter().sum()
    }

    pub fn to_f64(&self) -> NilpotentFrame<f64> {
        NilpotentFrame {
            fields: self.fields.iter().map(VectorField::to_f64).collect(),
            weights: self.weights.clone(),
            structure_constants: self.structure_constants.clone(),
            base_point: self.base_point.clone(),
        }
    }

    /// Views the nilpotent frame as a privileged frame on ℝⁿ centred at 0.
    pub fn as_privileged(&self) -> PrivilegedFrame<T> {
        let mut growth = Vec::new();
        for j in 1..=self.step() {
            growth.push(self.weights.iter().filter(|&&w| w <= j).count());
        }
        PrivilegedFrame {
            fields: self.fields.clone(),
            weights: self.weights.clone(),
            step: growth.len(),
            growth,
            homogeneous_dim: self.homogeneous_dim(),
            bracket_recipe: (0..self.dim()).map(|i| vec![i]).collect(),
            metric: crate::frame::MetricExtension::FrameOrthonormal,
            base_point: vec![0.0; self.dim()],
        }
    }
}

/// Jets of the coordinate-frame coefficients of `frame` at `q`, to weighted
/// order `order` (at least the step).
pub fn coefficient_jets<T: Scalar>(frame: &PrivilegedFrame<T>, q: &[f64], order: u32) -> Result<Vec<Vec<Jet<T>>>> {
    let step = *frame.weights.iter().max().expect("nonempty frame");
    if order < step {
        return Err(Error::InvalidInput(format!("jet order {order} is below the step {step}")));
    }
    let qt: Vec<T> = q.iter().map(|&v| T::from_f64_lossy(v)).collect();
    coordinate_frame_jets(&frame.fields, &frame.weights, &qt, order)
}

/// Default jet order: one above the step.
pub fn default_order(weights: &[u32]) -> u32 {
    weights.iter().max().copied().unwrap_or(1) + 1
}

/// `b_ij` = weighted-homogeneous part of degree `w_j − w_i` of `a_ij`.
pub fn nilpotent_approximation<T: Scalar>(jets: &[Vec<Jet<T>>], weights: &[u32], base_point: &[f64]) -> Result<NilpotentFrame<T>> {
    let n = weights.len();
    if jets.len() != n || jets.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: jets.len() });
    }
    let mut fields = Vec::with_capacity(n);
    for i in 0..n {
        let mut coeffs = Vec::with_capacity(n);
        for j in 0..n {
            let b = if weights[j] >= weights[i] {
                let d = weights[j] - weights[i];
                if jets[i][j].order < d {
                    return Err(Error::InvalidInput(format!("jet order {} cannot hold degree {d}", jets[i][j].order)));
                }
                jets[i][j].homogeneous_part(d)
            } else {
                Poly::zero(n)
            };
            if weights[i] == weights[j] {
                let expected = if i == j { 1.0 } else { 0.0 };
                let got = b.constant_term().to_f64_lossy();
                if (got - expected).abs() > PRIVILEGED_TOL {
                    return Err(Error::NonPrivileged(format!("b_{}{} = {got}, expected {expected}", i + 1, j + 1)));
                }
            }
            coeffs.push(b);
        }
        fields.push(VectorField::new(coeffs)?);
    }
    let structure_constants = structure_constants(&fields)?;
    Ok(NilpotentFrame { fields, weights: weights.to_vec(), structure_constants, base_point: base_point.to_vec() })
}

/// `c^k_ij = [X̂_i, X̂_j](0)_k`, using `X̂_k(0) = e_k`.
fn structure_constants<T: Scalar>(fields: &[VectorField<T>]) -> Result<Vec<Vec<Vec<f64>>>> {
    let n = fields.len();
    let zero = vec![T::zero(); n];
    let mut c = vec![vec![vec![0.0; n]; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let b = lie_bracket(&fields[i], &fields[j])?.eval(&zero);
            for k in 0..n {
                let v = b[k].to_f64_lossy();
                c[i][j][k] = v;
                c[j][i][k] = -v;
            }
        }
    }
    Ok(c)
}

/// Nilpotent approximation at `q` with the default jet order.
pub fn nilpotent_at<T: Scalar>(frame: &PrivilegedFrame<T>, q: &[f64]) -> Result<NilpotentFrame<T>> {
    let jets = coefficient_jets(frame, q, default_order(&frame.weights))?;
    nilpotent_approximation(&jets, &frame.weights, q)
}

/// Outcome of one structural check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct StratifiedReport {
    pub checks: Vec<CheckResult>,
}

impl StratifiedReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn max_residual(&self) -> f64 {
        self.checks.iter().map(|c| c.residual).fold(0.0, f64::max)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Tolerance for the stratification checks.
pub const STRATIFIED_TOL: f64 = 1e-10;

/// Homogeneity, nilpotency, layer generation and Lie-algebra consistency of
/// a nilpotent frame.
pub fn verify_stratified<T: Scalar>(nf: &NilpotentFrame<T>) -> StratifiedReport {
    let n = nf.dim();
    let w = &nf.weights;
    let fields: Vec<VectorField<f64>> = nf.fields.iter().map(VectorField::to_f64).collect();
    let step = nf.step();

    // (a) b_ij(δ_r x) = r^{w_j − w_i} b_ij(x).
    let samples: [[f64; 4]; 3] = [[0.3, -0.7, 0.5, 0.2], [-0.4, 0.25, -0.6, 0.9], [0.8, 0.1, 0.35, -0.45]];
    let mut homog = 0.0f64;
    for s in &samples {
        let x: Vec<f64> = (0..n).map(|k| s[k % 4] * (1.0 + 0.1 * (k / 4) as f64)).collect();
        for &r in &[0.5f64, 2.0] {
            let xr: Vec<f64> = x.iter().zip(w).map(|(v, &wk)| v * r.powi(wk as i32)).collect();
            for i in 0..n {
                for j in 0..n {
                    let b: &Poly<f64> = fields[i].coeff(j);
                    let lhs = b.eval_f64(&xr);
                    let rhs = r.powi(w[j] as i32 - w[i] as i32) * b.eval_f64(&x);
                    homog = homog.max((lhs - rhs).abs() / (1.0 + rhs.abs()));
                }
            }
        }
    }

    // (b) brackets of weighted length above the step vanish.
    let mut nilp = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if w[i] + w[j] > step {
                if let Ok(b) = lie_bracket(&fields[i], &fields[j]) {
                    nilp = nilp.max(b.max_abs_coeff());
                }
            }
        }
    }
    let m = nf.rank();
    if let Ok(layers) = bracket_layers(&fields[..m], step as usize + 1) {
        if let Some(last) = layers.last() {
            if layers.len() == step as usize + 1 {
                for b in last {
                    nilp = nilp.max(b.field.max_abs_coeff());
                }
            }
        }
    }

    // (c) brackets of layer-one fields of length j span layer j at 0.
    let mut generation = 0.0f64;
    let mut generated = true;
    let zero = vec![0.0; n];
    for j in 1..=step {
        let idx: Vec<usize> = (0..n).filter(|&k| w[k] == j).collect();
        let words = words_of_length(m, j as usize);
        let mut cols = Vec::new();
        for word in &words {
            if let Ok(b) = iterated_bracket(&fields[..m], word) {
                let v = b.eval_f64(&zero);
                cols.push(idx.iter().map(|&k| v[k]).collect::<Vec<f64>>());
                // Components outside layer j must vanish at 0.
                for (k, val) in v.iter().enumerate() {
                    if w[k] != j {
                        generation = generation.max(val.abs());
                    }
                }
            }
        }
        if idx.is_empty() {
            continue;
        }
        if cols.is_empty() || linalg::rank(&linalg::from_columns(&cols)) < idx.len() {
            generated = false;
        }
    }

    // Structure constants: antisymmetry, grading and the Jacobi identity.
    let c = &nf.structure_constants;
    let mut jacobi = 0.0f64;
    let mut grading = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                jacobi = jacobi.max((c[i][j][k] + c[j][i][k]).abs());
                if w[k] != w[i] + w[j] {
                    grading = grading.max(c[i][j][k].abs());
                }
                for l in 0..n {
                    let mut s = 0.0;
                    for p in 0..n {
                        s += c[j][k][p] * c[i][p][l] + c[k][i][p] * c[j][p][l] + c[i][j][p] * c[k][p][l];
                    }
                    jacobi = jacobi.max(s.abs());
                }
            }
        }
    }
    // The brackets are combinations of the frame with these constants.
    let mut closure = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            if let Ok(b) = lie_bracket(&fields[i], &fields[j]) {
                let refs: Vec<&VectorField<f64>> = fields.iter().collect();
                if let Ok(comb) = VectorField::combination(&refs, &c[i][j]) {
                    if let Ok(d) = b.sub(&comb) {
                        closure = closure.max(d.max_abs_coeff());
                    }
                }
            }
        }
    }

    let tol = STRATIFIED_TOL;
    StratifiedReport {
        checks: vec![
            CheckResult { name: "homogeneity", passed: homog < tol, residual: homog },
            CheckResult { name: "nilpotency", passed: nilp < tol, residual: nilp },
            CheckResult { name: "layer_generation", passed: generated && generation < tol, residual: generation },
            CheckResult { name: "structure_constants", passed: jacobi < tol && grading < tol && closure < tol, residual: jacobi.max(grading).max(closure) },
        ],
    }
}

fn words_of_length(m: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..len {
        out = out.into_iter().flat_map(|w| (0..m).map(move |i| {
            let mut v = w.clone();
            v.push(i);
            v
        })).collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{build_privileged_frame, MetricExtension};

    fn perturbed() -> Vec<VectorField<f64>> {
        let x = Poly::<f64>::var(3, 0);
        let y = Poly::<f64>::var(3, 1);
        vec![
            VectorField::new(vec![Poly::one(3), Poly::zero(3), y.scale(&-0.5)]).unwrap(),
            VectorField::new(vec![Poly::zero(3), Poly::one(3), &x.scale(&0.5) + &(&x * &x)]).unwrap(),
        ]
    }

    #[test]
    fn perturbed_heisenberg_linear_coefficient() {
        let pf = build_privileged_frame(&perturbed(), &MetricExtension::FrameOrthonormal, &[0.0; 3]).unwrap();
        let jets = coefficient_jets(&pf, &[0.0; 3], 3).unwrap();
        assert!((jets[1][2].poly.coeff(&[1, 0, 0]) - 0.5).abs() < 1e-12);
        let nf = nilpotent_approximation(&jets, &pf.weights, &[0.0; 3]).unwrap();
        assert!((nf.structure_constants[0][1][2] - 1.0).abs() < 1e-12);
        assert!(verify_stratified(&nf).passed());
    }
}
