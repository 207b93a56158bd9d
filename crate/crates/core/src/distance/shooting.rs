//! Multiple-start geodesic shooting for the Carnot–Carathéodory distance.
//!
//! Extremals are parametrized on `[0, 1]` by the initial covector `P`; the
//! length of the arc is `|h(P)| = (Σ ⟨P, X_i(q)⟩²)^{1/2}`, so solving
//! `x_P(1) = y` and minimizing `|h(P)|` over the solutions gives the distance.

use nalgebra::{DMatrix, DVector};

use super::hamiltonian::Hamiltonian;
use super::{DistanceResult, Engine, Witness};
use crate::compiled::FieldKernel;
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::flows::ChartBox;
use crate::frame::PrivilegedFrame;
use crate::linalg;
use crate::ode::FlowConfig;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShootingConfig {
    /// Number of starting covectors.
    pub attempts: usize,
    /// Iteration cap per start.
    pub max_iter: usize,
    /// Endpoint residual accepted as converged, relative to `1 + |y|_∞`.
    pub tol: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        ShootingConfig { attempts: 16, max_iter: 40, tol: 1e-10 }
    }
}

/// A converged extremal.
#[derive(Clone, Debug)]
pub struct ShootSolution {
    pub covector: Vec<f64>,
    pub length: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Distance engine for one sub-Riemannian structure on a chart box.
#[derive(Clone, Debug)]
pub struct DistanceEngine {
    horizontal: Vec<VectorField<f64>>,
    ham: Hamiltonian,
    full: Option<FieldKernel>,
    weights: Vec<u32>,
    chart: ChartBox,
    cfg: FlowConfig,
    shooting: ShootingConfig,
}

impl DistanceEngine {
    /// Uses the whole privileged frame to parametrize starting covectors.
    pub fn new(frame: &PrivilegedFrame<f64>, chart: ChartBox) -> Self {
        Self::from_fields(&frame.fields, &frame.weights, chart)
    }

    /// `fields` is a full frame whose first fields (weight one) are the
    /// orthonormal horizontal frame.
    pub fn from_fields(fields: &[VectorField<f64>], weights: &[u32], chart: ChartBox) -> Self {
        let m = weights.iter().filter(|&&w| w == 1).count();
        DistanceEngine {
            horizontal: fields[..m].to_vec(),
            ham: Hamiltonian::new(&fields[..m]),
            full: Some(FieldKernel::new(fields, 0)),
            weights: weights.to_vec(),
            chart,
            cfg: FlowConfig::default(),
            shooting: ShootingConfig::default(),
        }
    }

    /// Only the horizontal fields are known; the remaining directions of a
    /// starting covector are taken in the Euclidean complement, with weight 2.
    pub fn from_horizontal(horizontal: &[VectorField<f64>], chart: ChartBox) -> Self {
        let n = horizontal[0].dim();
        let m = horizontal.len();
        let mut weights = vec![1; m];
        weights.extend(std::iter::repeat_n(2, n - m));
        DistanceEngine { horizontal: horizontal.to_vec(), ham: Hamiltonian::new(horizontal), full: None, weights, chart, cfg: FlowConfig::default(), shooting: ShootingConfig::default() }
    }

    pub fn with_config(mut self, cfg: FlowConfig) -> Self {
        self.cfg = cfg;
        self
    }

    pub fn with_shooting(mut self, shooting: ShootingConfig) -> Self {
        self.shooting = shooting;
        self
    }

    pub fn horizontal(&self) -> &[VectorField<f64>] {
        &self.horizontal
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.ham
    }

    pub fn chart(&self) -> &ChartBox {
        &self.chart
    }

    pub fn flow_config(&self) -> &FlowConfig {
        &self.cfg
    }

    pub fn shooting_config(&self) -> &ShootingConfig {
        &self.shooting
    }

    pub fn dim(&self) -> usize {
        self.ham.dim()
    }

    pub fn rank(&self) -> usize {
        self.ham.rank()
    }

    pub fn weights(&self) -> &[u32] {
        &self.weights
    }

    /// Matrix whose columns are the frame used for covector components at `q`.
    pub fn basis_at(&self, q: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        match &self.full {
            Some(k) => {
                let e = k.eval(q);
                DMatrix::from_fn(n, n, |r, c| e.value(c, r))
            }
            None => {
                let h = linalg::from_rows(&self.ham.horizontal_at(q)).transpose();
                let comp = linalg::orthogonal_complement(&h);
                let mut cols: Vec<DVector<f64>> = (0..h.ncols()).map(|i| h.column(i).into_owned()).collect();
                cols.extend((0..comp.ncols()).map(|i| comp.column(i).into_owned()));
                DMatrix::from_columns(&cols)
            }
        }
    }

    /// Covector `P` with frame components `comps = (⟨P, X_i(q)⟩)_i`.
    pub fn covector_from_components(&self, q: &[f64], comps: &[f64]) -> Result<Vec<f64>> {
        let a = self.basis_at(q);
        let sol = a.transpose().lu().solve(&DVector::from_row_slice(comps)).ok_or_else(|| Error::SingularFrame(q.to_vec()))?;
        Ok(sol.iter().copied().collect())
    }

    pub fn components_of_covector(&self, q: &[f64], p: &[f64]) -> Vec<f64> {
        let a = self.basis_at(q);
        (a.transpose() * DVector::from_row_slice(p)).iter().copied().collect()
    }

    /// Length `|h(P)|` of the extremal with initial covector `P` at `q`.
    pub fn arc_length(&self, q: &[f64], p: &[f64]) -> f64 {
        self.ham.controls(q, p).iter().map(|h| h * h).sum::<f64>().sqrt()
    }

    pub fn endpoint(&self, q: &[f64], p: &[f64]) -> Result<Vec<f64>> {
        self.ham.endpoint(q, p, &self.chart, &self.cfg)
    }

    /// Rough distance scale from frame coordinates of `y − q`.
    pub fn length_estimate(&self, q: &[f64], y: &[f64]) -> f64 {
        let a = self.basis_at(q);
        let d = DVector::from_iterator(q.len(), y.iter().zip(q).map(|(a, b)| a - b));
        let c = a.lu().solve(&d).unwrap_or(d);
        let mut h2 = 0.0;
        let mut v2 = 0.0;
        for (i, &w) in self.weights.iter().enumerate() {
            if w == 1 {
                h2 += c[i] * c[i];
            } else {
                v2 += (4.0 * std::f64::consts::PI * c[i].abs()).powf(2.0 / w as f64);
            }
        }
        (h2 + v2).sqrt()
    }

    /// Frame components of the `k`-th deterministic starting covector.
    pub fn start_components(&self, q: &[f64], y: &[f64], k: usize) -> Vec<f64> {
        let n = self.dim();
        let m = self.rank();
        let l = self.length_estimate(q, y).max(1e-300);
        if k == 0 {
            let a = self.basis_at(q);
            let d = DVector::from_iterator(n, y.iter().zip(q).map(|(a, b)| a - b));
            let c = a.lu().solve(&d).unwrap_or(d);
            let hn = (0..m).map(|i| c[i] * c[i]).sum::<f64>().sqrt();
            let mut comps = vec![0.0; n];
            for i in 0..m {
                comps[i] = if hn > 0.0 { c[i] / hn * l } else if i == 0 { l } else { 0.0 };
            }
            return comps;
        }
        let dir = if m == 1 { vec![if k % 2 == 0 { 1.0 } else { -1.0 }] } else { rng::halton_sphere(k as u64, m) };
        let u = rng::halton(k as u64 + 7, (n - m).max(1));
        let mut comps = vec![0.0; n];
        for i in 0..m {
            comps[i] = l * dir[i];
        }
        for i in m..n {
            let w = self.weights[i] as i32;
            comps[i] = l.powi(2 - w) * 2.0 * std::f64::consts::PI * (2.0 * u[i - m] - 1.0);
        }
        comps
    }

    /// Damped Gauss–Newton/Levenberg–Marquardt solve of `x_P(1) = y` from `p0`.
    pub fn solve_from(&self, q: &[f64], y: &[f64], p0: &[f64]) -> Option<ShootSolution> {
        self.solve_capped(q, y, p0, f64::INFINITY)
    }

    /// As [`Self::solve_from`], abandoning iterates whose arc length exceeds
    /// `length_cap`.
    pub fn solve_capped(&self, q: &[f64], y: &[f64], p0: &[f64], length_cap: f64) -> Option<ShootSolution> {
        let n = self.dim();
        let tol = self.shooting.tol * (1.0 + y.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        // Loose integration while far from the target, full accuracy near it.
        let coarse = FlowConfig { rel_tol: 1e-7, abs_tol: 1e-9, max_step_count: 20_000 };
        let length_cap = length_cap.min(10.0 * self.length_estimate(q, y));
        let p_cap = 50.0 * (linalg::norm(p0) + 1.0);
        let switch = 1e-4 * (1.0 + linalg::norm(y));
        let mut fine = false;
        let mut p = p0.to_vec();
        let (mut x, mut jac) = self.ham.endpoint_with_sensitivity(q, &p, &self.chart, &coarse).ok()?;
        let mut rn = linalg::dist(&x, y);
        let mut history: Vec<f64> = Vec::new();
        for it in 0..self.shooting.max_iter {
            if !fine && rn <= switch {
                fine = true;
                let (xn, jn) = self.ham.endpoint_with_sensitivity(q, &p, &self.chart, &self.cfg).ok()?;
                x = xn;
                jac = jn;
                rn = linalg::dist(&x, y);
            }
            if fine && rn <= tol {
                return Some(ShootSolution { length: self.arc_length(q, &p), covector: p, residual: rn, iterations: it });
            }
            if self.arc_length(q, &p) > length_cap || linalg::norm(&p) > p_cap {
                return None;
            }
            history.push(rn);
            if history.len() > 8 && rn > 0.5 * history[history.len() - 8] {
                return None;
            }
            let cfg = if fine { &self.cfg } else { &coarse };
            let j = DMatrix::from_row_slice(n, n, &jac);
            let rv = DVector::from_iterator(n, x.iter().zip(y).map(|(a, b)| a - b));
            let jtj = j.transpose() * &j;
            let jtr = j.transpose() * &rv;
            let diag_max = (0..n).map(|i| jtj[(i, i)]).fold(0.0, f64::max).max(1e-300);
            let mut candidates: Vec<DVector<f64>> = vec![-linalg::pinv(&j, 1e-12) * &rv];
            let mut mu = 1e-6 * diag_max;
            for _ in 0..6 {
                let mut a = jtj.clone();
                for i in 0..n {
                    a[(i, i)] += mu;
                }
                if let Some(step) = a.lu().solve(&(-&jtr)) {
                    candidates.push(step);
                }
                mu *= 30.0;
            }
            let mut accepted = false;
            for step in &candidates {
                let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                let Ok(xt) = self.ham.endpoint(q, &trial, &self.chart, cfg) else { continue };
                if linalg::dist(&xt, y) < rn {
                    p = trial;
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                return None;
            }
            let (xn, jn) = self.ham.endpoint_with_sensitivity(q, &p, &self.chart, cfg).ok()?;
            x = xn;
            jac = jn;
            rn = linalg::dist(&x, y);
        }
        (fine && rn <= tol).then(|| ShootSolution { length: self.arc_length(q, &p), covector: p, residual: rn, iterations: self.shooting.max_iter })
    }

    /// Shortest converged extremal from the deterministic starts, plus any
    /// caller-supplied covectors (tried first).
    pub fn shoot_all(&self, q: &[f64], y: &[f64], guesses: &[Vec<f64>], attempts: usize) -> Vec<ShootSolution> {
        let mut sols: Vec<ShootSolution> = Vec::new();
        let cap = |sols: &[ShootSolution]| sols.iter().map(|s| s.length).fold(f64::INFINITY, f64::min) * 1.5;
        for g in guesses {
            if let Some(s) = self.solve_capped(q, y, g, cap(&sols)) {
                sols.push(s);
            }
        }
        for k in 0..attempts {
            let comps = self.start_components(q, y, k);
            let Ok(p0) = self.covector_from_components(q, &comps) else { continue };
            if let Some(s) = self.solve_capped(q, y, &p0, cap(&sols)) {
                sols.push(s);
            }
        }
        sols
    }

    /// Distance by multiple-start shooting.
    pub fn distance_shooting(&self, q: &[f64], y: &[f64]) -> Result<DistanceResult> {
        self.distance_shooting_with(q, y, &[], self.shooting.attempts)
    }

    pub fn distance_shooting_with(&self, q: &[f64], y: &[f64], guesses: &[Vec<f64>], attempts: usize) -> Result<DistanceResult> {
        if q.len() != self.dim() || y.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: y.len() });
        }
        self.chart.check(q)?;
        self.chart.check(y)?;
        if q == y {
            return Ok(DistanceResult::zero(Engine::Shooting));
        }
        let sols = self.shoot_all(q, y, guesses, attempts);
        let best = sols
            .into_iter()
            .min_by(|a, b| a.length.total_cmp(&b.length))
            .ok_or_else(|| Error::ShootingFailed(y.to_vec()))?;
        Ok(DistanceResult {
            value: best.length,
            lower_hint: 0.0,
            upper_bound: f64::INFINITY,
            engine: Engine::Shooting,
            witness: Witness::Covector { covector: best.covector, residual: best.residual },
            flag: None,
        })
    }
}
