//! Upper bounds on the distance from explicit horizontal curves with
//! piecewise-constant controls.
//!
//! For a fixed number of equal-duration segments the energy `Σ|u_s|²/N` is
//! minimized subject to the endpoint constraint with the minimal-norm
//! linearized step `u ← D⁺(y − E(u) + D u)`, whose fixed points are KKT
//! points. Levels double the segment count, seeded by the previous solution.

use nalgebra::{DMatrix, DVector};

use super::{DistanceResult, Engine, Witness};
use crate::compiled::FieldKernel;
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::flows::ChartBox;
use crate::linalg;
use crate::ode::{self, FlowConfig};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    pub segments: usize,
    /// Number of phase angles in the grid of rotating-control initial guesses.
    pub control_grid: usize,
    /// Iteration cap of the constrained refinement at each level.
    pub refine_rounds: usize,
    /// Constant `C` in `d(E(u), y) ≤ C |E(u) − y|^{1/s}`.
    pub lipschitz: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { segments: 32, control_grid: 6, refine_rounds: 80, lipschitz: 4.0 }
    }
}

/// Piecewise-constant control search on a fixed horizontal frame.
#[derive(Clone, Debug)]
pub struct ControlOracle {
    kernel: FieldKernel,
    n: usize,
    m: usize,
    step: u32,
    chart: ChartBox,
    cfg: FlowConfig,
}

struct Evaluation {
    endpoint: Vec<f64>,
    jacobian: DMatrix<f64>,
}

impl ControlOracle {
    /// `step` is the step of the distribution, used for the residual bound.
    pub fn new(horizontal: &[VectorField<f64>], step: u32, chart: ChartBox) -> Self {
        let kernel = FieldKernel::new(horizontal, 1);
        ControlOracle { n: kernel.dim(), m: kernel.count(), kernel, step: step.max(1), chart, cfg: FlowConfig::with_tolerances(1e-11, 1e-13) }
    }

    pub fn from_engine(engine: &super::DistanceEngine, step: u32) -> Self {
        Self::new(engine.horizontal(), step, engine.chart().clone())
    }

    fn segment(&self, x: &[f64], u: &[f64], tau: f64) -> Result<Vec<f64>> {
        let n = self.n;
        let chart = &self.chart;
        ode::integrate(
            |_, s: &[f64], ds: &mut [f64]| {
                let e = self.kernel.eval(s);
                for k in 0..n {
                    ds[k] = (0..self.m).map(|i| u[i] * e.value(i, k)).sum();
                }
                Ok(())
            },
            0.0,
            x,
            tau,
            &self.cfg,
            |_, s| chart.check(s),
        )
        .map(|(y, _)| y)
    }

    /// Segment flow with `∂/∂x` (n×n) and `∂/∂u` (n×m), row-major.
    fn segment_with_sensitivity(&self, x: &[f64], u: &[f64], tau: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let n = self.n;
        let m = self.m;
        let mut s0 = x.to_vec();
        for k in 0..n {
            for j in 0..n {
                s0.push(if k == j { 1.0 } else { 0.0 });
            }
        }
        s0.extend(std::iter::repeat_n(0.0, n * m));
        let chart = &self.chart;
        let (s, _) = ode::integrate(
            |_, s: &[f64], ds: &mut [f64]| {
                let e = self.kernel.eval(&s[..n]);
                let mut b = vec![0.0; n * n];
                for k in 0..n {
                    ds[k] = (0..m).map(|i| u[i] * e.value(i, k)).sum();
                    for l in 0..n {
                        b[k * n + l] = (0..m).map(|i| u[i] * e.d1(i, k, l)).sum();
                    }
                }
                let sx = &s[n..n + n * n];
                let su = &s[n + n * n..];
                for k in 0..n {
                    for j in 0..n {
                        ds[n + k * n + j] = (0..n).map(|l| b[k * n + l] * sx[l * n + j]).sum();
                    }
                    for i in 0..m {
                        ds[n + n * n + k * m + i] = (0..n).map(|l| b[k * n + l] * su[l * m + i]).sum::<f64>() + e.value(i, k);
                    }
                }
                Ok(())
            },
            0.0,
            &s0,
            tau,
            &self.cfg,
            |_, s| chart.check(&s[..n]),
        )?;
        Ok((s[..n].to_vec(), s[n..n + n * n].to_vec(), s[n + n * n..].to_vec()))
    }

    /// Endpoint of the curve from `x` driven by `controls` (one `m`-vector per
    /// segment, each of duration `1/N`).
    pub fn endpoint(&self, x: &[f64], controls: &[Vec<f64>]) -> Result<Vec<f64>> {
        let tau = 1.0 / controls.len() as f64;
        let mut p = x.to_vec();
        for u in controls {
            p = self.segment(&p, u, tau)?;
        }
        Ok(p)
    }

    fn evaluate(&self, x: &[f64], controls: &[Vec<f64>]) -> Result<Evaluation> {
        let n = self.n;
        let m = self.m;
        let nseg = controls.len();
        let tau = 1.0 / nseg as f64;
        let mut p = x.to_vec();
        let mut sxs = Vec::with_capacity(nseg);
        let mut sus = Vec::with_capacity(nseg);
        for u in controls {
            let (np, sx, su) = self.segment_with_sensitivity(&p, u, tau)?;
            p = np;
            sxs.push(DMatrix::from_row_slice(n, n, &sx));
            sus.push(DMatrix::from_row_slice(n, m, &su));
        }
        let mut jac = DMatrix::zeros(n, m * nseg);
        let mut t = DMatrix::<f64>::identity(n, n);
        for s in (0..nseg).rev() {
            let block = &t * &sus[s];
            jac.view_mut((0, s * m), (n, m)).copy_from(&block);
            t = &t * &sxs[s];
        }
        Ok(Evaluation { endpoint: p, jacobian: jac })
    }

    fn energy(controls: &[Vec<f64>]) -> f64 {
        controls.iter().map(|u| linalg::dot(u, u)).sum::<f64>() / controls.len() as f64
    }

    /// Length `Σ |u_s| / N` of the curve.
    pub fn length(controls: &[Vec<f64>]) -> f64 {
        controls.iter().map(|u| linalg::norm(u)).sum::<f64>() / controls.len() as f64
    }

    fn flatten(controls: &[Vec<f64>]) -> DVector<f64> {
        DVector::from_iterator(controls.iter().map(Vec::len).sum(), controls.iter().flatten().copied())
    }

    fn unflatten(&self, v: &DVector<f64>) -> Vec<Vec<f64>> {
        v.as_slice().chunks(self.m).map(<[f64]>::to_vec).collect()
    }

    /// Constrained energy minimization from `controls`; returns the refined
    /// controls and the endpoint residual.
    fn refine(&self, x: &[f64], y: &[f64], controls: Vec<Vec<f64>>, rounds: usize) -> Option<(Vec<Vec<f64>>, f64)> {
        let mut u = controls;
        let mut ev = self.evaluate(x, &u).ok()?;
        let mut res = linalg::dist(&ev.endpoint, y);
        let mut energy = Self::energy(&u);
        let scale = 1.0 + linalg::norm(y);
        for _ in 0..rounds {
            let uf = Self::flatten(&u);
            let rhs = DVector::from_iterator(self.n, y.iter().zip(&ev.endpoint).map(|(a, b)| a - b)) + &ev.jacobian * &uf;
            let target = linalg::pinv(&ev.jacobian, 1e-12) * rhs;
            let delta = &target - &uf;
            if delta.norm() <= 1e-13 * (1.0 + uf.norm()) && res <= 1e-12 * scale {
                break;
            }
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..12 {
                let cand = self.unflatten(&(&uf + &delta * alpha));
                if let Ok(p) = self.endpoint(x, &cand) {
                    let r = linalg::dist(&p, y);
                    let e = Self::energy(&cand);
                    let better_res = r < res * (1.0 - 1e-4 * alpha);
                    let better_energy = e < energy - 1e-14 && r <= (10.0 * res).max(1e-9 * scale);
                    if better_res || better_energy {
                        u = cand;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
            ev = self.evaluate(x, &u).ok()?;
            res = linalg::dist(&ev.endpoint, y);
            energy = Self::energy(&u);
        }
        // Polish the endpoint with minimal-norm corrections only.
        for _ in 0..20 {
            if res <= 1e-13 * scale {
                break;
            }
            let r = DVector::from_iterator(self.n, y.iter().zip(&ev.endpoint).map(|(a, b)| a - b));
            let corr = linalg::pinv(&ev.jacobian, 1e-12) * r;
            let cand = self.unflatten(&(Self::flatten(&u) + corr));
            let Ok(e2) = self.evaluate(x, &cand) else { break };
            let r2 = linalg::dist(&e2.endpoint, y);
            if r2 >= res {
                break;
            }
            u = cand;
            ev = e2;
            res = r2;
        }
        Some((u, res))
    }

    fn bound(&self, controls: &[Vec<f64>], res: f64, lipschitz: f64) -> f64 {
        Self::length(controls) + lipschitz * res.powf(1.0 / self.step as f64)
    }

    /// Certified upper bound on `d(x, y)`.
    pub fn distance(&self, x: &[f64], y: &[f64], cfg: &OracleConfig) -> Result<DistanceResult> {
        if cfg.segments == 0 {
            return Err(Error::InvalidInput("segments must be at least 1".into()));
        }
        if x.len() != self.n || y.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: y.len() });
        }
        if x == y {
            return Ok(DistanceResult::zero(Engine::Oracle));
        }
        let mut base = cfg.segments;
        while base % 2 == 0 && base > 8 {
            base /= 2;
        }
        let guesses = self.initial_guesses(x, y, base, cfg.control_grid);
        let mut best: Option<(f64, Vec<Vec<f64>>, f64)> = None;
        for g in guesses {
            if let Some((u, res)) = self.refine(x, y, g, cfg.refine_rounds) {
                if res <= 1e-6 * (1.0 + linalg::norm(y)) {
                    let b = self.bound(&u, res, cfg.lipschitz);
                    if best.as_ref().is_none_or(|(bb, _, _)| b < *bb) {
                        best = Some((b, u, res));
                    }
                }
            }
        }
        let (mut bound, mut controls, mut residual) =
            best.ok_or_else(|| Error::Infeasible(format!("no piecewise-constant curve reached {y:?}")))?;
        let mut level = base;
        let mut seed = controls.clone();
        while level < cfg.segments {
            level *= 2;
            let up: Vec<Vec<f64>> = seed.iter().flat_map(|u| [u.clone(), u.clone()]).collect();
            seed = up.clone();
            if let Some((u, res)) = self.refine(x, y, up, cfg.refine_rounds) {
                if res <= 1e-6 * (1.0 + linalg::norm(y)) {
                    let b = self.bound(&u, res, cfg.lipschitz);
                    seed = u.clone();
                    if b < bound {
                        bound = b;
                        controls = u;
                        residual = res;
                    }
                }
            }
        }
        Ok(DistanceResult {
            value: bound,
            lower_hint: 0.0,
            upper_bound: bound,
            engine: Engine::Oracle,
            witness: Witness::Controls { controls, residual },
            flag: None,
        })
    }

    fn initial_guesses(&self, x: &[f64], y: &[f64], nseg: usize, grid: usize) -> Vec<Vec<Vec<f64>>> {
        let n = self.n;
        let m = self.m;
        let e = self.kernel.eval(x);
        let ah = DMatrix::from_fn(n, m, |k, i| e.value(i, k));
        let d = DVector::from_iterator(n, y.iter().zip(x).map(|(a, b)| a - b));
        let straight: Vec<f64> = (linalg::pinv(&ah, 1e-12) * &d).iter().copied().collect();
        // Scale from the part of the displacement the horizontal frame misses.
        let missing = (&d - &ah * DVector::from_row_slice(&straight)).norm();
        let amp = (linalg::norm(&straight).powi(2) + 4.0 * std::f64::consts::PI * missing).sqrt().max(1e-12);
        let mut out = vec![vec![straight.clone(); nseg]];
        if m < 2 {
            return out;
        }
        let pairs: Vec<(usize, usize)> = (0..m).flat_map(|a| ((a + 1)..m).map(move |b| (a, b))).collect();
        for &(a, b) in &pairs {
            for &turns in &[1.0, -1.0] {
                for &scale in &[0.6, 1.0, 1.6] {
                    for g in 0..grid.max(1) {
                        let phase = 2.0 * std::f64::consts::PI * g as f64 / grid.max(1) as f64;
                        let ctrl = (0..nseg)
                            .map(|s| {
                                let t = (s as f64 + 0.5) / nseg as f64;
                                let ang = turns * 2.0 * std::f64::consts::PI * t + phase;
                                let mut u = straight.clone();
                                u[a] += amp * scale * ang.cos();
                                u[b] += amp * scale * ang.sin();
                                u
                            })
                            .collect();
                        out.push(ctrl);
                    }
                }
            }
        }
        out
    }
}
