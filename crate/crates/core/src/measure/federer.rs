//! Empirical spherical Federer density of the surface measure and the double
//! blow-up comparison with `‖ω‖ β`.

use nalgebra::DVector;

use super::ball::BallOracle;
use super::spherical::{spherical_factor, SphericalFactorConfig, SphericalFactorResult};
use super::surface::{sr_surface_measure, QuadConfig, Region};
use super::{horizontal_normal, volume_norm, HypersurfacePatch, VolumeForm};
use crate::distance::{diameter_estimate, DistanceEngine};
use crate::error::{Error, Result};
use crate::flows::{dilate, ExpChart};
use crate::frame::{MetricExtension, PrivilegedFrame};
use crate::gauge::GaugeTable;
use crate::linalg;
use crate::nilpotent::nilpotent_at;
use crate::ode::FlowConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct FedererConfig {
    pub radii: Vec<f64>,
    /// Candidate centers per axis of the coarse grid over the unit ball.
    pub center_grid: usize,
    /// Pattern-search tolerance on the normalized center.
    pub center_tol: f64,
    pub quad: QuadConfig,
    /// Sphere samples of the diameter estimate.
    pub diameter_count: usize,
    pub diameter_attempts: usize,
}

impl Default for FedererConfig {
    fn default() -> Self {
        FedererConfig { radii: vec![0.2, 0.1, 0.05], center_grid: 5, center_tol: 1e-2, quad: QuadConfig::default(), diameter_count: 16, diameter_attempts: 4 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadiusSample {
    pub radius: f64,
    /// `2^α σ(B̄(y, r)) / diam(B̄(y, r))^α` at the best center.
    pub ratio: f64,
    pub center: Vec<f64>,
    pub measure: f64,
    pub quad_error: f64,
    pub diameter: f64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FedererReport {
    /// Estimate at the smallest radius.
    pub value: f64,
    pub alpha: u32,
    pub per_radius: Vec<RadiusSample>,
}

/// Least-squares preimage of `x` under the patch map, from `s0`.
fn pullback(patch: &HypersurfacePatch, x: &[f64], s0: &[f64]) -> Vec<f64> {
    let mut s = s0.to_vec();
    for _ in 0..30 {
        let res: Vec<f64> = x.iter().zip(patch.point(&s)).map(|(a, b)| a - b).collect();
        let step = linalg::pinv(&patch.tangents(&s), 1e-12) * DVector::from_vec(res);
        for (v, d) in s.iter_mut().zip(step.iter()) {
            *v += d;
        }
        if step.norm() < 1e-14 * (1.0 + linalg::norm(&s)) {
            break;
        }
    }
    s
}

struct Setup<'a> {
    patch: &'a HypersurfacePatch,
    omega: &'a VolumeForm,
    metric: &'a MetricExtension,
    frame: &'a PrivilegedFrame<f64>,
    oracle: &'a BallOracle,
    chart: ExpChart,
    table: std::sync::Arc<GaugeTable>,
    s_p: Vec<f64>,
    p: Vec<f64>,
    alpha: i32,
    cfg: &'a FedererConfig,
}

impl Setup<'_> {
    fn center(&self, v: &[f64], r: f64) -> Result<Vec<f64>> {
        self.chart.map(&dilate(v, self.chart.weights(), r))
    }

    /// Parameter box around the approximate image of `B̄(y, r)`, with `y =
    /// F_p(δ_r v)`.
    fn sub_patch(&self, v: &[f64], r: f64) -> Result<HypersurfacePatch> {
        let g = self.table.group();
        let sphere = self.table.unit_sphere_points();
        let d = self.patch.param_dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        let stride = (sphere.len() / 200).max(1);
        for s in sphere.iter().step_by(stride) {
            let x = self.chart.map(&dilate(&g.mul(v, s), self.chart.weights(), r))?;
            let u = pullback(self.patch, &x, &self.s_p);
            for k in 0..d {
                lo[k] = lo[k].min(u[k]);
                hi[k] = hi[k].max(u[k]);
            }
        }
        for k in 0..d {
            let w = hi[k] - lo[k];
            lo[k] = (lo[k] - 0.3 * w).max(self.patch.lo[k]);
            hi[k] = (hi[k] + 0.3 * w).min(self.patch.hi[k]);
        }
        self.patch.restricted(lo, hi)
    }

    fn measure(&self, v: &[f64], r: f64, refine: bool) -> Result<(Vec<f64>, super::SurfaceMeasure)> {
        let y = self.center(v, r)?;
        let sub = self.sub_patch(v, r)?;
        let region = Region::Ball { center: &y, radius: r, oracle: self.oracle, refine };
        let m = sr_surface_measure(&sub, self.omega, self.metric, self.frame, region, &self.cfg.quad)?;
        Ok((y, m))
    }

    fn ratio_at(&self, v: &[f64], r: f64) -> Result<f64> {
        let y = self.center(v, r)?;
        if self.oracle.estimate(&y, &self.p)? > r {
            return Ok(f64::NEG_INFINITY);
        }
        let (_, m) = self.measure(v, r, false)?;
        Ok(m.value / r.powi(self.alpha))
    }
}

/// Compass search on the normalized center from `start`.
fn compass(setup: &Setup, start: (f64, Vec<f64>), ext: &[f64], grid: usize, r: f64) -> Result<(f64, Vec<f64>)> {
    let mut best = start;
    let mut step: Vec<f64> = ext.iter().map(|e| e / (grid - 1) as f64).collect();
    while step.iter().zip(ext).any(|(s, e)| *s > setup.cfg.center_tol * e) {
        let mut improved = false;
        for i in 0..ext.len() {
            for sign in [1.0, -1.0] {
                let mut v = best.1.clone();
                v[i] += sign * step[i];
                let q = setup.ratio_at(&v, r)?;
                if q > best.0 {
                    best = (q, v);
                    improved = true;
                }
            }
        }
        if !improved {
            for s in step.iter_mut() {
                *s *= 0.5;
            }
        }
    }
    Ok(best)
}

/// Sup over sampled balls `B̄(y, r) ∋ p` of `2^α σ(B̄(y, r)) / diam^α`, with
/// `α = Q − 1`, for each radius.
///
/// Centers are `y = F_p(δ_r v)` with `v` on a grid of the tangent unit ball
/// followed by compass searches from the best node and from the origin.
/// During the search the diameter is taken as `2r`; the final ratio uses
/// `diameter_estimate` at the chosen center.
#[allow(clippy::too_many_arguments)]
pub fn federer_density(
    patch: &HypersurfacePatch,
    omega: &VolumeForm,
    metric: &MetricExtension,
    frame: &PrivilegedFrame<f64>,
    s_p: &[f64],
    oracle: &BallOracle,
    engine: &DistanceEngine,
    cfg: &FedererConfig,
) -> Result<FedererReport> {
    if cfg.radii.is_empty() {
        return Err(Error::InvalidInput("at least one radius".into()));
    }
    let p = patch.point(s_p);
    let nd = horizontal_normal(patch, metric, frame, s_p)?;
    if nd.characteristic {
        return Err(Error::InvalidInput(format!("point {p:?} is characteristic")));
    }
    let nf = nilpotent_at(frame, &p)?;
    let table = GaugeTable::shared(&nf, &Default::default())?;
    let n = frame.dim();
    let alpha = frame.homogeneous_dim as i32 - 1;
    let chart = ExpChart::new(frame, &p, engine.chart().clone(), FlowConfig::default());
    let setup = Setup { patch, omega, metric, frame, oracle, chart, table: table.clone(), s_p: s_p.to_vec(), p: p.clone(), alpha, cfg };
    let sphere = table.unit_sphere_points();
    let ext: Vec<f64> = (0..n).map(|i| sphere.iter().map(|s| s[i].abs()).fold(0.0, f64::max)).collect();
    let grid = cfg.center_grid.max(2);

    let mut per_radius = Vec::with_capacity(cfg.radii.len());
    for &r in &cfg.radii {
        let mut best: (f64, Vec<f64>) = (f64::NEG_INFINITY, vec![0.0; n]);
        for flat in 0..grid.pow(n as u32) {
            let mut rem = flat;
            let v: Vec<f64> = (0..n)
                .map(|i| {
                    let t = rem % grid;
                    rem /= grid;
                    ext[i] * (-1.0 + 2.0 * t as f64 / (grid - 1) as f64)
                })
                .collect();
            if table.estimate(&v) > 1.0 {
                continue;
            }
            let q = setup.ratio_at(&v, r)?;
            if q > best.0 {
                best = (q, v);
            }
        }
        if !best.0.is_finite() {
            return Err(Error::InvalidInput(format!("no sampled ball of radius {r} contains {p:?}")));
        }
        let origin = vec![0.0; n];
        let mut starts = vec![best.clone()];
        if best.1 != origin {
            starts.push((setup.ratio_at(&origin, r)?, origin));
        }
        for start in starts {
            let found = compass(&setup, start, &ext, grid, r)?;
            if found.0 > best.0 {
                best = found;
            }
        }
        let (y, m) = setup.measure(&best.1, r, true)?;
        let diam = diameter_estimate(engine, &y, r, cfg.diameter_count, cfg.diameter_attempts)?.value;
        let mut warnings = m.warnings.clone();
        if diam < 2.0 * r * 0.95 {
            warnings.push(format!("diameter {diam} is below 0.95·2r"));
        }
        let ratio = 2f64.powi(alpha) * m.value / diam.powi(alpha);
        per_radius.push(RadiusSample { radius: r, ratio, center: y, measure: m.value, quad_error: m.error, diameter: diam, warnings });
    }
    let smallest = per_radius.iter().min_by(|a, b| a.radius.total_cmp(&b.radius)).expect("nonempty");
    Ok(FedererReport { value: smallest.ratio, alpha: alpha as u32, per_radius })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DoubleBlowupReport {
    pub density: FedererReport,
    pub volume_norm: f64,
    pub beta: SphericalFactorResult,
    /// `‖ω(p)‖ β(ν_D(p))`.
    pub rhs: f64,
    /// `|density − rhs| / rhs`.
    pub discrepancy: f64,
    /// Relative error bar from the Monte-Carlo error of `β` and the
    /// quadrature error of the density.
    pub combined_error: f64,
}

/// Compares the Federer density of the surface measure at `Φ(s_p)` with
/// `‖ω(p)‖_g β(ν_D(p))`.
#[allow(clippy::too_many_arguments)]
pub fn double_blowup_check(
    patch: &HypersurfacePatch,
    omega: &VolumeForm,
    metric: &MetricExtension,
    frame: &PrivilegedFrame<f64>,
    s_p: &[f64],
    oracle: &BallOracle,
    engine: &DistanceEngine,
    federer: &FedererConfig,
    spherical: &SphericalFactorConfig,
) -> Result<DoubleBlowupReport> {
    let density = federer_density(patch, omega, metric, frame, s_p, oracle, engine, federer)?;
    let p = patch.point(s_p);
    let nd = horizontal_normal(patch, metric, frame, s_p)?;
    let vn = volume_norm(omega, metric, frame, &p)?;
    let nf = nilpotent_at(frame, &p)?;
    let beta = spherical_factor(&nf, &frame.matrix_at(&p), &nd.horizontal, spherical)?;
    let rhs = vn * beta.beta;
    let last = density.per_radius.iter().min_by(|a, b| a.radius.total_cmp(&b.radius)).expect("nonempty");
    let quad_rel = if last.measure > 0.0 { last.quad_error / last.measure } else { 0.0 };
    let combined_error = ((beta.std_error / beta.beta).powi(2) + quad_rel.powi(2)).sqrt();
    Ok(DoubleBlowupReport { discrepancy: (density.value - rhs).abs() / rhs, density, volume_norm: vn, beta, rhs, combined_error })
}
