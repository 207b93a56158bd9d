//! Empirical checks of the blow-up limits: rescaled distances and frames
//! against the nilpotent approximation, coordinate changes against linear
//! isometries, uniform exponential-chart radii and small-ball diameters.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::distance::{ball_boundary_sample, chart_frame, diameter_estimate, DistanceEngine, ShootingConfig, Witness};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::flows::{dilate, ChartBox, ExpChart};
use crate::frame::PrivilegedFrame;
use crate::linalg;
use crate::nilpotent::{nilpotent_at, NilpotentFrame};
use crate::ode::FlowConfig;
use crate::poly::{weighted_degree, Poly};
use crate::rng;

/// Frame of `X` in exponential coordinates at `q` together with its
/// nilpotent approximation; `fields_at(r)` gives `r^{w_i} (δ_{1/r})_* X_i`.
#[derive(Clone, Debug)]
pub struct RescaledChart {
    q: Vec<f64>,
    weights: Vec<u32>,
    fields: Vec<VectorField<f64>>,
    nilpotent: NilpotentFrame<f64>,
}

impl RescaledChart {
    pub fn new(frame: &PrivilegedFrame<f64>, q: &[f64]) -> Result<Self> {
        let order = frame.step as u32 + 4;
        Ok(RescaledChart { q: q.to_vec(), weights: frame.weights.clone(), fields: chart_frame(frame, q, order)?, nilpotent: nilpotent_at(frame, q)? })
    }

    pub fn base(&self) -> &[f64] {
        &self.q
    }

    pub fn nilpotent(&self) -> &NilpotentFrame<f64> {
        &self.nilpotent
    }

    pub fn fields_at(&self, r: f64) -> Vec<VectorField<f64>> {
        let n = self.weights.len();
        self.fields
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let coeffs = (0..n)
                    .map(|j| {
                        Poly::from_terms(
                            n,
                            f.coeff(j).terms().map(|(e, c)| {
                                let p = self.weights[i] as i32 - self.weights[j] as i32 + weighted_degree(e, &self.weights) as i32;
                                (e.clone(), c * r.powi(p))
                            }),
                        )
                    })
                    .collect();
                VectorField::new(coeffs).expect("same dimension")
            })
            .collect()
    }

    pub fn engine_at(&self, r: f64) -> DistanceEngine {
        DistanceEngine::from_fields(&self.fields_at(r), &self.weights, ChartBox::cube(self.weights.len(), 1e3))
    }

    pub fn tangent_engine(&self) -> DistanceEngine {
        DistanceEngine::from_fields(&self.nilpotent.fields, &self.nilpotent.weights, ChartBox::cube(self.weights.len(), 1e3))
    }
}

fn covector(w: &Witness) -> Option<Vec<f64>> {
    match w {
        Witness::Covector { covector, .. } => Some(covector.clone()),
        _ => None,
    }
}

/// Distance with warm starts; falls back to the full multi-start search.
fn warm_distance(engine: &DistanceEngine, x: &[f64], y: &[f64], guesses: &[Vec<f64>]) -> Result<(f64, Option<Vec<f64>>)> {
    let res = match engine.distance_shooting_with(x, y, guesses, 0) {
        Ok(r) => r,
        Err(_) => engine.distance_shooting(x, y)?,
    };
    Ok((res.value, covector(&res.witness)))
}

/// `(1/r) d̃_q(δ_r x, δ_r y)`, the distance of the rescaled chart frame.
pub fn rescaled_distance(frame: &PrivilegedFrame<f64>, q: &[f64], r: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::InvalidInput("radius must be positive".into()));
    }
    Ok(RescaledChart::new(frame, q)?.engine_at(r).distance_shooting(x, y)?.value)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceConfig {
    pub pairs: usize,
    /// Pairs are drawn uniformly from the homogeneous box `δ_h([−1, 1]ⁿ)`.
    pub scale: f64,
    /// Starts used for the tangent distances.
    pub tangent_attempts: usize,
    pub seed: u64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig { pairs: 50, scale: 0.5, tangent_attempts: 32, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub radii: Vec<f64>,
    /// Sup over base points and pairs, per radius.
    pub sup_deviation: Vec<f64>,
    /// `per_point[k][j]`: sup over pairs at base point `k`, radius `j`.
    pub per_point: Vec<Vec<f64>>,
    pub samples: String,
    /// Pairs dropped because the tangent distance could not be computed.
    pub skipped_pairs: usize,
    pub strictly_decreasing: bool,
    pub final_deviation: f64,
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput(format!("radii must be positive and strictly decreasing, got {radii:?}")));
    }
    Ok(())
}

/// Relative gap to the tangent value above which a warm-started solve is
/// double-checked by the full multi-start search.
const SUSPICIOUS: f64 = 0.05;

struct TangentDistances {
    fields: Vec<VectorField<f64>>,
    /// Distance and covector per pair; `None` where shooting failed.
    values: Vec<Option<(f64, Option<Vec<f64>>)>>,
}

fn same_fields(a: &[VectorField<f64>], b: &[VectorField<f64>]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(f, g)| f.sub(g).map(|d| d.max_abs_coeff() < 1e-12).unwrap_or(false))
}

fn tangent_distances(chart: &RescaledChart, pairs: &[(Vec<f64>, Vec<f64>)], attempts: usize) -> Result<TangentDistances> {
    let engine = chart.tangent_engine().with_shooting(ShootingConfig { attempts, ..Default::default() });
    let values = pairs
        .iter()
        .map(|(x, y)| match engine.distance_shooting(x, y) {
            Ok(d) => Ok(Some((d.value, covector(&d.witness)))),
            Err(Error::ShootingFailed(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    Ok(TangentDistances { fields: chart.nilpotent.fields.clone(), values })
}

fn point_deviations(chart: &RescaledChart, tangent: &TangentDistances, pairs: &[(Vec<f64>, Vec<f64>)], radii: &[f64]) -> Result<Vec<f64>> {
    let engines: Vec<DistanceEngine> = radii.iter().rev().map(|&r| chart.engine_at(r)).collect();
    let mut worst = vec![0.0f64; radii.len()];
    for ((x, y), value) in pairs.iter().zip(&tangent.values) {
        let Some((exact, cov)) = value else { continue };
        let exact = *exact;
        let mut guesses: Vec<Vec<f64>> = cov.iter().cloned().collect();
        // Smallest radius first so each solve starts near its solution.
        for (j, engine) in engines.iter().enumerate() {
            let (mut d, mut c) = warm_distance(engine, x, y, &guesses)?;
            if (d - exact).abs() > SUSPICIOUS * exact {
                if let Ok(full) = engine.distance_shooting_with(x, y, &guesses, engine.shooting_config().attempts) {
                    if full.value < d {
                        d = full.value;
                        c = covector(&full.witness);
                    }
                }
            }
            let slot = radii.len() - 1 - j;
            worst[slot] = worst[slot].max((d - exact).abs());
            if let Some(c) = c {
                guesses.insert(0, c);
                guesses.truncate(2);
            }
        }
    }
    Ok(worst)
}

/// Sup over `pairs` random pairs of `|(1/r) d̃_q(δ_r x, δ_r y) − d̂_q(x, y)|`
/// for each base point and radius. The same pairs are used at every base
/// point; tangent distances are shared between base points with identical
/// nilpotent frames.
pub fn distance_convergence(frame: &PrivilegedFrame<f64>, q_list: &[Vec<f64>], radii: &[f64], cfg: &ConvergenceConfig) -> Result<ConvergenceReport> {
    check_radii(radii)?;
    let n = frame.dim();
    let mut stream = rng::stream(cfg.seed, 0);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.pairs)
        .map(|_| {
            let mut draw = || dilate(&(0..n).map(|_| rng::uniform(&mut stream, -1.0, 1.0)).collect::<Vec<f64>>(), &frame.weights, cfg.scale);
            (draw(), draw())
        })
        .collect();
    let charts: Vec<RescaledChart> = q_list.iter().map(|q| RescaledChart::new(frame, q)).collect::<Result<_>>()?;
    let mut tangents: Vec<TangentDistances> = Vec::new();
    let mut which = Vec::with_capacity(charts.len());
    for chart in &charts {
        match tangents.iter().position(|t| same_fields(&t.fields, &chart.nilpotent.fields)) {
            Some(k) => which.push(k),
            None => {
                tangents.push(tangent_distances(chart, &pairs, cfg.tangent_attempts)?);
                which.push(tangents.len() - 1);
            }
        }
    }
    let per_point: Vec<Vec<f64>> =
        charts.par_iter().zip(&which).map(|(chart, &k)| point_deviations(chart, &tangents[k], &pairs, radii)).collect::<Result<_>>()?;
    let sup_deviation: Vec<f64> = (0..radii.len()).map(|j| per_point.iter().map(|d| d[j]).fold(0.0, f64::max)).collect();
    Ok(ConvergenceReport {
        radii: radii.to_vec(),
        strictly_decreasing: sup_deviation.windows(2).all(|w| w[1] < w[0]),
        final_deviation: *sup_deviation.last().expect("nonempty"),
        skipped_pairs: which.iter().map(|&k| tangents[k].values.iter().filter(|v| v.is_none()).count()).sum(),
        samples: format!("{} base points × {} pairs in δ_{}([−1, 1]^{n}), seed {}", q_list.len(), cfg.pairs, cfg.scale, cfg.seed),
        sup_deviation,
        per_point,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameConvergenceReport {
    pub radii: Vec<f64>,
    /// Sup of coefficient and derivative deviations per radius.
    pub deviation: Vec<f64>,
    /// `deviation[j] / deviation[j+1]` for consecutive radii.
    pub ratios: Vec<f64>,
}

fn multi_indices(n: usize, max_order: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_order {
        let mut next = Vec::new();
        for idx in &frontier {
            let start = idx.last().copied().unwrap_or(0);
            for v in start..n {
                let mut e: Vec<usize> = idx.clone();
                e.push(v);
                next.push(e);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Sup over a `5ⁿ` grid in `[−h, h]ⁿ` of the deviation between the rescaled
/// chart frame and the nilpotent frame, including partial derivatives up to
/// `derivative_order`.
pub fn frame_convergence(frame: &PrivilegedFrame<f64>, q: &[f64], radii: &[f64], half_width: f64, derivative_order: usize) -> Result<FrameConvergenceReport> {
    check_radii(radii)?;
    let chart = RescaledChart::new(frame, q)?;
    let n = frame.dim();
    let grid = 5usize;
    let points: Vec<Vec<f64>> = (0..grid.pow(n as u32))
        .map(|flat| {
            let mut rem = flat;
            (0..n)
                .map(|_| {
                    let t = rem % grid;
                    rem /= grid;
                    half_width * (-1.0 + 2.0 * t as f64 / (grid - 1) as f64)
                })
                .collect()
        })
        .collect();
    let derivs = multi_indices(n, derivative_order);
    let deviation: Vec<f64> = radii
        .iter()
        .map(|&r| {
            let mut worst = 0.0f64;
            for (f, g) in chart.fields_at(r).iter().zip(&chart.nilpotent.fields) {
                for j in 0..n {
                    let diff = f.coeff(j) - g.coeff(j);
                    for idx in &derivs {
                        let d = idx.iter().fold(diff.clone(), |p, &v| p.derivative(v));
                        for x in &points {
                            worst = worst.max(d.eval(x).abs());
                        }
                    }
                }
            }
            worst
        })
        .collect();
    let ratios = deviation.windows(2).map(|w| w[0] / w[1]).collect();
    Ok(FrameConvergenceReport { radii: radii.to_vec(), deviation, ratios })
}

#[derive(Clone, Debug, PartialEq)]
pub struct IsometryEpsilon {
    pub epsilon: f64,
    /// Least-squares linear fit of `H_ε`.
    pub fitted: DMatrix<f64>,
    /// `sup |H_ε(x) − L̂_ε x|` over the sample grid.
    pub fit_residual: f64,
    /// `‖L̂_εᵀ L̂_ε − I‖_F`.
    pub orthogonality: f64,
    /// Frobenius norm of the entries of `L̂_ε` between different weights.
    pub off_block: f64,
    /// `‖L̂_ε − d(F_Y⁻¹ ∘ F_X)(0)‖_F`.
    pub derivative_gap: f64,
    /// `sup |d̂_Y(L̂x, L̂y) − d̂_X(x, y)|` over sampled pairs.
    pub isometry_residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IsometryReport {
    /// `d(F_Y⁻¹ ∘ F_X)(0)`.
    pub derivative: DMatrix<f64>,
    pub per_epsilon: Vec<IsometryEpsilon>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IsometryConfig {
    /// Sample grid `3ⁿ` points (origin excluded) in `[−h, h]ⁿ`.
    pub half_width: f64,
    pub pairs: usize,
    pub seed: u64,
}

impl Default for IsometryConfig {
    fn default() -> Self {
        IsometryConfig { half_width: 1.0, pairs: 20, seed: 0 }
    }
}

/// Fits `H_ε = δ_{1/ε} ∘ F_{p,Y}⁻¹ ∘ F_{p,X} ∘ δ_ε` by a linear map for each
/// `ε` and measures how close the fit is to a graded linear isometry of the
/// tangent distances.
pub fn coordinate_change_isometry(
    frame_x: &PrivilegedFrame<f64>,
    frame_y: &PrivilegedFrame<f64>,
    p: &[f64],
    epsilons: &[f64],
    chart: &ChartBox,
    cfg: &IsometryConfig,
) -> Result<IsometryReport> {
    let n = frame_x.dim();
    if frame_y.dim() != n || frame_x.weights != frame_y.weights {
        return Err(Error::InvalidInput("frames must have the same dimension and weights".into()));
    }
    let weights = &frame_x.weights;
    let fcfg = FlowConfig::default();
    let fx = ExpChart::new(frame_x, p, chart.clone(), fcfg);
    let fy = ExpChart::new(frame_y, p, chart.clone(), fcfg);

    let (_, jx) = fx.map_with_jacobian(&vec![0.0; n])?;
    let (_, jy) = fy.map_with_jacobian(&vec![0.0; n])?;
    let derivative = linalg::inverse(&jy).ok_or_else(|| Error::SingularFrame(p.to_vec()))? * jx;

    let samples: Vec<Vec<f64>> = (0..3usize.pow(n as u32))
        .map(|flat| {
            let mut rem = flat;
            (0..n)
                .map(|_| {
                    let t = rem % 3;
                    rem /= 3;
                    cfg.half_width * (t as f64 - 1.0)
                })
                .collect::<Vec<f64>>()
        })
        .filter(|x| x.iter().any(|v| *v != 0.0))
        .collect();

    let tx = DistanceEngine::from_fields(&nilpotent_at(frame_x, p)?.fields, weights, ChartBox::cube(n, 1e3));
    let ty = DistanceEngine::from_fields(&nilpotent_at(frame_y, p)?.fields, weights, ChartBox::cube(n, 1e3));
    let mut stream = rng::stream(cfg.seed, 0);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.pairs)
        .map(|_| {
            let mut draw = || (0..n).map(|_| rng::uniform(&mut stream, -cfg.half_width, cfg.half_width)).collect::<Vec<f64>>();
            (draw(), draw())
        })
        .collect();
    let base_distances: Vec<f64> = pairs.iter().map(|(a, b)| tx.distance_shooting(a, b).map(|d| d.value)).collect::<Result<_>>()?;

    let mut per_epsilon = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let mut images = Vec::with_capacity(samples.len());
        for x in &samples {
            let xe = dilate(x, weights, eps);
            let guess = &derivative * DVector::from_column_slice(&xe);
            let yv = fy.inverse(&fx.map(&xe)?, Some(guess.as_slice()))?;
            images.push(dilate(&yv, weights, 1.0 / eps));
        }
        let a = linalg::from_rows(&samples);
        let b = linalg::from_rows(&images);
        let fitted = (linalg::pinv(&a, 1e-12) * &b).transpose();
        let fit_residual = samples
            .iter()
            .zip(&images)
            .map(|(x, h)| linalg::max_abs_diff((&fitted * DVector::from_column_slice(x)).as_slice(), h))
            .fold(0.0, f64::max);
        let orthogonality = (fitted.transpose() * &fitted - DMatrix::identity(n, n)).norm();
        let off_block = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| weights[i] != weights[j])
            .map(|(i, j)| fitted[(i, j)].powi(2))
            .sum::<f64>()
            .sqrt();
        let derivative_gap = (&fitted - &derivative).norm();
        let mut isometry_residual = 0.0f64;
        for ((a, b), d) in pairs.iter().zip(&base_distances) {
            let la = &fitted * DVector::from_column_slice(a);
            let lb = &fitted * DVector::from_column_slice(b);
            let dy = ty.distance_shooting(la.as_slice(), lb.as_slice())?.value;
            isometry_residual = isometry_residual.max((dy - d).abs());
        }
        per_epsilon.push(IsometryEpsilon { epsilon: eps, fitted, fit_residual, orthogonality, off_block, derivative_gap, isometry_residual });
    }
    Ok(IsometryReport { derivative, per_epsilon })
}

#[derive(Clone, Debug, PartialEq)]
pub struct UniformRadiusReport {
    pub per_point: Vec<f64>,
    pub infimum: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UniformRadiusConfig {
    /// Sphere samples per membership test.
    pub count: usize,
    /// Upper end of the bisection bracket.
    pub max_radius: f64,
    /// Relative width at which bisection stops.
    pub rel_tol: f64,
}

impl Default for UniformRadiusConfig {
    fn default() -> Self {
        UniformRadiusConfig { count: 32, max_radius: 4.0, rel_tol: 1e-3 }
    }
}

/// `sup {t : B(q, t) ⊂ F_q(V)}` by bisection, with `V = [−h, h]ⁿ` in
/// exponential coordinates and the ball tested through its sampled boundary.
pub fn uniform_radius_estimate(
    frame: &PrivilegedFrame<f64>,
    q_list: &[Vec<f64>],
    half_width: f64,
    chart: &ChartBox,
    cfg: &UniformRadiusConfig,
) -> Result<UniformRadiusReport> {
    let engine = DistanceEngine::new(frame, chart.clone());
    let inside = |exp: &ExpChart, q: &[f64], t: f64| -> Result<bool> {
        let samples = match ball_boundary_sample(&engine, q, t, cfg.count) {
            Ok(s) => s,
            Err(Error::ChartEscape(_)) => return Ok(false),
            Err(e) => return Err(e),
        };
        let mut guess: Option<Vec<f64>> = None;
        for s in samples {
            match exp.inverse(&s.point, guess.as_deref()) {
                Ok(v) if v.iter().all(|c| c.abs() <= half_width) => guess = Some(v),
                _ => return Ok(false),
            }
        }
        Ok(true)
    };
    let per_point: Vec<f64> = q_list
        .par_iter()
        .map(|q| {
            let exp = ExpChart::new(frame, q, chart.clone(), FlowConfig::default());
            let (mut lo, mut hi) = (0.0, cfg.max_radius);
            if inside(&exp, q, hi)? {
                return Ok(hi);
            }
            while hi - lo > cfg.rel_tol * hi {
                let mid = 0.5 * (lo + hi);
                if inside(&exp, q, mid)? {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(lo)
        })
        .collect::<Result<_>>()?;
    let infimum = per_point.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(UniformRadiusReport { per_point, infimum })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiameterReport {
    pub radii: Vec<f64>,
    /// `ratios[k][j] = diam(B(q_k, r_j)) / (2 r_j)`.
    pub ratios: Vec<Vec<f64>>,
    pub min_ratio: Vec<f64>,
    pub max_ratio: Vec<f64>,
    /// Smallest-radius ratios within `[1 − ε, 1 + 1e−3]`.
    pub within_band: bool,
    /// Minimum ratio nondecreasing as the radius shrinks.
    pub nondecreasing: bool,
}

/// `diameter_estimate / 2r` over base points and radii.
pub fn diameter_asymptotics(
    frame: &PrivilegedFrame<f64>,
    q_list: &[Vec<f64>],
    radii: &[f64],
    count: usize,
    chart: &ChartBox,
    epsilon: f64,
) -> Result<DiameterReport> {
    check_radii(radii)?;
    let engine = DistanceEngine::new(frame, chart.clone());
    let ratios: Vec<Vec<f64>> = q_list
        .par_iter()
        .map(|q| radii.iter().map(|&r| diameter_estimate(&engine, q, r, count, 4).map(|d| d.value / (2.0 * r))).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;
    let col = |j: usize| ratios.iter().map(move |row| row[j]);
    let min_ratio: Vec<f64> = (0..radii.len()).map(|j| col(j).fold(f64::INFINITY, f64::min)).collect();
    let max_ratio: Vec<f64> = (0..radii.len()).map(|j| col(j).fold(0.0, f64::max)).collect();
    let last = radii.len() - 1;
    Ok(DiameterReport {
        within_band: min_ratio[last] >= 1.0 - epsilon && max_ratio[last] <= 1.0 + 1e-3,
        nondecreasing: min_ratio.windows(2).all(|w| w[1] >= w[0] - 1e-12),
        radii: radii.to_vec(),
        ratios,
        min_ratio,
        max_ratio,
    })
}
