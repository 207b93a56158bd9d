//! Scenario execution and report emission.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use srgeo_core::blowup::{coordinate_change_isometry, diameter_asymptotics, distance_convergence, frame_convergence, ConvergenceConfig, IsometryConfig};
use srgeo_core::distance::{ball_boundary_sample, distance_both, ControlOracle, DistanceEngine, OracleConfig};
use srgeo_core::frame::compute_flag;
use srgeo_core::measure::{
    divergence_identity_check, double_blowup_check, extension_independence_check, BallOracle, BumpField, FedererConfig, HypersurfacePatch, QuadConfig, Region,
    SphericalFactorConfig, StarDomain,
};
use srgeo_core::nilpotent::{nilpotent_at, verify_stratified};
use srgeo_core::{rng, Frame, MetricExtension};

use crate::error::{CliError, Context, Result};
use crate::spec::{ManifoldSpec, MetricMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Flag,
    Nilpotent,
    Distance,
    Ball,
    Blowup,
    Isometry,
    Factor,
    Density,
    AreaCheck,
    Diameter,
}

impl Task {
    pub const ALL: [Task; 10] =
        [Task::Flag, Task::Nilpotent, Task::Distance, Task::Ball, Task::Blowup, Task::Isometry, Task::Factor, Task::Density, Task::AreaCheck, Task::Diameter];

    pub fn name(self) -> &'static str {
        match self {
            Task::Flag => "flag",
            Task::Nilpotent => "nilpotent",
            Task::Distance => "distance",
            Task::Ball => "ball",
            Task::Blowup => "blowup",
            Task::Isometry => "isometry",
            Task::Factor => "factor",
            Task::Density => "density",
            Task::AreaCheck => "area-check",
            Task::Diameter => "diameter",
        }
    }

    /// Tasks whose results depend on random sampling.
    pub fn needs_seed(self) -> bool {
        matches!(self, Task::Blowup | Task::Isometry | Task::Factor | Task::Density)
    }
}

impl FromStr for Task {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL.iter().copied().find(|t| t.name() == s).ok_or_else(|| CliError::Invalid(format!("unknown task '{s}'\n{}", usage())))
    }
}

pub fn usage() -> String {
    let names: Vec<&str> = Task::ALL.iter().map(|t| t.name()).collect();
    format!("usage: srgeo <task> --manifold <name|path> [--seed N] [--radii a,b,c] [--point x,y,...] [--out dir] [--json] [--csv]\ntasks: {}", names.join(", "))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub manifold: ManifoldSpec,
    pub task: Task,
    pub seed: Option<u64>,
    pub radii: Option<Vec<f64>>,
    pub point: Option<Vec<f64>>,
    /// Endpoint for `distance`.
    pub target: Option<Vec<f64>>,
    /// Rotation angle in degrees for `isometry`.
    pub angle: Option<f64>,
    /// Sample-size override: pairs (blowup, isometry), Monte-Carlo points
    /// (factor, density) or sphere samples (ball, diameter).
    pub samples: Option<usize>,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    pub timing: bool,
}

impl ScenarioConfig {
    pub fn new(manifold: ManifoldSpec, task: Task) -> Self {
        ScenarioConfig { manifold, task, seed: None, radii: None, point: None, target: None, angle: None, samples: None, threads: None, timing: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub tool_version: String,
    pub spec_hash: String,
    pub seed: Option<u64>,
    pub task: String,
    pub params: Value,
    pub results: Value,
    pub verdict: Verdict,
    pub runtime_ms: Option<u64>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioOutput {
    pub report: Report,
    pub csv: Option<String>,
}

impl ScenarioOutput {
    pub fn exit_code(&self) -> i32 {
        match self.report.verdict {
            Verdict::Pass => 0,
            Verdict::Fail => 2,
        }
    }

    /// Writes `<task>.json` and, when present, `<task>.csv` into `dir`.
    pub fn write(&self, dir: &Path, csv: bool) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{}.json", self.report.task)), self.report.to_json())?;
        if let (true, Some(c)) = (csv, &self.csv) {
            std::fs::write(dir.join(format!("{}.csv", self.report.task)), c)?;
        }
        Ok(())
    }
}

struct Outcome {
    params: Value,
    results: Value,
    pass: bool,
    csv: Option<String>,
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    match cfg.threads {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build().map_err(|e| CliError::Invalid(e.to_string()))?;
            pool.install(|| run_inner(cfg))
        }
        None => run_inner(cfg),
    }
}

fn run_inner(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    if cfg.task.needs_seed() && cfg.seed.is_none() {
        return Err(CliError::Invalid(format!("task '{}' samples randomly and needs --seed", cfg.task.name())));
    }
    let spec = &cfg.manifold;
    let n = spec.dim;
    let point = cfg.point.clone().unwrap_or_else(|| vec![0.0; n]);
    if point.len() != n {
        return Err(CliError::Invalid(format!("--point has {} coordinates, expected {n}", point.len())));
    }
    let start = Instant::now();
    let frame = spec.frame_at(&point)?;
    let seed = cfg.seed.unwrap_or(0);
    let out = match cfg.task {
        Task::Flag => flag(spec, &point)?,
        Task::Nilpotent => nilpotent(&frame, &point)?,
        Task::Distance => distance(spec, &frame, &point, cfg)?,
        Task::Ball => ball(spec, &frame, &point, cfg)?,
        Task::Blowup => blowup(&frame, &point, cfg, seed)?,
        Task::Isometry => isometry(spec, &frame, &point, cfg, seed)?,
        Task::Factor => factor(&frame, &point, cfg, seed)?,
        Task::Density => density(spec, &frame, &point, cfg, seed)?,
        Task::AreaCheck => area_check(spec, &frame, &point)?,
        Task::Diameter => diameter(spec, &frame, &point, cfg)?,
    };
    let mut params = out.params;
    params["point"] = json!(point);
    let report = Report {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        spec_hash: spec.hash(),
        seed: cfg.seed,
        task: cfg.task.name().to_string(),
        params,
        results: out.results,
        verdict: if out.pass { Verdict::Pass } else { Verdict::Fail },
        runtime_ms: cfg.timing.then(|| start.elapsed().as_millis() as u64),
    };
    Ok(ScenarioOutput { report, csv: out.csv })
}

fn grid_around(point: &[f64], axes: usize, half: f64) -> Vec<Vec<f64>> {
    let axes = axes.min(point.len());
    (0..3usize.pow(axes as u32))
        .map(|flat| {
            let mut q = point.to_vec();
            let mut rem = flat;
            for v in q.iter_mut().take(axes) {
                *v += half * ((rem % 3) as f64 - 1.0);
                rem /= 3;
            }
            q
        })
        .collect()
}

fn flag(spec: &ManifoldSpec, point: &[f64]) -> Result<Outcome> {
    let chart = spec.chart();
    let mut probes = vec![point.to_vec()];
    for k in 0..20 {
        let h = rng::halton(k, spec.dim);
        probes.push(h.iter().enumerate().map(|(i, t)| 0.5 * (chart.lo[i] + chart.hi[i]) + 0.25 * (chart.hi[i] - chart.lo[i]) * (2.0 * t - 1.0)).collect());
    }
    let report = compute_flag(&spec.horizontal_fields(), &probes, spec.dim).context("flag")?;
    let weights = srgeo_core::frame::weights_from_growth(&report.growth);
    let q: u32 = weights.iter().sum();
    Ok(Outcome {
        params: json!({ "probes": probes.len() }),
        results: json!({ "growth": report.growth, "step": report.step, "weights": weights, "homogeneous_dim": q, "equiregular": report.equiregular }),
        pass: report.equiregular,
        csv: None,
    })
}

fn nilpotent(frame: &Frame, point: &[f64]) -> Result<Outcome> {
    let nf = nilpotent_at(frame, point).context("nilpotent approximation")?;
    let report = verify_stratified(&nf);
    let checks: Vec<Value> = report.checks.iter().map(|c| json!({ "name": c.name, "passed": c.passed, "residual": c.residual })).collect();
    Ok(Outcome {
        params: json!({}),
        results: json!({
            "fields": nf.fields.iter().map(|f| f.to_string()).collect::<Vec<_>>(),
            "weights": nf.weights,
            "checks": checks,
            "max_residual": report.max_residual(),
        }),
        pass: report.passed(),
        csv: None,
    })
}

fn distance(spec: &ManifoldSpec, frame: &Frame, point: &[f64], cfg: &ScenarioConfig) -> Result<Outcome> {
    let target = cfg.target.clone().ok_or_else(|| CliError::Invalid("task 'distance' needs --target".into()))?;
    if target.len() != spec.dim {
        return Err(CliError::Invalid(format!("--target has {} coordinates, expected {}", target.len(), spec.dim)));
    }
    let engine = DistanceEngine::new(frame, spec.chart());
    let oracle = ControlOracle::from_engine(&engine, frame.step as u32);
    let ocfg = OracleConfig { segments: 32, ..Default::default() };
    let res = distance_both(&engine, &oracle, point, &target, &ocfg).context("distance")?;
    Ok(Outcome {
        params: json!({ "target": target, "segments": ocfg.segments }),
        results: json!({ "value": res.value, "upper_bound": res.upper_bound, "engine": res.engine.as_str(), "flag": res.flag }),
        pass: res.flag.is_none(),
        csv: None,
    })
}

fn ball(spec: &ManifoldSpec, frame: &Frame, point: &[f64], cfg: &ScenarioConfig) -> Result<Outcome> {
    let r = cfg.radii.as_ref().and_then(|v| v.first().copied()).unwrap_or(0.1);
    let count = cfg.samples.unwrap_or(16);
    let engine = DistanceEngine::new(frame, spec.chart());
    let samples = ball_boundary_sample(&engine, point, r, count).context("ball sampling")?;
    let mut distances = Vec::with_capacity(samples.len());
    for s in &samples {
        distances.push(engine.distance_shooting(point, &s.point).context("ball distances")?.value);
    }
    let worst = distances.iter().map(|d| d / r - 1.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(Outcome {
        params: json!({ "radius": r, "count": count }),
        results: json!({ "points": samples.iter().map(|s| s.point.clone()).collect::<Vec<_>>(), "distances": distances, "max_excess": worst }),
        pass: worst <= 1e-6,
        csv: None,
    })
}

fn blowup(frame: &Frame, point: &[f64], cfg: &ScenarioConfig, seed: u64) -> Result<Outcome> {
    let radii = cfg.radii.clone().unwrap_or_else(|| vec![0.4, 0.2, 0.1, 0.05]);
    let qs = grid_around(point, 3, 0.2);
    let ccfg = ConvergenceConfig { pairs: cfg.samples.unwrap_or(50), seed, ..Default::default() };
    let report = distance_convergence(frame, &qs, &radii, &ccfg).context("distance convergence")?;
    let fc = frame_convergence(frame, point, &radii, 0.5, 1).context("frame convergence")?;
    let mut csv = String::from("r,q_index,sup_deviation\n");
    for (j, r) in radii.iter().enumerate() {
        for (k, row) in report.per_point.iter().enumerate() {
            writeln!(csv, "{r},{k},{}", row[j]).expect("string write");
        }
    }
    Ok(Outcome {
        params: json!({ "radii": radii, "pairs": ccfg.pairs, "scale": ccfg.scale, "base_points": qs }),
        results: json!({
            "sup_deviation": report.sup_deviation,
            "per_point": report.per_point,
            "skipped_pairs": report.skipped_pairs,
            "strictly_decreasing": report.strictly_decreasing,
            "final_deviation": report.final_deviation,
            "frame_deviation": fc.deviation,
            "samples": report.samples,
        }),
        pass: report.strictly_decreasing && report.final_deviation < 0.05,
        csv: Some(csv),
    })
}

fn rotation(m: usize, degrees: f64) -> Vec<Vec<f64>> {
    let t = degrees.to_radians();
    let mut rot: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    rot[0][0] = t.cos();
    rot[0][1] = -t.sin();
    rot[1][0] = t.sin();
    rot[1][1] = t.cos();
    rot
}

fn isometry(spec: &ManifoldSpec, frame: &Frame, point: &[f64], cfg: &ScenarioConfig, seed: u64) -> Result<Outcome> {
    if frame.rank() < 2 {
        return Err(CliError::Invalid("task 'isometry' needs at least two horizontal fields".into()));
    }
    let angle = cfg.angle.unwrap_or(30.0);
    let rotated = frame.rotate_horizontal(&rotation(frame.rank(), angle)).context("rotating the frame")?;
    let eps = cfg.radii.clone().unwrap_or_else(|| vec![0.1, 0.01]);
    let icfg = IsometryConfig { pairs: cfg.samples.unwrap_or(20), seed, ..Default::default() };
    let report = coordinate_change_isometry(frame, &rotated, point, &eps, &spec.chart(), &icfg).context("coordinate change")?;
    let per: Vec<Value> = report
        .per_epsilon
        .iter()
        .map(|e| {
            json!({
                "epsilon": e.epsilon,
                "fitted": (0..e.fitted.nrows()).map(|i| e.fitted.row(i).iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>(),
                "fit_residual": e.fit_residual,
                "orthogonality": e.orthogonality,
                "off_block": e.off_block,
                "derivative_gap": e.derivative_gap,
                "isometry_residual": e.isometry_residual,
            })
        })
        .collect();
    let last = report.per_epsilon.last().ok_or_else(|| CliError::Invalid("no epsilons".into()))?;
    Ok(Outcome {
        params: json!({ "angle_degrees": angle, "epsilons": eps, "pairs": icfg.pairs }),
        results: json!({ "per_epsilon": per }),
        pass: last.orthogonality < 1e-2 && last.off_block < 1e-2 && last.isometry_residual < 2e-2 && last.derivative_gap < 1e-2,
        csv: None,
    })
}

fn factor(frame: &Frame, point: &[f64], cfg: &ScenarioConfig, seed: u64) -> Result<Outcome> {
    let nf = nilpotent_at(frame, point).context("nilpotent approximation")?;
    let nu = frame.fields[0].eval(point);
    let scfg = SphericalFactorConfig { mc_points: cfg.samples.unwrap_or(200_000), seed, ..Default::default() };
    let r = srgeo_core::measure::spherical_factor(&nf, &frame.matrix_at(point), &nu, &scfg).context("spherical factor")?;
    Ok(Outcome {
        params: json!({ "mc_points": scfg.mc_points, "normal": "X1" }),
        results: json!({
            "beta": r.beta,
            "std_error": r.std_error,
            "maximizer": r.maximizer,
            "maximizer_on_boundary": r.maximizer_on_boundary,
            "at_origin": r.at_origin.value,
            "candidates": r.candidates.iter().map(|c| json!({ "center": c.0, "value": c.1 })).collect::<Vec<_>>(),
        }),
        pass: r.beta > 0.0 && r.beta + 2.0 * r.std_error >= r.at_origin.value,
        csv: None,
    })
}

fn coordinate_patch(spec: &ManifoldSpec, point: &[f64], half: f64) -> Result<(HypersurfacePatch, Vec<f64>)> {
    let lo: Vec<f64> = point[1..].iter().map(|v| v - half).collect();
    let hi: Vec<f64> = point[1..].iter().map(|v| v + half).collect();
    let patch = HypersurfacePatch::coordinate_plane(spec.dim, 0, point[0], lo, hi).context("surface patch")?;
    Ok((patch, point[1..].to_vec()))
}

fn density(spec: &ManifoldSpec, frame: &Frame, point: &[f64], cfg: &ScenarioConfig, seed: u64) -> Result<Outcome> {
    let radii = cfg.radii.clone().unwrap_or_else(|| vec![0.1]);
    let (patch, s_p) = coordinate_patch(spec, point, 2.0)?;
    let chart = spec.chart();
    let oracle = BallOracle::for_frame(frame, chart.clone(), &Default::default()).context("ball oracle")?;
    let engine = DistanceEngine::new(frame, chart);
    let fcfg = FedererConfig { radii: radii.clone(), ..Default::default() };
    let scfg = SphericalFactorConfig { mc_points: cfg.samples.unwrap_or(200_000), seed, ..Default::default() };
    let r = double_blowup_check(&patch, &spec.volume_form(), &frame.metric, frame, &s_p, &oracle, &engine, &fcfg, &scfg).context("double blow-up")?;
    let per: Vec<Value> = r
        .density
        .per_radius
        .iter()
        .map(|s| json!({ "radius": s.radius, "ratio": s.ratio, "center": s.center, "measure": s.measure, "diameter": s.diameter, "warnings": s.warnings }))
        .collect();
    Ok(Outcome {
        params: json!({ "radii": radii, "surface": "x1 = point[0]", "mc_points": scfg.mc_points }),
        results: json!({
            "federer_density": r.density.value,
            "per_radius": per,
            "volume_norm": r.volume_norm,
            "beta": r.beta.beta,
            "beta_std_error": r.beta.std_error,
            "rhs": r.rhs,
            "discrepancy": r.discrepancy,
            "combined_error": r.combined_error,
        }),
        pass: r.discrepancy < 0.1,
        csv: None,
    })
}

fn area_check(spec: &ManifoldSpec, frame: &Frame, point: &[f64]) -> Result<Outcome> {
    let n = spec.dim;
    let (patch, _) = coordinate_patch(spec, point, 0.5)?;
    let omega = spec.volume_form();
    let scales: Vec<f64> = frame.weights.iter().map(|&w| if w == 1 { 1.0 } else { 4.0 }).collect();
    let inv = srgeo_core::measure::frame_inverse_polys(frame).context("inverting the frame")?;
    let metric_b = MetricExtension::scaled_frame(&inv, &scales);
    let ext = extension_independence_check(&patch, &omega, frame, Region::All, &MetricExtension::FrameOrthonormal, &metric_b, &QuadConfig::default())
        .context("extension independence")?;
    let mut pass = ext.discrepancy < 1e-3;
    let mut divergence = Vec::new();
    if n == 2 || n == 3 {
        let domain = StarDomain::ball(point.to_vec(), 0.5).context("domain")?;
        for (k, f) in frame.fields.iter().take(3).enumerate() {
            let mut c = point.to_vec();
            c[k % n] += 0.2;
            let field = BumpField::bumped(f.clone(), c, 0.4, 6);
            let r = divergence_identity_check(&omega, &frame.metric, frame, &domain, &field, 24, 8).context("divergence identity")?;
            pass &= r.mismatch < 1e-3;
            divergence.push(json!({ "field": k + 1, "volume": r.volume_integral, "boundary": r.boundary_integral, "mismatch": r.mismatch }));
        }
    }
    let metric_name = match &spec.metric {
        MetricMode::FrameOrthonormal => "frame_orthonormal".to_string(),
        MetricMode::Scaled(s) => format!("scaled({s:?})"),
    };
    Ok(Outcome {
        params: json!({ "surface": "x1 = point[0]", "box_half_width": 0.5, "metric_b_scales": scales, "metric": metric_name }),
        results: json!({
            "extension": { "value_a": ext.value_a, "value_b": ext.value_b, "discrepancy": ext.discrepancy },
            "divergence": divergence,
        }),
        pass,
        csv: None,
    })
}

fn diameter(spec: &ManifoldSpec, frame: &Frame, point: &[f64], cfg: &ScenarioConfig) -> Result<Outcome> {
    let radii = cfg.radii.clone().unwrap_or_else(|| vec![0.2, 0.1, 0.05]);
    let count = cfg.samples.unwrap_or(16);
    let qs: Vec<Vec<f64>> = [-0.2, 0.0, 0.2]
        .iter()
        .map(|d| {
            let mut q = point.to_vec();
            q[0] += d;
            q
        })
        .collect();
    let r = diameter_asymptotics(frame, &qs, &radii, count, &spec.chart(), 0.05).context("diameter")?;
    let mut csv = String::from("r,q_index,ratio\n");
    for (j, rad) in radii.iter().enumerate() {
        for (k, row) in r.ratios.iter().enumerate() {
            writeln!(csv, "{rad},{k},{}", row[j]).expect("string write");
        }
    }
    Ok(Outcome {
        params: json!({ "radii": radii, "count": count, "base_points": qs }),
        results: json!({ "ratios": r.ratios, "min_ratio": r.min_ratio, "max_ratio": r.max_ratio, "within_band": r.within_band, "nondecreasing": r.nondecreasing }),
        pass: r.within_band && r.nondecreasing,
        csv: Some(csv),
    })
}

