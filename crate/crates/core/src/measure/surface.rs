//! Quadrature of the sub-Riemannian surface measure
//! `σ(A) = ∫_{Σ∩A} ‖ω‖_g |ν_D|_g dσ_g`.

use super::ball::BallOracle;
use super::{horizontal_normal_from_conormal, volume_norm, HypersurfacePatch, VolumeForm};
use crate::error::{Error, Result};
use crate::frame::{metric_matrix, validate_extension, MetricExtension, PrivilegedFrame};
use crate::linalg;
use crate::quad;

/// Integration region in the ambient space.
#[derive(Clone, Copy, Debug)]
pub enum Region<'a> {
    /// The whole parameter box.
    All,
    /// Axis-aligned ambient box.
    Box { lo: &'a [f64], hi: &'a [f64] },
    /// Closed ball `B̄(center, radius)`.
    Ball { center: &'a [f64], radius: f64, oracle: &'a BallOracle, refine: bool },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadConfig {
    /// Midpoint cells per parameter axis (the coarse level; the fine level
    /// doubles it).
    pub cells: usize,
    /// Rays of the polar rule used for balls on two-parameter patches.
    pub rays: usize,
    /// Gauss–Legendre nodes per inside interval.
    pub gauss: usize,
    /// Samples per ray or line when bracketing boundary crossings.
    pub scan: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig { cells: 32, rays: 64, gauss: 12, scan: 48 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceMeasure {
    pub value: f64,
    /// Difference between the two resolution levels.
    pub error: f64,
    /// Fraction of coarse cells cut by the region boundary (indicator rules
    /// only).
    pub boundary_fraction: f64,
    pub warnings: Vec<String>,
}

/// `‖ω‖_g |ν_D|_g √det(dΦᵀ G dΦ)` at parameter `s`.
pub fn surface_density(
    patch: &HypersurfacePatch,
    omega: &VolumeForm,
    metric: &MetricExtension,
    frame: &PrivilegedFrame<f64>,
    s: &[f64],
) -> Result<f64> {
    let x = patch.point(s);
    let t = patch.tangents(s);
    let g = metric_matrix(metric, frame, &x)?;
    let area = (t.transpose() * &g * &t).determinant().max(0.0).sqrt();
    let eta = patch.conormal(s);
    if linalg::norm(&eta) == 0.0 {
        return Err(Error::DegeneratePatch(s.to_vec()));
    }
    let nd = horizontal_normal_from_conormal(&eta, metric, frame, &x)?;
    Ok(volume_norm(omega, metric, frame, &x)? * nd.horizontal_norm * area)
}

pub fn sr_surface_measure(
    patch: &HypersurfacePatch,
    omega: &VolumeForm,
    metric: &MetricExtension,
    frame: &PrivilegedFrame<f64>,
    region: Region<'_>,
    cfg: &QuadConfig,
) -> Result<SurfaceMeasure> {
    let density = |s: &[f64]| surface_density(patch, omega, metric, frame, s);
    match region {
        Region::All => midpoint_richardson(patch, cfg.cells, &density, &|_| Ok(true)),
        Region::Box { lo, hi } => {
            let inside = |x: &[f64]| Ok(x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| *a <= *v && *v <= *b));
            midpoint_richardson(patch, cfg.cells, &density, &inside)
        }
        Region::Ball { center, radius, oracle, refine } => {
            let gap = |x: &[f64]| -> Result<f64> { Ok(oracle.estimate(center, x)? - radius) };
            let polish = |x: &[f64]| -> Result<f64> { Ok(oracle.precise(center, x)? - radius) };
            let polish: Option<&dyn Fn(&[f64]) -> Result<f64>> = if refine { Some(&polish) } else { None };
            match patch.param_dim() {
                1 => ball_on_curve(patch, cfg, &density, &gap, polish),
                2 => ball_polar(patch, cfg, &density, &gap, polish),
                _ => {
                    let inside = |x: &[f64]| Ok(oracle.contains(center, radius, x, refine).inside);
                    midpoint_richardson(patch, cfg.cells, &density, &inside)
                }
            }
        }
    }
}

type Density<'a> = dyn Fn(&[f64]) -> Result<f64> + 'a;
type Gap<'a> = dyn Fn(&[f64]) -> Result<f64> + 'a;

fn midpoint(patch: &HypersurfacePatch, cells: usize, density: &Density<'_>, inside: &dyn Fn(&[f64]) -> Result<bool>) -> Result<(f64, usize, usize)> {
    let d = patch.param_dim();
    let h: Vec<f64> = patch.lo.iter().zip(&patch.hi).map(|(a, b)| (b - a) / cells as f64).collect();
    let cell_vol: f64 = h.iter().product();
    let total = cells.pow(d as u32);
    let mut acc = 0.0;
    let mut cut = 0;
    let mut s = vec![0.0; d];
    let mut corner = vec![0.0; d];
    for flat in 0..total {
        let mut rem = flat;
        for k in 0..d {
            let i = rem % cells;
            rem /= cells;
            s[k] = patch.lo[k] + (i as f64 + 0.5) * h[k];
        }
        let x = patch.point(&s);
        let ins = inside(&x)?;
        // A cell is cut when some corner disagrees with the midpoint.
        let mut is_cut = false;
        for c in 0..(1usize << d) {
            for k in 0..d {
                corner[k] = s[k] + if (c >> k) & 1 == 1 { 0.5 } else { -0.5 } * h[k];
            }
            if inside(&patch.point(&corner))? != ins {
                is_cut = true;
                break;
            }
        }
        if is_cut {
            cut += 1;
        }
        if ins {
            acc += density(&s)?;
        }
    }
    Ok((acc * cell_vol, cut, total))
}

fn midpoint_richardson(patch: &HypersurfacePatch, cells: usize, density: &Density<'_>, inside: &dyn Fn(&[f64]) -> Result<bool>) -> Result<SurfaceMeasure> {
    let (coarse, cut, total) = midpoint(patch, cells, density, inside)?;
    let (fine, _, _) = midpoint(patch, 2 * cells, density, inside)?;
    let boundary_fraction = cut as f64 / total as f64;
    let mut warnings = Vec::new();
    // Extrapolation assumes a smooth integrand; cut cells break that.
    let (value, error) = if cut == 0 {
        let extrapolated = (4.0 * fine - coarse) / 3.0;
        (extrapolated, (extrapolated - fine).abs())
    } else {
        (fine, (fine - coarse).abs())
    };
    if boundary_fraction > 0.2 {
        warnings.push(format!("region boundary cuts {:.0}% of quadrature cells", 100.0 * boundary_fraction));
    }
    Ok(SurfaceMeasure { value, error, boundary_fraction, warnings })
}

/// Illinois-modified regula falsi on a bracketing interval.
pub(crate) fn illinois(f: &mut dyn FnMut(f64) -> Result<f64>, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64, tol: f64) -> Result<f64> {
    let mut side = 0;
    for _ in 0..100 {
        let c = (a * fb - b * fa) / (fb - fa);
        if (b - a).abs() <= tol {
            return Ok(c);
        }
        let fc = f(c)?;
        if fc == 0.0 {
            return Ok(c);
        }
        if (fc > 0.0) == (fb > 0.0) {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Ok(0.5 * (a + b))
}

/// Secant steps on the precise gap, started from a root of the estimate.
fn polish_root(h: &dyn Fn(f64) -> Result<f64>, t0: f64, scale: f64) -> Result<f64> {
    let mut x0 = t0;
    let mut f0 = h(x0)?;
    let mut x1 = t0 + 1e-4 * scale;
    for _ in 0..4 {
        let f1 = h(x1)?;
        if f1 == f0 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        if (x2 - x1).abs() < 1e-12 * scale {
            return Ok(x2);
        }
        x0 = x1;
        f0 = f1;
        x1 = x2;
    }
    Ok(x1)
}

/// Inside intervals of `t ∈ [0, len]` along a segment, from sign changes of
/// the gap on a uniform scan.
fn crossings(
    point_at: &dyn Fn(f64) -> Vec<f64>,
    len: f64,
    scan: usize,
    gap: &Gap<'_>,
    polish: Option<&Gap<'_>>,
) -> Result<Vec<(f64, f64)>> {
    let ts: Vec<f64> = (0..=scan).map(|i| len * i as f64 / scan as f64).collect();
    let vals: Vec<f64> = ts.iter().map(|&t| gap(&point_at(t))).collect::<Result<_>>()?;
    let mut roots = Vec::new();
    for i in 0..scan {
        if (vals[i] <= 0.0) != (vals[i + 1] <= 0.0) {
            let mut f = |t: f64| gap(&point_at(t));
            let mut r = illinois(&mut f, ts[i], ts[i + 1], vals[i], vals[i + 1], 1e-12 * len)?;
            if let Some(p) = polish {
                let h = |t: f64| p(&point_at(t));
                let pr = polish_root(&h, r, len)?;
                if (pr - r).abs() < (ts[i + 1] - ts[i]) {
                    r = pr;
                }
            }
            roots.push(r);
        }
    }
    let mut intervals = Vec::new();
    let mut start = if vals[0] <= 0.0 { Some(0.0) } else { None };
    for r in roots {
        match start.take() {
            Some(a) => intervals.push((a, r)),
            None => start = Some(r),
        }
    }
    if let Some(a) = start {
        intervals.push((a, len));
    }
    Ok(intervals)
}

fn ball_on_curve(patch: &HypersurfacePatch, cfg: &QuadConfig, density: &Density<'_>, gap: &Gap<'_>, polish: Option<&Gap<'_>>) -> Result<SurfaceMeasure> {
    let (a, b) = (patch.lo[0], patch.hi[0]);
    let point_at = |t: f64| patch.point(&[a + t]);
    let intervals = crossings(&point_at, b - a, cfg.scan * 4, gap, polish)?;
    let mut warnings = Vec::new();
    if intervals.iter().any(|&(l, r)| l == 0.0 || r == b - a) {
        warnings.push("ball is clipped by the parameter box".into());
    }
    let (coarse, fine) = (quad::gauss_unit(cfg.gauss), quad::gauss_unit(2 * cfg.gauss));
    let mut vc = 0.0;
    let mut vf = 0.0;
    for &(l, r) in &intervals {
        vc += try_gauss(a + l, a + r, &coarse, |s| density(&[s]))?;
        vf += try_gauss(a + l, a + r, &fine, |s| density(&[s]))?;
    }
    Ok(SurfaceMeasure { value: vf, error: (vf - vc).abs(), boundary_fraction: 0.0, warnings })
}

fn try_gauss(a: f64, b: f64, rule: &[(f64, f64)], mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let mut err = None;
    let v = quad::gauss(a, b, rule, |t| match f(t) {
        Ok(v) => v,
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// Polar rule around the deepest coarse-grid point: `∫_0^{2π} ∫ F ρ dρ dθ`
/// with the radial integral split at the boundary crossings of each ray.
/// Rays live in coordinates normalized to the unit parameter square, so a
/// box adapted to the ball keeps the boundary radius well resolved.
/// Largest `t` with `u + t·dir` in the unit square.
fn box_reach(u: [f64; 2], dir: [f64; 2]) -> f64 {
    let mut len = f64::INFINITY;
    for a in 0..2 {
        if dir[a] > 1e-15 {
            len = len.min((1.0 - u[a]) / dir[a]);
        } else if dir[a] < -1e-15 {
            len = len.min(-u[a] / dir[a]);
        }
    }
    len
}

fn ball_polar(patch: &HypersurfacePatch, cfg: &QuadConfig, density: &Density<'_>, gap: &Gap<'_>, polish: Option<&Gap<'_>>) -> Result<SurfaceMeasure> {
    let w = [patch.hi[0] - patch.lo[0], patch.hi[1] - patch.lo[1]];
    let param = |u: [f64; 2]| [patch.lo[0] + u[0] * w[0], patch.lo[1] + u[1] * w[1]];
    let grid = 24;
    let mut best: Option<(f64, [f64; 2])> = None;
    for i in 0..grid {
        for j in 0..grid {
            let u = [(i as f64 + 0.5) / grid as f64, (j as f64 + 0.5) / grid as f64];
            let v = gap(&patch.point(&param(u)))?;
            if best.is_none_or(|(bv, _)| v < bv) {
                best = Some((v, u));
            }
        }
    }
    let (mut min_gap, mut uc) = best.expect("grid is nonempty");
    // Descend to the deepest point: thin balls fall between grid nodes, and
    // the polar rule needs a center well inside the section.
    let mut step = 0.5 / grid as f64;
    while step > 1e-9 {
        let mut moved = false;
        for (a, sign) in [(0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0)] {
            let mut u = uc;
            u[a] = (u[a] + sign * step).clamp(0.0, 1.0);
            let v = gap(&patch.point(&param(u)))?;
            if v < min_gap {
                (min_gap, uc, moved) = (v, u, true);
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    if min_gap > 0.0 {
        return Ok(SurfaceMeasure { value: 0.0, error: 0.0, boundary_fraction: 0.0, warnings: vec!["ball misses the patch".into()] });
    }
    // Section half-widths along the parameter axes set an elliptic polar frame.
    let reach = |dir: [f64; 2]| -> Result<f64> {
        let len = box_reach(uc, dir);
        if len <= 0.0 {
            return Ok(0.0);
        }
        let point_at = |t: f64| patch.point(&param([uc[0] + t * dir[0], uc[1] + t * dir[1]]));
        Ok(crossings(&point_at, len, cfg.scan, gap, None)?.first().map_or(0.0, |&(_, r)| r))
    };
    let mut axes = [0.0; 2];
    for (a, e) in axes.iter_mut().enumerate() {
        let mut d = [0.0; 2];
        d[a] = 1.0;
        let plus = reach(d)?;
        d[a] = -1.0;
        *e = 0.5 * (plus + reach(d)?);
        if *e <= 0.0 {
            *e = 1.0;
        }
    }
    let rays = cfg.rays.max(4) & !1;
    let rule = quad::gauss_unit(cfg.gauss);
    let jac = w[0] * w[1] * axes[0] * axes[1];
    let mut per_ray = Vec::with_capacity(rays);
    let mut clipped = false;
    for k in 0..rays {
        let th = std::f64::consts::TAU * k as f64 / rays as f64;
        let dir = [axes[0] * th.cos(), axes[1] * th.sin()];
        let len = box_reach(uc, dir);
        let at = |t: f64| param([uc[0] + t * dir[0], uc[1] + t * dir[1]]);
        let point_at = |t: f64| patch.point(&at(t));
        let intervals = crossings(&point_at, len, cfg.scan, gap, polish)?;
        if intervals.iter().any(|&(_, r)| r == len) {
            clipped = true;
        }
        let mut v = 0.0;
        for &(l, r) in &intervals {
            v += try_gauss(l, r, &rule, |t| Ok(density(&at(t))? * t))?;
        }
        per_ray.push(v * jac);
    }
    let fine = per_ray.iter().sum::<f64>() * std::f64::consts::TAU / rays as f64;
    let coarse = per_ray.iter().step_by(2).sum::<f64>() * std::f64::consts::TAU / (rays / 2) as f64;
    let mut warnings = Vec::new();
    if clipped {
        warnings.push("ball is clipped by the parameter box".into());
    }
    Ok(SurfaceMeasure { value: fine, error: (fine - coarse).abs(), boundary_fraction: 0.0, warnings })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtensionReport {
    pub value_a: f64,
    pub value_b: f64,
    pub discrepancy: f64,
    /// Largest horizontal-restriction residual of the two extensions.
    pub validation_residual: f64,
}

/// Surface measure under two extensions of the same sub-Riemannian metric.
pub fn extension_independence_check(
    patch: &HypersurfacePatch,
    omega: &VolumeForm,
    frame: &PrivilegedFrame<f64>,
    region: Region<'_>,
    metric_a: &MetricExtension,
    metric_b: &MetricExtension,
    cfg: &QuadConfig,
) -> Result<ExtensionReport> {
    let mut resid = 0.0f64;
    for k in 0..8 {
        let u = crate::rng::halton(k, patch.param_dim());
        let s: Vec<f64> = u.iter().zip(patch.lo.iter().zip(&patch.hi)).map(|(t, (a, b))| a + t * (b - a)).collect();
        let x = patch.point(&s);
        for m in [metric_a, metric_b] {
            resid = resid.max(validate_extension(m, frame.horizontal(), &x, 1e-8)?);
        }
    }
    let a = sr_surface_measure(patch, omega, metric_a, frame, region, cfg)?.value;
    let b = sr_surface_measure(patch, omega, metric_b, frame, region, cfg)?.value;
    let scale = a.abs().max(b.abs());
    Ok(ExtensionReport { value_a: a, value_b: b, discrepancy: if scale == 0.0 { 0.0 } else { (a - b).abs() / scale }, validation_residual: resid })
}
