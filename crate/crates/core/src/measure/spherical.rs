//! Spherical factor: the largest Euclidean `(n−1)`-area of a hyperplane
//! slice of a unit ball of the tangent group.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gauge::{GaugeConfig, GaugeTable};
use crate::linalg;
use crate::nilpotent::NilpotentFrame;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphericalFactorConfig {
    /// Samples of the final estimates.
    pub mc_points: usize,
    /// Candidate centers per axis of the coarse grid.
    pub grid: usize,
    /// Budget of membership tests for the whole coarse grid.
    pub coarse_budget: usize,
    /// Samples per cross-section during the pattern search.
    pub search_points: usize,
    /// Pattern-search tolerance on the center, relative to the ball extent.
    pub z_tol: f64,
    pub seed: u64,
    pub gauge: GaugeConfig,
}

impl Default for SphericalFactorConfig {
    fn default() -> Self {
        SphericalFactorConfig {
            mc_points: 200_000,
            grid: 11,
            coarse_budget: 1_000_000,
            search_points: 8192,
            z_tol: 1e-2,
            seed: 0,
            gauge: GaugeConfig::default(),
        }
    }
}

/// Stratified estimate of `H^{n−1}(P ∩ B̂(z, 1))`.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossSection {
    pub center: Vec<f64>,
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
    pub refined: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SphericalFactorResult {
    pub beta: f64,
    pub std_error: f64,
    pub maximizer: Vec<f64>,
    /// Whether the maximizer lies within 1% of the unit sphere.
    pub maximizer_on_boundary: bool,
    pub at_maximizer: CrossSection,
    pub at_origin: CrossSection,
    /// Coarse-grid centers and their cross-section estimates.
    pub candidates: Vec<(Vec<f64>, f64)>,
    /// Unit normal of the slicing hyperplane in exponential coordinates.
    pub plane_normal: Vec<f64>,
}

const CHUNK: usize = 2048;

/// Hyperplane slices of unit balls of a tabulated group.
pub struct Slicer {
    table: Arc<GaugeTable>,
    basis: DMatrix<f64>,
    sphere: Vec<Vec<f64>>,
}

impl Slicer {
    pub fn new(table: Arc<GaugeTable>, normal: &[f64]) -> Result<Self> {
        let n = table.dim();
        if normal.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: normal.len() });
        }
        if linalg::norm(normal) == 0.0 {
            return Err(Error::InvalidInput("hyperplane normal vanishes".into()));
        }
        let basis = linalg::orthogonal_complement(&DMatrix::from_column_slice(n, 1, normal));
        let sphere = table.unit_sphere_points();
        Ok(Slicer { table, basis, sphere })
    }

    pub fn table(&self) -> &GaugeTable {
        &self.table
    }

    fn bounding_box(&self, z: &[f64], pad: f64) -> (Vec<f64>, Vec<f64>) {
        let d = self.basis.ncols();
        let g = self.table.group();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for s in &self.sphere {
            let p = DVector::from_vec(g.mul(z, s));
            let c = self.basis.transpose() * p;
            for k in 0..d {
                lo[k] = lo[k].min(c[k]);
                hi[k] = hi[k].max(c[k]);
            }
        }
        for k in 0..d {
            let w = hi[k] - lo[k];
            lo[k] -= pad * w;
            hi[k] += pad * w;
        }
        (lo, hi)
    }

    /// Two samples per stratum of a `k^{n−1}` grid on a padded bounding box;
    /// the box is enlarged while samples hit its outer layer.
    pub fn cross_section(&self, z: &[f64], points: usize, seed: u64, refine: bool) -> Result<CrossSection> {
        let d = self.basis.ncols();
        let k = (((points.max(2) / 2) as f64).powf(1.0 / d as f64).floor() as usize).max(1);
        let strata = k.pow(d as u32);
        let mut pad = 0.05;
        for _ in 0..6 {
            let (lo, hi) = self.bounding_box(z, pad);
            let width: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| b - a).collect();
            let chunks = strata.div_ceil(CHUNK);
            let parts: Vec<Result<[f64; 5]>> = (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut rng = rng::stream(seed, c as u64);
                    let mut acc = [0.0; 5];
                    let mut coords = vec![0.0; d];
                    for st in c * CHUNK..((c + 1) * CHUNK).min(strata) {
                        let mut f = [0.0; 2];
                        for fi in f.iter_mut() {
                            let mut rem = st;
                            let mut edge = false;
                            for a in 0..d {
                                let i = rem % k;
                                rem /= k;
                                let u = (i as f64 + rng::uniform(&mut rng, 0.0, 1.0)) / k as f64;
                                edge |= !(0.02..=0.98).contains(&u);
                                coords[a] = lo[a] + u * width[a];
                            }
                            let x = &self.basis * DVector::from_column_slice(&coords);
                            let m = self.table.member(z, x.as_slice(), 1.0, refine);
                            if m.inside {
                                *fi = 1.0;
                                if edge {
                                    acc[4] += 1.0;
                                }
                            }
                            acc[2] += m.refined as u8 as f64;
                            acc[3] += m.failed as u8 as f64;
                        }
                        acc[0] += 0.5 * (f[0] + f[1]);
                        acc[1] += 0.25 * (f[0] - f[1]).powi(2);
                    }
                    Ok(acc)
                })
                .collect();
            let mut tot = [0.0; 5];
            for p in parts {
                let p = p?;
                for (t, v) in tot.iter_mut().zip(p) {
                    *t += v;
                }
            }
            if tot[4] > 0.0 {
                pad = 2.0 * pad + 0.1;
                continue;
            }
            let samples = 2 * strata;
            let failed = tot[3] as usize;
            if failed as f64 > 0.01 * samples as f64 {
                return Err(Error::MembershipFailures { failed, total: samples });
            }
            let vol: f64 = width.iter().product();
            return Ok(CrossSection {
                center: z.to_vec(),
                value: vol * tot[0] / strata as f64,
                std_error: vol * tot[1].sqrt() / strata as f64,
                samples,
                refined: tot[2] as usize,
                failed,
            });
        }
        Err(Error::InvalidInput("slice keeps reaching the sampling box boundary".into()))
    }

    /// Componentwise extent of the unit ball.
    pub fn extents(&self) -> Vec<f64> {
        let n = self.table.dim();
        (0..n).map(|i| self.sphere.iter().map(|s| s[i].abs()).fold(0.0, f64::max)).collect()
    }
}

/// Spherical factor of the tangent group `nf` for the horizontal vector
/// `nu`, with `dF0` the frame matrix at the base point.
///
/// The slicing hyperplane in exponential coordinates is the annihilator of
/// the horizontal components of `dF0⁻¹ ν`.
pub fn spherical_factor(nf: &NilpotentFrame<f64>, df0: &DMatrix<f64>, nu: &[f64], cfg: &SphericalFactorConfig) -> Result<SphericalFactorResult> {
    let n = nf.dim();
    if df0.nrows() != n || df0.ncols() != n || nu.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: nu.len() });
    }
    let comps = df0.clone().lu().solve(&DVector::from_column_slice(nu)).ok_or_else(|| Error::SingularFrame(nf.base_point.clone()))?;
    let m = nf.rank();
    let mut normal: Vec<f64> = comps.iter().copied().collect();
    for v in normal.iter_mut().skip(m) {
        *v = 0.0;
    }
    let len = linalg::norm(&normal);
    if len <= 1e-12 * (1.0 + linalg::norm(comps.as_slice())) {
        return Err(Error::InvalidInput("normal has no horizontal component".into()));
    }
    let normal: Vec<f64> = normal.iter().map(|v| v / len).collect();
    let table = GaugeTable::shared(nf, &cfg.gauge)?;
    spherical_factor_at(&Slicer::new(table, &normal)?, &normal, cfg)
}

/// Maximizes the cross-section over centers of the closed unit ball.
pub fn spherical_factor_at(slicer: &Slicer, normal: &[f64], cfg: &SphericalFactorConfig) -> Result<SphericalFactorResult> {
    let n = slicer.table().dim();
    let ext = slicer.extents();
    let grid = cfg.grid.max(2);
    let search_seed = cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1);
    let in_ball = |z: &[f64]| slicer.table().estimate(z) <= 1.0;

    let mut centers = Vec::new();
    for flat in 0..grid.pow(n as u32) {
        let mut rem = flat;
        let z: Vec<f64> = (0..n)
            .map(|i| {
                let t = rem % grid;
                rem /= grid;
                ext[i] * (-1.0 + 2.0 * t as f64 / (grid - 1) as f64)
            })
            .collect();
        if in_ball(&z) {
            centers.push(z);
        }
    }
    let coarse_points = (cfg.coarse_budget / centers.len().max(1)).clamp(128, cfg.search_points);
    let mut candidates = Vec::with_capacity(centers.len());
    for z in centers {
        let v = slicer.cross_section(&z, coarse_points, search_seed, false)?.value;
        candidates.push((z, v));
    }
    let (mut best_z, _) = candidates.iter().cloned().fold((vec![0.0; n], f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc });

    let mut best_v = slicer.cross_section(&best_z, cfg.search_points, search_seed, false)?.value;
    let mut step: Vec<f64> = ext.iter().map(|e| e / (grid - 1) as f64).collect();
    while step.iter().zip(&ext).any(|(s, e)| *s > cfg.z_tol * e) {
        let mut improved = false;
        for i in 0..n {
            for sign in [1.0, -1.0] {
                let mut z = best_z.clone();
                z[i] += sign * step[i];
                if !in_ball(&z) {
                    continue;
                }
                let v = slicer.cross_section(&z, cfg.search_points, search_seed, false)?.value;
                if v > best_v {
                    best_v = v;
                    best_z = z;
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

    let at_maximizer = slicer.cross_section(&best_z, cfg.mc_points, cfg.seed.wrapping_add(2), true)?;
    let at_origin = slicer.cross_section(&vec![0.0; n], cfg.mc_points, cfg.seed.wrapping_add(3), true)?;
    let chosen = if at_maximizer.value >= at_origin.value { &at_maximizer } else { &at_origin };
    Ok(SphericalFactorResult {
        beta: chosen.value,
        std_error: chosen.std_error,
        maximizer: chosen.center.clone(),
        maximizer_on_boundary: slicer.table().estimate(&chosen.center) > 0.99,
        at_maximizer: at_maximizer.clone(),
        at_origin: at_origin.clone(),
        candidates,
        plane_normal: normal.to_vec(),
    })
}
