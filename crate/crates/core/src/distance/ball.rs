//! Sampling of sphere points by unit-speed extremals and diameter estimates.

use super::oracle::{ControlOracle, OracleConfig};
use super::shooting::DistanceEngine;
use crate::error::{Error, Result};
use crate::rng;

/// Fraction of the full turning angle allowed for the vertical covector
/// components of the sphere design.
const TURNING: f64 = 0.95 * 2.0 * std::f64::consts::PI;

/// Endpoint of a unit-speed extremal of length `r` from `q`.
#[derive(Clone, Debug)]
pub struct BoundarySample {
    pub point: Vec<f64>,
    /// Initial covector of the arc on `[0, 1]`; its length is `r`.
    pub covector: Vec<f64>,
}

/// Frame components of the `k`-th covector of the sphere design for radius
/// `r`: the `±X_i` directions first, then Halton points on `S^{n−1}`.
pub fn design_components(m: usize, weights: &[u32], r: f64, k: usize) -> Vec<f64> {
    let n = weights.len();
    let mut comps = vec![0.0; n];
    if k < 2 * m {
        comps[k / 2] = if k % 2 == 0 { r } else { -r };
        return comps;
    }
    let mut idx = (k - 2 * m) as u64;
    loop {
        let s = rng::halton_sphere(idx, n);
        let hn = s[..m].iter().map(|v| v * v).sum::<f64>().sqrt();
        if hn > 1e-3 {
            for i in 0..m {
                comps[i] = r * s[i] / hn;
            }
            for i in m..n {
                comps[i] = TURNING * s[i] * r.powi(2 - weights[i] as i32);
            }
            return comps;
        }
        idx += 1 << 20;
    }
}

/// Shoots `count` unit-speed extremals of length `r` from `q`.
pub fn ball_boundary_sample(engine: &DistanceEngine, q: &[f64], r: f64, count: usize) -> Result<Vec<BoundarySample>> {
    if r <= 0.0 {
        return Err(Error::InvalidInput("radius must be positive".into()));
    }
    let m = engine.rank();
    (0..count)
        .map(|k| {
            let comps = design_components(m, engine.weights(), r, k);
            let covector = engine.covector_from_components(q, &comps)?;
            let point = engine.endpoint(q, &covector)?;
            Ok(BoundarySample { point, covector })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiameterEstimate {
    pub value: f64,
    pub count: usize,
    pub pairs_evaluated: usize,
    /// Pairs whose distance fell back to the oracle.
    pub oracle_fallbacks: usize,
}

/// Largest pairwise distance among `count` sphere samples, each pair capped
/// at `2r` (the concatenation of the two arcs through `q` has length `2r`).
///
/// Pairs are visited with the antipodal `±X_1` pair first; the scan stops once
/// a pair reaches `2r` to relative precision `1e−10`, since no pair can exceed
/// it.
pub fn diameter_estimate(engine: &DistanceEngine, q: &[f64], r: f64, count: usize, attempts: usize) -> Result<DiameterEstimate> {
    let samples = ball_boundary_sample(engine, q, r, count)?;
    let cap = 2.0 * r;
    let mut best = 0.0f64;
    let mut evaluated = 0;
    let mut fallbacks = 0;
    let step = engine.weights().iter().copied().max().unwrap_or(1);
    'outer: for a in 0..samples.len() {
        for b in (a + 1)..samples.len() {
            evaluated += 1;
            let (pa, pb) = (&samples[a].point, &samples[b].point);
            let d = match engine.distance_shooting_with(pa, pb, &[], attempts) {
                Ok(res) => res.value,
                Err(_) => {
                    fallbacks += 1;
                    let oracle = ControlOracle::from_engine(engine, step);
                    oracle.distance(pa, pb, &OracleConfig { segments: 16, ..Default::default() }).map(|res| res.value).unwrap_or(cap)
                }
            };
            best = best.max(d.min(cap));
            if best >= cap * (1.0 - 1e-10) {
                break 'outer;
            }
        }
    }
    Ok(DiameterEstimate { value: best, count, pairs_evaluated: evaluated, oracle_fallbacks: fallbacks })
}
