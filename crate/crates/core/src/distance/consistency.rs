//! Agreement of distances computed in two exponential charts.

use super::ball::{ball_boundary_sample, design_components};
use super::shooting::DistanceEngine;
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::flows::{ChartBox, ExpChart};
use crate::frame::PrivilegedFrame;
use crate::nilpotent::coefficient_jets;
use crate::ode::FlowConfig;
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyReport {
    pub max_discrepancy: f64,
    pub pairs: usize,
    /// False when geodesics of length `4r` from `q` leave the chart.
    pub radius_ok: bool,
    pub message: Option<String>,
}

/// Coordinate frame of `frame` in exponential coordinates at `q`, as
/// polynomial fields truncated at weighted order `order`.
pub fn chart_frame(frame: &PrivilegedFrame<f64>, q: &[f64], order: u32) -> Result<Vec<VectorField<f64>>> {
    let jets = coefficient_jets(frame, q, order)?;
    jets.into_iter().map(|row| VectorField::new(row.into_iter().map(|j| j.poly).collect())).collect()
}

/// Compares `d` in the chart centred at `q` with `d` in the chart centred at
/// `q_shift` on `pairs` point pairs inside `B(q, r)`.
pub fn local_global_consistency(
    frame: &PrivilegedFrame<f64>,
    chart: &ChartBox,
    q: &[f64],
    q_shift: &[f64],
    r: f64,
    pairs: usize,
    seed: u64,
) -> Result<ConsistencyReport> {
    let n = frame.dim();
    let m = frame.rank();
    let engine = DistanceEngine::new(frame, chart.clone());
    match ball_boundary_sample(&engine, q, 4.0 * r, 2 * m + 8) {
        Ok(_) => {}
        Err(Error::ChartEscape(_)) => {
            return Ok(ConsistencyReport { max_discrepancy: f64::NAN, pairs: 0, radius_ok: false, message: Some("radius too large".into()) })
        }
        Err(e) => return Err(e),
    }
    let order = frame.step as u32 + 3;
    let local = ChartBox::cube(n, 1e3);
    let engine_q = DistanceEngine::from_fields(&chart_frame(frame, q, order)?, &frame.weights, local.clone());
    let engine_s = DistanceEngine::from_fields(&chart_frame(frame, q_shift, order)?, &frame.weights, local);
    let cfg = FlowConfig::default();
    let exp_q = ExpChart::new(frame, q, chart.clone(), cfg);
    let exp_s = ExpChart::new(frame, q_shift, chart.clone(), cfg);
    let origin = vec![0.0; n];
    let mut stream = rng::stream(seed, 0);
    let mut sample = |k: usize| -> Result<Vec<f64>> {
        let t = rng::uniform(&mut stream, 0.2, 1.0);
        let comps = design_components(m, &frame.weights, t * r, 2 * m + k);
        let p = engine_q.covector_from_components(&origin, &comps)?;
        engine_q.endpoint(&origin, &p)
    };
    let mut worst = 0.0f64;
    for k in 0..pairs {
        let x = sample(2 * k)?;
        let y = sample(2 * k + 1)?;
        let xs = exp_s.inverse(&exp_q.map(&x)?, None)?;
        let ys = exp_s.inverse(&exp_q.map(&y)?, None)?;
        let d1 = engine_q.distance_shooting(&x, &y)?.value;
        let d2 = engine_s.distance_shooting(&xs, &ys)?.value;
        worst = worst.max((d1 - d2).abs());
    }
    Ok(ConsistencyReport { max_discrepancy: worst, pairs, radius_ok: true, message: None })
}
