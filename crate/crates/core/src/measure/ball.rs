//! Membership tests for closed sub-Riemannian balls.

use std::sync::Arc;

use crate::distance::DistanceEngine;
use crate::error::Result;
use crate::flows::ChartBox;
use crate::frame::PrivilegedFrame;
use crate::gauge::{GaugeConfig, GaugeTable, Membership};
use crate::nilpotent::nilpotent_at;

/// Distance oracle for ball membership.
///
/// When the frame is a Carnot group in its own exponential coordinates at
/// the origin, distances reduce to the tabulated gauge through
/// `d(y, x) = d(0, y⁻¹x)`; otherwise every query is answered by shooting.
#[derive(Clone, Debug)]
pub enum BallOracle {
    Group(Arc<GaugeTable>),
    Shooting(DistanceEngine),
}

impl BallOracle {
    pub fn for_frame(frame: &PrivilegedFrame<f64>, chart: ChartBox, gauge: &GaugeConfig) -> Result<Self> {
        let n = frame.dim();
        let origin = vec![0.0; n];
        if chart.contains(&origin) {
            if let Ok(nf) = nilpotent_at(frame, &origin) {
                let same = nf
                    .fields
                    .iter()
                    .zip(&frame.fields)
                    .all(|(a, b)| a.sub(b).map(|d| d.max_abs_coeff() < 1e-10).unwrap_or(false));
                if same {
                    return Ok(BallOracle::Group(GaugeTable::shared(&nf, gauge)?));
                }
            }
        }
        Ok(BallOracle::Shooting(DistanceEngine::new(frame, chart)))
    }

    pub fn is_group(&self) -> bool {
        matches!(self, BallOracle::Group(_))
    }

    /// Cheap estimate of `d(y, x)`; exact up to shooting tolerance for the
    /// shooting oracle.
    pub fn estimate(&self, y: &[f64], x: &[f64]) -> Result<f64> {
        match self {
            BallOracle::Group(t) => Ok(t.estimate(&t.group().mul(&t.group().inv(y), x))),
            BallOracle::Shooting(e) => Ok(e.distance_shooting(y, x)?.value),
        }
    }

    /// `d(y, x)` by shooting (warm-started from the table for groups).
    pub fn precise(&self, y: &[f64], x: &[f64]) -> Result<f64> {
        match self {
            BallOracle::Group(t) => t.precise(&t.group().mul(&t.group().inv(y), x)),
            BallOracle::Shooting(e) => Ok(e.distance_shooting(y, x)?.value),
        }
    }

    /// Whether `d(y, x) ≤ radius`.
    pub fn contains(&self, y: &[f64], radius: f64, x: &[f64], refine: bool) -> Membership {
        match self {
            BallOracle::Group(t) => t.member(y, x, radius, refine),
            BallOracle::Shooting(e) => match e.distance_shooting(y, x) {
                Ok(d) => Membership { inside: d.value <= radius, refined: true, failed: false },
                Err(_) => Membership { inside: false, refined: true, failed: true },
            },
        }
    }
}
