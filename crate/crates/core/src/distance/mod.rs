//! Carnot–Carathéodory distances: geodesic shooting, a control-based
//! upper-bound oracle, ball sampling and diameters.

mod ball;
mod consistency;
mod hamiltonian;
mod oracle;
mod shooting;

pub use ball::{ball_boundary_sample, diameter_estimate, BoundarySample, DiameterEstimate};
pub use consistency::{chart_frame, local_global_consistency, ConsistencyReport};
pub use hamiltonian::{geodesic_shoot, GeodesicArc, Hamiltonian};
pub use oracle::{ControlOracle, OracleConfig};
pub use shooting::{DistanceEngine, ShootSolution, ShootingConfig};

use crate::error::Result;

/// Which engine produced a value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    Shooting,
    Oracle,
    Both,
}

impl Engine {
    pub fn as_str(&self) -> &'static str {
        match self {
            Engine::Shooting => "shooting",
            Engine::Oracle => "oracle",
            Engine::Both => "both",
        }
    }
}

/// Evidence behind a distance value.
#[derive(Clone, Debug, PartialEq)]
pub enum Witness {
    None,
    /// Initial covector of the extremal on `[0, 1]` and its endpoint residual.
    Covector { covector: Vec<f64>, residual: f64 },
    /// Piecewise-constant controls on equal segments and endpoint residual.
    Controls { controls: Vec<Vec<f64>>, residual: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistanceResult {
    pub value: f64,
    pub lower_hint: f64,
    /// Certified upper bound (`+∞` when the oracle did not run).
    pub upper_bound: f64,
    pub engine: Engine,
    pub witness: Witness,
    /// Set when the engines disagree beyond tolerance.
    pub flag: Option<String>,
}

impl DistanceResult {
    pub fn zero(engine: Engine) -> Self {
        DistanceResult { value: 0.0, lower_hint: 0.0, upper_bound: 0.0, engine, witness: Witness::None, flag: None }
    }
}

/// Runs both engines; the shooting value is kept unless it fails or exceeds
/// the oracle bound by more than 1%.
pub fn distance_both(engine: &DistanceEngine, oracle: &ControlOracle, x: &[f64], y: &[f64], cfg: &OracleConfig) -> Result<DistanceResult> {
    let upper = oracle.distance(x, y, cfg)?;
    match engine.distance_shooting(x, y) {
        Ok(mut s) => {
            s.upper_bound = upper.upper_bound;
            s.engine = Engine::Both;
            if s.value > upper.upper_bound * 1.01 {
                s.flag = Some(format!("shooting value {} exceeds oracle bound {}", s.value, upper.upper_bound));
                s.value = upper.upper_bound;
            }
            Ok(s)
        }
        Err(_) => Ok(DistanceResult { flag: Some("shooting failed; oracle value used".into()), ..upper }),
    }
}
