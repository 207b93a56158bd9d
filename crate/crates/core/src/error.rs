use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("bracket-generating condition fails within step {max_step} at point {point:?}")]
    ChowFailure { point: Vec<f64>, max_step: usize },
    #[error("structure is not equiregular: growth {first:?} at {first_point:?} but {other:?} at {point:?}")]
    NotEquiregular { first: Vec<usize>, first_point: Vec<f64>, other: Vec<usize>, point: Vec<f64> },
    #[error("frame is singular at {0:?}")]
    SingularFrame(Vec<f64>),
    #[error("integrator exhausted {0} steps")]
    StepLimit(usize),
    #[error("integrator step size underflow at t = {0}")]
    StepUnderflow(f64),
    #[error("trajectory left the chart at {0:?}")]
    ChartEscape(Vec<f64>),
    #[error("Newton iteration did not converge (residual {residual:e})")]
    NoConvergence { residual: f64 },
    #[error("frame is not privileged: {0}")]
    NonPrivileged(String),
    #[error("shooting failed: no start converged for target {0:?}")]
    ShootingFailed(Vec<f64>),
    #[error("no feasible curve found: {0}")]
    Infeasible(String),
    #[error("degenerate hypersurface at {0:?}")]
    DegeneratePatch(Vec<f64>),
    #[error("membership test failed on {failed} of {total} samples")]
    MembershipFailures { failed: usize, total: usize },
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
}

pub type Result<T> = std::result::Result<T, Error>;
