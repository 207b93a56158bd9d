//! Sub-Riemannian geometry workbench.
//!
//! Polynomial frames on ℝⁿ are turned into privileged frames, exponential
//! coordinates and nilpotent approximations; Carnot–Carathéodory distances are
//! computed by geodesic shooting and certified from above by a control-based
//! oracle; the measure layer estimates spherical factors, SR surface measures
//! and Federer densities.

pub mod blowup;
pub mod compiled;
pub mod distance;
pub mod error;
pub mod field;
pub mod flows;
pub mod frame;
pub mod gauge;
pub mod group;
pub mod jet;
pub mod linalg;
pub mod measure;
pub mod nilpotent;
pub mod ode;
pub mod poly;
pub mod quad;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use field::{lie_bracket, VectorField};
pub use frame::{build_privileged_frame, compute_flag, evaluate_metric, FlagReport, MetricExtension, PrivilegedFrame};
pub use poly::Poly;
pub use scalar::{Real, Scalar};

/// Polynomial vector field with `f64` coefficients.
pub type PolyVectorField = VectorField<f64>;
/// Polynomial vector field with exact rational coefficients.
pub type ExactVectorField = VectorField<num_rational::BigRational>;
/// Privileged frame with `f64` coefficients.
pub type Frame = PrivilegedFrame<f64>;
