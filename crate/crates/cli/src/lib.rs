//! Manifold specification language and scenario runner for `srgeo-core`.

pub mod builtins;
pub mod error;
pub mod expr;
pub mod scenario;
pub mod spec;

pub use builtins::builtin;
pub use error::{CliError, ParseError, ParseErrorKind, Result};
pub use scenario::{run_scenario, Report, ScenarioConfig, ScenarioOutput, Task, Verdict};
pub use spec::{ManifoldSpec, MetricMode};

/// Resolves `--manifold`: an existing file path is parsed, anything else is a
/// builtin name.
pub fn load_manifold(arg: &str) -> Result<ManifoldSpec> {
    let path = std::path::Path::new(arg);
    if path.is_file() {
        ManifoldSpec::parse(&std::fs::read_to_string(path)?)
    } else {
        builtin(arg)
    }
}
