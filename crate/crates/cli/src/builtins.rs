//! Library of example manifolds.

use crate::error::{CliError, Result};
use crate::spec::ManifoldSpec;

pub const NAMES: [&str; 4] = ["euclidean(n)", "heisenberg1", "engel", "perturbed_heisenberg"];

fn text(name: &str) -> Option<String> {
    Some(match name {
        "heisenberg1" => "name = heisenberg1\ndim = 3\nX1 = d1 - 0.5*x2*d3\nX2 = d2 + 0.5*x1*d3\n".to_string(),
        "engel" => "name = engel\ndim = 4\nX1 = d1\nX2 = d2 + x1*d3 + x3*d4\n".to_string(),
        "perturbed_heisenberg" => "name = perturbed_heisenberg\ndim = 3\nX1 = d1 - 0.5*x2*d3\nX2 = d2 + (0.5*x1 + x1^2)*d3\n".to_string(),
        _ => {
            let n: usize = name.strip_prefix("euclidean(")?.strip_suffix(')')?.parse().ok().filter(|n| (1..=8).contains(n))?;
            let mut s = format!("name = euclidean({n})\ndim = {n}\n");
            for k in 1..=n {
                s.push_str(&format!("X{k} = d{k}\n"));
            }
            s
        }
    })
}

/// Looks up a builtin by name, e.g. `heisenberg1` or `euclidean(3)`.
pub fn builtin(name: &str) -> Result<ManifoldSpec> {
    let t = text(name.trim()).ok_or_else(|| CliError::Invalid(format!("unknown manifold '{name}'; builtins are {}", NAMES.join(", "))))?;
    ManifoldSpec::parse(&t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_round_trip() {
        for name in ["euclidean(2)", "euclidean(3)", "heisenberg1", "engel", "perturbed_heisenberg"] {
            let s = builtin(name).unwrap();
            assert_eq!(ManifoldSpec::parse(&s.emit()).unwrap(), s, "{name}");
        }
        assert!(builtin("euclidean(0)").is_err());
        assert!(builtin("sphere").is_err());
    }
}
