use std::process::Command;

use proptest::prelude::*;
use srgeo::expr::{parse_expr, Expr};
use srgeo::{builtin, run_scenario, ManifoldSpec, ScenarioConfig, Task};

fn srgeo(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_srgeo")).args(args).output().unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(srgeo(&["flag", "--manifold", "heisenberg1"]).status.code(), Some(0));
    let unknown = srgeo(&["curvature", "--manifold", "heisenberg1"]);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("usage: srgeo"));
    assert_eq!(srgeo(&["factor", "--manifold", "euclidean(2)"]).status.code(), Some(1), "seed is mandatory");
    assert_eq!(srgeo(&["flag", "--manifold", "klein_bottle"]).status.code(), Some(1));
}

#[test]
fn singular_distribution_fails_the_flag_verdict() {
    let dir = std::env::temp_dir().join(format!("srgeo-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("martinet.sr");
    std::fs::write(&path, "# Martinet distribution\nname = martinet\ndim = 3\nX1 = d1\nX2 = d2 + x1^2*d3\n").unwrap();
    let out = srgeo(&["flag", "--manifold", path.to_str().unwrap(), "--point", "0,0,0", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("flag.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "fail");
    assert_eq!(report["results"]["equiregular"], false);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn parse_errors_report_position() {
    let dir = std::env::temp_dir().join(format!("srgeo-cli-bad-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.sr");
    std::fs::write(&path, "dim = 3\nX1 = d1\nX2 = d2 + sin(x1)*d3\n").unwrap();
    let out = srgeo(&["flag", "--manifold", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3, column 11"), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn builtins_have_their_documented_growth() {
    for (name, growth) in [("euclidean(3)", vec![3]), ("heisenberg1", vec![2, 3]), ("engel", vec![2, 3, 4]), ("perturbed_heisenberg", vec![2, 3])] {
        let out = run_scenario(&ScenarioConfig::new(builtin(name).unwrap(), Task::Flag)).unwrap();
        assert_eq!(out.exit_code(), 0, "{name}");
        assert_eq!(out.report.results["growth"], serde_json::json!(growth));
    }
}

#[test]
fn report_layout() {
    let mut cfg = ScenarioConfig::new(builtin("heisenberg1").unwrap(), Task::Distance);
    cfg.target = Some(vec![0.6, 0.8, 0.0]);
    let out = run_scenario(&cfg).unwrap();
    let json = out.report.to_json();
    let keys = ["tool_version", "spec_hash", "seed", "task", "params", "results", "verdict", "runtime_ms"];
    let pos: Vec<usize> = keys.iter().map(|k| json.find(&format!("\"{k}\"")).unwrap()).collect();
    let sorted = {
        let mut p = pos.clone();
        p.sort();
        p
    };
    assert_eq!(pos, sorted);
    assert!((out.report.results["value"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!(out.report.runtime_ms.is_none());
}

#[test]
fn json_spec_mirror() {
    let spec = builtin("engel").unwrap();
    assert_eq!(ManifoldSpec::parse(&spec.to_json()).unwrap(), spec);
}

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0u32..20).prop_map(|k| Expr::Num(k as f64 * 0.25)),
        (1usize..5).prop_map(Expr::Var),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
            (inner, 0u32..4).prop_map(|(a, k)| Expr::Pow(Box::new(a), k)),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn expressions_round_trip(e in expr()) {
        let text = e.to_string();
        let back = parse_expr(&text, 1, 1).unwrap();
        prop_assert_eq!(&back, &e, "{}", text);
    }

    #[test]
    fn fields_round_trip_through_the_spec(coeffs in prop::collection::vec(expr(), 3)) {
        let terms: Vec<String> = coeffs.iter().enumerate().map(|(k, c)| format!("({c})*d{}", k + 1)).collect();
        let text = format!("dim = 4\nX1 = d1\nX2 = {}\n", terms.join(" + "));
        if let Ok(spec) = ManifoldSpec::parse(&text) {
            prop_assert_eq!(ManifoldSpec::parse(&spec.emit()).unwrap(), spec);
        }
    }
}
