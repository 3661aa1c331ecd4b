use std::fs;

use solistab::runner::{fmt_f64, run, validate, ExperimentConfig, Kind};

fn quiet() -> impl FnMut(&str) {
    |_| {}
}

fn short_stability() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.grid.n = 512;
    c.grid.length = 100.0;
    c.evolve.dt = 2e-3;
    c.evolve.t_end = 1.0;
    c.evolve.sample_every = 50;
    c.evolve.sponge = Some(solistab::evolve::Sponge { strength: 20.0, width: 20.0 });
    c
}

#[test]
fn default_config_is_valid() {
    assert!(validate(&ExperimentConfig::default()).is_empty());
}

#[test]
fn weight_at_sqrt_c_is_rejected() {
    let mut c = ExperimentConfig::default();
    c.a = Some(1.0);
    let v = validate(&c);
    assert_eq!(v.len(), 1);
    assert!(v[0].contains("weight rate must satisfy a < √c"), "{v:?}");
}

#[test]
fn every_violation_is_listed() {
    let mut c = ExperimentConfig::default();
    c.grid.n = 1000;
    c.p = 4;
    c.sigma = 2.0;
    c.jobs = 0;
    let v = validate(&c);
    assert_eq!(v.len(), 4, "{v:?}");
    assert!(v.iter().any(|m| m.contains("power of two")));
    c = ExperimentConfig::default();
    c.perturbation = solistab::experiment::Perturbation::File { path: "/nonexistent/v0.txt".into() };
    assert!(validate(&c)[0].contains("does not exist"));
    c = ExperimentConfig::default();
    c.kind = Kind::Check;
    c.criteria = vec![1, 14];
    assert!(validate(&c)[0].contains("unknown criterion 14"));
}

#[test]
fn json_config_with_defaults() {
    let c = ExperimentConfig::from_json(r#"{"kind": "sweep", "p": 3, "grid": {"n": 1024}, "amplitudes": [0.01]}"#).unwrap();
    assert_eq!(c.kind, Kind::Sweep);
    assert_eq!((c.grid.n, c.grid.length), (1024, 200.0));
    assert_eq!(c.weight(), 0.25);
    assert!(ExperimentConfig::from_json(r#"{"gird": {}}"#).is_err());
    let lin = ExperimentConfig::from_json(r#"{"kind": "spectrum"}"#).unwrap();
    assert_eq!(lin.weight(), 0.5);
}

#[test]
fn floats_carry_17_significant_digits() {
    assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
    assert_eq!(fmt_f64(1.0 / 3.0).parse::<f64>().unwrap(), 1.0 / 3.0);
    assert_eq!(fmt_f64(-2.5e-300), "-2.5000000000000000e-300");
}

#[test]
fn invalid_config_is_an_error_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::default();
    c.c0 = -1.0;
    let e = run(&c, &dir.path().join("x"), &mut quiet()).unwrap_err();
    assert_eq!(e.exit_code(), 2);
    assert!(!dir.path().join("x").exists());
}

#[test]
fn soliton_check_writes_checks_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::default();
    c.kind = Kind::SolitonCheck;
    let rec = run(&c, dir.path(), &mut quiet()).unwrap();
    assert_eq!(rec.failed_checks, 0);
    let checks: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("checks.json")).unwrap()).unwrap();
    assert_eq!(checks.as_array().unwrap().len(), 3);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!(summary["summary"]["ode_residual"].as_f64().unwrap() < 1e-9);
    assert_eq!(summary["config"]["kind"], "soliton-check");
}

#[test]
fn stability_outputs_are_deterministic() {
    let c = short_stability();
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let rec = run(&c, d1.path(), &mut quiet()).unwrap();
    run(&c, d2.path(), &mut quiet()).unwrap();
    for name in ["track.csv", "invariants.csv"] {
        let a = fs::read(d1.path().join(name)).unwrap();
        assert_eq!(a, fs::read(d2.path().join(name)).unwrap(), "{name}");
    }
    let track = fs::read_to_string(d1.path().join("track.csv")).unwrap();
    let mut lines = track.lines();
    assert!(lines.next().unwrap().starts_with("t,c,x,gamma,refined_c"));
    assert_eq!(lines.count(), 11);
    assert_eq!(rec.artifacts.len(), 3);
    // Summary scalars come from the CSV columns.
    let last: Vec<&str> = track.lines().last().unwrap().split(',').collect();
    let c_plus = rec.summary["c_plus"].as_f64().unwrap();
    assert_eq!(last[4].parse::<f64>().unwrap(), c_plus);
}

#[test]
fn inequality_suite_kind() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::default();
    c.kind = Kind::InequalitySuite;
    c.fields = 20;
    c.seed = 11;
    let rec = run(&c, dir.path(), &mut quiet()).unwrap();
    assert_eq!(rec.failed_checks, 0);
    assert_eq!(rec.summary["seed"], 11);
}

#[test]
fn check_kind_runs_selected_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::default();
    c.kind = Kind::Check;
    c.criteria = vec![1, 2];
    let mut lines = vec![];
    let rec = run(&c, dir.path(), &mut |l: &str| lines.push(l.to_string())).unwrap();
    assert_eq!(rec.failed_checks, 0);
    assert_eq!(lines.len(), 2);
    assert!(lines.iter().all(|l| l.starts_with("PASS")));
}

#[test]
fn evolve_kind_reports_drift() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = short_stability();
    c.kind = Kind::Evolve;
    c.perturbation = solistab::experiment::Perturbation::Gaussian { amplitude: 0.0, width: 1.0, offset: 0.0 };
    let rec = run(&c, dir.path(), &mut quiet()).unwrap();
    assert!(rec.summary["momentum_drift"].as_f64().unwrap() < 1e-10);
    assert!(rec.summary["soliton_l2_error"].as_f64().unwrap() < 1e-6);
    let inv = fs::read_to_string(dir.path().join("invariants.csv")).unwrap();
    assert_eq!(inv.lines().next().unwrap(), "t,momentum,energy,max_abs");
}
