use lambda_beam::config::{parse_config, RunConfig, Scenario};
use lambda_beam::model::SystemParams;
use lambda_beam::pde::PumpMode;
use lambda_beam::run::{compute, run_scenario};

fn quick(scenario: Scenario) -> RunConfig {
    let mut cfg = RunConfig {
        scenario,
        ..Default::default()
    };
    cfg.numerics.z_points = 128;
    cfg.numerics.samples = 500;
    cfg.pulses.fwhm_transits = 10.0;
    cfg
}

#[test]
fn compare_reports_small_discrepancy() {
    let out = compute(&quick(Scenario::Compare)).unwrap();
    let d = out.metrics["discrepancy"];
    assert!(d <= 0.05, "{d}");
    assert!(out.metrics["excitation_imbalance"].abs() < 0.05);
    assert!(out.files.iter().any(|(n, _)| n == "compare.csv"));
}

#[test]
fn compare_from_entrance_layer() {
    let mut cfg = quick(Scenario::Compare);
    cfg.numerics.delta_z = 0.25;
    let out = compute(&cfg).unwrap();
    assert!(out.metrics["discrepancy"] <= 0.05);
    assert!(out.metrics["transient_max_residual"] < 1e-3);
}

#[test]
fn pde_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick(Scenario::Pde);
    run_scenario(&cfg, &dir.path().join("a")).unwrap();
    run_scenario(&cfg, &dir.path().join("b")).unwrap();
    let a = std::fs::read(dir.path().join("a/probes.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/probes.csv")).unwrap();
    assert_eq!(a, b);
    let header = String::from_utf8_lossy(&a[..40]).to_string();
    assert!(header.starts_with("t,z_probe,field_name,class_index,re,im"));
    let meta: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("a/probes.json")).unwrap()).unwrap();
    assert!(meta["dt"].as_f64().unwrap() > 0.0);
}

#[test]
fn multi_class_dynamic_pump_runs() {
    let mut cfg = quick(Scenario::Pde);
    cfg.ensemble.classes = 3;
    cfg.ensemble.spread = 1e-4;
    cfg.numerics.pump = PumpMode::Dynamic;
    cfg.numerics.z_points = 64;
    let out = compute(&cfg).unwrap();
    let eff = out.metrics["transfer_efficiency"];
    assert!(eff > 0.5 && eff <= 1.0 + 1e-9, "{eff}");
    assert!(out.metrics["weak_excitation_max"] < 0.1);
}

#[test]
fn strong_probe_trips_weak_excitation_monitor() {
    let mut cfg = quick(Scenario::Pde);
    cfg.params = SystemParams {
        n: 1e6,
        ..Default::default()
    };
    cfg.pulses.amplitude1 = 3e3;
    cfg.numerics.z_points = 64;
    let out = compute(&cfg).unwrap();
    assert!(out.warnings.iter().any(|w| w.contains("weak-excitation")));
}

#[test]
fn sweep_keeps_point_order() {
    let cfg = parse_config(
        "scenario = \"sweep\"\n[measurement]\ntrials = 200\nk_values = [100]\n[sweep]\nparameter = \"measurement.phi_true\"\nvalues = [2.0, 0.5, 1.0]\n",
        &[],
    )
    .unwrap();
    let out = compute(&cfg).unwrap();
    let csv = String::from_utf8(out.files[0].1.clone()).unwrap();
    let first: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(first, vec!["2", "0.5", "1"]);
}

#[test]
fn sweep_over_grid_size() {
    let mut cfg = quick(Scenario::Sweep);
    cfg.sweep.parameter = "numerics.z_points".into();
    cfg.sweep.values = vec![64.0, 128.0];
    cfg.sweep.target = Scenario::Pde;
    let out = compute(&cfg).unwrap();
    assert_eq!(out.metrics["points"], 2.0);
}

#[test]
fn adiabatic_scenario_writes_alpha_table() {
    let mut cfg = quick(Scenario::Adiabatic);
    cfg.alpha.count = 8;
    let out = compute(&cfg).unwrap();
    assert!((out.metrics["alpha1_slope"] - 2.0).abs() < 0.05);
    assert_eq!(out.metrics["alpha1_bound_violations"], 0.0);
    let e_in = out.metrics["input_energy"];
    assert!((out.metrics["output_energy"] - e_in).abs() < 1e-9 * e_in);
}
