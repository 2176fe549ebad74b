use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lambda-beam"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn manifest(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("manifest.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn minimal_measure_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.toml", "scenario = \"measure\"\n");
    let out = dir.path().join("out");
    let status = bin()
        .args(["measure", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--set", "measurement.phases=[0.0, 1.5707963267948966, 3.141592653589793]"])
        .status()
        .unwrap();
    assert!(status.success());
    let m = manifest(&out);
    assert_eq!(m["status"], "ok");
    assert_eq!(m["scenario"], "measure");
    for f in ["intensities.csv", "trials.csv", "summary.csv", "intensity_vs_phi.svg", "rmse_vs_k.svg"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let mut rd = csv::Reader::from_path(out.join("intensities.csv")).unwrap();
    let ratios: Vec<f64> = rd
        .records()
        .map(|r| r.unwrap()[3].parse::<f64>().unwrap())
        .collect();
    assert_eq!(ratios.len(), 3);
    for (r, want) in ratios.iter().zip([0.0, 0.5, 1.0]) {
        assert!((r - want).abs() < 1e-12, "{r}");
    }
}

#[test]
fn identical_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.toml", "scenario = \"measure\"\n[measurement]\ntrials = 300\n");
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let ok = bin()
            .args(["measure", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .args(["--seed", seed])
            .status()
            .unwrap()
            .success();
        assert!(ok);
        std::fs::read(out.join("trials.csv")).unwrap()
    };
    assert_eq!(run("a", "5"), run("b", "5"));
    assert_ne!(run("a", "5"), run("c", "6"));
    assert_eq!(manifest(&dir.path().join("c"))["seed"], 6);
}

#[test]
fn invalid_config_fails_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "scenario = \"pde\"\n[params]\nv0 = 1.5\n");
    let out = dir.path().join("out");
    let res = bin().args(["pde", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("params.v0"));
    let m = manifest(&out);
    assert_eq!(m["status"], "error");
    assert!(m["error"].as_str().unwrap().contains("params.v0"));
}

#[test]
fn empty_sweep_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", "scenario = \"sweep\"\n");
    let out = dir.path().join("out");
    let res = bin().args(["sweep", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("empty sweep"));
    assert_eq!(manifest(&out)["error"], "empty sweep");
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", "[alpha]\ncount = 5\n[numerics]\nsamples = 200\n");
    let out = dir.path().join("env-out");
    let ok = bin()
        .args(["adiabatic", "--config"])
        .arg(&cfg)
        .env("LAMBDA_BEAM_OUT", &out)
        .status()
        .unwrap()
        .success();
    assert!(ok);
    let m = manifest(&out);
    assert_eq!(m["scenario"], "adiabatic");
    assert!(out.join("alpha.csv").exists() && out.join("alpha1_vs_delta.svg").exists());
}

#[test]
fn unknown_scenario_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", "");
    let res = bin().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert!(!res.status.success());
}
