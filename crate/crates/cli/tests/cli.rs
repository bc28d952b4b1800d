use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn epgpr(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epgpr")).args(args).arg("--out-dir").arg(dir).env("RUST_LOG", "error").output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn find_ep_on_kato_orbit() {
    let dir = tempfile::tempdir().unwrap();
    let out = epgpr(dir.path(), &["find-ep"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let results = json(&dir.path().join("ep_results.json"));
    let k = &results[0]["kappa_ep"];
    let (re, im) = (k[0].as_f64().unwrap(), k[1].as_f64().unwrap());
    assert!(re.abs() <= 1e-5 && (im - 1.0).abs() <= 1e-5, "{k}");
    for name in ["run_config.json", "exchange.json", "paths.csv", "iterations_0.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn too_few_orbit_points_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = epgpr(dir.path(), &["trace", "--n-points", "4"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).starts_with("error kind=config code=2:"), "{}", stderr(&out));
}

#[test]
fn orbit_without_ep_has_no_signature() {
    let dir = tempfile::tempdir().unwrap();
    let out = epgpr(dir.path(), &["find-ep", "--center", "3,3", "--radius", "0.5"]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("kind=no_ep_signature"));
    let exchange = json(&dir.path().join("exchange.json"));
    assert_eq!(exchange["exchanging_pairs"].as_array().unwrap().len(), 0);
}

#[test]
fn starved_oracle_reports_no_root() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"oracle": {"max_iter": 1}, "oracle_start": [3.0, -2.0]}"#).unwrap();
    let out = epgpr(dir.path(), &["oracle", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 5, "{}", stderr(&out));
    assert!(stderr(&out).contains("kind=no_root"));
}

#[test]
fn single_iteration_does_not_converge() {
    let dir = tempfile::tempdir().unwrap();
    let out = epgpr(dir.path(), &["find-ep", "--max-iter", "1", "--exploration-after", "off"]);
    assert_eq!(code(&out), 6, "{}", stderr(&out));
    assert!(dir.path().join("ep_results.json").exists());
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"orbit": {"radius": 0.5}, "colour": 1}"#).unwrap();
    let out = epgpr(dir.path(), &["trace", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"orbit": {"center": [0.0, 0.8], "radius": 0.4, "n_points": 30}, "seed": 9}"#).unwrap();
    let out = epgpr(dir.path(), &["trace", "--config", cfg.to_str().unwrap(), "--n-points", "50"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let written = json(&dir.path().join("run_config.json"));
    assert_eq!(written["orbit"]["n_points"], 50);
    assert_eq!(written["orbit"]["radius"], 0.4);
    assert_eq!(written["seed"], 9);
    assert_eq!(json(&dir.path().join("spectra.json"))["kappa"].as_array().unwrap().len(), 50);
}

#[test]
fn traced_paths_swap_after_one_loop() {
    let dir = tempfile::tempdir().unwrap();
    let out = epgpr(dir.path(), &["group", "--center", "0,0.8", "--radius", "0.5"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("paths.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    let path = |row: &Vec<f64>, j: usize| (row[2 + 2 * j], row[3 + 2 * j]);
    let dist = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).hypot(a.1 - b.1);
    assert!(dist(path(last, 0), path(first, 1)) < dist(path(last, 0), path(first, 0)));
    assert!(dist(path(last, 1), path(first, 0)) < dist(path(last, 1), path(first, 1)));
}

#[test]
fn family_file_reproduces_builtin_spectra() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let family = a.path().join("kato.json");
    std::fs::write(&family, r#"{"dim": 2, "symmetric": true, "base": [[1,0],[0,0],[0,0],[-1,0]], "coupling": [[0,1],[1,0]]}"#).unwrap();
    assert_eq!(code(&epgpr(a.path(), &["trace"])), 0);
    let out = epgpr(b.path(), &["trace", "--family", "file", "--family-file", family.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let read = |d: &Path| std::fs::read(d.join("spectra.json")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["find-ep", "--family", "random5", "--family-seed", "42", "--center", "-1.39,0.87", "--seed", "3"];
    assert_eq!(code(&epgpr(a.path(), &args)), 0);
    assert_eq!(code(&epgpr(b.path(), &args)), 0);
    for name in ["spectra.json", "exchange.json", "paths.csv", "ep_results.json", "iterations_0.csv"] {
        if a.path().join(name).exists() {
            assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap(), "{name}");
        }
    }
}

#[test]
fn gpr_fit_learns_a_smooth_function() {
    let dir = tempfile::tempdir().unwrap();
    let x: Vec<[f64; 2]> = (0..5).flat_map(|i| (0..5).map(move |j| [i as f64 / 4.0, j as f64 / 4.0])).collect();
    let y: Vec<f64> = x.iter().map(|p| (3.0 * p[0]).sin() * (2.0 * p[1]).cos()).collect();
    let data = dir.path().join("data.json");
    std::fs::write(&data, serde_json::to_string(&serde_json::json!({ "x": x, "y": [y] })).unwrap()).unwrap();
    let out = epgpr(dir.path(), &["gpr-fit", "--data", data.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let diag = json(&dir.path().join("gpr_diagnostics.json"));
    assert!(diag[0]["max_training_residual"].as_f64().unwrap() <= 1e-6);
    assert!(diag[0]["log_marginal_likelihood"].as_f64().unwrap().is_finite());
    let model = json(&dir.path().join("gpr_model.json"));
    assert_eq!(model["inputs"].as_array().unwrap().len(), 25);
}

#[test]
fn gpr_fit_with_one_point() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.json");
    std::fs::write(&data, r#"{"x": [[0.5, 0.5]], "y": [[2.0]]}"#).unwrap();
    let out = epgpr(dir.path(), &["gpr-fit", "--data", data.to_str().unwrap(), "--no-optimize"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn gpr_fit_duplicates_without_noise_give_a_hint() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.json");
    std::fs::write(&data, r#"{"x": [[0.1, 0.2], [0.4, 0.4], [0.1, 0.2]], "y": [[1.0, 2.0, 1.0]]}"#).unwrap();
    let out = epgpr(dir.path(), &["gpr-fit", "--data", data.to_str().unwrap(), "--noise-variance", "0"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("remove duplicate input rows"), "{}", stderr(&out));
}
