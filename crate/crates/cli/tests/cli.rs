use std::path::Path;
use std::process::{Command, Output};

fn gpcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpcert"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run(dir: &Path, command: &str) -> Output {
    let config = dir.join("run.json");
    gpcert(&[command, "--config", config.to_str().unwrap()])
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL_RUN: &str = r#"{
  "dataset": { "quadratic": { "samples": 24, "coefficients": [0.02, -0.02, 0.0], "noise_std": 0.002, "seed": 5 } },
  "kernel": { "family": "squared-exponential", "params": { "variance": 0.03, "theta": [0.05, 0.05] } },
  "jitter": 1e-5,
  "bnb": { "tolerance": 1e-5, "max_regions": 2000 },
  "certify": {
    "points": [ { "name": "origin", "x": [0.0, 0.0] }, { "name": "far", "x": [3.0, 3.0] } ],
    "gammas": [0.0, 0.1],
    "deltas": [0.05, 0.1, 1e6]
  },
  "baseline": { "n_samples": 400, "per_dim": 5, "seed": 11 },
  "out_dir": "out"
}"#;

fn small_run() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.json"), SMALL_RUN).unwrap();
    dir
}

#[test]
fn full_pipeline() {
    let dir = small_run();
    let out = dir.path().join("out");

    let fit = run(dir.path(), "fit");
    assert_eq!(fit.status.code(), Some(0), "{}", String::from_utf8_lossy(&fit.stderr));
    assert!(stdout(&fit).contains("log marginal likelihood"));
    let model = std::fs::read(out.join("model.gpm")).unwrap();
    assert!(out.join("dataset.csv").is_file());

    // refitting the same configuration reproduces the artifact
    assert_eq!(run(dir.path(), "fit").status.code(), Some(0));
    assert_eq!(std::fs::read(out.join("model.gpm")).unwrap(), model);

    let certify = run(dir.path(), "certify");
    assert_eq!(certify.status.code(), Some(0), "{}", String::from_utf8_lossy(&certify.stderr));
    let sweep = gpcert::io::tables::read_sweep(&out.join("sweep_origin.csv")).unwrap();
    assert_eq!(sweep.len(), 2 * 2 * 3);
    for row in &sweep {
        if row.gamma == 0.0 || row.delta == 1e6 {
            assert_eq!(row.phi_hat, 0.0, "{row:?}");
        }
    }
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("certificates.json")).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 2 * 12);

    let baseline = run(dir.path(), "baseline");
    assert_eq!(baseline.status.code(), Some(0), "{}", String::from_utf8_lossy(&baseline.stderr));
    let first = std::fs::read(out.join("baseline_far.csv")).unwrap();
    assert_eq!(run(dir.path(), "baseline").status.code(), Some(0));
    assert_eq!(std::fs::read(out.join("baseline_far.csv")).unwrap(), first);
    let rows = gpcert::io::tables::read_baseline(&out.join("baseline_far.csv")).unwrap();
    assert_eq!(rows.len(), 2 * 3);
    assert!(rows.iter().all(|r| r.n_grid == 25 && r.n_samples == 400));

    let report = run(dir.path(), "report");
    assert_eq!(report.status.code(), Some(0));
    let text = stdout(&report);
    assert!(text.contains("Total: 24 certificates"), "{text}");
    assert!(out.join("report.md").is_file());
}

#[test]
fn out_flag_overrides_the_config() {
    let dir = small_run();
    let other = dir.path().join("elsewhere");
    let config = dir.path().join("run.json");
    let o = gpcert(&["fit", "--config", config.to_str().unwrap(), "--out", other.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(other.join("model.gpm").is_file());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn report_on_an_empty_directory() {
    let dir = tempfile::tempdir().unwrap();
    let o = gpcert(&["report", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("No artifacts found"));
}

#[test]
fn input_errors_exit_with_one() {
    assert_eq!(gpcert(&["fit"]).status.code(), Some(1));
    assert_eq!(gpcert(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(gpcert(&["fit", "--config", "/nonexistent/run.json"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(&config, r#"{"jiter": 1}"#).unwrap();
    assert_eq!(gpcert(&["fit", "--config", config.to_str().unwrap()]).status.code(), Some(1));

    // certify before fit: the model artifact is missing
    let dir = small_run();
    assert_eq!(run(dir.path(), "certify").status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("d.csv"), "a,b,y\n1,2,3\n4,x,6\n").unwrap();
    std::fs::write(
        dir.path().join("run.json"),
        r#"{
          "dataset": { "csv": { "path": "d.csv", "features": 2, "targets": 1 } },
          "kernel": { "family": "squared-exponential", "params": { "variance": 1.0, "theta": [1.0, 1.0] } }
        }"#,
    )
    .unwrap();
    let o = run(dir.path(), "fit");
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn numerical_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("d.csv"), "a,b,y\n1,2,3\n1,2,4\n").unwrap();
    std::fs::write(
        dir.path().join("run.json"),
        r#"{
          "dataset": { "csv": { "path": "d.csv", "features": 2, "targets": 1 } },
          "kernel": { "family": "squared-exponential", "params": { "variance": 1.0, "theta": [1.0, 1.0] } },
          "jitter": 0.0
        }"#,
    )
    .unwrap();
    let o = run(dir.path(), "fit");
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}
