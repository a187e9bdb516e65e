use std::path::Path;
use std::process::{Command, Output};

fn nsbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsbm")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = nsbm(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_init_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["--seed", "3", "--out", path(d), "simulate", "--scenario", "a", "--n", "60"]);
    for f in ["edges.txt", "covariates.csv", "labels.txt"] {
        assert!(d.join(f).exists(), "{f} missing");
    }
    let init = d.join("init.txt");
    ok(&[
        "--seed", "1", "--out", path(&init), "sdp-init",
        "--edges", path(&d.join("edges.txt")),
        "--covariates", path(&d.join("covariates.csv")),
        "--k", "2",
    ]);
    assert_eq!(std::fs::read_to_string(&init).unwrap().lines().count(), 60);

    let out = ok(&["evaluate", "--truth", path(&d.join("labels.txt")), "--labels", path(&init)]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let nmi = v["nmi"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&nmi));
    assert!(v["ari"].as_f64().unwrap() <= 1.0);
}

#[test]
fn simulate_is_seeded() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        ok(&["--seed", "9", "--out", path(d), "simulate", "--scenario", "b", "--n", "50"]);
    }
    for f in ["edges.txt", "covariates.csv", "labels.txt"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn detect_prints_stable_json() {
    let args = ["--seed", "5", "detect", "--scenario", "a", "--n", "60", "--method", "vem", "--reps", "2"];
    let first = ok(&args);
    let second = ok(&args);
    assert_eq!(first.stdout, second.stdout);
    let v: serde_json::Value = serde_json::from_slice(&first.stdout).unwrap();
    assert_eq!(v["aggregate"]["completed"], 2);
    assert_eq!(v["reps"].as_array().unwrap().len(), 2);
}

#[test]
fn detect_writes_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["--seed", "2", "--out", path(dir.path()), "detect", "--scenario", "a", "--n", "50", "--reps", "2"]);
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(dir.path().join("run.json")).unwrap();
    assert!(text.contains("\"aggregate\""));
    assert!(dir.path().join("labels").join("rep_0001.txt").exists());
}

#[test]
fn run_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = nsbm::harness::ExperimentConfig {
        reps: 1,
        seed: 4,
        ..nsbm::harness::ExperimentConfig::scenario(nsbm::simgen::Scenario::A, 50, nsbm::harness::Method::Mpl)
    };
    let file = dir.path().join("cfg.json");
    std::fs::write(&file, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = ok(&["run", "--config", path(&file)]);
    let direct = nsbm::harness::run_pipeline(&cfg).unwrap().to_json().unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim_end(), direct);
}

#[test]
fn sweep_and_wald() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let csv = d.join("sweep.csv");
    ok(&[
        "--seed", "1", "--out", path(&csv), "sweep", "--scenario", "a", "--n", "50",
        "--taus", "0.5", "--alphas", "0,1",
    ]);
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,tau,alpha,mean_nmi,se_nmi,reps");
    assert_eq!(lines.len(), 3);
    assert!(lines[1..].iter().all(|l| !l.contains("NaN")), "{text}");

    ok(&["--seed", "1", "--out", path(d), "simulate", "--n", "80"]);
    let out = ok(&[
        "wald", "--edges", path(&d.join("edges.txt")),
        "--covariates", path(&d.join("covariates.csv")),
        "--labels", path(&d.join("labels.txt")),
    ]);
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.starts_with("class\tfeature\testimate"));
    assert_eq!(table.lines().filter(|l| !l.starts_with('#')).count(), 5);
}

#[test]
fn errors_exit_nonzero() {
    let out = nsbm(&["evaluate", "--truth", "/nonexistent/t.txt", "--labels", "/nonexistent/l.txt"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    assert!(!nsbm(&["detect", "--scenario", "a", "--n", "60", "--k", "1"]).status.success());
    assert!(!nsbm(&["frobnicate"]).status.success());
}
