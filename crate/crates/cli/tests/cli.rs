use std::path::Path;
use std::process::{Command, Output};

use leafcp_core::{EstimateResult, RefineResult, ScanResult, Trace, TwoStepResult};
use serde_json::Value;
use tempfile::TempDir;

fn leafcp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leafcp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = leafcp(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn simulate(dir: &Path, name: &str, extra: &[&str]) -> String {
    let path = dir.join(name).to_str().unwrap().to_string();
    let mut args = vec!["simulate", "--seed", "7", "--out", &path];
    args.extend_from_slice(extra);
    ok(&args);
    path
}

fn s1(dir: &Path, name: &str) -> String {
    simulate(dir, name, &["--preset", "section4", "--T", "7500", "--a1", "1", "--a2", "1", "--a3", "1"])
}

#[test]
fn simulate_writes_one_row_per_step() {
    let dir = TempDir::new().unwrap();
    let path = s1(dir.path(), "t.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 7501 + 1, "header plus t = 0..=T");
    let trace = Trace::load(&path).unwrap();
    assert_eq!(trace.horizon(), 7500);
}

#[test]
fn simulate_prints_summary_line() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("t.csv");
    let out = ok(&["simulate", "--T", "300", "--seed", "1", "--out", path.to_str().unwrap()]);
    let line = String::from_utf8(out.stdout).unwrap();
    let trace = Trace::load(&path).unwrap();
    assert_eq!(
        line.trim(),
        format!("T=300 v_T={} x_T={} seed=1", trace.v()[300], trace.x()[300])
    );
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let a = s1(dir.path(), "a.csv");
    let b = s1(dir.path(), "b.csv");
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn invalid_offset_is_rejected() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("t.csv");
    let out = leafcp(&[
        "simulate", "--T", "7500", "--a1", "-1.5", "--seed", "7", "--out", path.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("-1.5"));
    assert!(!path.exists());
}

#[test]
fn malformed_trace_names_the_line() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "t,y,v,x\n0,0,1,1\n1,1,2,1\n2,1,3,oops\n").unwrap();
    let out = leafcp(&["estimate", "--trace", path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
}

#[test]
fn estimate_json_round_trips() {
    let dir = TempDir::new().unwrap();
    let trace = s1(dir.path(), "t.csv");
    let report = dir.path().join("est.json");
    ok(&[
        "estimate", "--trace", &trace, "--from", "0", "--to", "1500", "--out",
        report.to_str().unwrap(),
    ]);
    let est: EstimateResult =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!((est.t0, est.t1), (0, 1500));
    assert!(est.is_converged());
    assert!((est.a_hat - 1.0).abs() <= 0.5, "a_hat {}", est.a_hat);
    let (lo, hi) = est.ci.unwrap();
    assert!(lo < est.a_hat && est.a_hat < hi);
}

#[test]
fn test_reports_statistic_and_p_value() {
    let dir = TempDir::new().unwrap();
    let trace = s1(dir.path(), "t.csv");
    let out = ok(&["test", "--trace", &trace, "--from", "2500", "--to", "5000"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let l = v["l"].as_f64().unwrap();
    let p = v["p_value"].as_f64().unwrap();
    assert!(l >= 0.0 && (0.0..=1.0).contains(&p));
    let left: EstimateResult = serde_json::from_value(v["left"].clone()).unwrap();
    assert_eq!(left.t1, 2500);
}

#[test]
fn detect_modes_emit_their_results() {
    let dir = TempDir::new().unwrap();
    let trace = simulate(dir.path(), "t.csv", &["--T", "30000", "--a1", "1", "--a2", "5", "--a3", "1"]);
    let out = ok(&["detect", "--trace", &trace, "--mode", "scan", "--k", "30"]);
    let scan: ScanResult = serde_json::from_slice(&out.stdout).unwrap();
    // L_i for i = 2..=k-1
    assert_eq!(scan.l.len(), 28);

    let out = ok(&["detect", "--trace", &trace, "--mode", "two-step", "--k", "30"]);
    let two: TwoStepResult = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(two.refinements.len(), 2, "two change intervals");

    let out = ok(&[
        "detect", "--trace", &trace, "--mode", "refine", "--from", "15000", "--to", "30000",
    ]);
    let r: RefineResult = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r.window, (15000, 30000));
    assert!(r.final_interval.0 >= 15000 && r.final_interval.1 <= 30000);
}

#[test]
fn locate_writes_diagnostic_csv() {
    let dir = TempDir::new().unwrap();
    let trace = simulate(dir.path(), "t.csv", &["--T", "7500", "--a3", "0", "--preset", "all-vertex"]);
    let diag = dir.path().join("gap.csv");
    let out = ok(&[
        "locate", "--trace", &trace, "--from", "0", "--to", "7500", "--out",
        diag.to_str().unwrap(),
    ]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let tau = v["tau_hat"].as_u64().unwrap();
    assert!((tau as f64 - 5001.0).abs() <= 0.1 * 7500.0, "tau_hat {tau}");
    let text = std::fs::read_to_string(&diag).unwrap();
    assert_eq!(text.lines().next(), Some("t,gap"));
    assert_eq!(text.lines().count(), 7501 + 1);
}

#[test]
fn config_file_with_flag_override() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out_dir = dir.path().join("exp");
    std::fs::write(
        &cfg,
        format!(
            "# small run\nscenario = S1\nreplications = 50\nseed = 3\nT = 1500\nout = {}\n",
            out_dir.display()
        ),
    )
    .unwrap();
    ok(&["experiment", "--config", cfg.to_str().unwrap(), "--replications", "8"]);
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("s1_manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["config"]["replications"], 8);
    assert_eq!(manifest["config"]["master_seed"], 3);
    assert_eq!(manifest["summary"]["horizon"], 1500);
    let cells = std::fs::read_to_string(out_dir.join("s1_cells.csv")).unwrap();
    assert!(cells.starts_with("name,n,mean,variance,mse,coverage,min,max\n"));
    assert_eq!(cells.lines().count(), 6);
}

#[test]
fn missing_seed_is_drawn_and_recorded() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("exp");
    let out = ok(&[
        "experiment", "--scenario", "S7", "--replications", "3", "--T", "600", "--out",
        out_dir.to_str().unwrap(),
    ]);
    let note = String::from_utf8(out.stderr).unwrap();
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("s7_manifest.json")).unwrap())
            .unwrap();
    let seed = manifest["config"]["master_seed"].as_u64().unwrap();
    assert!(note.contains(&seed.to_string()));
}

#[test]
fn bad_config_fails() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "scenario = S1\ncolour = red\n").unwrap();
    let out = leafcp(&["experiment", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
    let out = leafcp(&["experiment", "--scenario", "S42"]);
    assert!(!out.status.success());
}
