use std::path::{Path, PathBuf};
use std::process::Command;

use ipmsm_observer::config::PAPER_SIM_CFG;
use ipmsm_observer::harness::{read_csv, summarize, RunSummary, SummaryContext, CSV_COLUMNS};
use ipmsm_observer::{ObserverKind, ScenarioConfig};

const BIN: &str = env!("CARGO_BIN_EXE_ipmsm-obs");

fn short_config(dir: &Path, extra: &str) -> PathBuf {
    let text = PAPER_SIM_CFG.replace("duration = 2.0", "duration = 0.05") + extra;
    let path = dir.join("short.cfg");
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(BIN).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn simulate_writes_csv_and_recomputable_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path(), "");
    let out = dir.path().join("out");
    let (code, _, err) = run(&["simulate", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--observer", "all"]);
    assert_eq!(code, 0, "{err}");

    let config = ScenarioConfig::parse(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    for kind in ObserverKind::ALL {
        let sub = out.join(kind.as_str());
        let text = std::fs::read_to_string(sub.join("run.csv")).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_COLUMNS.join(","));
        let rows = read_csv(text.as_bytes()).unwrap();
        assert_eq!(rows.len(), config.sample_count() + 1);
        let stored: RunSummary =
            serde_json::from_str(&std::fs::read_to_string(sub.join("metrics.json")).unwrap()).unwrap();
        let recomputed = summarize(&rows, &SummaryContext::new(&config, kind), None);
        assert_eq!(stored, recomputed, "{kind}");
    }
}

#[test]
fn zero_duration_gives_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("zero.cfg");
    std::fs::write(&cfg, PAPER_SIM_CFG.replace("duration = 2.0", "duration = 0")).unwrap();
    let out = dir.path().join("out");
    let (code, _, _) = run(&["simulate", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(out.join("kre/run.csv")).unwrap();
    assert_eq!(csv, CSV_COLUMNS.join(",") + "\n");
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("kre/metrics.json")).unwrap()).unwrap();
    assert!(metrics["settling_flux"].is_null());
    assert!(metrics["rate"].is_null());
    assert!(metrics["pe"].is_null());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, PAPER_SIM_CFG.replace("gamma = 1.0", "gamma = fast")).unwrap();
    let (code, _, err) = run(&["simulate", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("gamma"), "{err}");

    let (code, _, _) = run(&["simulate", dir.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["frobnicate"]);
    assert_eq!(code, 2);
    let cfg = short_config(dir.path(), "");
    let (code, _, _) = run(&["sweep", cfg.to_str().unwrap(), "--param", "R", "--values", "1"]);
    assert_eq!(code, 2);
}

#[test]
fn divergence_exits_with_three_and_keeps_partial_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("wild.cfg");
    let text = PAPER_SIM_CFG
        .replace("duration = 2.0", "duration = 0.05")
        .replace("gamma = 1.0", "gamma = 1e300")
        .replace("observer = kre", "observer = grad_aut");
    std::fs::write(&cfg, text).unwrap();
    let out = dir.path().join("out");
    let (code, _, err) = run(&["simulate", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 3, "{err}");
    let rows = read_csv(std::fs::File::open(out.join("grad_aut/run.csv")).unwrap()).unwrap();
    assert!(rows.len() < 501);
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("grad_aut/metrics.json")).unwrap()).unwrap();
    assert!(metrics["fault"].is_string());
}

#[test]
fn pe_compare_and_sweep_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path(), "");
    let (code, out, _) = run(&["pe", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    let pe: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(pe["delta_hat"].as_f64().unwrap() > 0.0);

    let (code, out, _) = run(&["compare", cfg.to_str().unwrap(), "--observers", "kre,grad_aut"]);
    assert_eq!(code, 0);
    assert!(out.contains("kre") && out.contains("grad_aut") && !out.contains("grad_tie"));

    let (code, out, _) = run(&["sweep", cfg.to_str().unwrap(), "--param", "gamma", "--values", "1,5"]);
    assert_eq!(code, 0);
    let entries: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(entries.as_array().unwrap().len(), 2);
    assert_eq!(entries[1]["value"].as_f64(), Some(5.0));
}
