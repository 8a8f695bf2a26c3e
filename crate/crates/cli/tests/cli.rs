use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dpgrid(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpgrid"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

const CHAIN: &str = r#"{
  "buses": [
    {"id": "1", "kind": "slack"},
    {"id": "2", "kind": "zero-injection"},
    {"id": "3", "kind": "load", "class_id": 0}
  ],
  "lines": [
    {"from": "1", "to": "2", "series_admittance": [1, 0]},
    {"from": "2", "to": "3", "series_admittance": [1, 0]}
  ],
  "slack_voltage": [1, 0],
  "v_min": 0.95,
  "v_max": 1.05
}"#;

/// Two-bus feeder with four six-hour steps per day and a small config.
fn small_case() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let feeder = r#"{
      "buses": [
        {"id": "s", "kind": "slack"},
        {"id": "a", "kind": "load", "class_id": 0, "power_factor_deg": 20},
        {"id": "b", "kind": "load", "class_id": 0, "power_factor_deg": 20}
      ],
      "lines": [
        {"from": "s", "to": "a", "series_admittance": [5, -10]},
        {"from": "a", "to": "b", "series_admittance": [5, -10]}
      ],
      "slack_voltage": [1, 0],
      "v_min": 0.9,
      "v_max": 1.1
    }"#;
    std::fs::write(p.join("feeder.json"), feeder).unwrap();
    let mut loads = String::from("time_index,a,b\n");
    for t in 0..24 {
        let x = 0.05 + 0.01 * ((t * 7) % 5) as f64;
        let y = 0.06 + 0.01 * ((t * 3) % 4) as f64;
        loads.push_str(&format!("{t},{x},{y}\n"));
    }
    std::fs::write(p.join("loads.csv"), loads).unwrap();
    std::fs::write(p.join("irradiance.csv"), "time_index,h_g\n0,0\n1,0\n2,0\n3,0\n").unwrap();
    let cfg = r#"{"horizon": 4, "resolution_minutes": 360, "r": 0.001, "delta": 0.05}"#;
    let cfg_path = p.join("experiment.json");
    std::fs::write(&cfg_path, cfg).unwrap();
    let out = dpgrid(&["fit", "--config", "experiment.json", "--out", "model.json"], p);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (dir, cfg_path)
}

#[test]
fn kron_reports_the_chain_reduction() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("chain.json"), CHAIN).unwrap();
    let v = json(&dpgrid(&["kron", "--feeder", "chain.json"], dir.path()));
    let y = &v["y_reduced"];
    let expect = [[0.5, -0.5], [-0.5, 0.5]];
    for (i, row) in expect.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            assert!((y[i][j][0].as_f64().unwrap() - x).abs() < 1e-12);
            assert_eq!(y[i][j][1].as_f64().unwrap(), 0.0);
        }
    }
    assert!((v["kappa_kron"].as_f64().unwrap() - 2.91421).abs() < 1e-5);
}

#[test]
fn unknown_subcommand_prints_usage() {
    let dir = tempfile::tempdir().unwrap();
    let out = dpgrid(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn missing_input_is_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dpgrid(&["kron", "--feeder", "nope.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = dpgrid(&["kron"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn privacy_audit_exit_codes() {
    let (dir, _) = small_case();
    let p = dir.path();
    let v = json(&dpgrid(
        &["privacy-audit", "--config", "experiment.json", "--model", "model.json", "--r", "0"],
        p,
    ));
    assert_eq!(v["epsilon"].as_f64().unwrap(), 0.0);
    let v = json(&dpgrid(&["privacy-audit", "--config", "experiment.json", "--model", "model.json"], p));
    assert!(v["epsilon"].as_f64().unwrap() > 0.0);
    assert_eq!(v["m_tilde_star"]["source"], "closed-form");
    let out = dpgrid(
        &["privacy-audit", "--config", "experiment.json", "--model", "model.json", "--r", "0.5", "--m-tilde", "10"],
        p,
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn seeded_release_is_byte_identical() {
    let (dir, _) = small_case();
    let p = dir.path();
    for out in ["a", "b"] {
        let o = dpgrid(
            &[
                "release", "--config", "experiment.json", "--model", "model.json", "--mechanism", "dp_powerflow",
                "--days", "2", "--seed", "7", "--out", out,
            ],
            p,
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["dp_powerflow.json", "dp_powerflow_day000.csv", "dp_powerflow_day001.csv"] {
        let a = std::fs::read(p.join("a").join(f)).unwrap();
        let b = std::fs::read(p.join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    let v = json(&dpgrid(&["evaluate", "a/dp_powerflow.json", "b/dp_powerflow.json"], p));
    assert_eq!(v["w1"].as_f64().unwrap(), 0.0);
}

#[test]
fn every_mechanism_releases() {
    let (dir, _) = small_case();
    let p = dir.path();
    for m in ["dp_powerflow", "dpgmm_plus_gauss", "noise_free", "joint_voltage_noise", "noisy-loads-plus-gauss"] {
        let o = dpgrid(
            &[
                "release", "--config", "experiment.json", "--model", "model.json", "--mechanism", m, "--eps", "50",
                "--eps-load", "100", "--days", "2", "--out", m,
            ],
            p,
        );
        assert!(o.status.success(), "{m}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let nf = "noise_free/noise_free.json";
    let v = json(&dpgrid(&["evaluate", nf, nf, "--pool", "per-bus"], p));
    assert_eq!(v["w1"].as_f64().unwrap(), 0.0);
    let v = json(&dpgrid(&["evaluate", nf, "joint_voltage_noise/joint_voltage_noise.json"], p));
    assert!(v["w1"].as_f64().unwrap() > 0.0);
}

#[test]
fn calibrate_and_audit_run() {
    let (dir, _) = small_case();
    let p = dir.path();
    let v = json(&dpgrid(
        &["calibrate", "--config", "experiment.json", "--model", "model.json", "--trajectories", "20"],
        p,
    ));
    assert_eq!(v["trials"].as_u64().unwrap(), 20);
    let v = json(&dpgrid(
        &["audit-feasibility", "--config", "experiment.json", "--model", "model.json", "--samples", "50"],
        p,
    ));
    assert_eq!(v["stability_ok"], true);
}

#[test]
fn sweep_writes_a_report() {
    let (dir, _) = small_case();
    let p = dir.path();
    let cfg = r#"{"horizon": 4, "resolution_minutes": 360, "r": 0.001, "delta": 0.05,
                  "eps_grid": [50, 200], "repetitions": 2, "days": 2, "eps_load_points": 3,
                  "calibration": {"trajectories": 20}, "audit_samples": 20,
                  "fit": {"clip": [-4, -1]}}"#;
    std::fs::write(p.join("sweep.json"), cfg).unwrap();
    let o = dpgrid(&["sweep", "--config", "sweep.json", "--out", "results"], p);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(p.join("results/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 5);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p.join("results/report.json")).unwrap()).unwrap();
    assert_eq!(report["runs"].as_array().unwrap().len(), 4);
}
