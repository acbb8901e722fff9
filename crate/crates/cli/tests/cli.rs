use std::fs;
use std::process::{Command, Output};

use nilflow::flow::{closed_form, integrate, read_samples_csv, FlowParams};
use nilflow::GroupFamily;
use serde_json::Value;

fn nilflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nilflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn nilflow_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nilflow"))
        .args(args)
        .env(key, value)
        .output()
        .expect("binary runs")
}

fn as_f64(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| v.to_string().parse().unwrap())
}

const H1_FLOW: [&str; 13] = [
    "flow", "--family", "heisenberg", "--n", "1", "--rho", "0", "--g0", "identity", "--dt", "1e-3", "--t-end", "1",
];

#[test]
fn flow_final_row_matches_exact_solution() {
    let out = nilflow(&H1_FLOW);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let samples = read_samples_csv(&out.stdout[..]).unwrap();
    let last = samples.last().unwrap();
    assert_eq!(last.t, 1.0);
    let exact = closed_form(GroupFamily::Heisenberg, &[1.0; 3], 1, 0.0, 1.0).unwrap();
    for (a, b) in last.g.iter().zip(&exact) {
        assert!((a - b).abs() / b < 1e-6);
    }
}

#[test]
fn flow_csv_round_trips_in_memory_samples() {
    let out = nilflow(&["flow", "--family", "q", "--n", "1", "--rho", "-0.5", "--g0", "1,2,1.5,0.5,0.7,1.1,0.9", "--t-end", "0.5"]);
    assert!(out.status.success());
    let parsed = read_samples_csv(&out.stdout[..]).unwrap();
    let params = FlowParams::new(GroupFamily::Quaternion, 1, -0.5).with_step(1e-3, 0.5);
    let traj = integrate(&params, &[1.0, 2.0, 1.5, 0.5, 0.7, 1.1, 0.9]).unwrap();
    assert_eq!(parsed, traj.samples);
}

#[test]
fn identical_runs_are_byte_identical() {
    let a = nilflow(&H1_FLOW);
    let b = nilflow(&H1_FLOW);
    assert_eq!(a.stdout, b.stdout);
    let v1 = nilflow(&["verify", "--family", "heisenberg", "--n", "1", "--seed", "7", "--format", "json"]);
    let v2 = nilflow(&["verify", "--family", "heisenberg", "--n", "1", "--seed", "7", "--format", "json"]);
    assert!(v1.status.success());
    assert_eq!(v1.stdout, v2.stdout);
}

#[test]
fn flow_writes_ledger_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("run.csv");
    let out = nilflow(&["flow", "--family", "heisenberg", "--n", "2", "--rho", "0.1", "--output", csv.to_str().unwrap()]);
    assert!(out.status.success());
    let ledger: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("run.ledger.json")).unwrap()).unwrap();
    assert_eq!(ledger["schema_version"], 1);
    assert_eq!(ledger["config"]["subcommand"], "flow");
    let result = &ledger["result"];
    assert_eq!(result["termination"], "horizon");
    for key in ["A_1", "A_2", "G_lower", "G_upper"] {
        assert!(as_f64(&result["invariant_drift"][key]) < 1e-8, "{key}");
    }
    assert!(as_f64(&result["closed_form_max_rel_error"]) < 1e-6);

    let custom = dir.path().join("custom.json");
    let out = nilflow(&[
        "flow", "--family", "heisenberg", "--n", "1", "--output", "-", "--ledger", custom.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(custom.exists());
}

#[test]
fn verify_quaternion_passes() {
    let out = nilflow(&["verify", "--family", "quaternion", "--n", "1", "--seed", "42"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("name,passed,measured,tolerance,detail"));
    assert!(!text.contains(",false,"));
}

#[test]
fn curvature_reports_ricci_diagonal() {
    let out = nilflow(&["curvature", "--family", "heisenberg", "--n", "1", "--g0", "identity"]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["schema_version"], 1);
    let diag: Vec<f64> = doc["result"]["ricci_diagonal"].as_array().unwrap().iter().map(as_f64).collect();
    assert_eq!(diag, vec![-0.5, -0.5, 0.5]);
    assert_eq!(as_f64(&doc["result"]["scalar"]), -0.5);
    // 1-based indices in reports
    let first = &doc["result"]["riemann"][0];
    assert!(first["i"].as_u64().unwrap() >= 1);
}

#[test]
fn spectrum_reports_degradation_and_periods() {
    let out = nilflow(&["spectrum", "--family", "heisenberg", "--n", "1", "--t-end", "1", "--v-star", "1,0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    let r = &doc["result"];
    assert_eq!(r["spectral"]["mu"], 1);
    assert!((as_f64(&r["spectral"]["p_factor_observed"]) - 0.25).abs() < 1e-14);
    assert_eq!(r["classification"], "heisenberg-like");
    assert!((as_f64(&r["noncentral"]["period"]) - 4f64.powf(1.0 / 6.0)).abs() < 1e-14);
    assert!(as_f64(&r["noncentral"]["residual"]) < 1e-12);

    let t0 = nilflow(&["spectrum", "--family", "quaternion", "--n", "1"]);
    let doc: Value = serde_json::from_slice(&t0.stdout).unwrap();
    assert_eq!(doc["result"]["classification"], "heisenberg-type");
}

#[test]
fn invalid_parameters_exit_two() {
    for args in [
        vec!["flow", "--family", "heisenberg", "--n", "1", "--g0", "1,2"],
        vec!["flow", "--family", "heisenberg", "--n", "0"],
        vec!["flow", "--family", "heisenberg", "--n", "1", "--dt", "-1"],
        vec!["flow", "--family", "heisenberg", "--n", "1", "--g0", "1,-1,1"],
        vec!["curvature", "--family", "heisenberg", "--n", "1", "--format", "csv"],
        vec!["spectrum", "--family", "heisenberg", "--n", "1", "--z", "0"],
        vec!["flow", "--family", "octonion", "--n", "1"],
    ] {
        let out = nilflow(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn strict_early_stop_exits_three() {
    let args = ["flow", "--family", "heisenberg", "--n", "1", "--rho", "5", "--t-end", "3", "--strict"];
    let out = nilflow(&args);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let relaxed = nilflow(&args[..args.len() - 1]);
    assert_eq!(relaxed.status.code(), Some(0));
    let samples = read_samples_csv(&relaxed.stdout[..]).unwrap();
    assert!(samples.last().unwrap().t < 3.0);
}

#[test]
fn sweep_is_independent_of_thread_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let run = |dir: &std::path::Path, threads: &str| {
        let out = nilflow_env(
            &[
                "sweep", "--family", "quaternion", "--n", "1", "--rho", "-0.5,0,0.1", "--t-end", "0.5", "--output",
                dir.to_str().unwrap(),
            ],
            "NILFLOW_THREADS",
            threads,
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    run(a.path(), "1");
    run(b.path(), "3");
    for name in ["flow_rho_-0.5.csv", "flow_rho_0.csv", "flow_rho_0.1.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let sa = fs::read_to_string(a.path().join("summary.json")).unwrap();
    let sb = fs::read_to_string(b.path().join("summary.json")).unwrap();
    assert_eq!(sa.replace(a.path().to_str().unwrap(), ""), sb.replace(b.path().to_str().unwrap(), ""));
    let doc: Value = serde_json::from_str(&sa).unwrap();
    assert_eq!(doc["result"]["runs"].as_array().unwrap().len(), 3);

    let bad = nilflow_env(&["sweep", "--family", "h", "--n", "1", "--rho", "0", "--output", a.path().to_str().unwrap()], "NILFLOW_THREADS", "zero");
    assert_eq!(bad.status.code(), Some(2));
}
