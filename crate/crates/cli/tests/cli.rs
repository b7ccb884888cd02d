//! End-to-end checks of the `gda` binary: artifact schemas, exit codes,
//! and byte-level determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};

static DIR_COUNTER: AtomicUsize = AtomicUsize::new(0);

fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "gda-cli-test-{}-{}-{}",
        std::process::id(),
        tag,
        DIR_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, contents: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, contents).unwrap();
    path
}

fn gda(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gda"))
        .args(args)
        .env_remove("GDA_SEED")
        .output()
        .expect("binary runs")
}

const CONVERGING_QUADRATIC: &str = r#"{
    "payoff": {"builtin": "quadratic", "a": 1.0, "b": 0.0, "c": -1.0},
    "initial": [{"x": [1.0], "y": [1.0]}],
    "integrator": {"t_max": 40.0},
    "seed": 11
}"#;

#[test]
fn simulate_converging_quadratic() {
    let dir = scratch_dir("simulate");
    let cfg = write_config(&dir, CONVERGING_QUADRATIC);
    let out = gda(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let csv = fs::read_to_string(dir.join("trajectory_0.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,x1,y1,S,T,L,Ldot");
    let last = csv.lines().last().unwrap();
    let fields: Vec<f64> = last.split(',').map(|v| v.parse().unwrap()).collect();
    assert!(fields[1].abs() < 1e-6, "final x {}", fields[1]);
    assert!(fields[2].abs() < 1e-6, "final y {}", fields[2]);

    let audit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("audit_0.json")).unwrap()).unwrap();
    assert_eq!(audit["monotone"], true);
    assert!(audit["max_rate_discrepancy"].is_number());
    assert!(audit["worst_t"].is_number());
}

#[test]
fn simulate_conservative_rotation_reports_conservation() {
    let dir = scratch_dir("rotation");
    let cfg = write_config(
        &dir,
        r#"{
            "payoff": {"expression": "x1*y1", "m": 1, "n": 1},
            "initial": [{"x": [1.0], "y": [0.0]}],
            "integrator": {"t_max": 20.0},
            "seed": 3
        }"#,
    );
    let out = gda(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let audit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("audit_0.json")).unwrap()).unwrap();
    // r defaults to 0 (no certificate r for the bilinear payoff):
    // energy is conserved along the rotation
    let drift = audit["max_drift"].as_f64().unwrap();
    assert!(drift < 1e-6, "drift {drift}");
    assert_eq!(audit["monotone"], true);
}

#[test]
fn certify_schema_and_examples() {
    let dir = scratch_dir("certify");
    let cfg = write_config(
        &dir,
        r#"{
            "payoff": {"builtin": "quadratic", "a": 2.0, "b": 2.0, "c": 1.0},
            "seed": 5
        }"#,
    );
    let out = gda(&[
        "certify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let cert: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("certificate.json")).unwrap()).unwrap();
    assert_eq!(cert["theorem1"], true);
    assert_eq!(cert["corollary1"], false);
    assert_eq!(cert["theorem2_case"], "case1");
    assert_eq!(cert["r"].as_f64().unwrap(), 1.5);
    assert_eq!(cert["provenance"], "analytic");
    assert!(cert["lemmas"]["quadratic_lower_bound"]["violations"]
        .as_u64()
        .is_some());

    // Liénard with damping above the nonlinearity: no limit cycle, case 2
    let cfg = write_config(
        &dir,
        r#"{
            "payoff": {"builtin": "lienard", "mu": 1.0, "alpha": 1.5},
            "seed": 5
        }"#,
    );
    let out = gda(&[
        "certify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let cert: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("certificate.json")).unwrap()).unwrap();
    assert_eq!(cert["theorem1"], true);
    assert_eq!(cert["theorem2_case"], "case2");

    // bilinear expression: sampled eigenvalues (0, 0), heuristic caveat
    let cfg = write_config(
        &dir,
        r#"{
            "payoff": {"expression": "x1*y1", "m": 1, "n": 1},
            "seed": 5
        }"#,
    );
    let out = gda(&[
        "certify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let cert: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("certificate.json")).unwrap()).unwrap();
    assert_eq!(cert["theorem1"], false);
    assert!(cert["r"].is_null());
    assert!(cert["caveats"]
        .as_array()
        .unwrap()
        .iter()
        .any(|c| c.as_str().unwrap().contains("heuristic")));
}

#[test]
fn classify_array_mirrors_starts() {
    let dir = scratch_dir("classify");
    let cfg = write_config(
        &dir,
        r#"{
            "payoff": {"builtin": "quadratic", "a": 1.0, "b": 0.0, "c": -1.0},
            "initial": [{"x": [1.0], "y": [1.0]}, {"x": [-0.5], "y": [2.0]}],
            "integrator": {"t_max": 40.0},
            "seed": 1
        }"#,
    );
    let out = gda(&[
        "classify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let arr: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("classifications.json")).unwrap())
            .unwrap();
    let entries = arr.as_array().unwrap();
    assert_eq!(entries.len(), 2);
    for entry in entries {
        assert_eq!(entry["verdict"], "Converged");
        assert!(entry["evidence"]["final_gradient_norm"].is_number());
        assert!(entry["config_echo"]["eps_ss"].is_number());
    }
}

#[test]
fn sweep_csv_shape() {
    let dir = scratch_dir("sweep");
    let cfg = write_config(
        &dir,
        r#"{
            "payoff": {"builtin": "lienard", "mu": 1.0, "alpha": 0.0},
            "initial": [{"x": [0.1], "y": [0.0]}],
            "integrator": {"t_max": 60.0},
            "sweep": {"parameters": [{"name": "alpha", "values": [0.0, 1.5]}]},
            "seed": 2
        }"#,
    );
    let out = gda(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "alpha,theorem1,theorem2_case,corollary1,verdict,r"
    );
    assert_eq!(lines.len(), 3);
    assert!(lines[1].contains("false,none"), "{}", lines[1]);
    assert!(lines[2].contains("true,case2"), "{}", lines[2]);
}

#[test]
fn simulate_van_der_pol_grows_onto_the_cycle() {
    let dir = scratch_dir("vdp");
    let cfg = write_config(
        &dir,
        r#"{
            "payoff": {"builtin": "lienard", "mu": 1.0, "alpha": 0.0},
            "initial": [{"x": [0.1], "y": [0.0]}],
            "integrator": {"t_max": 100.0},
            "seed": 9
        }"#,
    );
    let out = gda(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.join("trajectory_0.csv")).unwrap();
    let xs: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|line| line.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    let early_max = xs[..xs.len() / 4]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let late_max = xs[xs.len() / 2..]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(early_max < late_max, "oscillation did not grow");
    assert!(
        (1.9..=2.1).contains(&late_max),
        "limit-cycle amplitude {late_max}"
    );
}

#[test]
fn sweep_lienard_damping_grid() {
    let dir = scratch_dir("sweep-lienard");
    let cfg = write_config(
        &dir,
        r#"{
            "payoff": {"builtin": "lienard", "mu": 1.0, "alpha": 0.0},
            "initial": [{"x": [0.1], "y": [0.0]}],
            "integrator": {"t_max": 150.0},
            "sweep": {"parameters": [
                {"name": "alpha",
                 "values": [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0]}
            ]},
            "seed": 4
        }"#,
    );
    let out = gda(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let alpha: f64 = fields[0].parse().unwrap();
        let verdict = fields[4];
        if alpha < 1.0 {
            assert_eq!(verdict, "BoundedNonConvergent", "alpha={alpha}: {line}");
        } else if alpha > 1.0 {
            assert_eq!(verdict, "Converged", "alpha={alpha}: {line}");
        } // the borderline alpha = 1 cell may land either way
    }
}

#[test]
fn identical_configs_produce_byte_identical_outputs() {
    let config = r#"{
        "payoff": {"expression": "x1^2/2 - y1^2/2 + sin(x1*y1)", "m": 1, "n": 1},
        "initial": [{"x": [0.4], "y": [0.2]}],
        "integrator": {"t_max": 10.0},
        "certify": {"samples": 200},
        "seed": 1234
    }"#;
    let mut outputs: Vec<Vec<u8>> = Vec::new();
    for run in 0..2 {
        let dir = scratch_dir(&format!("determinism-{run}"));
        let cfg = write_config(&dir, config);
        for cmd in ["certify", "classify", "simulate"] {
            let out = gda(&[
                cmd,
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                dir.to_str().unwrap(),
                "--jobs",
                if run == 0 { "1" } else { "4" },
            ]);
            assert!(
                out.status.success(),
                "{}",
                String::from_utf8_lossy(&out.stderr)
            );
        }
        let mut blob = Vec::new();
        for artifact in [
            "certificate.json",
            "classifications.json",
            "trajectory_0.csv",
            "audit_0.json",
        ] {
            blob.extend(fs::read(dir.join(artifact)).unwrap());
        }
        outputs.push(blob);
    }
    assert_eq!(outputs[0], outputs[1], "outputs differ between runs");

    // the sweep is the most parallel path; its CSV must not depend on
    // the thread count either
    let sweep_config = r#"{
        "payoff": {"builtin": "quadratic", "a": 1.0, "b": 0.0, "c": -1.0},
        "initial": [{"x": [1.0], "y": [1.0]}],
        "integrator": {"t_max": 30.0},
        "sweep": {"parameters": [
            {"name": "a", "values": [-1.0, 0.0, 1.0, 2.0]},
            {"name": "b", "values": [-1.0, 1.0]},
            {"name": "c", "values": [-1.0, 1.0]}
        ]},
        "seed": 77
    }"#;
    let mut sweeps: Vec<Vec<u8>> = Vec::new();
    for (run, jobs) in [(0, "1"), (1, "8")] {
        let dir = scratch_dir(&format!("sweep-determinism-{run}"));
        let cfg = write_config(&dir, sweep_config);
        let out = gda(&[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
            "--jobs",
            jobs,
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        sweeps.push(fs::read(dir.join("sweep.csv")).unwrap());
    }
    assert_eq!(sweeps[0], sweeps[1], "sweep outputs depend on thread count");
}

#[test]
fn gda_seed_env_overrides_config() {
    let dir = scratch_dir("seed-env");
    let cfg = write_config(
        &dir,
        r#"{
            "payoff": {"builtin": "quadratic", "a": 2.0, "b": 2.0, "c": 1.0},
            "seed": 1
        }"#,
    );
    let ok = Command::new(env!("CARGO_BIN_EXE_gda"))
        .args([
            "certify",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
        ])
        .env("GDA_SEED", "42")
        .output()
        .unwrap();
    assert!(ok.status.success());

    let bad = Command::new(env!("CARGO_BIN_EXE_gda"))
        .args([
            "certify",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
        ])
        .env("GDA_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn exit_codes_and_no_partial_outputs() {
    let dir = scratch_dir("exit-codes");

    // missing required field: validation failure, exit 2, nothing written
    let out_dir = dir.join("validation-out");
    let cfg = write_config(
        &dir,
        r#"{"payoff": {"builtin": "quadratic", "a": 1.0, "b": 0.0}}"#,
    );
    let out = gda(&[
        "certify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("payoff.c"));
    assert!(!out_dir.exists(), "validation failure must not write files");

    // unreadable config path: also a config failure
    let out = gda(&["certify", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(2));

    // simulate without start states: validation failure at runtime gate
    let cfg = write_config(
        &dir,
        r#"{"payoff": {"builtin": "quadratic", "a": 1.0, "b": 0.0, "c": -1.0}}"#,
    );
    let out = gda(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));

    // an initial state outside the expression domain is a runtime
    // failure, not a crash
    let cfg = write_config(
        &dir,
        r#"{"payoff": {"expression": "log(x1)*y1", "m": 1, "n": 1},
            "initial": [{"x": [-1.0], "y": [0.0]}]}"#,
    );
    let out = gda(&[
        "classify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not evaluable"));

    // success path exits 0
    let cfg = write_config(&dir, CONVERGING_QUADRATIC);
    let out = gda(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
}
