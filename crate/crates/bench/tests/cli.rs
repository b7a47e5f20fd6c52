mod common;

use std::path::Path;

use common::{benchmark_config, benchmark_json, cli, read_csv, write_config};
use robust_policy::expert::{generate_demos, solve_discounted_lqr};
use robust_policy_bench::commands::cmd_track;
use robust_policy_bench::demos::read_demos;
use robust_policy_bench::sweep::{run_sweep, SWEEP_HEADER};
use robust_policy_bench::Experiment;
use serde_json::{json, Value};

fn small_config(dir: &Path, alpha: Value) -> Value {
    let mut cfg = benchmark_json();
    cfg["demos"]["num_demos"] = json!(10);
    cfg["demos"]["horizon"] = json!(10);
    cfg["eval"]["num_x0"] = json!(8);
    cfg["certify"]["tube_trials"] = json!(5);
    cfg["fit"]["alpha_grid"] = alpha;
    cfg["output_dir"] = json!(dir.join("out").display().to_string());
    cfg
}

fn run_ok(args: &[&str]) -> std::process::Output {
    let out = cli(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn demo_gen_writes_expected_shape() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), json!([0.5]));
    cfg["demos"]["num_demos"] = json!(2);
    cfg["demos"]["horizon"] = json!(3);
    let path = write_config(dir.path(), "c.json", &cfg);
    run_ok(&["demo-gen", "--config", path.to_str().unwrap()]);

    let demos = dir.path().join("out/demos");
    let manifest = read_json(&demos.join("manifest.json"));
    assert_eq!(manifest["num_demos"], 2);
    assert_eq!(manifest["horizon"], 3);
    assert_eq!(manifest["n"], 4);
    assert_eq!(manifest["m"], 2);
    assert_eq!(manifest["files"], json!(["demo_000.csv", "demo_001.csv"]));
    assert_eq!(manifest["gain_sha256"].as_str().unwrap().len(), 64);
    for f in ["demo_000.csv", "demo_001.csv"] {
        let (header, rows) = read_csv(&std::fs::read(demos.join(f)).unwrap());
        assert_eq!(header, ["t", "x_0", "x_1", "x_2", "x_3", "u_0", "u_1"]);
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r[1..5].iter().all(|c| !c.is_empty())));
        assert_eq!(rows.iter().filter(|r| r[5..].iter().all(|c| !c.is_empty())).count(), 3);
        assert!(rows[3][5..].iter().all(String::is_empty));
    }
}

#[test]
fn demo_gen_is_byte_identical_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), json!([0.5]));
    let path = write_config(dir.path(), "c.json", &cfg);
    let demos = dir.path().join("out/demos");
    let snapshot = || {
        let mut files: Vec<_> = std::fs::read_dir(&demos)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        files.into_iter().map(|p| std::fs::read(p).unwrap()).collect::<Vec<_>>()
    };
    run_ok(&["demo-gen", "--config", path.to_str().unwrap()]);
    let first = snapshot();
    run_ok(&["demo-gen", "--config", path.to_str().unwrap()]);
    assert_eq!(first, snapshot());

    let ecfg: robust_policy_bench::ExperimentConfig = serde_json::from_value(cfg).unwrap();
    let ex = Experiment::resolve(&ecfg).unwrap();
    let expert = solve_discounted_lqr(&ex.sys, &ex.cost).unwrap().policy;
    let generated = generate_demos(&ex.sys, &expert, 10, 10, ex.sampler.clone(), ex.demo_seed).unwrap();
    let loaded = read_demos(&demos, ex.sampler.clone(), &expert).unwrap();
    for (g, l) in generated.trajectories.iter().zip(&loaded.trajectories) {
        assert_eq!(g.states, l.states);
        assert_eq!(g.inputs, l.inputs);
    }
}

#[test]
fn sweep_reuses_demo_directory() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), json!([0.4, 1.5]));
    let path = write_config(dir.path(), "c.json", &cfg);
    run_ok(&["demo-gen", "--config", path.to_str().unwrap()]);
    let inline: robust_policy_bench::ExperimentConfig = serde_json::from_value(cfg.clone()).unwrap();
    cfg["demos"]["path"] = json!(dir.path().join("out/demos").display().to_string());
    let loaded: robust_policy_bench::ExperimentConfig = serde_json::from_value(cfg).unwrap();
    assert_eq!(
        run_sweep(&inline, false).unwrap().csv,
        run_sweep(&loaded, false).unwrap().csv
    );
}

#[test]
fn demo_directory_from_other_expert_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), json!([0.5]));
    let path = write_config(dir.path(), "c.json", &cfg);
    run_ok(&["demo-gen", "--config", path.to_str().unwrap()]);
    cfg["demos"]["path"] = json!(dir.path().join("out/demos").display().to_string());
    cfg["cost"]["r_scale"] = json!(0.02);
    let path = write_config(dir.path(), "d.json", &cfg);
    let out = cli(&["fit", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("different expert gain"));
}

#[test]
fn serial_and_parallel_sweeps_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = benchmark_config(dir.path());
    let par = run_sweep(&cfg, true).unwrap();
    let ser = run_sweep(&cfg, false).unwrap();
    assert_eq!(par.csv, ser.csv);
    assert_eq!(par.report, ser.report);
}

#[test]
fn sweep_outputs_have_documented_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), json!({"start": 0.5, "stop": 1.5, "step": 0.5}));
    let path = write_config(dir.path(), "c.json", &cfg);
    run_ok(&["sweep", "--config", path.to_str().unwrap(), "--serial"]);

    let (header, rows) = read_csv(&std::fs::read(dir.path().join("out/sweep.csv")).unwrap());
    assert_eq!(header, SWEEP_HEADER);
    let alphas: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(alphas, ["0.5", "1.0", "1.5"]);

    let report = read_json(&dir.path().join("out/report.json"));
    for key in ["tool", "version", "command", "config", "resolved", "expert", "rows"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert_eq!(report["tool"], "robust-policy");
    assert_eq!(report["command"], "sweep");
    assert_eq!(report["resolved"]["radius"], 1.0);
    let row = &report["rows"][0];
    for key in ["alpha", "status", "fit", "eps", "regret", "robust_regret", "certified", "certificate"] {
        assert!(row.get(key).is_some(), "missing row key {key}");
    }
    let cert = &row["certificate"];
    for key in [
        "constants",
        "expert_constants",
        "stability",
        "l_v_star",
        "l_v_hat",
        "regret_bound",
        "robustness_bound",
        "envelope",
        "tube",
        "tube_radius",
        "preconditions",
    ] {
        assert!(cert.get(key).is_some(), "missing certificate key {key}");
    }
    assert_eq!(cert["envelope"]["certified"], false);
    assert_eq!(cert["tube"]["certified"], false);
}

#[test]
fn single_alpha_realizable_row_has_zero_regret_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), json!([2.0]));
    let ecfg: robust_policy_bench::ExperimentConfig = serde_json::from_value(cfg).unwrap();
    let out = run_sweep(&ecfg, false).unwrap();
    let row = out.rows[0].outcome.as_ref().unwrap();
    assert!(row.eps <= 1e-12, "eps = {}", row.eps);
    assert!(row.cert.regret_bound.value().unwrap() <= 1e-10);
}

#[test]
fn failing_row_is_recorded_and_sweep_continues() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "system": { "a": [[2.0]], "b": [[1.0]] },
        "cost": { "gamma": 0.9 },
        "demos": { "num_demos": 5, "horizon": 5, "sampler": { "kind": "uniform_ball", "radius": 1.0 }, "seed": 1 },
        "fit": { "alpha_grid": [0.0, 1.9] },
        "eval": { "zeta": 0.1, "num_x0": 4, "seed": 1 },
        "output_dir": dir.path().display().to_string()
    });
    let ecfg: robust_policy_bench::ExperimentConfig = serde_json::from_value(cfg).unwrap();
    let out = run_sweep(&ecfg, true).unwrap();
    let (_, rows) = read_csv(&out.csv);
    assert_eq!(rows.len(), 2);
    // K̂ = 0 leaves x_{t+1} = 2x_t, and 0.9·2² > 1 makes its value diverge
    assert!(rows[0][8].starts_with("error:"), "{:?}", rows[0]);
    assert!(rows[0][1..8].iter().all(String::is_empty));
    assert!(out.rows[1].outcome.is_ok(), "{:?}", rows[1]);
    let report: Value = serde_json::from_slice(&out.report).unwrap();
    assert_eq!(report["rows"][0]["status"], "error");
    assert_eq!(report["rows"][1]["status"], "ok");
}

#[test]
fn certify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    let cfg = small_config(dir.path(), json!([0.3]));
    let path = write_config(dir.path(), "bench.json", &cfg);
    let out = cli(&["certify", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("out/certificate.json"));
    assert_eq!(report["all_requested_certified"], false);
    assert_eq!(report["certificate"]["regret_bound"]["certified"], true);

    let mut only_bounds = cfg.clone();
    only_bounds["certify"]["require"] = json!(["regret", "robustness"]);
    let path = write_config(dir.path(), "bounds.json", &only_bounds);
    let out = cli(&["certify", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let out = cli(&["certify", "--config", path.to_str().unwrap(), "--zeta", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let report = read_json(&dir.path().join("out/certificate.json"));
    assert_eq!(report["certificate"]["robustness_bound"]["value"], 0.0);

    let unstable = json!({
        "system": { "a": [[2.0]], "b": [[0.0]] },
        "cost": { "gamma": 0.9 },
        "demos": { "seed": 1 },
        "fit": { "alpha_grid": [0.5] },
        "eval": { "zeta": 0.1, "seed": 1 },
        "output_dir": dir.path().join("unstable").display().to_string()
    });
    let path = write_config(dir.path(), "unstable.json", &unstable);
    let out = cli(&["certify", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = cli(&["certify", "--config", path.to_str().unwrap(), "--alpha", "0.1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn certify_needs_single_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "c.json", &small_config(dir.path(), json!([0.3, 0.6])));
    let out = cli(&["certify", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let out = cli(&["certify", "--config", path.to_str().unwrap(), "--alpha", "0.6", "--zeta", "0"]);
    assert_ne!(out.status.code(), Some(1));
}

#[test]
fn invalid_configs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let base = small_config(dir.path(), json!([0.5]));
    let mut cases = Vec::new();
    let mut c = base.clone();
    c["eval"]["bogus"] = json!(1);
    cases.push(("unknown eval key", c));
    let mut c = base.clone();
    c["demos"]["sampler"]["bogus"] = json!(1);
    cases.push(("unknown sampler key", c));
    let mut c = base.clone();
    c["demos"]["seed"] = Value::Null;
    cases.push(("missing demo seed", c));
    let mut c = base.clone();
    c["fit"]["alpha_grid"] = json!([0.5, 0.5]);
    cases.push(("repeated alpha", c));
    let mut c = base.clone();
    c["eval"]["zeta"] = json!(-1.0);
    cases.push(("negative zeta", c));
    for (name, cfg) in cases {
        let path = write_config(dir.path(), "bad.json", &cfg);
        let out = cli(&["fit", "--config", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(1), "{name}");
    }
    let out = cli(&["fit", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn fit_writes_gain() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "c.json", &small_config(dir.path(), json!([0.5])));
    run_ok(&["fit", "--config", path.to_str().unwrap()]);
    let fit = read_json(&dir.path().join("out/fit.json"));
    let lip = fit["fit"]["lip_k_hat"].as_f64().unwrap();
    assert!(lip <= 0.5 + 1e-9);
    assert_eq!(fit["fit"]["gain"].as_array().unwrap().len(), 2);
}

fn track_cfg(dir: &Path, alpha: f64, zeta: f64) -> robust_policy_bench::ExperimentConfig {
    let mut cfg = benchmark_config(dir);
    cfg.apply(&robust_policy_bench::Overrides {
        alpha: Some(alpha),
        zeta: Some(zeta),
        ..Default::default()
    });
    cfg
}

#[test]
fn track_nominal_learned_overlaps_expert() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmd_track(&track_cfg(dir.path(), 2.0, 0.0)).unwrap();
    assert!(out.summary.max_gap_learned_vs_expert <= 1e-6);
    let (header, rows) = read_csv(&out.csv);
    assert_eq!(header.len(), 9);
    assert_eq!(rows.len(), out.summary.steps + 1);
    assert!(dir.path().join("track.csv").exists() && dir.path().join("track_summary.json").exists());
}

#[test]
fn track_low_lipschitz_policy_is_more_robust() {
    let dir = tempfile::tempdir().unwrap();
    let low = cmd_track(&track_cfg(dir.path(), 0.3, 1.25)).unwrap().summary;
    let high = cmd_track(&track_cfg(dir.path(), 2.0, 1.25)).unwrap().summary;
    assert!(
        low.mean_error_perturbed < high.mean_error_perturbed,
        "alpha=0.3: {}, alpha=2: {}",
        low.mean_error_perturbed,
        high.mean_error_perturbed
    );
}

#[test]
fn track_zero_reference_stays_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = track_cfg(dir.path(), 0.5, 0.0);
    cfg.track.width = 0.0;
    cfg.track.height = 0.0;
    cfg.track.initial_error = vec![0.0; 4];
    let out = cmd_track(&cfg).unwrap();
    let (_, rows) = read_csv(&out.csv);
    assert!(rows.iter().all(|r| r[1..].iter().all(|c| c.parse::<f64>().unwrap() == 0.0)));
}
