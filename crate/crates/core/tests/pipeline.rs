use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pemwe_core::cli::RunManifest;
use pemwe_core::config::RunConfig;
use pemwe_core::dataset::{generate_dataset, load_dataset};
use pemwe_core::simulator::{integrate_trajectory, Trajectory};

fn golden_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/dataset.csv")
}

fn pemwe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pemwe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn golden_dataset_is_reproduced_by_the_default_pipeline() {
    let golden = load_dataset(&golden_path()).unwrap();
    let c = RunConfig::default();
    let traj = integrate_trajectory(&c.physics, &c.conditions, c.physics.k5_true, c.pipeline.n_steps).unwrap();
    let p = &c.pipeline;
    let ds = generate_dataset(&traj, p.n_train, p.n_test, p.train_fraction, p.seed).unwrap();
    assert_eq!(golden.seed, 42);
    assert_eq!(golden.config_hash, c.hash());
    assert_eq!(ds.train.len(), golden.train.len());
    assert_eq!(ds.test.len(), golden.test.len());
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300);
    for (a, b) in ds.train.iter().chain(&ds.test).zip(golden.train.iter().chain(&golden.test)) {
        assert!(close(a.t, b.t) && close(a.voltage, b.voltage) && close(a.thickness, b.thickness), "{a:?} vs {b:?}");
    }
    assert!(close(ds.noise_sigma_v, golden.noise_sigma_v));
    assert!(close(ds.noise_sigma_mem, golden.noise_sigma_mem));
}

#[test]
fn tampered_golden_copy_fails_checksum() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("dataset.csv");
    let text = fs::read_to_string(golden_path()).unwrap();
    fs::write(&csv, text.replacen("train,0,", "train,0.0,", 1)).unwrap();
    fs::copy(golden_path().with_file_name("dataset.meta.json"), dir.path().join("dataset.meta.json")).unwrap();
    let err = load_dataset(&csv).unwrap_err();
    assert!(err.to_string().contains("checksum"), "{err}");
    assert_eq!(err.exit_code(), 4);
}

#[test]
fn staged_commands_chain_and_record_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = out.to_str().unwrap();

    let r = pemwe(&["simulate", "--out", o]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let traj = Trajectory::load_csv(&out.join("trajectory.csv")).unwrap();
    traj.check_invariants(true).unwrap();
    assert!(out.join("diagnostics.csv").is_file());

    let r = pemwe(&["generate-data", "--out", o]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let golden = fs::read(golden_path()).unwrap();
    assert_eq!(fs::read(out.join("dataset.csv")).unwrap(), golden);

    let r = pemwe(&["train", "--out", o, "--epochs", "12", "--no-physics"]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("epoch,total,data,physics_v,physics_mem,ic,k5_hat\n"));
    assert_eq!(metrics.lines().count(), 13);
    assert!(metrics.lines().skip(1).all(|l| l.ends_with(",0")), "baseline keeps k5_hat at 0");

    let r = pemwe(&["evaluate", "--out", o]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("evaluation.json")).unwrap()).unwrap();
    for key in ["rmse_train_V", "rmse_test_V", "rmse_train_mem", "rmse_test_mem", "k5_hat_final"] {
        assert!(summary[key].as_f64().unwrap() >= 0.0, "{key}");
    }

    let m = manifest(&out);
    let commands: Vec<&str> = m.runs.iter().map(|r| r.command.as_str()).collect();
    assert_eq!(commands, ["simulate", "generate-data", "train", "evaluate"]);
    let hash = RunConfig::default().hash();
    assert!(m.runs.iter().all(|r| r.noise_seed == 42));
    assert_eq!(m.runs[0].config_hash, hash);
    assert_eq!(m.runs[1].config_hash, hash);
    // overrides are part of the recorded configuration
    let mut trained = RunConfig::default();
    trained.training.physics_enabled = false;
    trained.training.max_epochs = 12;
    assert_eq!(m.runs[2].config_hash, trained.hash());
    // the dataset the train run consumed is the one generate-data wrote
    assert_eq!(m.runs[2].inputs[0].sha256, m.runs[1].outputs[0].sha256);
}

#[test]
fn rerunning_simulate_reproduces_recorded_checksums() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    for _ in 0..2 {
        assert_eq!(code(&pemwe(&["simulate", "--out", o, "--seed", "5"])), 0);
    }
    let m = manifest(dir.path());
    assert_eq!(m.runs.len(), 2);
    let sums = |k: usize| m.runs[k].outputs.iter().map(|f| f.sha256.clone()).collect::<Vec<_>>();
    assert_eq!(sums(0), sums(1));
    assert_eq!(m.runs[0].init_seed, 5);
}

#[test]
fn zero_attack_rate_gives_a_flat_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let r = pemwe(&["simulate", "--k5", "0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let traj = Trajectory::load_csv(&dir.path().join("trajectory.csv")).unwrap();
    assert!(traj.thicknesses.iter().all(|&t| t == 0.0175));
    assert!(traj.voltages.iter().all(|&v| v == traj.voltages[0]));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = d.to_str().unwrap();

    // missing upstream artifact: configuration class, path named
    let r = pemwe(&["train", "--out", o]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("dataset.csv"), "{}", stderr(&r));

    let bad = d.join("bad.json");
    fs::write(&bad, r#"{"k5_true": 1000.0, "lambda_tmem": -2}"#).unwrap();
    let r = pemwe(&["simulate", "--config", bad.to_str().unwrap(), "--out", o]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("lambda_tmem"));

    let unknown = d.join("unknown.json");
    fs::write(&unknown, r#"{"k_five": 1.0}"#).unwrap();
    let r = pemwe(&["simulate", "--config", unknown.to_str().unwrap(), "--out", o]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("k_five"));

    // the membrane is consumed long before t_max
    let r = pemwe(&["simulate", "--k5", "1e7", "--out", o]);
    assert_eq!(code(&r), 3, "{}", stderr(&r));

    // output directory path is occupied by a file
    let blocker = d.join("file");
    fs::write(&blocker, "x").unwrap();
    let r = pemwe(&["simulate", "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(code(&r), 4, "{}", stderr(&r));

    // malformed dataset
    let ds_dir = d.join("ds");
    fs::create_dir(&ds_dir).unwrap();
    fs::write(ds_dir.join("dataset.csv"), "split,t_hours,voltage_V,is_noisy\n").unwrap();
    fs::write(ds_dir.join("dataset.meta.json"), "{}").unwrap();
    let r = pemwe(&["evaluate", "--out", ds_dir.to_str().unwrap(), "--checkpoint", bad.to_str().unwrap()]);
    assert_eq!(code(&r), 4, "{}", stderr(&r));

    let r = pemwe(&["no-such-command"]);
    assert_eq!(code(&r), 2);
}

#[test]
fn reproduce_reports_the_failing_stage() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"lambda_V": -1.0}"#).unwrap();
    let out = dir.path().join("rep");
    let r = pemwe(&["reproduce", "--config", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&r), 2);
    let report = fs::read_to_string(out.join("report.md")).unwrap();
    assert!(report.contains("FAIL stage `config`"), "{report}");
    assert!(report.contains("lambda_V"));
}

#[test]
fn short_reproduce_writes_table_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rep");
    let r = pemwe(&["reproduce", "--epochs", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let report = fs::read_to_string(out.join("report.md")).unwrap();
    for row in [
        "Training RMSE (Voltage) [V]",
        "Testing RMSE (Voltage) [V]",
        "Training RMSE (Membrane) [cm]",
        "Testing RMSE (Membrane) [cm]",
        "k5_hat_final",
    ] {
        assert!(report.contains(row), "{row}");
    }
    // five epochs cannot recover k5
    assert!(report.contains("FAIL k5 recovery"));
    for sub in ["data", "pinn", "ann"] {
        assert!(out.join(sub).join("manifest.json").is_file());
    }
}
