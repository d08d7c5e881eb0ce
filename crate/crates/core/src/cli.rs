//! `pemwe` command line: simulate, generate-data, train, evaluate and the
//! one-shot reproduce pipeline.
//!
//! Exit codes: 0 success, 2 configuration or missing input, 3 numerical
//! failure, 4 I/O.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::constants::K5_SCALE;
use crate::dataset::{generate_dataset, load_dataset, meta_path, save_dataset, sha256_hex, Dataset};
use crate::error::{Error, Result};
use crate::network::NetworkParameters;
use crate::simulator::{integrate_trajectory, Trajectory};
use crate::training::{evaluate, train_with_observer, Metrics, PhysicsContext, Rmse};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.json";

/// Gates reported by `reproduce`.
pub const K5_RECOVERY_RANGE: (f64, f64) = (0.90, 1.10);
pub const MIN_BASELINE_RATIO: f64 = 5.0;
pub const MAX_TEST_RMSE_V: f64 = 0.02;
pub const MAX_TEST_RMSE_MEM: f64 = 5e-4;

#[derive(Debug, Parser)]
#[command(name = "pemwe", version, about = "PEM electrolyzer membrane degradation: simulation and physics-informed k5 recovery")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration file; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides both the noise seed and the initialization seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Membrane-attack rate constant used for simulation, m³/(mol s).
    #[arg(long)]
    pub k5: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the ground-truth trajectory.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Sample the noisy train / clean test dataset from a trajectory.
    GenerateData {
        #[command(flatten)]
        common: Common,
        /// Trajectory CSV; defaults to `<out>/trajectory.csv`.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Train the network (and k5_hat) on a dataset.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset CSV; defaults to `<out>/dataset.csv`.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Train the baseline network without physics residuals.
        #[arg(long)]
        no_physics: bool,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Compute RMSEs of a trained checkpoint.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Checkpoint JSON; defaults to `<out>/model.json`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Dataset CSV; defaults to `<out>/dataset.csv`.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Run the full pipeline and write a comparison report.
    Reproduce {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epochs: Option<usize>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub tool_version: String,
    pub config_hash: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub noise_seed: u64,
    pub init_seed: u64,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
}

/// Append-only log of the runs that wrote into one directory.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RunManifest {
    pub runs: Vec<RunRecord>,
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn file_record(path: &Path) -> Result<FileRecord> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(FileRecord {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

fn require(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::MissingInput { path: path.to_path_buf() })
    }
}

/// Appends a run to `<dir>/manifest.json`.
pub fn append_manifest(
    dir: &Path,
    command: &str,
    config: &RunConfig,
    started: u128,
    inputs: &[&Path],
    outputs: &[&Path],
) -> Result<()> {
    let path = dir.join(MANIFEST_FILE);
    let mut manifest = if path.is_file() {
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.clone(),
            line: e.line() as u64,
            message: e.to_string(),
        })?
    } else {
        RunManifest::default()
    };
    manifest.runs.push(RunRecord {
        command: command.into(),
        tool_version: TOOL_VERSION.into(),
        config_hash: config.hash(),
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
        noise_seed: config.pipeline.seed,
        init_seed: config.training.init_seed,
        inputs: inputs.iter().map(|p| file_record(p)).collect::<Result<_>>()?,
        outputs: outputs.iter().map(|p| file_record(p)).collect::<Result<_>>()?,
    });
    write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n")
}

/// Configuration after applying file, then flags.
pub fn resolve_config(common: &Common) -> Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => {
            require(path)?;
            RunConfig::load(path)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config = config.with_seed(seed);
    }
    Ok(config)
}

/// Simulation rate constant: `--k5` when given (zero allowed), else `k5_true`.
fn simulation_k5(common: &Common, config: &RunConfig) -> Result<f64> {
    match common.k5 {
        Some(k5) if k5.is_finite() && k5 >= 0.0 => Ok(k5),
        Some(k5) => Err(Error::config("--k5", format!("must be finite and >= 0, got {k5}"))),
        None => Ok(config.physics.k5_true),
    }
}

pub fn simulate(config: &RunConfig, k5: f64, out: &Path) -> Result<Trajectory> {
    let started = now_ms();
    create_dir(out)?;
    let traj = integrate_trajectory(&config.physics, &config.conditions, k5, config.pipeline.n_steps)?;
    let (tp, dp) = (out.join("trajectory.csv"), out.join("diagnostics.csv"));
    write(&tp, traj.to_csv())?;
    write(&dp, traj.diagnostics_csv())?;
    append_manifest(out, "simulate", config, started, &[], &[&tp, &dp])?;
    Ok(traj)
}

pub fn generate_data(config: &RunConfig, trajectory: &Path, out: &Path) -> Result<Dataset> {
    let started = now_ms();
    require(trajectory)?;
    let traj = Trajectory::load_csv(trajectory)?;
    let p = &config.pipeline;
    let mut ds = generate_dataset(&traj, p.n_train, p.n_test, p.train_fraction, p.seed)?;
    ds.config_hash = config.hash();
    create_dir(out)?;
    let path = out.join("dataset.csv");
    save_dataset(&ds, &path)?;
    append_manifest(out, "generate-data", config, started, &[trajectory], &[&path, &meta_path(&path)])?;
    Ok(ds)
}

pub fn train(config: &RunConfig, dataset: &Path, out: &Path) -> Result<(NetworkParameters, Metrics)> {
    let started = now_ms();
    require(dataset)?;
    let ds = load_dataset(dataset)?;
    let ctx = PhysicsContext::new(&config.physics, &config.conditions, config.training.v_ref)?;
    create_dir(out)?;
    let every = config.training.checkpoint_every;
    let ck_dir = out.join("checkpoints");
    if every > 0 {
        create_dir(&ck_dir)?;
    }
    let (net, metrics) = train_with_observer(&ctx, &ds, &config.training, |record, net| {
        if every > 0 && record.epoch % every == 0 {
            net.save(&ck_dir.join(format!("epoch_{:06}.json", record.epoch)), record.epoch)?;
        }
        Ok(())
    })?;
    let (mp, hp) = (out.join("model.json"), out.join("metrics.csv"));
    net.save(&mp, config.training.max_epochs)?;
    metrics.write_history(&hp)?;
    append_manifest(out, "train", config, started, &[dataset], &[&mp, &hp])?;
    Ok((net, metrics))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvaluationSummary {
    #[serde(flatten)]
    pub rmse: Rmse,
    pub physics_enabled: bool,
    pub config_hash: String,
}

pub fn evaluate_checkpoint(
    config: &RunConfig,
    checkpoint: &Path,
    dataset: &Path,
    out: &Path,
) -> Result<EvaluationSummary> {
    let started = now_ms();
    require(checkpoint)?;
    require(dataset)?;
    let net = NetworkParameters::load(checkpoint)?;
    let ds = load_dataset(dataset)?;
    let summary = EvaluationSummary {
        rmse: evaluate(&net, &ds)?,
        physics_enabled: config.training.physics_enabled,
        config_hash: config.hash(),
    };
    create_dir(out)?;
    let path = out.join("evaluation.json");
    write(&path, serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n")?;
    append_manifest(out, "evaluate", config, started, &[checkpoint, dataset], &[&path])?;
    Ok(summary)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriterionResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReproduceReport {
    pub pinn: Option<Rmse>,
    pub ann: Option<Rmse>,
    pub criteria: Vec<CriterionResult>,
    /// Stage that failed, if any.
    pub failed_stage: Option<String>,
    pub error: Option<String>,
}

impl ReproduceReport {
    pub fn passed(&self) -> bool {
        self.failed_stage.is_none() && self.criteria.iter().all(|c| c.passed)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("# PINN vs ANN\n\n");
        if let (Some(p), Some(a)) = (&self.pinn, &self.ann) {
            s.push_str("| Metric | PINN | ANN |\n|---|---|---|\n");
            let rows = [
                ("Training RMSE (Voltage) [V]", p.train_v, a.train_v),
                ("Testing RMSE (Voltage) [V]", p.test_v, a.test_v),
                ("Training RMSE (Membrane) [cm]", p.rmse_train_mem, a.rmse_train_mem),
                ("Testing RMSE (Membrane) [cm]", p.rmse_test_mem, a.rmse_test_mem),
                ("k5_hat_final", p.k5_hat_final, a.k5_hat_final),
            ];
            for (name, x, y) in rows {
                s.push_str(&format!("| {name} | {x:.6e} | {y:.6e} |\n"));
            }
            s.push('\n');
        }
        if let Some(stage) = &self.failed_stage {
            s.push_str(&format!(
                "FAIL stage `{stage}`: {}\n",
                self.error.as_deref().unwrap_or("unknown error")
            ));
        }
        for c in &self.criteria {
            let status = if c.passed { "PASS" } else { "FAIL" };
            s.push_str(&format!("{status} {}: {}\n", c.name, c.detail));
        }
        s
    }
}

/// The three gates evaluated on a finished PINN / ANN pair; `k5_expected`
/// is the normalized rate constant the data were simulated with.
pub fn judge(pinn: &Rmse, ann: &Rmse, k5_expected: f64) -> Vec<CriterionResult> {
    let k5 = pinn.k5_hat_final / k5_expected;
    let ratio_v = ann.test_v / pinn.test_v;
    let ratio_m = ann.rmse_test_mem / pinn.rmse_test_mem;
    vec![
        CriterionResult {
            name: "k5 recovery".into(),
            passed: (K5_RECOVERY_RANGE.0..=K5_RECOVERY_RANGE.1).contains(&k5),
            detail: format!(
                "k5_hat_final = {:.4}, {k5:.4} of the simulated value; required in [{}, {}]",
                pinn.k5_hat_final, K5_RECOVERY_RANGE.0, K5_RECOVERY_RANGE.1
            ),
        },
        CriterionResult {
            name: "physics vs baseline".into(),
            passed: ratio_v > MIN_BASELINE_RATIO && ratio_m > MIN_BASELINE_RATIO,
            detail: format!(
                "ANN/PINN test RMSE ratio: voltage {ratio_v:.2}, membrane {ratio_m:.2}; required > {MIN_BASELINE_RATIO}"
            ),
        },
        CriterionResult {
            name: "magnitude".into(),
            passed: pinn.test_v <= MAX_TEST_RMSE_V && pinn.rmse_test_mem <= MAX_TEST_RMSE_MEM,
            detail: format!(
                "PINN test RMSE {:.3e} V (<= {MAX_TEST_RMSE_V}), {:.3e} cm (<= {MAX_TEST_RMSE_MEM})",
                pinn.test_v, pinn.rmse_test_mem
            ),
        },
    ]
}

fn stage<T>(name: &str, failed: &mut Option<(String, Error)>, r: Result<T>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            *failed = Some((name.into(), e));
            None
        }
    }
}

/// Runs simulate, generate-data, PINN and baseline training and both
/// evaluations under `out`, writing `report.md` and `report.json`. A stage
/// failure is recorded in the report and returned as the error.
pub fn reproduce(config: Result<RunConfig>, k5: Option<f64>, out: &Path) -> Result<ReproduceReport> {
    let mut failed = None;
    let mut pinn = None;
    let mut ann = None;
    let mut k5_expected = 1.0;
    if let Some(config) = stage("config", &mut failed, config) {
        let k5 = k5.unwrap_or(config.physics.k5_true);
        k5_expected = k5 / K5_SCALE;
        let data_dir = out.join("data");
        let dataset = data_dir.join("dataset.csv");
        let ann_config = {
            let mut c = config.clone();
            c.training.physics_enabled = false;
            c
        };
        let steps: [(&str, &RunConfig, &str); 2] = [("train-pinn", &config, "pinn"), ("train-ann", &ann_config, "ann")];
        let ok = stage("simulate", &mut failed, simulate(&config, k5, &data_dir)).is_some()
            && stage(
                "generate-data",
                &mut failed,
                generate_data(&config, &data_dir.join("trajectory.csv"), &data_dir),
            )
            .is_some();
        if ok {
            let mut results = Vec::new();
            for (name, cfg, sub) in steps {
                let dir = out.join(sub);
                let Some(_) = stage(name, &mut failed, train(cfg, &dataset, &dir)) else {
                    break;
                };
                let eval_name = format!("evaluate-{sub}");
                let Some(summary) = stage(
                    &eval_name,
                    &mut failed,
                    evaluate_checkpoint(cfg, &dir.join("model.json"), &dataset, &dir),
                ) else {
                    break;
                };
                results.push(summary.rmse);
            }
            if results.len() == 2 {
                pinn = Some(results[0]);
                ann = Some(results[1]);
            }
        }
    }
    let criteria = match (&pinn, &ann) {
        (Some(p), Some(a)) => judge(p, a, k5_expected),
        _ => Vec::new(),
    };
    let report = ReproduceReport {
        pinn,
        ann,
        criteria,
        failed_stage: failed.as_ref().map(|(s, _)| s.clone()),
        error: failed.as_ref().map(|(_, e)| e.to_string()),
    };
    create_dir(out)?;
    write(&out.join("report.md"), report.to_markdown())?;
    write(
        &out.join("report.json"),
        serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
    )?;
    match failed {
        Some((_, e)) => Err(e),
        None => Ok(report),
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common } => {
            let config = resolve_config(&common)?;
            let k5 = simulation_k5(&common, &config)?;
            let traj = simulate(&config, k5, &common.out)?;
            println!(
                "simulated {} steps: V {:.6} -> {:.6} V, t_mem {:.6} -> {:.6} cm",
                traj.len() - 1,
                traj.voltages[0],
                traj.voltages[traj.len() - 1],
                traj.thicknesses[0],
                traj.thicknesses[traj.len() - 1]
            );
        }
        Command::GenerateData { common, trajectory } => {
            let config = resolve_config(&common)?;
            let path = trajectory.unwrap_or_else(|| common.out.join("trajectory.csv"));
            let ds = generate_data(&config, &path, &common.out)?;
            println!(
                "wrote {} train / {} test points (sigma_V = {:.6e} V, sigma_mem = {:.6e} cm)",
                ds.train.len(),
                ds.test.len(),
                ds.noise_sigma_v,
                ds.noise_sigma_mem
            );
        }
        Command::Train {
            common,
            dataset,
            no_physics,
            epochs,
        } => {
            let mut config = resolve_config(&common)?;
            if no_physics {
                config.training.physics_enabled = false;
            }
            if let Some(e) = epochs {
                config.training.max_epochs = e;
            }
            config.validate()?;
            let path = dataset.unwrap_or_else(|| common.out.join("dataset.csv"));
            let (net, metrics) = train(&config, &path, &common.out)?;
            println!(
                "trained {} epochs: k5_hat = {:.6} (k5 = {:.6e} m3/(mol s)), test RMSE {:.3e} V / {:.3e} cm",
                config.training.max_epochs,
                net.k5_hat(),
                net.k5_hat() * K5_SCALE,
                metrics.rmse.test_v,
                metrics.rmse.rmse_test_mem
            );
        }
        Command::Evaluate {
            common,
            checkpoint,
            dataset,
        } => {
            let config = resolve_config(&common)?;
            let ck = checkpoint.unwrap_or_else(|| common.out.join("model.json"));
            let ds = dataset.unwrap_or_else(|| common.out.join("dataset.csv"));
            let summary = evaluate_checkpoint(&config, &ck, &ds, &common.out)?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
        }
        Command::Reproduce { common, epochs } => {
            let config = resolve_config(&common).and_then(|mut c| {
                if let Some(e) = epochs {
                    c.training.max_epochs = e;
                    c.validate()?;
                }
                Ok(c)
            });
            let k5 = match &config {
                Ok(c) => Some(simulation_k5(&common, c)?),
                Err(_) => None,
            };
            let report = reproduce(config, k5, &common.out);
            match report {
                Ok(r) => print!("{}", r.to_markdown()),
                Err(e) => {
                    let text = fs::read_to_string(common.out.join("report.md")).unwrap_or_default();
                    print!("{text}");
                    return Err(e);
                }
            }
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
