//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion.
//!
//! Failing criteria are reported, not hidden; the process exits non-zero on
//! a FAIL only when `PEMWE_ACCEPTANCE_STRICT=1`. Harness errors (a crashed
//! pipeline, unreadable outputs) always exit non-zero.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::thread;
use std::time::Instant;

use pemwe_core::cli::ReproduceReport;
use pemwe_core::config::RunConfig;
use pemwe_core::constants::{OperatingConditions, PhysicsParameters};
use pemwe_core::dataset::load_dataset;
use pemwe_core::degradation::{
    radical_state, solve_peroxide, steady_state_residuals, thinning_coefficient, PeroxideCoefficients,
};
use pemwe_core::electrochem::{voltage_breakdown, voltage_coefficients};
use pemwe_core::network::PARAMETER_COUNT;
use pemwe_core::simulator::{integrate_trajectory, rk4, Trajectory};
use pemwe_core::training::{finite_difference_gradient, gradient_probe_parameters, LossProblem, PhysicsContext};
use pemwe_core::autodiff::Tape;

const K5_RANGE: (f64, f64) = (0.90, 1.10);
const MIN_RATIO: f64 = 5.0;
const MAX_RMSE_V: f64 = 0.02;
const MAX_RMSE_MEM: f64 = 5e-4;
const GRADIENT_SEEDS: u64 = 20;
const FD_STEP: f64 = 1e-4;
const GRADIENT_RTOL: f64 = 1e-5;
const GRADIENT_ATOL: f64 = 1e-10;
const MIN_ORDER: f64 = 3.8;
const EXPONENTIAL_RTOL: f64 = 1e-8;
const VOLTAGE_RESIDUAL: f64 = 1e-10;
const DECOMPOSITION_TOL: f64 = 1e-9;
const CHEMISTRY_RTOL: f64 = 1e-9;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn reproduce(out: &Path) -> Result<ReproduceReport, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_pemwe"))
        .args(["reproduce", "--out"])
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(format!("reproduce exited with {:?}: {}", status.status.code(), String::from_utf8_lossy(&status.stderr)));
    }
    let text = fs::read_to_string(out.join("report.json")).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn k5_recovery(report: &ReproduceReport, expected: f64) -> Outcome {
    let pinn = report.pinn.as_ref().expect("pinn metrics");
    let r = pinn.k5_hat_final / expected;
    outcome(
        r >= K5_RANGE.0 && r <= K5_RANGE.1,
        format!("k5_hat_final = {:.4} ({r:.4} of the simulated value), required in [{}, {}]", pinn.k5_hat_final, K5_RANGE.0, K5_RANGE.1),
    )
}

fn baseline_ratio(report: &ReproduceReport) -> Outcome {
    let (pinn, ann) = (report.pinn.as_ref().unwrap(), report.ann.as_ref().unwrap());
    let rv = ann.test_v / pinn.test_v;
    let rm = ann.rmse_test_mem / pinn.rmse_test_mem;
    outcome(
        rv > MIN_RATIO && rm > MIN_RATIO,
        format!(
            "ANN/PINN test RMSE: voltage {:.3e}/{:.3e} = {rv:.2}x, membrane {:.3e}/{:.3e} = {rm:.2}x, required > {MIN_RATIO}x on both",
            ann.test_v, pinn.test_v, ann.rmse_test_mem, pinn.rmse_test_mem
        ),
    )
}

fn magnitude(report: &ReproduceReport) -> Outcome {
    let pinn = report.pinn.as_ref().unwrap();
    outcome(
        pinn.test_v <= MAX_RMSE_V && pinn.rmse_test_mem <= MAX_RMSE_MEM,
        format!(
            "PINN test RMSE {:.3e} V (<= {MAX_RMSE_V}), {:.3e} cm (<= {MAX_RMSE_MEM})",
            pinn.test_v, pinn.rmse_test_mem
        ),
    )
}

fn gradient_oracle(config: &RunConfig) -> Outcome {
    let dataset = load_dataset(&Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/dataset.csv")).unwrap();
    let ctx = PhysicsContext::new(&config.physics, &config.conditions, config.training.v_ref).unwrap();
    let problem = LossProblem::new(&ctx, &dataset.train, config.training.n_collocation, config.training.weights()).unwrap();
    let mut tape = Tape::new();
    let mut grad = vec![0.0f64; PARAMETER_COUNT];
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for seed in 0..GRADIENT_SEEDS {
        let net = gradient_probe_parameters(seed, &ctx);
        problem.evaluate_with_gradient(&net.values, &mut tape, &mut grad).unwrap();
        let fd = finite_difference_gradient(&problem, &net.values, FD_STEP);
        for i in 0..PARAMETER_COUNT {
            let scale = fd[i].abs().max(grad[i].abs());
            let err = (grad[i] - fd[i]).abs();
            worst = worst.max(err / (GRADIENT_RTOL * scale + GRADIENT_ATOL));
            if err > GRADIENT_RTOL * scale + GRADIENT_ATOL {
                failures.push(format!("seed {seed} param {i}: {:e} vs {:e}", grad[i], fd[i]));
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{GRADIENT_SEEDS} seeds x {PARAMETER_COUNT} parameters, worst error at {:.3} of tolerance{}",
            worst,
            failures.first().map(|f| format!("; first failure {f}")).unwrap_or_default()
        ),
    )
}

fn integrator_order(params: &PhysicsParameters, cond: &OperatingConditions) -> Outcome {
    let end = |n: usize| *integrate_trajectory(params, cond, params.k5_true, n).unwrap().thicknesses.last().unwrap();
    let reference = end(1 << 16);
    let errors: Vec<f64> = [10, 20, 40, 80].iter().map(|&n| (end(n) - reference).abs()).collect();
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let order = orders.iter().cloned().fold(f64::INFINITY, f64::min);

    // c_HO frozen at its initial value gives exponential decay
    let traj = integrate_trajectory(params, cond, params.k5_true, 16).unwrap();
    let kappa = thinning_coefficient(params, params.k5_true) * traj.diagnostics[0].c_ho;
    let n = 4096;
    let ys = rk4(cond.t_mem0, cond.t_max, n, |_, y| Ok(-kappa * y)).unwrap();
    let mut exp_err = 0.0f64;
    for (k, y) in ys.iter().enumerate() {
        let t = k as f64 * cond.t_max / n as f64;
        let exact = cond.t_mem0 * (-kappa * t).exp();
        exp_err = exp_err.max((y - exact).abs() / exact);
    }
    outcome(
        order >= MIN_ORDER && exp_err <= EXPONENTIAL_RTOL,
        format!(
            "observed orders {:?} (min {order:.3}, required >= {MIN_ORDER}); frozen-coefficient relative error {exp_err:.2e} (<= {EXPONENTIAL_RTOL:e})",
            orders.iter().map(|o| format!("{o:.3}")).collect::<Vec<_>>()
        ),
    )
}

fn voltage_solve(params: &PhysicsParameters, cond: &OperatingConditions, traj: &Trajectory) -> Outcome {
    let coeffs = voltage_coefficients(params, cond).unwrap();
    let mut back = 0.0f64;
    let mut decomposition = 0.0f64;
    for (&v, &t_mem) in traj.voltages.iter().zip(&traj.thicknesses) {
        back = back.max((v - coeffs.rhs(v, t_mem)).abs());
        let parts = voltage_breakdown(params, cond, t_mem, v).unwrap();
        decomposition = decomposition.max((parts.total() - coeffs.rhs(v, t_mem)).abs());
    }
    outcome(
        back <= VOLTAGE_RESIDUAL && decomposition <= DECOMPOSITION_TOL,
        format!(
            "{} steps: back-substitution {back:.2e} V (<= {VOLTAGE_RESIDUAL:e}), decomposition {decomposition:.2e} V (<= {DECOMPOSITION_TOL:e})",
            traj.len()
        ),
    )
}

fn chemistry(params: &PhysicsParameters, cond: &OperatingConditions, traj: &Trajectory) -> Outcome {
    let mut worst = 0.0f64;
    let mut jump = 0.0f64;
    for &v in &traj.voltages {
        let state = radical_state(params, cond, v, params.k5_true).unwrap();
        let (q, h) = steady_state_residuals(params, &state);
        worst = worst.max(q).max(h);
        let PeroxideCoefficients { a, b, c } = state.coefficients;
        for (da, db, dc) in [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0), (1.0, -1.0, 1.0), (-1.0, 1.0, -1.0)] {
            let bumped = PeroxideCoefficients {
                a: a * (1.0 + 1e-12 * da),
                b: b * (1.0 + 1e-12 * db),
                c: c * (1.0 + 1e-12 * dc),
            };
            let root = solve_peroxide(&bumped, params.peroxide_root).unwrap();
            jump = jump.max((root - state.c_h2o2).abs() / state.c_h2o2);
        }
    }
    // a root switch would move the solution by O(1); smooth dependence keeps it near 1e-12
    outcome(
        worst <= CHEMISTRY_RTOL && jump <= 1e-9,
        format!(
            "{} steps: worst relative residual {worst:.2e} (<= {CHEMISTRY_RTOL:e}); largest root shift under 1e-12 perturbation {jump:.2e}",
            traj.len()
        ),
    )
}

fn determinism(a: &Path, b: &Path) -> Outcome {
    let mut details = Vec::new();
    let mut same = true;
    for file in ["pinn/metrics.csv", "ann/metrics.csv"] {
        let (x, y) = (fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap());
        same &= x == y;
        details.push(format!("{file} {} ({} bytes)", if x == y { "identical" } else { "differs" }, x.len()));
    }
    outcome(same, details.join(", "))
}

fn main() -> ExitCode {
    // cargo passes harness flags such as --nocapture or a filter; ignore them
    let started = Instant::now();
    let config = RunConfig::default();
    let (params, cond) = (&config.physics, &config.conditions);
    let dir = tempfile::tempdir().expect("temporary directory");
    let (run_a, run_b) = (dir.path().join("a"), dir.path().join("b"));

    let (ra, rb) = (run_a.clone(), run_b.clone());
    let handle_a = thread::spawn(move || reproduce(&ra));
    let handle_b = thread::spawn(move || reproduce(&rb));

    let traj = integrate_trajectory(params, cond, params.k5_true, config.pipeline.n_steps).unwrap();
    let mut results: Vec<(u8, &str, Outcome)> = vec![
        (4, "gradient oracle", gradient_oracle(&config)),
        (5, "integrator order", integrator_order(params, cond)),
        (6, "implicit voltage solve", voltage_solve(params, cond, &traj)),
        (7, "steady-state chemistry", chemistry(params, cond, &traj)),
    ];

    let report = match (handle_a.join().unwrap(), handle_b.join().unwrap()) {
        (Ok(a), Ok(_)) => a,
        (Err(e), _) | (_, Err(e)) => {
            eprintln!("ERROR reproduce pipeline: {e}");
            return ExitCode::FAILURE;
        }
    };
    if let Some(stage) = &report.failed_stage {
        eprintln!("ERROR reproduce stage `{stage}` failed: {}", report.error.clone().unwrap_or_default());
        return ExitCode::FAILURE;
    }
    let expected = params.k5_true / pemwe_core::constants::K5_SCALE;
    results.push((1, "k5 recovery", k5_recovery(&report, expected)));
    results.push((2, "physics vs baseline", baseline_ratio(&report)));
    results.push((3, "PINN error magnitude", magnitude(&report)));
    results.push((8, "determinism", determinism(&run_a, &run_b)));
    results.sort_by_key(|r| r.0);

    let mut failed = 0;
    for (n, name, o) in &results {
        println!("{} {n} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        failed += !o.passed as usize;
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1} s",
        results.len() - failed,
        results.len(),
        started.elapsed().as_secs_f64()
    );
    let strict = std::env::var("PEMWE_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
