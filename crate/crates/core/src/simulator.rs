//! Ground-truth trajectories of the coupled voltage/thinning system.
//!
//! The membrane thickness is advanced with classical fixed-step RK4; at every
//! stage the cell voltage is recovered from the algebraic constant-power
//! equation, the radical steady state is evaluated at that voltage, and the
//! thinning rate follows.

use std::fs;
use std::path::Path;

use crate::constants::{OperatingConditions, PhysicsParameters};
use crate::degradation::{fluoride_release_rate, radical_state, thinning_rate};
use crate::electrochem::{solve_cell_voltage, voltage_coefficients, VoltageCoefficients};
use crate::error::{Error, Result};

pub const DEFAULT_STEPS: usize = 4096;
pub const MIN_STEPS: usize = 10;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepDiagnostics {
    /// mol/m³
    pub c_ho: f64,
    /// mol/m³
    pub c_h2o2: f64,
    /// cm/h
    pub thinning_rate: f64,
    /// µg/(h cm²)
    pub fluoride_release_rate: f64,
    pub solver_iterations: usize,
    pub clamped: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    /// h
    pub times: Vec<f64>,
    /// V
    pub voltages: Vec<f64>,
    /// cm
    pub thicknesses: Vec<f64>,
    /// Empty when the trajectory was loaded from a file without diagnostics.
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_max(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Linear interpolation of `(voltage, thickness)` at time `t`.
    pub fn sample(&self, t: f64) -> Option<(f64, f64)> {
        let n = self.times.len();
        if n == 0 || t < self.times[0] || t > self.times[n - 1] {
            return None;
        }
        let k = self.times.partition_point(|&x| x <= t);
        if k == 0 {
            return Some((self.voltages[0], self.thicknesses[0]));
        }
        let lo = k - 1;
        if self.times[lo] == t || lo + 1 == n {
            return Some((self.voltages[lo], self.thicknesses[lo]));
        }
        let w = (t - self.times[lo]) / (self.times[lo + 1] - self.times[lo]);
        let lerp = |y: &[f64]| y[lo] + w * (y[lo + 1] - y[lo]);
        Some((lerp(&self.voltages), lerp(&self.thicknesses)))
    }

    /// Checks ordering and positivity. With `degrading` set, thickness must
    /// strictly fall and voltage strictly rise from sample to sample.
    pub fn check_invariants(&self, degrading: bool) -> std::result::Result<(), String> {
        if self.times.first() != Some(&0.0) {
            return Err("times must start at 0".into());
        }
        if self.voltages.len() != self.len() || self.thicknesses.len() != self.len() {
            return Err("channel lengths differ".into());
        }
        for k in 1..self.len() {
            if !(self.times[k] > self.times[k - 1]) {
                return Err(format!("times not increasing at sample {k}"));
            }
            if degrading {
                if !(self.thicknesses[k] < self.thicknesses[k - 1]) {
                    return Err(format!("thickness not decreasing at t = {} h", self.times[k]));
                }
                if !(self.voltages[k] > self.voltages[k - 1]) {
                    return Err(format!("voltage not increasing at t = {} h", self.times[k]));
                }
            }
        }
        if let Some(k) = self.thicknesses.iter().position(|&x| !(x > 0.0)) {
            return Err(format!("non-positive thickness at sample {k}"));
        }
        Ok(())
    }
}

const TRAJECTORY_COLUMNS: [&str; 3] = ["t_hours", "voltage_V", "thickness_cm"];

impl Trajectory {
    /// `t_hours,voltage_V,thickness_cm`, values in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut s = TRAJECTORY_COLUMNS.join(",");
        s.push('\n');
        for k in 0..self.len() {
            s.push_str(&format!("{},{},{}\n", self.times[k], self.voltages[k], self.thicknesses[k]));
        }
        s
    }

    pub fn diagnostics_csv(&self) -> String {
        let mut s = String::from(
            "t_hours,c_HO_mol_m3,c_H2O2_mol_m3,thinning_rate_cm_h,fluoride_release_ug_h_cm2,solver_iterations,clamped\n",
        );
        for (t, d) in self.times.iter().zip(&self.diagnostics) {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                t, d.c_ho, d.c_h2o2, d.thinning_rate, d.fluoride_release_rate, d.solver_iterations, d.clamped as u8
            ));
        }
        s
    }

    /// Reads the three channels written by [`Trajectory::to_csv`]; the
    /// diagnostics are left empty.
    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate();
        let header: Vec<&str> = lines.next().map(|(_, h)| h.split(',').map(str::trim).collect()).unwrap_or_default();
        let mut idx = [0usize; 3];
        for (slot, name) in idx.iter_mut().zip(TRAJECTORY_COLUMNS) {
            *slot = header.iter().position(|h| *h == name).ok_or_else(|| Error::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })?;
        }
        let mut traj = Trajectory::default();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let mut vals = [0.0; 3];
            for (v, (&k, name)) in vals.iter_mut().zip(idx.iter().zip(TRAJECTORY_COLUMNS)) {
                let raw = fields.get(k).copied().unwrap_or("");
                *v = raw.trim().parse().map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: i as u64 + 1,
                    message: format!("column `{name}`: {e} ({raw:?})"),
                })?;
            }
            traj.times.push(vals[0]);
            traj.voltages.push(vals[1]);
            traj.thicknesses.push(vals[2]);
        }
        traj.check_invariants(false).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message,
        })?;
        Ok(traj)
    }
}

/// Fixed-step classical RK4 for the scalar ODE `dy/dt = rhs(t, y)` on
/// `[0, t_end]`, returning the state at each of the `n_steps + 1` step
/// boundaries.
pub fn rk4<F>(y0: f64, t_end: f64, n_steps: usize, mut rhs: F) -> Result<Vec<f64>>
where
    F: FnMut(f64, f64) -> Result<f64>,
{
    let h = t_end / n_steps as f64;
    let mut ys = Vec::with_capacity(n_steps + 1);
    let mut y = y0;
    ys.push(y);
    for k in 0..n_steps {
        let t = step_time(k, n_steps, t_end);
        let k1 = rhs(t, y)?;
        let k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)?;
        let k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)?;
        let k4 = rhs(t + h, y + h * k3)?;
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        ys.push(y);
    }
    Ok(ys)
}

fn step_time(k: usize, n_steps: usize, t_end: f64) -> f64 {
    k as f64 * t_end / n_steps as f64
}

/// State of the coupled system at one thickness value.
struct Evaluator<'a> {
    params: &'a PhysicsParameters,
    cond: &'a OperatingConditions,
    coeffs: VoltageCoefficients,
    k5: f64,
    last_voltage: Option<f64>,
}

impl Evaluator<'_> {
    fn evaluate(&mut self, time: f64, t_mem: f64) -> Result<(f64, StepDiagnostics)> {
        if !(t_mem > 0.0) {
            return Err(Error::MembraneVanished { time });
        }
        let solution = solve_cell_voltage(&self.coeffs, t_mem, self.last_voltage).map_err(|e| {
            Error::VoltageSolve {
                time,
                source: Box::new(e),
            }
        })?;
        let voltage = solution.voltage;
        self.last_voltage = Some(voltage);
        let diag = if self.k5 == 0.0 {
            StepDiagnostics {
                solver_iterations: solution.iterations,
                ..Default::default()
            }
        } else {
            let state = radical_state(self.params, self.cond, voltage, self.k5)?;
            StepDiagnostics {
                c_ho: state.c_ho,
                c_h2o2: state.c_h2o2,
                thinning_rate: thinning_rate(self.params, self.k5, state.c_ho, t_mem),
                fluoride_release_rate: fluoride_release_rate(self.params, self.k5, state.c_ho, t_mem),
                solver_iterations: solution.iterations,
                clamped: state.clamped,
            }
        };
        Ok((voltage, diag))
    }
}

/// Simulates voltage and membrane thickness over `[0, cond.t_max]` with
/// membrane-attack rate constant `k5` (m³/(mol s)).
pub fn integrate_trajectory(
    params: &PhysicsParameters,
    cond: &OperatingConditions,
    k5: f64,
    n_steps: usize,
) -> Result<Trajectory> {
    if n_steps < MIN_STEPS {
        return Err(Error::config("n_steps", format!("must be at least {MIN_STEPS}, got {n_steps}")));
    }
    if !(k5 >= 0.0 && k5.is_finite()) {
        return Err(Error::config("k5", format!("must be finite and >= 0, got {k5}")));
    }
    let mut eval = Evaluator {
        params,
        cond,
        coeffs: voltage_coefficients(params, cond)?,
        k5,
        last_voltage: None,
    };
    let thicknesses = rk4(cond.t_mem0, cond.t_max, n_steps, |t, y| {
        let (_, d) = eval.evaluate(t, y)?;
        Ok(-d.thinning_rate)
    })?;

    let times: Vec<f64> = (0..=n_steps).map(|k| step_time(k, n_steps, cond.t_max)).collect();
    eval.last_voltage = None;
    let mut voltages = Vec::with_capacity(times.len());
    let mut diagnostics = Vec::with_capacity(times.len());
    for (&t, &y) in times.iter().zip(&thicknesses) {
        let (v, d) = eval.evaluate(t, y)?;
        voltages.push(v);
        diagnostics.push(d);
    }
    Ok(Trajectory {
        times,
        voltages,
        thicknesses,
        diagnostics,
    })
}
