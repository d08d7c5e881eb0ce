//! Chooses the closure parameters that the published model leaves open.
//!
//! * `c_O2` is fixed at 1 mol/m³, which makes O2 scavenging (k4 c_O2) the
//!   dominant HO· sink while keeping the membrane-attack term visible.
//! * `kappa_w` is set so the water flush rate `v_H2O / e_cl` equals ten times
//!   the H2O2 homolysis constant k2 at the initial operating point.
//! * `v1` is bisected so the clean trajectory loses half of the initial
//!   membrane thickness over the simulation horizon.
//!
//! Run with `cargo run --release -p pemwe-core --example calibrate_closures`
//! and paste the printed constants into `constants::closure`.

use pemwe_core::constants::{default_parameters, OperatingConditions, PhysicsParameters};
use pemwe_core::electrochem::{solve_cell_voltage, voltage_coefficients};
use pemwe_core::simulator::{integrate_trajectory, DEFAULT_STEPS};

const FLUSH_OVER_HOMOLYSIS: f64 = 10.0;
const TARGET_REMAINING: f64 = 0.5;

fn remaining_fraction(params: &PhysicsParameters, cond: &OperatingConditions) -> f64 {
    let traj = integrate_trajectory(params, cond, params.k5_true, DEFAULT_STEPS)
        .expect("calibration trajectory");
    traj.thicknesses.last().unwrap() / cond.t_mem0
}

fn main() {
    let cond = OperatingConditions::default();
    let mut params = default_parameters();
    params.c_o2 = 1.0;

    let coeffs = voltage_coefficients(&params, &cond).unwrap();
    let v0 = solve_cell_voltage(&coeffs, cond.t_mem0, None).unwrap().voltage;
    let i0 = cond.power_density() / v0;
    params.kappa_w = FLUSH_OVER_HOMOLYSIS * params.k2 * params.e_cl / i0;

    // log-space bisection on v1
    let (mut lo, mut hi) = (1e-7f64.ln(), 1e-1f64.ln());
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        params.v1 = mid.exp();
        let left = remaining_fraction(&params, &cond);
        if left > TARGET_REMAINING {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    params.v1 = (0.5 * (lo + hi)).exp();
    let left = remaining_fraction(&params, &cond);

    println!("V0 = {v0} V, i0 = {i0} A/cm2");
    println!("remaining thickness fraction = {left}");
    println!("pub const C_O2: f64 = {:e};", params.c_o2);
    println!("pub const KAPPA_W: f64 = {:e};", params.kappa_w);
    println!("pub const V1: f64 = {:e};", params.v1);
}
