//! Cell-voltage model: Nernst open-circuit voltage, Butler–Volmer activation
//! losses, and ohmic loss across a thinning membrane, plus the implicit
//! constant-power voltage solve.

use serde::{Deserialize, Serialize};

use crate::constants::{OperatingConditions, PhysicsParameters};
use crate::error::{Error, Result};

/// Bracket searched by [`solve_cell_voltage`], V.
pub const VOLTAGE_BRACKET: (f64, f64) = (0.5, 5.0);
pub const DEFAULT_VOLTAGE_GUESS: f64 = 1.8;
const MAX_ITERATIONS: usize = 100;
const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Constants of the reduced voltage equation
/// `V = k1v + k2v ln(q / V) + k3v q / (t_mem V)` with `q = P / A_cell`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoltageCoefficients {
    /// V
    pub k1v: f64,
    /// V
    pub k2v: f64,
    /// V cm³/W, so that `k3v * q / t_mem` is in V when `q` is in W/cm².
    pub k3v: f64,
    /// W/cm²
    pub power_density: f64,
}

impl VoltageCoefficients {
    /// Right-hand side of the reduced equation evaluated at `voltage`.
    pub fn rhs(&self, voltage: f64, t_mem: f64) -> f64 {
        let i = self.power_density / voltage;
        self.k1v + self.k2v * i.ln() + self.k3v * i / t_mem
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VoltageBreakdown {
    pub open_circuit: f64,
    pub activation: f64,
    pub ohmic: f64,
}

impl VoltageBreakdown {
    pub fn total(&self) -> f64 {
        self.open_circuit + self.activation + self.ohmic
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VoltageSolution {
    pub voltage: f64,
    pub iterations: usize,
}

pub fn open_circuit_voltage(params: &PhysicsParameters, cond: &OperatingConditions) -> Result<f64> {
    for (quantity, value) in [("p_H2", cond.p_h2), ("p_O2", cond.p_o2), ("p_H2O", cond.p_h2o)] {
        if !(value > 0.0) {
            return Err(Error::Domain { quantity, value });
        }
    }
    let rt_2f = params.gas_constant * cond.temperature / (2.0 * params.faraday);
    Ok(params.e0 + rt_2f * (cond.p_h2 * cond.p_o2.sqrt() / cond.p_h2o).ln())
}

/// Anode plus cathode activation overpotential at current density `i` (A/cm²).
pub fn activation_overpotential(
    params: &PhysicsParameters,
    cond: &OperatingConditions,
    i: f64,
) -> Result<f64> {
    if !(i > 0.0) {
        return Err(Error::Domain {
            quantity: "current density",
            value: i,
        });
    }
    let rt_f = params.gas_constant * cond.temperature / params.faraday;
    Ok(rt_f / params.alpha_an * (i / params.i0_an).ln()
        + rt_f / params.alpha_cat * (i / params.i0_cat).ln())
}

/// Empirical membrane conductivity, S/cm.
pub fn membrane_conductivity(lambda: f64, temperature: f64) -> Result<f64> {
    let sigma = (0.005139 * lambda - 0.00326) * (1268.0 * (1.0 / 303.0 - 1.0 / temperature)).exp();
    if !(sigma > 0.0) {
        return Err(Error::Domain {
            quantity: "lambda_hydration",
            value: lambda,
        });
    }
    Ok(sigma)
}

/// Conductivity of a membrane thinned from `t_mem0` to `t_mem`.
pub fn degraded_conductivity(sigma: f64, t_mem: f64, t_mem0: f64) -> Result<f64> {
    if !(t_mem > 0.0) {
        return Err(Error::DegenerateMembrane { t_mem });
    }
    let ratio = t_mem / t_mem0;
    Ok(ratio * ratio * sigma)
}

pub fn ohmic_overpotential(sigma: f64, t_mem: f64, i: f64) -> f64 {
    t_mem / sigma * i
}

/// Full decomposition at a given voltage and thickness, with the current
/// density set by constant-power operation.
pub fn voltage_breakdown(
    params: &PhysicsParameters,
    cond: &OperatingConditions,
    t_mem: f64,
    voltage: f64,
) -> Result<VoltageBreakdown> {
    let i = cond.power_density() / voltage;
    let sigma = membrane_conductivity(params.lambda_hydration, cond.temperature)?;
    let sigma_t = degraded_conductivity(sigma, t_mem, cond.t_mem0)?;
    Ok(VoltageBreakdown {
        open_circuit: open_circuit_voltage(params, cond)?,
        activation: activation_overpotential(params, cond, i)?,
        ohmic: ohmic_overpotential(sigma_t, t_mem, i),
    })
}

pub fn voltage_coefficients(
    params: &PhysicsParameters,
    cond: &OperatingConditions,
) -> Result<VoltageCoefficients> {
    let rt = params.gas_constant * cond.temperature;
    let f = params.faraday;
    let nernst = rt / (2.0 * f) * (cond.p_h2o / (cond.p_h2 * cond.p_o2.sqrt())).ln();
    // Reduces to (RT / (alpha F)) ln(1 / (i0_an i0_cat)) for equal coefficients.
    let exchange = -rt / f * (params.i0_an.ln() / params.alpha_an + params.i0_cat.ln() / params.alpha_cat);
    let sigma = membrane_conductivity(params.lambda_hydration, cond.temperature)?;
    Ok(VoltageCoefficients {
        k1v: params.e0 - nernst + exchange,
        k2v: rt / f * (1.0 / params.alpha_an + 1.0 / params.alpha_cat),
        k3v: cond.t_mem0 * cond.t_mem0 / sigma,
        power_density: cond.power_density(),
    })
}

/// Solves the reduced voltage equation for `V` at membrane thickness `t_mem`.
///
/// Newton iteration safeguarded by bisection inside [`VOLTAGE_BRACKET`];
/// `guess` (e.g. the previous time step's voltage) seeds the first iterate.
pub fn solve_cell_voltage(
    coeffs: &VoltageCoefficients,
    t_mem: f64,
    guess: Option<f64>,
) -> Result<VoltageSolution> {
    if !(t_mem > 0.0) {
        return Err(Error::DegenerateMembrane { t_mem });
    }
    let q = coeffs.power_density;
    let residual = |v: f64| v - coeffs.rhs(v, t_mem);
    let slope = |v: f64| 1.0 + coeffs.k2v / v + coeffs.k3v * q / (t_mem * v * v);

    let (mut lo, mut hi) = VOLTAGE_BRACKET;
    let (f_lo, f_hi) = (residual(lo), residual(hi));
    if f_lo == 0.0 {
        return Ok(VoltageSolution { voltage: lo, iterations: 0 });
    }
    if f_hi == 0.0 {
        return Ok(VoltageSolution { voltage: hi, iterations: 0 });
    }
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::NoBracket { lo, hi, f_lo, f_hi });
    }

    let mut x = guess.unwrap_or(DEFAULT_VOLTAGE_GUESS);
    if !(x > lo && x < hi) {
        x = 0.5 * (lo + hi);
    }
    let mut fx = residual(x);
    for iteration in 1..=MAX_ITERATIONS {
        if fx == 0.0 {
            return Ok(VoltageSolution { voltage: x, iterations: iteration - 1 });
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / slope(x);
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - x).abs();
        x = next;
        fx = residual(x);
        if step <= 4.0 * f64::EPSILON * x.abs() || hi - lo <= 4.0 * f64::EPSILON * x.abs() {
            if fx.abs() <= RESIDUAL_TOLERANCE {
                return Ok(VoltageSolution { voltage: x, iterations: iteration });
            }
            return Err(Error::NoConvergence { iterations: iteration, residual: fx });
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        residual: fx,
    })
}
