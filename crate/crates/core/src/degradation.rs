//! Radical chemistry in the cathode catalyst layer and the membrane-thinning
//! law it drives.
//!
//! H2O2 and HO· are taken at steady state for the current cell voltage: the
//! peroxide concentration is a root of `A c² + B c + C = 0` and the hydroxyl
//! concentration follows from it. The hydroxyl radicals attack the membrane
//! at rate `k5 c_HO C_mem`, releasing fluoride and thinning the membrane
//! with first-order kinetics in `t_mem`.
//!
//! Every function is generic over [`Scalar`] so the trainer can differentiate
//! the same chain it uses to generate data.

use crate::autodiff::Scalar;
use crate::constants::{
    OperatingConditions, PhysicsParameters, RootSelection, FRR_UNIT_FACTOR, TR_UNIT_FACTOR,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeroxideCoefficients<S = f64> {
    /// 1/s
    pub a: S,
    /// 1/s (times mol/m³ through the `v1` term)
    pub b: S,
    /// mol²/(m⁶ s)
    pub c: S,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadicalState<S = f64> {
    /// mol/m³
    pub c_h2o2: S,
    /// mol/m³
    pub c_ho: S,
    /// m/s
    pub v_h2o: S,
    pub coefficients: PeroxideCoefficients<S>,
    /// Set when the hydroxyl formula went negative and was clamped to zero.
    pub clamped: bool,
}

fn membrane_concentration(params: &PhysicsParameters) -> f64 {
    params.rho_naf_si / params.ew
}

/// Water velocity through the catalyst layer, proportional to the current
/// density `P / (A_cell V)` drawn at cell voltage `voltage`.
pub fn water_velocity<S: Scalar>(
    params: &PhysicsParameters,
    cond: &OperatingConditions,
    voltage: S,
) -> Result<S> {
    if !(voltage.value() > 0.0) {
        return Err(Error::Domain {
            quantity: "cell voltage",
            value: voltage.value(),
        });
    }
    Ok(voltage.recip_scaled(params.kappa_w * cond.power_density()))
}

/// Coefficients of the steady-state peroxide balance at `voltage`, with the
/// membrane-attack rate constant `k5` (m³/(mol s)) given explicitly.
pub fn peroxide_quadratic_coefficients<S: Scalar>(
    params: &PhysicsParameters,
    cond: &OperatingConditions,
    voltage: S,
    k5: S,
) -> Result<PeroxideCoefficients<S>> {
    let v_h2o = water_velocity(params, cond, voltage)?;
    Ok(coefficients_from_velocity(params, v_h2o, k5))
}

fn coefficients_from_velocity<S: Scalar>(
    params: &PhysicsParameters,
    v_h2o: S,
    k5: S,
) -> PeroxideCoefficients<S> {
    let flush = v_h2o / params.e_cl;
    // Net HO· sink: scavenging by O2, attack on the membrane, minus flushing.
    let sink = k5 * membrane_concentration(params) - flush + params.k4 * params.c_o2;
    let a = flush - 3.0 * params.k2;
    let b = sink * flush / params.k3 - params.v1 - sink * (params.k2 / params.k3);
    let c = -(sink * (params.v1 / params.k3));
    PeroxideCoefficients { a, b, c }
}

/// Physical root of `a c² + b c + c0 = 0`.
///
/// Uses the cancellation-free form `q = -(b + sign(b) sqrt(disc)) / 2`,
/// roots `q / a` and `c0 / q`, and falls back to the linear equation when
/// `a` vanishes.
pub fn solve_peroxide<S: Scalar>(
    coeffs: &PeroxideCoefficients<S>,
    selection: RootSelection,
) -> Result<S> {
    let PeroxideCoefficients { a, b, c } = *coeffs;
    let infeasible = || Error::ChemistryInfeasible {
        a: a.value(),
        b: b.value(),
        c: c.value(),
    };
    if a.value() == 0.0 {
        if b.value() == 0.0 {
            return Err(infeasible());
        }
        let root = -(c / b);
        return if root.value() > 0.0 {
            Ok(root)
        } else {
            Err(infeasible())
        };
    }
    let disc = b * b - a * c * 4.0;
    if !(disc.value() >= 0.0) {
        return Err(infeasible());
    }
    let sq = disc.sqrt();
    let q = if b.value() >= 0.0 { -(b + sq) * 0.5 } else { (sq - b) * 0.5 };
    let mut roots = [None, None];
    if q.value() != 0.0 {
        roots[0] = Some(q / a);
        roots[1] = Some(c / q);
    }
    let positive = roots
        .into_iter()
        .flatten()
        .filter(|r| r.value() > 0.0 && r.value().is_finite());
    let pick = match selection {
        RootSelection::SmallestPositive => {
            positive.min_by(|x, y| x.value().total_cmp(&y.value()))
        }
        RootSelection::LargestPositive => {
            positive.max_by(|x, y| x.value().total_cmp(&y.value()))
        }
    };
    pick.ok_or_else(infeasible)
}

/// Steady-state hydroxyl concentration given the water velocity and the
/// peroxide concentration. Negative values are clamped to zero; the flag in
/// the second slot reports whether the clamp was active.
pub fn hydroxyl_concentration<S: Scalar>(
    params: &PhysicsParameters,
    v_h2o: S,
    c_h2o2: S,
) -> Result<(S, bool)> {
    if !(c_h2o2.value() > 0.0) {
        return Err(Error::Domain {
            quantity: "peroxide concentration",
            value: c_h2o2.value(),
        });
    }
    let c_ho = v_h2o / (params.e_cl * params.k3)
        - c_h2o2.recip_scaled(params.v1 / params.k3)
        - params.k2 / params.k3;
    if c_ho.value() < 0.0 {
        Ok((c_ho.lift(0.0), true))
    } else {
        Ok((c_ho, false))
    }
}

/// Full steady state at cell voltage `voltage`.
pub fn radical_state<S: Scalar>(
    params: &PhysicsParameters,
    cond: &OperatingConditions,
    voltage: S,
    k5: S,
) -> Result<RadicalState<S>> {
    let v_h2o = water_velocity(params, cond, voltage)?;
    let coefficients = coefficients_from_velocity(params, v_h2o, k5);
    let c_h2o2 = solve_peroxide(&coefficients, params.peroxide_root)?;
    let (c_ho, clamped) = hydroxyl_concentration(params, v_h2o, c_h2o2)?;
    Ok(RadicalState {
        c_h2o2,
        c_ho,
        v_h2o,
        coefficients,
        clamped,
    })
}

/// First-order thinning coefficient: `TR = coefficient * c_HO * t_mem`, in
/// (cm/h) per (mol/m³ · cm).
pub fn thinning_coefficient<S: Scalar>(params: &PhysicsParameters, k5: S) -> S {
    k5 * (params.fluoride_stoich * membrane_concentration(params) * params.mm_f * TR_UNIT_FACTOR
        / (params.fluorine_mass_fraction * params.rho_naf_cgs))
}

/// Membrane thinning rate, cm/h. `dt_mem/dt = -thinning_rate`.
pub fn thinning_rate<S: Scalar>(params: &PhysicsParameters, k5: S, c_ho: S, t_mem: S) -> S {
    thinning_coefficient(params, k5) * c_ho * t_mem
}

/// Fluoride release rate, µg/(h cm²).
pub fn fluoride_release_rate(params: &PhysicsParameters, k5: f64, c_ho: f64, t_mem: f64) -> f64 {
    let v_fluor = params.fluoride_stoich * k5 * c_ho * membrane_concentration(params);
    v_fluor * params.mm_f * t_mem * FRR_UNIT_FACTOR
}

/// Relative residuals of the two steady-state equations at a solved state:
/// the quadratic balance and the hydroxyl relation (only meaningful when
/// the clamp is inactive).
pub fn steady_state_residuals(params: &PhysicsParameters, state: &RadicalState) -> (f64, f64) {
    let PeroxideCoefficients { a, b, c } = state.coefficients;
    let x = state.c_h2o2;
    let terms = [a * x * x, b * x, c];
    let scale = terms.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let quadratic = (terms[0] + terms[1] + terms[2]).abs() / scale;

    let flush = state.v_h2o / (params.e_cl * params.k3);
    let parts = [flush, params.k2 / params.k3, params.v1 / (params.k3 * x)];
    let scale = parts.iter().fold(state.c_ho.abs(), |m, t| m.max(t.abs()));
    let hydroxyl = (state.c_ho - (parts[0] - parts[1] - parts[2])).abs() / scale;
    (quadratic, hydroxyl)
}
