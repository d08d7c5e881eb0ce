//! Physics residuals of the network at a collocation point, in
//! nondimensional form (time scaled by `t_max`, voltage by `v_ref`,
//! thickness by `t_mem0`).

use crate::autodiff::{Dual, Scalar};
use crate::constants::{OperatingConditions, PhysicsParameters, K5_SCALE};
use crate::degradation::{radical_state, thinning_coefficient};
use crate::electrochem::{solve_cell_voltage, voltage_coefficients, VoltageCoefficients};
use crate::error::Result;
use crate::network::{Normalization, NormalizedOutputs};

/// Normalized outputs at or below this value are replaced by it inside
/// denominators and the chemistry.
pub const OUTPUT_FLOOR: f64 = 1e-6;

/// Everything the residuals need besides the network parameters.
#[derive(Clone, Debug)]
pub struct PhysicsContext {
    pub params: PhysicsParameters,
    pub cond: OperatingConditions,
    pub coeffs: VoltageCoefficients,
    pub normalization: Normalization,
    /// Cell voltage of the pristine membrane, V.
    pub v0: f64,
}

impl PhysicsContext {
    pub fn new(params: &PhysicsParameters, cond: &OperatingConditions, v_ref: f64) -> Result<Self> {
        let coeffs = voltage_coefficients(params, cond)?;
        let v0 = solve_cell_voltage(&coeffs, cond.t_mem0, None)?.voltage;
        Ok(PhysicsContext {
            params: params.clone(),
            cond: cond.clone(),
            coeffs,
            normalization: Normalization {
                input_scale: cond.t_max,
                v_ref,
                t_mem0: cond.t_mem0,
            },
            v0,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ResidualFlags {
    /// An output fell to [`OUTPUT_FLOOR`] and was clamped.
    pub floored: bool,
    /// The chemistry had no feasible state or the hydroxyl clamp was active;
    /// `c_HO` was taken as zero.
    pub chemistry_clamped: bool,
}

fn floored<S: Scalar>(y: S, flags: &mut ResidualFlags) -> S {
    if y.value() <= OUTPUT_FLOOR {
        flags.floored = true;
        y.lift(OUTPUT_FLOOR)
    } else {
        y
    }
}

/// Voltage residual from differentiating the constant-power relation in
/// time, collected so `dV/dt` appears once:
///
/// `dV/dt [1 + k2v/V + k3v q/(t V²)] + k3v q/(V t²) dt/dt`,
///
/// scaled by `t_max / v_ref`.
pub fn voltage_residual<S: Scalar>(
    ctx: &PhysicsContext,
    out: &NormalizedOutputs<S>,
    flags: &mut ResidualFlags,
) -> S {
    let n = &ctx.normalization;
    let c2 = ctx.coeffs.k2v / n.v_ref;
    let c3 = ctx.coeffs.k3v * ctx.coeffs.power_density / (n.t_mem0 * n.v_ref * n.v_ref);
    let y1 = floored(out.y_v.primal, flags);
    let y2 = floored(out.y_mem.primal, flags);
    let inv_y1 = y1.recip_scaled(1.0);
    let inv_y2 = y2.recip_scaled(1.0);
    let ohmic = inv_y1 * inv_y2 * c3;
    let factor = inv_y1 * c2 + ohmic * inv_y1 + 1.0;
    out.y_v.tangent * factor + ohmic * inv_y2 * out.y_mem.tangent
}

/// Thinning residual `dt/dt + TR(k5_hat, c_HO(V), t)` scaled by
/// `t_max / t_mem0`. The hydroxyl concentration is evaluated at the
/// predicted voltage with the trainable rate constant `k5_hat * 1e3` in
/// every place the chemistry uses it.
pub fn thinning_residual<S: Scalar>(
    ctx: &PhysicsContext,
    out: &NormalizedOutputs<S>,
    k5_hat: S,
    flags: &mut ResidualFlags,
) -> S {
    let n = &ctx.normalization;
    let y1 = floored(out.y_v.primal, flags);
    let y2 = floored(out.y_mem.primal, flags);
    let k5 = k5_hat * K5_SCALE;
    let c_ho = match radical_state(&ctx.params, &ctx.cond, y1 * n.v_ref, k5) {
        Ok(state) => {
            flags.chemistry_clamped |= state.clamped;
            state.c_ho
        }
        Err(_) => {
            flags.chemistry_clamped = true;
            y1.lift(0.0)
        }
    };
    out.y_mem.tangent + thinning_coefficient(&ctx.params, k5) * c_ho * y2 * n.input_scale
}

/// Both residuals at one point.
pub fn residuals<S: Scalar>(
    ctx: &PhysicsContext,
    y_v: Dual<S>,
    y_mem: Dual<S>,
    k5_hat: S,
) -> (S, S, ResidualFlags) {
    let out = NormalizedOutputs { y_v, y_mem };
    let mut flags = ResidualFlags::default();
    let r_v = voltage_residual(ctx, &out, &mut flags);
    let r_m = thinning_residual(ctx, &out, k5_hat, &mut flags);
    (r_v, r_m, flags)
}
