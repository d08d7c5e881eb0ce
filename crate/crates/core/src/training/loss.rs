//! Composite loss: data misfit, voltage and thinning residuals on the
//! collocation grid, and the initial condition.

use crate::autodiff::{Scalar, Tape};
use crate::dataset::{equally_spaced, DataPoint};
use crate::error::{Error, Result};
use crate::network::{outputs, outputs_with_derivative, K5_INDEX, PARAMETER_COUNT};

use super::residuals::{residuals, PhysicsContext};

/// Weighted loss components; `total` is their sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossComponents {
    pub data: f64,
    pub physics_v: f64,
    pub physics_mem: f64,
    pub ic: f64,
    pub total: f64,
    /// Collocation points whose residuals needed a floor or a chemistry clamp.
    pub flagged_points: usize,
}

impl LossComponents {
    pub fn named(&self) -> [(&'static str, f64); 5] {
        [
            ("data", self.data),
            ("physics_v", self.physics_v),
            ("physics_mem", self.physics_mem),
            ("ic", self.ic),
            ("total", self.total),
        ]
    }

    fn finish(mut self) -> Self {
        self.total = self.data + self.physics_v + self.physics_mem + self.ic;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub lambda_v: f64,
    pub lambda_tmem: f64,
    pub lambda_ic: f64,
}

/// Data, collocation grid and weights of one training problem.
#[derive(Clone, Debug)]
pub struct LossProblem<'a> {
    pub ctx: &'a PhysicsContext,
    pub data: &'a [DataPoint],
    pub collocation: Vec<f64>,
    pub weights: LossWeights,
}

impl<'a> LossProblem<'a> {
    /// Collocation points equally spaced over `[0, t_max]`.
    pub fn new(
        ctx: &'a PhysicsContext,
        data: &'a [DataPoint],
        n_collocation: usize,
        weights: LossWeights,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptySplit("train"));
        }
        let collocation = if n_collocation >= 2 {
            equally_spaced(n_collocation, ctx.normalization.input_scale)
        } else {
            vec![0.0; n_collocation]
        };
        Ok(LossProblem {
            ctx,
            data,
            collocation,
            weights,
        })
    }

    fn physics_active(&self) -> bool {
        !self.collocation.is_empty() && (self.weights.lambda_v > 0.0 || self.weights.lambda_tmem > 0.0)
    }

    fn data_term<S: Scalar>(&self, p: &[S], point: &DataPoint) -> S {
        let n = &self.ctx.normalization;
        let [y1, y2] = outputs(p, n, point.t);
        (y1 - point.voltage / n.v_ref).square() + (y2 - point.thickness / n.t_mem0).square()
    }

    fn ic_term<S: Scalar>(&self, p: &[S]) -> S {
        let n = &self.ctx.normalization;
        let [y1, y2] = outputs(p, n, 0.0);
        (y1 - self.ctx.v0 / n.v_ref).square() + (y2 - 1.0).square()
    }

    /// `(lambda_v r_v², lambda_tmem r_m², flagged)` at collocation time `t`.
    fn collocation_term<S: Scalar>(&self, p: &[S], t: f64) -> (S, S, bool) {
        let o = outputs_with_derivative(p, &self.ctx.normalization, t);
        let (r_v, r_m, flags) = residuals(self.ctx, o.y_v, o.y_mem, p[K5_INDEX]);
        (
            r_v.square() * self.weights.lambda_v,
            r_m.square() * self.weights.lambda_tmem,
            flags.floored || flags.chemistry_clamped,
        )
    }

    /// Loss components at `params` without derivatives.
    pub fn evaluate(&self, params: &[f64]) -> LossComponents {
        let mut c = LossComponents::default();
        let w_d = 1.0 / self.data.len() as f64;
        for point in self.data {
            c.data += self.data_term(params, point) * w_d;
        }
        if self.physics_active() {
            let w_r = 1.0 / self.collocation.len() as f64;
            for &t in &self.collocation {
                let (pv, pm, flagged) = self.collocation_term(params, t);
                c.physics_v += pv * w_r;
                c.physics_mem += pm * w_r;
                c.flagged_points += flagged as usize;
            }
        }
        c.ic = self.weights.lambda_ic * self.ic_term(params);
        c.finish()
    }

    /// Loss components and the gradient over all parameters, written into
    /// `grad`. Each point is recorded on `tape` separately and its gradient
    /// added in a fixed order.
    pub fn evaluate_with_gradient(
        &self,
        params: &[f64],
        tape: &mut Tape,
        grad: &mut [f64],
    ) -> Result<LossComponents> {
        debug_assert_eq!(params.len(), PARAMETER_COUNT);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut c = LossComponents::default();

        let w_d = 1.0 / self.data.len() as f64;
        for point in self.data {
            tape.clear();
            let leaves: Vec<_> = params.iter().map(|&x| tape.var(x)).collect();
            let l = self.data_term(&leaves, point);
            c.data += l.value() * w_d;
            tape.accumulate(l, w_d, grad)?;
        }

        if self.physics_active() {
            let w_r = 1.0 / self.collocation.len() as f64;
            for &t in &self.collocation {
                tape.clear();
                let leaves: Vec<_> = params.iter().map(|&x| tape.var(x)).collect();
                let (pv, pm, flagged) = self.collocation_term(&leaves, t);
                c.physics_v += pv.value() * w_r;
                c.physics_mem += pm.value() * w_r;
                c.flagged_points += flagged as usize;
                tape.accumulate(pv + pm, w_r, grad)?;
            }
        }

        if self.weights.lambda_ic > 0.0 {
            tape.clear();
            let leaves: Vec<_> = params.iter().map(|&x| tape.var(x)).collect();
            let l = self.ic_term(&leaves);
            c.ic = self.weights.lambda_ic * l.value();
            tape.accumulate(l, self.weights.lambda_ic, grad)?;
        }
        Ok(c.finish())
    }
}

/// Finite-difference gradient of the total loss using the fourth-order
/// central stencil with step `h`.
pub fn finite_difference_gradient(problem: &LossProblem<'_>, params: &[f64], h: f64) -> Vec<f64> {
    let mut x = params.to_vec();
    (0..params.len())
        .map(|i| {
            let mut at = |dx: f64| {
                x[i] = params[i] + dx;
                let v = problem.evaluate(&x).total;
                x[i] = params[i];
                v
            };
            let (p2, p1, m1, m2) = (at(2.0 * h), at(h), at(-h), at(-2.0 * h));
            (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{default_parameters, OperatingConditions};
    use crate::network::{init_parameters, Normalization};

    fn ctx() -> PhysicsContext {
        PhysicsContext::new(&default_parameters(), &OperatingConditions::default(), 2.0).unwrap()
    }

    fn weights(v: f64, m: f64, ic: f64) -> LossWeights {
        LossWeights {
            lambda_v: v,
            lambda_tmem: m,
            lambda_ic: ic,
        }
    }

    fn predictions_as_data(params: &[f64], norm: &Normalization, times: &[f64]) -> Vec<DataPoint> {
        times
            .iter()
            .map(|&t| {
                let [y1, y2] = outputs(params, norm, t);
                DataPoint {
                    t,
                    voltage: y1 * norm.v_ref,
                    thickness: y2 * norm.t_mem0,
                }
            })
            .collect()
    }

    #[test]
    fn perfect_fit_without_physics_is_zero() {
        let c = ctx();
        let p = init_parameters(1, c.normalization);
        let data = predictions_as_data(&p.values, &c.normalization, &[0.0, 1e5, 2e5]);
        let problem = LossProblem::new(&c, &data, 10, weights(0.0, 0.0, 0.0)).unwrap();
        // targets round-trip through the output scales, so only roundoff remains
        assert!(problem.evaluate(&p.values).total < 1e-28);
    }

    #[test]
    fn doubling_residuals_quadruples_data_term() {
        let c = ctx();
        let p = init_parameters(1, c.normalization);
        let clean = predictions_as_data(&p.values, &c.normalization, &[0.0, 3e5]);
        let shift = |k: f64| -> Vec<DataPoint> {
            clean
                .iter()
                .map(|d| DataPoint {
                    voltage: d.voltage + k * 0.01,
                    thickness: d.thickness - k * 1e-4,
                    ..*d
                })
                .collect()
        };
        let (one, two) = (shift(1.0), shift(2.0));
        let w = weights(0.0, 0.0, 0.0);
        let l1 = LossProblem::new(&c, &one, 0, w).unwrap().evaluate(&p.values).data;
        let l2 = LossProblem::new(&c, &two, 0, w).unwrap().evaluate(&p.values).data;
        assert!((l2 - 4.0 * l1).abs() <= 1e-12 * l2);
    }

    #[test]
    fn single_collocation_point_matches_hand_sum() {
        let c = ctx();
        let mut p = init_parameters(2, c.normalization);
        p.values[K5_INDEX] = 0.7;
        let data = vec![DataPoint {
            t: 1e5,
            voltage: 2.4,
            thickness: 0.015,
        }];
        let mut problem = LossProblem::new(&c, &data, 0, weights(1.5, 0.5, 3.0)).unwrap();
        problem.collocation = vec![4e5];
        let got = problem.evaluate(&p.values);

        let n = c.normalization;
        let [a, b] = outputs(&p.values, &n, 1e5);
        let data_term = (a - 2.4 / n.v_ref).powi(2) + (b - 0.015 / n.t_mem0).powi(2);
        let o = outputs_with_derivative(&p.values, &n, 4e5);
        let (r_v, r_m, _) = residuals(&c, o.y_v, o.y_mem, 0.7);
        let [a0, b0] = outputs(&p.values, &n, 0.0);
        let ic = (a0 - c.v0 / n.v_ref).powi(2) + (b0 - 1.0).powi(2);
        let expected = data_term + 1.5 * r_v * r_v + 0.5 * r_m * r_m + 3.0 * ic;
        assert!((got.total - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn components_sum_to_total_and_gradient_agrees_with_value() {
        let c = ctx();
        let mut p = init_parameters(3, c.normalization);
        p.values[K5_INDEX] = 0.5;
        let data = vec![
            DataPoint {
                t: 0.0,
                voltage: 2.45,
                thickness: 0.0175,
            },
            DataPoint {
                t: 2e5,
                voltage: 2.46,
                thickness: 0.0145,
            },
        ];
        let problem = LossProblem::new(&c, &data, 20, weights(1.0, 1.0, 10.0)).unwrap();
        let mut tape = Tape::new();
        let mut grad = vec![0.0; PARAMETER_COUNT];
        let with_grad = problem.evaluate_with_gradient(&p.values, &mut tape, &mut grad).unwrap();
        let plain = problem.evaluate(&p.values);
        assert_eq!(with_grad, plain);
        let sum = plain.data + plain.physics_v + plain.physics_mem + plain.ic;
        assert!((sum - plain.total).abs() <= 1e-12 * plain.total);
        assert!(plain.named().iter().all(|(_, v)| *v >= 0.0));
        assert!(grad[K5_INDEX] != 0.0);
    }
}
