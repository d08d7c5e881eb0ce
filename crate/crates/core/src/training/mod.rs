//! Physics-informed training: composite loss, Adam, the joint fit of the
//! network and `k5_hat`, and evaluation.

mod adam;
mod loss;
mod residuals;

pub use adam::{adam_step, AdamSettings, AdamState};
pub use loss::{finite_difference_gradient, LossComponents, LossProblem, LossWeights};
pub use residuals::{
    residuals, thinning_residual, voltage_residual, PhysicsContext, ResidualFlags, OUTPUT_FLOOR,
};

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::dataset::{DataPoint, Dataset};
use crate::error::{Error, Result};
use crate::network::{init_parameters, NetworkParameters, DEFAULT_V_REF, K5_INDEX, LAYER_SIZES, PARAMETER_COUNT};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    #[serde(rename = "lambda_V")]
    pub lambda_v: f64,
    pub lambda_tmem: f64,
    pub lambda_ic: f64,
    pub n_collocation: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Seed of the weight initialization.
    pub init_seed: u64,
    /// `false` trains the same network on data and initial condition only.
    pub physics_enabled: bool,
    /// Epoch interval between checkpoints; 0 disables them.
    pub checkpoint_every: usize,
    /// V; voltage normalization of the network output.
    #[serde(rename = "V_ref")]
    pub v_ref: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 0.005,
            max_epochs: 7500,
            lambda_v: 1.0,
            lambda_tmem: 1.0,
            lambda_ic: 10.0,
            n_collocation: 1000,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            init_seed: 42,
            physics_enabled: true,
            checkpoint_every: 500,
            v_ref: DEFAULT_V_REF,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("adam_eps", self.adam_eps),
            ("V_ref", self.v_ref),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, format!("must be finite and > 0, got {v}")));
            }
        }
        let weights = [
            ("lambda_V", self.lambda_v),
            ("lambda_tmem", self.lambda_tmem),
            ("lambda_ic", self.lambda_ic),
        ];
        for (key, v) in weights {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(key, format!("must be finite and >= 0, got {v}")));
            }
        }
        for (key, v) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::config(key, format!("must lie in [0, 1), got {v}")));
            }
        }
        if self.max_epochs == 0 {
            return Err(Error::config("max_epochs", "must be at least 1"));
        }
        if self.physics_enabled && self.n_collocation < 2 {
            return Err(Error::config("n_collocation", "need at least 2 points with physics enabled"));
        }
        Ok(())
    }

    /// Loss weights in effect; the physics terms vanish when physics is off.
    pub fn weights(&self) -> LossWeights {
        let on = if self.physics_enabled { 1.0 } else { 0.0 };
        LossWeights {
            lambda_v: on * self.lambda_v,
            lambda_tmem: on * self.lambda_tmem,
            lambda_ic: self.lambda_ic,
        }
    }

    pub fn adam(&self) -> AdamSettings {
        AdamSettings {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: LossComponents,
    pub k5_hat: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rmse {
    #[serde(rename = "rmse_train_V")]
    pub train_v: f64,
    #[serde(rename = "rmse_test_V")]
    pub test_v: f64,
    pub rmse_train_mem: f64,
    pub rmse_test_mem: f64,
    pub k5_hat_final: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub rmse: Rmse,
    pub loss_history: Vec<EpochRecord>,
}

pub const METRICS_HEADER: &str = "epoch,total,data,physics_v,physics_mem,ic,k5_hat";

impl Metrics {
    pub fn history_csv(&self) -> String {
        let mut s = String::from(METRICS_HEADER);
        s.push('\n');
        for r in &self.loss_history {
            let l = &r.loss;
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.epoch, l.total, l.data, l.physics_v, l.physics_mem, l.ic, r.k5_hat
            ));
        }
        s
    }

    pub fn write_history(&self, path: &Path) -> Result<()> {
        fs::write(path, self.history_csv()).map_err(|e| Error::io(path, e))
    }
}

fn rmse(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for (a, b) in pairs {
        sum += (a - b) * (a - b);
        n += 1;
    }
    (sum / n as f64).sqrt()
}

fn split_rmse(params: &NetworkParameters, points: &[DataPoint]) -> (f64, f64) {
    let preds: Vec<_> = points.iter().map(|p| params.forward(p.t)).collect();
    (
        rmse(preds.iter().zip(points).map(|(y, p)| (y.voltage, p.voltage))),
        rmse(preds.iter().zip(points).map(|(y, p)| (y.thickness, p.thickness))),
    )
}

/// RMSE in physical units: train split against the noisy observations,
/// test split against the clean signal.
pub fn evaluate(params: &NetworkParameters, dataset: &Dataset) -> Result<Rmse> {
    if dataset.train.is_empty() {
        return Err(Error::EmptySplit("train"));
    }
    if dataset.test.is_empty() {
        return Err(Error::EmptySplit("test"));
    }
    let (train_v, rmse_train_mem) = split_rmse(params, &dataset.train);
    let (test_v, rmse_test_mem) = split_rmse(params, &dataset.test);
    Ok(Rmse {
        train_v,
        test_v,
        rmse_train_mem,
        rmse_test_mem,
        k5_hat_final: params.k5_hat(),
    })
}

/// Full-batch Adam on the composite loss starting from the seeded
/// initialization. `observer` sees every epoch after its update.
pub fn train_with_observer<F>(
    ctx: &PhysicsContext,
    dataset: &Dataset,
    config: &TrainingConfig,
    mut observer: F,
) -> Result<(NetworkParameters, Metrics)>
where
    F: FnMut(&EpochRecord, &NetworkParameters) -> Result<()>,
{
    config.validate()?;
    let mut net = initial_parameters(config.init_seed, ctx);
    let n_collocation = if config.physics_enabled { config.n_collocation } else { 0 };
    let problem = LossProblem::new(ctx, &dataset.train, n_collocation, config.weights())?;
    let adam = config.adam();
    let mut state = AdamState::new(PARAMETER_COUNT);
    let mut tape = Tape::with_capacity(1024);
    let mut grad = vec![0.0; PARAMETER_COUNT];
    let mut history = Vec::with_capacity(config.max_epochs);

    for epoch in 1..=config.max_epochs {
        let loss = problem
            .evaluate_with_gradient(&net.values, &mut tape, &mut grad)
            .map_err(|e| Error::NonFinite {
                context: format!("epoch {epoch}: {e}"),
            })?;
        if let Some((name, _)) = loss.named().into_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("epoch {epoch}, loss component {name}"),
            });
        }
        let record = EpochRecord {
            epoch,
            loss,
            k5_hat: net.values[K5_INDEX],
        };
        adam_step(&mut net.values, &grad, &mut state, &adam);
        if state.v.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("epoch {epoch}: optimizer second moment overflowed"),
            });
        }
        history.push(record);
        observer(&record, &net)?;
    }

    let rmse = evaluate(&net, dataset)?;
    Ok((net, Metrics { rmse, loss_history: history }))
}

pub fn train(
    ctx: &PhysicsContext,
    dataset: &Dataset,
    config: &TrainingConfig,
) -> Result<(NetworkParameters, Metrics)> {
    train_with_observer(ctx, dataset, config, |_, _| Ok(()))
}

/// Starting point of training: the seeded initialization with the output
/// biases shifted so the network reproduces the initial condition
/// `(V0, t_mem0)` exactly at `t = 0`. From zero output biases the network
/// can start near `V = 0`, where the voltage residual's denominators vanish.
pub fn initial_parameters(seed: u64, ctx: &PhysicsContext) -> NetworkParameters {
    let mut net = init_parameters(seed, ctx.normalization);
    match_initial_condition(&mut net, ctx);
    net
}

fn match_initial_condition(net: &mut NetworkParameters, ctx: &PhysicsContext) {
    let targets = [ctx.v0 / ctx.normalization.v_ref, 1.0];
    let bias = K5_INDEX - LAYER_SIZES[3];
    for (j, target) in targets.into_iter().enumerate() {
        net.values[bias + j] = 0.0;
        let [y1, y2] = crate::network::outputs(&net.values, &ctx.normalization, 0.0);
        net.values[bias + j] = target - [y1, y2][j];
    }
}

/// Parameters for gradient checks: seeded Glorot weights with the output
/// layer scaled down, outputs matching the initial condition at `t = 0` and
/// `k5_hat` drawn from `[0.5, 1.5]`. Keeps every collocation point inside
/// the smooth region of the residuals.
pub fn gradient_probe_parameters(seed: u64, ctx: &PhysicsContext) -> NetworkParameters {
    let mut net = init_parameters(seed, ctx.normalization);
    let n_out = LAYER_SIZES[3];
    let n_hidden = LAYER_SIZES[2];
    let w_out = K5_INDEX - n_out - n_out * n_hidden;
    for w in &mut net.values[w_out..w_out + n_out * n_hidden] {
        *w *= 0.1;
    }
    match_initial_condition(&mut net, ctx);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    net.values[K5_INDEX] = rng.random_range(0.5..1.5);
    net
}
