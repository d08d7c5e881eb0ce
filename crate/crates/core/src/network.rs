//! Two-output multilayer perceptron `t -> (V, t_mem)` with the trainable
//! membrane-attack parameter `k5_hat` stored alongside its weights.
//!
//! Parameters live in one flat vector so the optimizer and the tape see a
//! single coordinate system: for each layer the row-major weight matrix
//! (`out x in`) followed by the bias vector, and `k5_hat` last.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Dual, Scalar};
use crate::error::{Error, Result};

pub const LAYER_SIZES: [usize; 4] = [1, 10, 5, 2];
pub const PARAMETER_COUNT: usize = parameter_count(&LAYER_SIZES) + 1;
pub const K5_INDEX: usize = PARAMETER_COUNT - 1;
pub const DEFAULT_V_REF: f64 = 2.0;
pub const CHECKPOINT_FORMAT: &str = "pemwe-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Weights and biases of an MLP with the given layer sizes (no `k5_hat`).
pub const fn parameter_count(sizes: &[usize]) -> usize {
    let mut n = 0;
    let mut l = 1;
    while l < sizes.len() {
        n += sizes[l - 1] * sizes[l] + sizes[l];
        l += 1;
    }
    n
}

/// Scales mapping physical quantities to the O(1) values the network sees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    /// h; `tau = t / input_scale`.
    pub input_scale: f64,
    /// V; `V = v_ref * y1`.
    pub v_ref: f64,
    /// cm; `t_mem = t_mem0 * y2`.
    pub t_mem0: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParameters {
    pub values: Vec<f64>,
    pub normalization: Normalization,
}

/// Activation flowing through the hidden layers: either a plain scalar or
/// a dual number carrying `d/dtau`.
pub trait Signal<S: Scalar>: Copy {
    /// `w * tau + b` for the scalar network input `tau` with tangent `dtau`.
    fn input(w: S, b: S, tau: f64, dtau: f64) -> Self;
    fn weighted(self, w: S) -> Self;
    fn plus(self, other: Self) -> Self;
    fn plus_bias(self, b: S) -> Self;
    fn activate(self) -> Self;
}

impl<S: Scalar> Signal<S> for S {
    #[inline]
    fn input(w: S, b: S, tau: f64, _dtau: f64) -> Self {
        w * tau + b
    }
    #[inline]
    fn weighted(self, w: S) -> Self {
        self * w
    }
    #[inline]
    fn plus(self, other: Self) -> Self {
        self + other
    }
    #[inline]
    fn plus_bias(self, b: S) -> Self {
        self + b
    }
    #[inline]
    fn activate(self) -> Self {
        self.sigmoid()
    }
}

impl<S: Scalar> Signal<S> for Dual<S> {
    #[inline]
    fn input(w: S, b: S, tau: f64, dtau: f64) -> Self {
        Dual::new(w * tau + b, w * dtau)
    }
    #[inline]
    fn weighted(self, w: S) -> Self {
        self.scale(w)
    }
    #[inline]
    fn plus(self, other: Self) -> Self {
        self + other
    }
    #[inline]
    fn plus_bias(self, b: S) -> Self {
        self.shift(b)
    }
    #[inline]
    fn activate(self) -> Self {
        self.sigmoid()
    }
}

/// Evaluates an MLP with sigmoid hidden layers and an affine output layer on
/// a single scalar input. `params` holds weights and biases in the flat
/// layout described at module level; trailing entries are ignored.
pub fn mlp<S: Scalar, T: Signal<S>>(sizes: &[usize], params: &[S], tau: f64, dtau: f64) -> Vec<T> {
    debug_assert_eq!(sizes[0], 1);
    debug_assert!(params.len() >= parameter_count(sizes));
    let mut offset = 0;
    let n1 = sizes[1];
    let (w, b) = (&params[..n1], &params[n1..2 * n1]);
    offset += 2 * n1;
    let mut act: Vec<T> = (0..n1).map(|j| T::input(w[j], b[j], tau, dtau)).collect();
    for l in 2..sizes.len() {
        act.iter_mut().for_each(|a| *a = a.activate());
        let (n_in, n_out) = (sizes[l - 1], sizes[l]);
        let w = &params[offset..offset + n_in * n_out];
        let b = &params[offset + n_in * n_out..offset + n_in * n_out + n_out];
        offset += n_in * n_out + n_out;
        act = (0..n_out)
            .map(|j| {
                let row = &w[j * n_in..(j + 1) * n_in];
                let mut z = act[0].weighted(row[0]);
                for i in 1..n_in {
                    z = z.plus(act[i].weighted(row[i]));
                }
                z.plus_bias(b[j])
            })
            .collect();
    }
    act
}

/// Network outputs in physical units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction<S = f64> {
    /// V
    pub voltage: S,
    /// cm
    pub thickness: S,
}

/// Network outputs in normalized units with their `tau` derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalizedOutputs<S> {
    pub y_v: Dual<S>,
    pub y_mem: Dual<S>,
}

/// Normalized outputs `(y1, y2)` at time `t` (h).
pub fn outputs<S: Scalar>(params: &[S], norm: &Normalization, t: f64) -> [S; 2] {
    let y: Vec<S> = mlp::<S, S>(&LAYER_SIZES, params, t / norm.input_scale, 0.0);
    [y[0], y[1]]
}

/// Normalized outputs and their derivatives with respect to `tau`.
pub fn outputs_with_derivative<S: Scalar>(
    params: &[S],
    norm: &Normalization,
    t: f64,
) -> NormalizedOutputs<S> {
    let y: Vec<Dual<S>> = mlp::<S, Dual<S>>(&LAYER_SIZES, params, t / norm.input_scale, 1.0);
    NormalizedOutputs { y_v: y[0], y_mem: y[1] }
}

/// Glorot-uniform weights drawn from ChaCha8 seeded with `seed`, zero
/// biases, `k5_hat = 0`.
pub fn init_parameters(seed: u64, normalization: Normalization) -> NetworkParameters {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(PARAMETER_COUNT);
    for l in 1..LAYER_SIZES.len() {
        let (n_in, n_out) = (LAYER_SIZES[l - 1], LAYER_SIZES[l]);
        let limit = (6.0 / (n_in + n_out) as f64).sqrt();
        for _ in 0..n_in * n_out {
            values.push(rng.random_range(-limit..=limit));
        }
        values.extend(std::iter::repeat_n(0.0, n_out));
    }
    values.push(0.0);
    NetworkParameters { values, normalization }
}

impl NetworkParameters {
    pub fn k5_hat(&self) -> f64 {
        self.values[K5_INDEX]
    }

    pub fn forward(&self, t: f64) -> Prediction {
        let [y1, y2] = outputs(&self.values, &self.normalization, t);
        Prediction {
            voltage: self.normalization.v_ref * y1,
            thickness: self.normalization.t_mem0 * y2,
        }
    }

    /// Outputs and their time derivatives (V/h, cm/h).
    pub fn forward_with_time_derivative(&self, t: f64) -> (Prediction, Prediction) {
        let n = &self.normalization;
        let o = outputs_with_derivative(&self.values, n, t);
        (
            Prediction {
                voltage: n.v_ref * o.y_v.primal,
                thickness: n.t_mem0 * o.y_mem.primal,
            },
            Prediction {
                voltage: n.v_ref * o.y_v.tangent / n.input_scale,
                thickness: n.t_mem0 * o.y_mem.tangent / n.input_scale,
            },
        )
    }

    /// Named tensors in storage order.
    pub fn tensors(&self) -> Vec<Tensor> {
        let mut out = Vec::new();
        let mut offset = 0;
        for l in 1..LAYER_SIZES.len() {
            let (n_in, n_out) = (LAYER_SIZES[l - 1], LAYER_SIZES[l]);
            out.push(Tensor {
                name: format!("W{l}"),
                shape: vec![n_out, n_in],
                data: self.values[offset..offset + n_in * n_out].to_vec(),
            });
            offset += n_in * n_out;
            out.push(Tensor {
                name: format!("b{l}"),
                shape: vec![n_out],
                data: self.values[offset..offset + n_out].to_vec(),
            });
            offset += n_out;
        }
        out
    }

    pub fn to_checkpoint(&self, epoch: usize) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            epoch,
            layer_sizes: LAYER_SIZES.to_vec(),
            normalization: self.normalization,
            k5_hat: self.k5_hat(),
            tensors: self.tensors(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> std::result::Result<Self, String> {
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(format!(
                "unsupported checkpoint {} v{} (expected {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION})",
                ck.format, ck.version
            ));
        }
        if ck.layer_sizes != LAYER_SIZES {
            return Err(format!("layer sizes {:?} differ from {:?}", ck.layer_sizes, LAYER_SIZES));
        }
        let template = init_parameters(0, ck.normalization).tensors();
        if ck.tensors.len() != template.len() {
            return Err(format!("expected {} tensors, found {}", template.len(), ck.tensors.len()));
        }
        let mut values = Vec::with_capacity(PARAMETER_COUNT);
        for (want, got) in template.iter().zip(&ck.tensors) {
            if want.name != got.name || want.shape != got.shape || want.data.len() != got.data.len() {
                return Err(format!(
                    "tensor `{}` {:?} does not match expected `{}` {:?}",
                    got.name, got.shape, want.name, want.shape
                ));
            }
            values.extend_from_slice(&got.data);
        }
        values.push(ck.k5_hat);
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(format!("non-finite parameter at flat index {i}"));
        }
        Ok(NetworkParameters {
            values,
            normalization: ck.normalization,
        })
    }

    pub fn save(&self, path: &Path, epoch: usize) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.to_checkpoint(epoch)).expect("checkpoint serializes");
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line() as u64,
            message: e.to_string(),
        })?;
        Self::from_checkpoint(&ck).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub epoch: usize,
    pub layer_sizes: Vec<usize>,
    pub normalization: Normalization,
    pub k5_hat: f64,
    pub tensors: Vec<Tensor>,
}
