//! Adam with bias correction.

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamSettings {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }
}

pub fn adam_step(params: &mut [f64], grad: &[f64], state: &mut AdamState, s: &AdamSettings) {
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - s.beta1.powi(t);
    let c2 = 1.0 - s.beta2.powi(t);
    for i in 0..params.len() {
        let g = grad[i];
        state.m[i] = s.beta1 * state.m[i] + (1.0 - s.beta1) * g;
        state.v[i] = s.beta2 * state.v[i] + (1.0 - s.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= s.learning_rate * m_hat / (v_hat.sqrt() + s.eps);
    }
}
