//! Adam optimizer over any flat parameter set.

use serde::{Deserialize, Serialize};

use super::mlp::ParamSlices;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First and second moment estimates plus the step count.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdamState {
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
    pub steps: u64,
}

impl AdamState {
    pub fn for_params<P: ParamSlices + ?Sized>(params: &P) -> Self {
        let shape: Vec<Vec<f64>> = params.slices().iter().map(|s| vec![0.0; s.len()]).collect();
        Self { first: shape.clone(), second: shape, steps: 0 }
    }
}

/// One bias-corrected Adam update,
/// `θ ← θ − lr·m̂ / (√v̂ + ε)` with `m̂ = m/(1−β₁ᵗ)` and `v̂ = v/(1−β₂ᵗ)`.
pub fn adam_step<P, G>(params: &mut P, gradients: &G, state: &mut AdamState, lr: f64, hp: &AdamParams)
where
    P: ParamSlices + ?Sized,
    G: ParamSlices + ?Sized,
{
    state.steps += 1;
    let t = state.steps as f64;
    let c1 = 1.0 - hp.beta1.powf(t);
    let c2 = 1.0 - hp.beta2.powf(t);
    let grads = gradients.slices();
    for (k, p) in params.slices_mut().into_iter().enumerate() {
        let g = grads[k];
        let m = &mut state.first[k];
        let v = &mut state.second[k];
        for i in 0..p.len() {
            m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g[i];
            v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + hp.epsilon);
        }
    }
}
