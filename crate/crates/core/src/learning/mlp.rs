//! Fully connected networks with batched forward and reverse passes.
//!
//! A batch is a matrix with one sample per column. The reverse pass takes
//! the gradient of a scalar objective with respect to the network output and
//! returns exact gradients for every weight, bias and input.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::LearningError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    /// Derivative in terms of the pre-activation `z` and output `y`. ReLU
    /// takes the subgradient 0 at `z = 0`.
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `outputs × inputs`.
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Values kept from a forward pass for the reverse pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    inputs: Vec<DMatrix<f64>>,
    pre_activations: Vec<DMatrix<f64>>,
    outputs: Vec<DMatrix<f64>>,
}

/// Gradients laid out like the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradients {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

impl Mlp {
    /// Assembles a network, checking that adjacent layers chain.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, LearningError> {
        if layers.is_empty() {
            return Err(LearningError::InvalidConfig("a network needs at least one layer".into()));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.outputs() {
                return Err(LearningError::DimensionMismatch { expected: layer.outputs(), got: layer.bias.len() });
            }
            if i > 0 && layers[i - 1].outputs() != layer.inputs() {
                return Err(LearningError::DimensionMismatch {
                    expected: layers[i - 1].outputs(),
                    got: layer.inputs(),
                });
            }
        }
        Ok(Self { layers })
    }

    /// Uniform fan-in initialization, `U(−1/√fan_in, 1/√fan_in)`, for every
    /// layer except the last, which draws from `U(−final_scale, final_scale)`
    /// when `final_scale` is given.
    pub fn init<R: Rng + ?Sized>(
        sizes: &[usize],
        activations: &[Activation],
        final_scale: Option<f64>,
        rng: &mut R,
    ) -> Result<Self, LearningError> {
        if sizes.len() != activations.len() + 1 {
            return Err(LearningError::InvalidConfig("one activation per layer is required".into()));
        }
        let n = activations.len();
        let layers = (0..n)
            .map(|i| {
                let (fan_in, fan_out) = (sizes[i], sizes[i + 1]);
                let bound = match final_scale {
                    Some(s) if i == n - 1 => s,
                    _ => 1.0 / (fan_in as f64).sqrt(),
                };
                let weights = DMatrix::from_fn(fan_out, fan_in, |_, _| rng.gen_range(-bound..=bound));
                let bias = DVector::from_fn(fan_out, |_, _| rng.gen_range(-bound..=bound));
                Layer { weights, bias, activation: activations[i] }
            })
            .collect();
        Self::from_layers(layers)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").outputs()
    }

    /// Layer widths, input first.
    pub fn topology(&self) -> Vec<usize> {
        std::iter::once(self.input_dim()).chain(self.layers.iter().map(Layer::outputs)).collect()
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    pub fn forward(&self, input: &DMatrix<f64>) -> Result<(DMatrix<f64>, MlpCache), LearningError> {
        if input.nrows() != self.input_dim() {
            return Err(LearningError::DimensionMismatch { expected: self.input_dim(), got: input.nrows() });
        }
        let n = self.layers.len();
        let mut cache = MlpCache {
            inputs: Vec::with_capacity(n),
            pre_activations: Vec::with_capacity(n),
            outputs: Vec::with_capacity(n),
        };
        let mut a = input.clone();
        for layer in &self.layers {
            let mut z = &layer.weights * &a;
            for mut col in z.column_iter_mut() {
                col += &layer.bias;
            }
            let y = z.map(|v| layer.activation.apply(v));
            cache.inputs.push(a);
            cache.pre_activations.push(z);
            cache.outputs.push(y.clone());
            a = y;
        }
        Ok((a, cache))
    }

    /// Forward pass of a single sample without keeping a cache.
    pub fn predict(&self, input: &DVector<f64>) -> Result<DVector<f64>, LearningError> {
        if input.len() != self.input_dim() {
            return Err(LearningError::DimensionMismatch { expected: self.input_dim(), got: input.len() });
        }
        let mut a = input.clone();
        for layer in &self.layers {
            let mut z = &layer.weights * &a;
            z += &layer.bias;
            a = z.map(|v| layer.activation.apply(v));
        }
        Ok(a)
    }

    /// Reverse pass for the objective whose gradient with respect to the
    /// output batch is `output_gradient`.
    pub fn backward(
        &self,
        cache: &MlpCache,
        output_gradient: &DMatrix<f64>,
    ) -> Result<(MlpGradients, DMatrix<f64>), LearningError> {
        let last = cache.outputs.last().ok_or(LearningError::DimensionMismatch { expected: 1, got: 0 })?;
        if output_gradient.shape() != last.shape() {
            return Err(LearningError::DimensionMismatch { expected: last.nrows(), got: output_gradient.nrows() });
        }
        let n = self.layers.len();
        let mut weights = Vec::with_capacity(n);
        let mut biases = Vec::with_capacity(n);
        let mut grad = output_gradient.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let z = &cache.pre_activations[i];
            let y = &cache.outputs[i];
            let act = layer.activation;
            let dz = DMatrix::from_fn(z.nrows(), z.ncols(), |r, c| grad[(r, c)] * act.derivative(z[(r, c)], y[(r, c)]));
            weights.push(&dz * cache.inputs[i].transpose());
            biases.push(dz.column_sum());
            grad = layer.weights.tr_mul(&dz);
        }
        weights.reverse();
        biases.reverse();
        Ok((MlpGradients { weights, biases }, grad))
    }

    /// `self ← τ·source + (1 − τ)·self`, parameter by parameter.
    pub fn soft_update(&mut self, source: &Mlp, tau: f64) {
        for (dst, src) in self.slices_mut().into_iter().zip(source.slices()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = tau * s + (1.0 - tau) * *d;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

/// Flat views of a parameter set, weights and biases layer by layer.
pub trait ParamSlices {
    fn slices(&self) -> Vec<&[f64]>;
    fn slices_mut(&mut self) -> Vec<&mut [f64]>;

    fn parameter_count(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }
}

impl ParamSlices for Mlp {
    fn slices(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()]).collect()
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()]).collect()
    }
}

impl ParamSlices for MlpGradients {
    fn slices(&self) -> Vec<&[f64]> {
        self.weights.iter().zip(&self.biases).flat_map(|(w, b)| [w.as_slice(), b.as_slice()]).collect()
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w.as_mut_slice(), b.as_mut_slice()])
            .collect()
    }
}
