//! Versioned JSON snapshot of a trained actor.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::mlp::{Activation, Layer, Mlp};
use super::networks::act;
use super::spaces::{GainRanges, Observation, ObservationScaling, ACTION_DIM, OBSERVATION_DIM};
use super::LearningError;
use crate::control::GainSet;
use crate::numerics::{Vec3, Vec6};

pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;

/// A trained actor together with everything needed to run it.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub actor: Mlp,
    pub ranges: GainRanges,
    pub scaling: ObservationScaling,
}

impl Policy {
    pub fn new(actor: Mlp, ranges: GainRanges, scaling: ObservationScaling) -> Result<Self, LearningError> {
        if actor.input_dim() != OBSERVATION_DIM || actor.output_dim() != ACTION_DIM {
            return Err(LearningError::DimensionMismatch { expected: OBSERVATION_DIM, got: actor.input_dim() });
        }
        if !scaling.is_valid() {
            return Err(LearningError::InvalidConfig("observation scales must be positive".into()));
        }
        Ok(Self { actor, ranges, scaling })
    }

    pub fn gains(&self, position: &Vec3, error: &Vec3, tensions: &Vec6) -> Result<GainSet, LearningError> {
        let obs = Observation::assemble(position, error, tensions, &self.scaling);
        Ok(self.ranges.gains(&act(&self.actor, &obs)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRecord {
    /// One inner vector per output row.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySnapshot {
    pub format_version: u32,
    pub topology: Vec<usize>,
    pub activations: Vec<Activation>,
    pub layers: Vec<LayerRecord>,
    pub action_scaling: GainRanges,
    pub observation_scaling: ObservationScaling,
    pub seed: u64,
    pub config_hash: String,
}

impl PolicySnapshot {
    pub fn from_policy(policy: &Policy, seed: u64, config_hash: impl Into<String>) -> Self {
        let layers = policy
            .actor
            .layers
            .iter()
            .map(|l| LayerRecord {
                weights: l.weights.row_iter().map(|r| r.iter().copied().collect()).collect(),
                bias: l.bias.iter().copied().collect(),
            })
            .collect();
        Self {
            format_version: SNAPSHOT_FORMAT_VERSION,
            topology: policy.actor.topology(),
            activations: policy.actor.activations(),
            layers,
            action_scaling: policy.ranges,
            observation_scaling: policy.scaling,
            seed,
            config_hash: config_hash.into(),
        }
    }

    pub fn to_policy(&self) -> Result<Policy, LearningError> {
        if self.format_version != SNAPSHOT_FORMAT_VERSION {
            return Err(LearningError::SnapshotVersion {
                found: self.format_version,
                expected: SNAPSHOT_FORMAT_VERSION,
            });
        }
        if self.topology.len() != self.layers.len() + 1 || self.activations.len() != self.layers.len() {
            return Err(LearningError::Snapshot("topology, activations and layers disagree".into()));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, rec) in self.layers.iter().enumerate() {
            let (inputs, outputs) = (self.topology[i], self.topology[i + 1]);
            if rec.weights.len() != outputs
                || rec.weights.iter().any(|r| r.len() != inputs)
                || rec.bias.len() != outputs
            {
                return Err(LearningError::Snapshot(format!("layer {i} does not match the topology")));
            }
            let flat: Vec<f64> = rec.weights.iter().flatten().copied().collect();
            if !flat.iter().chain(&rec.bias).all(|v| v.is_finite()) {
                return Err(LearningError::Snapshot(format!("layer {i} has non-finite parameters")));
            }
            layers.push(Layer {
                weights: DMatrix::from_row_slice(outputs, inputs, &flat),
                bias: DVector::from_vec(rec.bias.clone()),
                activation: self.activations[i],
            });
        }
        Policy::new(Mlp::from_layers(layers)?, self.action_scaling, self.observation_scaling)
    }

    pub fn to_json(&self) -> Result<String, LearningError> {
        serde_json::to_string_pretty(self).map_err(|e| LearningError::Snapshot(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, LearningError> {
        // Check the version first so an old file reports that, not a schema error.
        let probe: serde_json::Value =
            serde_json::from_str(text).map_err(|e| LearningError::Snapshot(e.to_string()))?;
        match probe.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == SNAPSHOT_FORMAT_VERSION as u64 => {}
            Some(v) => {
                return Err(LearningError::SnapshotVersion { found: v as u32, expected: SNAPSHOT_FORMAT_VERSION })
            }
            None => return Err(LearningError::Snapshot("missing format_version".into())),
        }
        serde_json::from_value(probe).map_err(|e| LearningError::Snapshot(e.to_string()))
    }
}
