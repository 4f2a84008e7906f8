//! DDPG gain tuner: networks, optimizer, replay, exploration noise, reward,
//! the regulation environment and the training loop.

pub mod adam;
pub mod ddpg;
pub mod env;
pub mod gradcheck;
pub mod mlp;
pub mod networks;
pub mod noise;
pub mod replay;
pub mod reward;
pub mod snapshot;
pub mod spaces;

use thiserror::Error;

use crate::plant::PlantError;

pub use adam::{adam_step, AdamParams, AdamState};
pub use ddpg::{
    ddpg_train, ddpg_train_with, stream_rng, Agent, Batch, EpisodeRecord, TrainConfig, TrainFailure, TrainOutcome,
    TrainingLog,
};
pub use env::{EnvConfig, EnvState, Environment, StepOutcome, Termination};
pub use gradcheck::{check_actor_gradients, check_critic_gradients, GRADIENT_FLOOR, GRADIENT_STEP, GRADIENT_TOLERANCE};
pub use mlp::{Activation, Layer, Mlp, MlpCache, MlpGradients, ParamSlices};
pub use networks::{act, init_actor, Critic, CriticCache, CriticGradients};
pub use noise::{OuConfig, OuNoise};
pub use replay::{ReplayBuffer, Transition};
pub use reward::{gain_penalty, reward};
pub use snapshot::{Policy, PolicySnapshot, SNAPSHOT_FORMAT_VERSION};
pub use spaces::{Action, GainRange, GainRanges, Observation, ObservationScaling, ACTION_DIM, OBSERVATION_DIM};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearningError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite {which} at episode {episode}, step {step}")]
    NonFiniteLoss { episode: usize, step: usize, which: String },
    #[error("snapshot format version {found} is not supported (expected {expected})")]
    SnapshotVersion { found: u32, expected: u32 },
    #[error("invalid snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Plant(#[from] PlantError),
}
