//! Actor and critic networks.
//!
//! The actor maps an observation to an action in `[−1, 1]⁹`. The critic
//! embeds the observation and the action separately, concatenates the two
//! embeddings and regresses a single Q-value.

use nalgebra::DMatrix;
use rand::Rng;

use super::mlp::{Activation, Mlp, MlpCache, MlpGradients, ParamSlices};
use super::spaces::{Action, Observation, ACTION_DIM, OBSERVATION_DIM};
use super::LearningError;

/// Output-layer initialization bound, small enough that the untrained actor
/// starts near the middle of every gain range.
pub const FINAL_LAYER_SCALE: f64 = 3e-3;

pub fn init_actor<R: Rng + ?Sized>(width: usize, rng: &mut R) -> Result<Mlp, LearningError> {
    use Activation::*;
    Mlp::init(
        &[OBSERVATION_DIM, width, width, width, ACTION_DIM],
        &[Relu, Relu, Relu, Tanh],
        Some(FINAL_LAYER_SCALE),
        rng,
    )
}

/// Deterministic action of `actor` for one observation.
pub fn act(actor: &Mlp, obs: &Observation) -> Result<Action, LearningError> {
    let out = actor.predict(&obs.to_dvector())?;
    let mut a = [0.0; ACTION_DIM];
    a.copy_from_slice(out.as_slice());
    Ok(Action::new(a))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Critic {
    pub state_path: Mlp,
    pub action_path: Mlp,
    pub head: Mlp,
}

#[derive(Debug, Clone)]
pub struct CriticCache {
    state: MlpCache,
    action: MlpCache,
    head: MlpCache,
    state_width: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticGradients {
    pub state_path: MlpGradients,
    pub action_path: MlpGradients,
    pub head: MlpGradients,
}

impl Critic {
    pub fn init<R: Rng + ?Sized>(width: usize, rng: &mut R) -> Result<Self, LearningError> {
        use Activation::*;
        Ok(Self {
            state_path: Mlp::init(&[OBSERVATION_DIM, width, width], &[Relu, Relu], None, rng)?,
            action_path: Mlp::init(&[ACTION_DIM, width], &[Relu], None, rng)?,
            head: Mlp::init(&[2 * width, width, width, 1], &[Relu, Relu, Linear], None, rng)?,
        })
    }

    /// Q-values (`1 × batch`) for observation and action batches.
    pub fn forward(
        &self,
        states: &DMatrix<f64>,
        actions: &DMatrix<f64>,
    ) -> Result<(DMatrix<f64>, CriticCache), LearningError> {
        if states.ncols() != actions.ncols() {
            return Err(LearningError::DimensionMismatch { expected: states.ncols(), got: actions.ncols() });
        }
        let (hs, state) = self.state_path.forward(states)?;
        let (ha, action) = self.action_path.forward(actions)?;
        let mut joined = DMatrix::zeros(hs.nrows() + ha.nrows(), hs.ncols());
        joined.rows_mut(0, hs.nrows()).copy_from(&hs);
        joined.rows_mut(hs.nrows(), ha.nrows()).copy_from(&ha);
        let (q, head) = self.head.forward(&joined)?;
        Ok((q, CriticCache { state, action, head, state_width: hs.nrows() }))
    }

    /// Reverse pass; returns parameter gradients and the gradient with
    /// respect to the action batch.
    pub fn backward(
        &self,
        cache: &CriticCache,
        q_gradient: &DMatrix<f64>,
    ) -> Result<(CriticGradients, DMatrix<f64>), LearningError> {
        let (head, g_joined) = self.head.backward(&cache.head, q_gradient)?;
        let w = cache.state_width;
        let g_state = g_joined.rows(0, w).into_owned();
        let g_action = g_joined.rows(w, g_joined.nrows() - w).into_owned();
        let (state_path, _) = self.state_path.backward(&cache.state, &g_state)?;
        let (action_path, g_input) = self.action_path.backward(&cache.action, &g_action)?;
        Ok((CriticGradients { state_path, action_path, head }, g_input))
    }

    pub fn soft_update(&mut self, source: &Critic, tau: f64) {
        self.state_path.soft_update(&source.state_path, tau);
        self.action_path.soft_update(&source.action_path, tau);
        self.head.soft_update(&source.head, tau);
    }
}

impl ParamSlices for Critic {
    fn slices(&self) -> Vec<&[f64]> {
        let mut v = self.state_path.slices();
        v.extend(self.action_path.slices());
        v.extend(self.head.slices());
        v
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.state_path.slices_mut();
        v.extend(self.action_path.slices_mut());
        v.extend(self.head.slices_mut());
        v
    }
}

impl ParamSlices for CriticGradients {
    fn slices(&self) -> Vec<&[f64]> {
        let mut v = self.state_path.slices();
        v.extend(self.action_path.slices());
        v.extend(self.head.slices());
        v
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.state_path.slices_mut();
        v.extend(self.action_path.slices_mut());
        v.extend(self.head.slices_mut());
        v
    }
}
