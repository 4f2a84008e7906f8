//! Deep deterministic policy gradient training of the gain tuner.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamParams, AdamState};
use super::env::{EnvConfig, Environment, Termination};
use super::mlp::{Mlp, ParamSlices};
use super::networks::{act, init_actor, Critic};
use super::noise::{OuConfig, OuNoise};
use super::replay::{ReplayBuffer, Transition};
use super::spaces::{Action, GainRanges, ACTION_DIM, OBSERVATION_DIM};
use super::LearningError;
use crate::control::ClosedLoop;

/// Random streams split off the run seed, one per consumer.
pub const STREAM_ENV: u64 = 0;
pub const STREAM_NOISE: u64 = 1;
pub const STREAM_INIT: u64 = 2;
pub const STREAM_REPLAY: u64 = 3;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub gamma: f64,
    /// Soft target update rate.
    pub tau: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// L2 penalty on the critic's weight matrices.
    pub critic_weight_decay: f64,
    pub adam: AdamParams,
    pub noise: OuConfig,
    pub episodes: usize,
    /// Width of every hidden layer.
    pub hidden_width: usize,
    pub seed: u64,
    pub gain_ranges: GainRanges,
    pub env: EnvConfig,
    /// Window of the running mean in the training log.
    pub running_mean_window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            buffer_capacity: 100_000,
            batch_size: 64,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            critic_weight_decay: 1e-3,
            adam: AdamParams::default(),
            noise: OuConfig::default(),
            episodes: 1000,
            hidden_width: 36,
            seed: 0,
            gain_ranges: GainRanges::default(),
            env: EnvConfig::default(),
            running_mean_window: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(format!("discount must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(format!("soft update rate must lie in (0, 1], got {}", self.tau));
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return Err("batch size must be at least 1 and no larger than the buffer".into());
        }
        if !(self.actor_lr > 0.0) || !(self.critic_lr > 0.0) {
            return Err("learning rates must be positive".into());
        }
        if !(self.critic_weight_decay >= 0.0) || !self.critic_weight_decay.is_finite() {
            return Err("critic weight decay must be non-negative".into());
        }
        if !self.noise.is_valid() {
            return Err("noise parameters are invalid".into());
        }
        if self.episodes == 0 || self.hidden_width == 0 || self.running_mean_window == 0 {
            return Err("episodes, hidden width and running-mean window must be positive".into());
        }
        if !self.gain_ranges.is_valid() {
            return Err("gain ranges must satisfy 0 ≤ min < max".into());
        }
        self.env.validate()
    }
}

/// Minibatch in column layout.
#[derive(Debug, Clone)]
pub struct Batch {
    pub states: DMatrix<f64>,
    pub actions: DMatrix<f64>,
    pub rewards: DMatrix<f64>,
    pub next_states: DMatrix<f64>,
    /// 0 for terminal transitions, 1 otherwise.
    pub continues: DMatrix<f64>,
}

impl Batch {
    pub fn from_transitions<'a>(items: impl ExactSizeIterator<Item = &'a Transition>) -> Self {
        let n = items.len();
        let mut b = Batch {
            states: DMatrix::zeros(OBSERVATION_DIM, n),
            actions: DMatrix::zeros(ACTION_DIM, n),
            rewards: DMatrix::zeros(1, n),
            next_states: DMatrix::zeros(OBSERVATION_DIM, n),
            continues: DMatrix::zeros(1, n),
        };
        for (c, t) in items.enumerate() {
            b.states.column_mut(c).copy_from_slice(&t.state.0);
            b.actions.column_mut(c).copy_from_slice(&t.action.0);
            b.rewards[(0, c)] = t.reward;
            b.next_states.column_mut(c).copy_from_slice(&t.next_state.0);
            b.continues[(0, c)] = if t.done { 0.0 } else { 1.0 };
        }
        b
    }
}

/// Online and target networks with their optimizer states.
#[derive(Debug, Clone)]
pub struct Agent {
    pub actor: Mlp,
    pub critic: Critic,
    pub actor_target: Mlp,
    pub critic_target: Critic,
    actor_opt: AdamState,
    critic_opt: AdamState,
}

impl Agent {
    pub fn new(actor: Mlp, critic: Critic) -> Self {
        Self {
            actor_opt: AdamState::for_params(&actor),
            critic_opt: AdamState::for_params(&critic),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
        }
    }

    /// Bellman targets `r + γ·Q′(s′, μ′(s′))`, with no bootstrap on terminal
    /// transitions.
    pub fn targets(&self, batch: &Batch, gamma: f64) -> Result<DMatrix<f64>, LearningError> {
        let (next_actions, _) = self.actor_target.forward(&batch.next_states)?;
        let (next_q, _) = self.critic_target.forward(&batch.next_states, &next_actions)?;
        Ok(&batch.rewards + next_q.component_mul(&batch.continues) * gamma)
    }

    /// One regression step of the critic toward `targets`; returns the mean
    /// squared error before the step.
    pub fn critic_step(
        &mut self,
        batch: &Batch,
        targets: &DMatrix<f64>,
        lr: f64,
        weight_decay: f64,
        adam: &AdamParams,
    ) -> Result<f64, LearningError> {
        let n = batch.states.ncols() as f64;
        let (q, cache) = self.critic.forward(&batch.states, &batch.actions)?;
        let diff = q - targets;
        let loss = diff.norm_squared() / n;
        let (mut grads, _) = self.critic.backward(&cache, &(diff * (2.0 / n)))?;
        if weight_decay > 0.0 {
            for (g, net) in [
                (&mut grads.state_path, &self.critic.state_path),
                (&mut grads.action_path, &self.critic.action_path),
                (&mut grads.head, &self.critic.head),
            ] {
                for (gw, layer) in g.weights.iter_mut().zip(&net.layers) {
                    *gw += &layer.weights * (2.0 * weight_decay);
                }
            }
        }
        adam_step(&mut self.critic, &grads, &mut self.critic_opt, lr, adam);
        Ok(loss)
    }

    /// One ascent step of the actor on the mean of `Q(s, μ(s))`; returns that
    /// mean before the step.
    pub fn actor_step(&mut self, batch: &Batch, lr: f64, adam: &AdamParams) -> Result<f64, LearningError> {
        let n = batch.states.ncols() as f64;
        let (actions, actor_cache) = self.actor.forward(&batch.states)?;
        let (q, critic_cache) = self.critic.forward(&batch.states, &actions)?;
        let (_, dq_da) = self.critic.backward(&critic_cache, &DMatrix::from_element(1, q.ncols(), -1.0 / n))?;
        let (grads, _) = self.actor.backward(&actor_cache, &dq_da)?;
        adam_step(&mut self.actor, &grads, &mut self.actor_opt, lr, adam);
        Ok(q.sum() / n)
    }

    pub fn soft_update_targets(&mut self, tau: f64) {
        self.actor_target.soft_update(&self.actor, tau);
        self.critic_target.soft_update(&self.critic, tau);
    }

    /// Full update on one minibatch: critic, actor, then both targets.
    pub fn update(&mut self, batch: &Batch, config: &TrainConfig) -> Result<(f64, f64), LearningError> {
        let y = self.targets(batch, config.gamma)?;
        let critic_loss = self.critic_step(batch, &y, config.critic_lr, config.critic_weight_decay, &config.adam)?;
        let actor_value = self.actor_step(batch, config.actor_lr, &config.adam)?;
        self.soft_update_targets(config.tau);
        Ok((critic_loss, actor_value))
    }

    pub fn q_value(&self, state: &super::spaces::Observation, action: &Action) -> Result<f64, LearningError> {
        let (q, _) = self.critic.forward(
            &DMatrix::from_column_slice(OBSERVATION_DIM, 1, &state.0),
            &DMatrix::from_column_slice(ACTION_DIM, 1, &action.0),
        )?;
        Ok(q[(0, 0)])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub steps: usize,
    pub discounted_return: f64,
    pub running_mean_return: f64,
    /// Critic's estimate of the discounted return from the first state.
    pub critic_value_at_start: f64,
    pub termination: Option<Termination>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub episodes: Vec<EpisodeRecord>,
}

impl TrainingLog {
    pub const CSV_HEADER: &'static str =
        "episode,steps,discounted_return,running_mean_return,critic_value_at_start,termination";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.episodes {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.episode,
                r.steps,
                r.discounted_return,
                r.running_mean_return,
                r.critic_value_at_start,
                r.termination.map_or("none", |t| t.name())
            ));
        }
        out
    }

    /// Mean discounted return over `window` episodes starting at `start`.
    pub fn window_mean(&self, start: usize, window: usize) -> Option<f64> {
        let slice = self.episodes.get(start..start + window)?;
        Some(slice.iter().map(|r| r.discounted_return).sum::<f64>() / window as f64)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub agent: Agent,
    pub log: TrainingLog,
}

/// Training stopped early; carries the log up to the failure.
#[derive(Debug, Clone, thiserror::Error)]
#[error("training aborted: {error}")]
pub struct TrainFailure {
    pub error: LearningError,
    pub log: TrainingLog,
}

pub fn ddpg_train(config: &TrainConfig, closed_loop: ClosedLoop) -> Result<TrainOutcome, TrainFailure> {
    ddpg_train_with(config, closed_loop, |_| {})
}

/// [`ddpg_train`] with a callback after every episode.
pub fn ddpg_train_with(
    config: &TrainConfig,
    closed_loop: ClosedLoop,
    mut on_episode: impl FnMut(&EpisodeRecord),
) -> Result<TrainOutcome, TrainFailure> {
    let mut log = TrainingLog::default();
    let fail = |error: LearningError, log: &TrainingLog| TrainFailure { error, log: log.clone() };
    config.validate().map_err(|e| fail(LearningError::InvalidConfig(e), &log))?;
    let env = Environment::new(closed_loop, config.env.clone(), config.gain_ranges).map_err(|e| fail(e, &log))?;

    let mut env_rng = stream_rng(config.seed, STREAM_ENV);
    let mut noise_rng = stream_rng(config.seed, STREAM_NOISE);
    let mut init_rng = stream_rng(config.seed, STREAM_INIT);
    let mut replay_rng = stream_rng(config.seed, STREAM_REPLAY);

    let actor = init_actor(config.hidden_width, &mut init_rng).map_err(|e| fail(e, &log))?;
    let critic = Critic::init(config.hidden_width, &mut init_rng).map_err(|e| fail(e, &log))?;
    let mut agent = Agent::new(actor, critic);
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let mut noise = OuNoise::new(config.noise.theta);

    for episode in 0..config.episodes {
        let sigma = config.noise.sigma_at(episode, config.episodes);
        noise.reset();
        let (mut obs, mut state) = env.reset(&mut env_rng).map_err(|e| fail(e, &log))?;
        let start_action = act(&agent.actor, &obs).map_err(|e| fail(e, &log))?;
        let critic_value_at_start = agent.q_value(&obs, &start_action).map_err(|e| fail(e, &log))?;

        let mut discounted_return = 0.0;
        let mut discount = 1.0;
        let mut steps = 0;
        let termination = loop {
            let greedy = act(&agent.actor, &obs).map_err(|e| fail(e, &log))?;
            let n = noise.sample(sigma, &mut noise_rng);
            let action = Action::new(std::array::from_fn(|i| greedy.0[i] + n[i]));
            let out = env.step(&state, &action);
            buffer.push(Transition {
                state: obs,
                action,
                reward: out.reward,
                next_state: out.observation,
                done: out.termination.is_some(),
            });
            discounted_return += discount * out.reward;
            discount *= config.gamma;
            steps += 1;

            if let Some(indices) = buffer.sample_indices(config.batch_size, &mut replay_rng) {
                let batch = Batch::from_transitions(indices.iter().map(|&i| buffer.get(i).expect("sampled in range")));
                let (critic_loss, actor_value) = agent.update(&batch, config).map_err(|e| fail(e, &log))?;
                if !critic_loss.is_finite() || !actor_value.is_finite() {
                    let which = if critic_loss.is_finite() { "actor objective" } else { "critic loss" };
                    return Err(fail(LearningError::NonFiniteLoss { episode, step: steps, which: which.into() }, &log));
                }
            }

            obs = out.observation;
            state = out.state;
            if out.done {
                break out.termination;
            }
        };

        let window = config.running_mean_window.min(log.episodes.len() + 1);
        let previous: f64 = log.episodes.iter().rev().take(window - 1).map(|r| r.discounted_return).sum();
        let record = EpisodeRecord {
            episode,
            steps,
            discounted_return,
            running_mean_return: (previous + discounted_return) / window as f64,
            critic_value_at_start,
            termination,
        };
        on_episode(&record);
        log.episodes.push(record);
    }

    if !agent.actor.all_finite() || !agent.critic.slices().iter().all(|s| s.iter().all(|v| v.is_finite())) {
        return Err(fail(
            LearningError::NonFiniteLoss { episode: config.episodes, step: 0, which: "network parameters".into() },
            &log,
        ));
    }
    Ok(TrainOutcome { agent, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::spaces::Observation;
    use rand::Rng;

    fn random_agent(width: usize, seed: u64) -> Agent {
        let mut rng = stream_rng(seed, STREAM_INIT);
        Agent::new(init_actor(width, &mut rng).unwrap(), Critic::init(width, &mut rng).unwrap())
    }

    fn random_transitions(n: usize, seed: u64) -> Vec<Transition> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Transition {
                state: Observation(std::array::from_fn(|_| rng.gen_range(-1.0..1.0))),
                action: Action::new(std::array::from_fn(|_| rng.gen_range(-1.0..1.0))),
                reward: rng.gen_range(-2.0..0.0),
                next_state: Observation(std::array::from_fn(|_| rng.gen_range(-1.0..1.0))),
                done: rng.gen_bool(0.1),
            })
            .collect()
    }

    #[test]
    fn unit_rate_makes_targets_equal_online() {
        let mut agent = random_agent(8, 1);
        let batch = Batch::from_transitions(random_transitions(16, 2).iter());
        let config = TrainConfig { tau: 1.0, ..Default::default() };
        agent.update(&batch, &config).unwrap();
        assert_eq!(agent.actor_target, agent.actor);
        assert_eq!(agent.critic_target, agent.critic);
    }

    #[test]
    fn soft_update_contracts_geometrically() {
        let mut agent = random_agent(8, 3);
        let other = random_agent(8, 4);
        agent.actor_target = other.actor.clone();
        let tau = 0.1;
        let distance = |a: &Agent| -> f64 {
            a.actor_target
                .slices()
                .iter()
                .zip(a.actor.slices())
                .flat_map(|(t, o)| t.iter().zip(o).map(|(x, y)| (x - y).powi(2)))
                .sum::<f64>()
                .sqrt()
        };
        let d0 = distance(&agent);
        for k in 1..=20 {
            agent.actor_target.soft_update(&agent.actor, tau);
            let expected = d0 * (1.0 - tau).powi(k);
            assert!((distance(&agent) - expected).abs() < 1e-12 * d0);
        }
    }

    #[test]
    fn critic_regression_on_frozen_buffer_is_monotone() {
        let mut agent = random_agent(16, 5);
        let data = random_transitions(128, 6);
        let batch = Batch::from_transitions(data.iter());
        // With γ = 0 the targets are the immediate rewards.
        let y = batch.rewards.clone();
        let mut last = f64::INFINITY;
        for _ in 0..100 {
            let loss = agent.critic_step(&batch, &y, 1e-4, 0.0, &AdamParams::default()).unwrap();
            assert!(loss < last, "{loss} ≥ {last}");
            last = loss;
        }
    }

    #[test]
    fn zero_gamma_targets_are_rewards() {
        let agent = random_agent(8, 7);
        let batch = Batch::from_transitions(random_transitions(10, 8).iter());
        let config = TrainConfig { gamma: 0.0, ..Default::default() };
        assert_eq!(agent.targets(&batch, config.gamma).unwrap(), batch.rewards);
    }

    #[test]
    fn config_bounds() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { gamma: 1.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { tau: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..Default::default() }.validate().is_err());
    }
}
