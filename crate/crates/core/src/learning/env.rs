//! Closed-loop regulation task seen by the gain-tuning agent.
//!
//! Each episode draws a fixed reference on the holdable surface and random
//! initial tensions. Every step the agent picks nine gains, the MTJ loop runs
//! one control period and the agent is paid the negative squared error plus
//! the ordering penalty.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::reward::reward;
use super::spaces::{Action, GainRanges, Observation, ObservationScaling};
use super::LearningError;
use crate::control::{ClosedLoop, LoopState, ReachableSurface};
use crate::numerics::{Vec3, Vec6};
use crate::plant::{PlantError, TendonTensions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    /// Lateral radius of the reference disk (m).
    pub reference_radius: f64,
    /// Upper bound of the uniform initial tensions (N).
    pub initial_tension_max: f64,
    pub steps_per_episode: usize,
    /// Episode ends once `‖e‖` exceeds this fraction of the workspace radius.
    pub termination_error_fraction: f64,
    /// Episode ends after this many consecutive saturated steps.
    pub saturation_limit: usize,
    /// Resolution of the tabulated reference surface.
    pub surface_samples: usize,
    /// Redraws allowed when the initial tensions over-bend the arm.
    pub reset_retries: usize,
    /// Length unit of the error in the reward (m); 0.01 scores it in cm.
    pub reward_length_unit: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            reference_radius: 0.2,
            initial_tension_max: 5.0,
            steps_per_episode: 50,
            termination_error_fraction: 0.5,
            saturation_limit: 50,
            surface_samples: 512,
            reset_retries: 100,
            reward_length_unit: 0.01,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.reference_radius > 0.0) || !self.reference_radius.is_finite() {
            return Err("reference radius must be positive".into());
        }
        if !(self.initial_tension_max >= 0.0) || !self.initial_tension_max.is_finite() {
            return Err("initial tension bound must be non-negative".into());
        }
        if self.steps_per_episode == 0 || self.saturation_limit == 0 || self.surface_samples < 2 {
            return Err("episode length, saturation limit and surface samples must be positive".into());
        }
        if !(self.termination_error_fraction > 0.0) {
            return Err("termination fraction must be positive".into());
        }
        if !(self.reward_length_unit > 0.0) || !self.reward_length_unit.is_finite() {
            return Err("reward length unit must be positive".into());
        }
        Ok(())
    }
}

/// Why an episode stopped early.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ErrorBound,
    Saturation,
    PlantFailure,
}

impl Termination {
    pub fn name(&self) -> &'static str {
        match self {
            Termination::ErrorBound => "error_bound",
            Termination::Saturation => "saturation",
            Termination::PlantFailure => "plant_failure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvState {
    pub loop_state: LoopState,
    pub reference: Vec3,
    pub step: usize,
    pub saturated_run: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    /// Episode is over, by termination or by the step limit.
    pub done: bool,
    pub termination: Option<Termination>,
    pub state: EnvState,
}

#[derive(Debug, Clone)]
pub struct Environment {
    pub closed_loop: ClosedLoop,
    pub config: EnvConfig,
    pub ranges: GainRanges,
    pub scaling: ObservationScaling,
    surface: ReachableSurface,
}

impl Environment {
    pub fn new(closed_loop: ClosedLoop, config: EnvConfig, ranges: GainRanges) -> Result<Self, LearningError> {
        config.validate().map_err(LearningError::InvalidConfig)?;
        if !ranges.is_valid() {
            return Err(LearningError::InvalidConfig("gain ranges must satisfy 0 ≤ min < max".into()));
        }
        let surface = ReachableSurface::new(
            &closed_loop.plant,
            &closed_loop.controller.slack,
            config.reference_radius,
            config.surface_samples,
        )?;
        let scaling = ObservationScaling {
            length: closed_loop.plant.geometry.total_length(),
            tension: closed_loop.plant.params.max_tension,
        };
        Ok(Self { closed_loop, config, ranges, scaling, surface })
    }

    pub fn surface(&self) -> &ReachableSurface {
        &self.surface
    }

    /// Error norm beyond which an episode terminates (m).
    pub fn termination_radius(&self) -> f64 {
        self.config.termination_error_fraction * self.closed_loop.plant.geometry.total_length()
    }

    /// Reference drawn uniformly from the lateral disk, lifted to the surface.
    pub fn sample_reference<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec3 {
        let r = self.config.reference_radius * rng.gen::<f64>().sqrt();
        let azimuth = rng.gen_range(0.0..std::f64::consts::TAU);
        self.surface.point(r, azimuth).expect("table covers the reference disk")
    }

    pub fn observe(&self, state: &EnvState) -> Observation {
        let plant = &state.loop_state.plant;
        Observation::assemble(&plant.position, &(state.reference - plant.position), &plant.tensions.0, &self.scaling)
    }

    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Observation, EnvState), LearningError> {
        let reference = self.sample_reference(rng);
        let t_max = self.config.initial_tension_max;
        let mut last = None;
        for _ in 0..=self.config.reset_retries {
            let tensions =
                TendonTensions(Vec6::from_fn(|_, _| if t_max > 0.0 { rng.gen_range(0.0..=t_max) } else { 0.0 }));
            match self.closed_loop.reset(tensions) {
                Ok(loop_state) => {
                    let state = EnvState { loop_state, reference, step: 0, saturated_run: 0 };
                    return Ok((self.observe(&state), state));
                }
                Err(e @ PlantError::CurvatureOverflow { .. }) => last = Some(e),
                Err(e) => return Err(e.into()),
            }
        }
        Err(last.expect("at least one attempt").into())
    }

    /// Starts an episode from the given reference and initial tensions.
    pub fn reset_to(
        &self,
        reference: Vec3,
        tensions: TendonTensions,
    ) -> Result<(Observation, EnvState), LearningError> {
        let loop_state = self.closed_loop.reset(tensions)?;
        let state = EnvState { loop_state, reference, step: 0, saturated_run: 0 };
        Ok((self.observe(&state), state))
    }

    pub fn step(&self, state: &EnvState, action: &Action) -> StepOutcome {
        let gains = self.ranges.gains(action);
        let step = state.step + 1;
        let at_limit = step >= self.config.steps_per_episode;
        match self.closed_loop.step(&state.loop_state, &state.reference, &gains) {
            Ok((loop_state, record)) => {
                let saturated_run = if record.saturated { state.saturated_run + 1 } else { 0 };
                let next = EnvState { loop_state, reference: state.reference, step, saturated_run };
                let error = state.reference - loop_state.plant.position;
                let termination = if !(error.norm() <= self.termination_radius()) {
                    Some(Termination::ErrorBound)
                } else if saturated_run >= self.config.saturation_limit {
                    Some(Termination::Saturation)
                } else {
                    None
                };
                StepOutcome {
                    observation: self.observe(&next),
                    reward: reward(&(error / self.config.reward_length_unit), &gains),
                    done: at_limit || termination.is_some(),
                    termination,
                    state: next,
                }
            }
            Err(_) => {
                let error = state.reference - state.loop_state.plant.position;
                let next = EnvState { step, ..*state };
                StepOutcome {
                    observation: self.observe(&next),
                    reward: reward(&(error / self.config.reward_length_unit), &gains),
                    done: true,
                    termination: Some(Termination::PlantFailure),
                    state: next,
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ControllerConfig;
    use crate::kinematics::RobotGeometry;
    use crate::plant::{Plant, PlantParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn env(config: EnvConfig) -> Environment {
        let cl = ClosedLoop::new(
            Plant::new(RobotGeometry::default(), PlantParams::default()).unwrap(),
            ControllerConfig::default(),
        )
        .unwrap();
        Environment::new(cl, config, GainRanges::default()).unwrap()
    }

    #[test]
    fn reset_is_deterministic() {
        let e = env(EnvConfig::default());
        let a = e.reset(&mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = e.reset(&mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_initial_tension_starts_straight() {
        let e = env(EnvConfig { initial_tension_max: 0.0, ..Default::default() });
        let (_, s) = e.reset(&mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(s.loop_state.plant.position, Vec3::new(0.0, 0.0, 0.508));
    }

    #[test]
    fn mid_range_action_at_zero_error_pays_only_the_penalty() {
        let e = env(EnvConfig::default());
        let (_, s) = e.reset_to(Vec3::new(0.0, 0.0, 0.508), TendonTensions::zeros()).unwrap();
        let out = e.step(&s, &Action::zeros());
        let penalty = super::super::reward::gain_penalty(&e.ranges.median());
        assert_eq!(out.reward, -10.0 * penalty as f64);
        assert!(!out.done);
    }

    #[test]
    fn far_reference_terminates_at_once() {
        let e = env(EnvConfig::default());
        let (_, s) = e.reset_to(Vec3::new(0.0, 0.0, -1.0), TendonTensions::zeros()).unwrap();
        let out = e.step(&s, &Action::zeros());
        assert!(out.done);
        assert_eq!(out.termination, Some(Termination::ErrorBound));
    }

    #[test]
    fn episode_ends_at_step_limit() {
        let e = env(EnvConfig { steps_per_episode: 3, ..Default::default() });
        let (_, mut s) = e.reset(&mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        for k in 0..3 {
            let out = e.step(&s, &Action::zeros());
            assert_eq!(out.done, k == 2);
            assert_eq!(out.termination, None);
            s = out.state;
        }
    }

    #[test]
    fn reward_measures_error_in_configured_unit() {
        let reference = Vec3::new(0.0, 0.0, 0.5);
        let in_m = env(EnvConfig { reward_length_unit: 1.0, ..Default::default() });
        let in_cm = env(EnvConfig { reward_length_unit: 0.01, ..Default::default() });
        let (_, s) = in_m.reset_to(reference, TendonTensions::zeros()).unwrap();
        let gains = GainRanges::default().median();
        let a = in_m.step(&s, &Action::zeros());
        let b = in_cm.step(&s, &Action::zeros());
        let e = reference - a.state.loop_state.plant.position;
        let penalty = 10.0 * super::super::reward::gain_penalty(&gains) as f64;
        assert!((a.reward + e.norm_squared() + penalty).abs() < 1e-12);
        assert!((b.reward + 1e4 * e.norm_squared() + penalty).abs() < 1e-9);
    }

    #[test]
    fn rejects_non_positive_reward_unit() {
        assert!(EnvConfig { reward_length_unit: 0.0, ..Default::default() }.validate().is_err());
    }
}
