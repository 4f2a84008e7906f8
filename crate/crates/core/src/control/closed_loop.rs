//! One outer control cycle: measure, MTJ, slack layer, optional inner tension
//! loop, plant.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::inner::{actuator_command, inner_loop_step, InnerLoopParams, InnerLoopState};
use super::mtj::{mtj_control, GainSet, MtjState, MtjThresholds};
use super::reachable::{force_equilibrium, holding_force};
use super::slack::{apply_slack_strategy, SlackStrategy};
use crate::kinematics::actuation_jacobian;
use crate::numerics::{Vec3, Vec6};
use crate::plant::{Plant, PlantError, PlantState, TendonTensions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    pub thresholds: MtjThresholds,
    pub slack: SlackStrategy,
    /// Cutoff of the first-order filter on `ė` (Hz); `None` uses the raw
    /// first difference.
    pub derivative_cutoff_hz: Option<f64>,
    /// Route commands through the inner PI tension loop.
    pub cascade: bool,
    pub inner: InnerLoopParams,
    /// Outer control period (s).
    pub dt: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            thresholds: MtjThresholds::default(),
            slack: SlackStrategy::PerSegmentSymmetric,
            derivative_cutoff_hz: None,
            cascade: false,
            inner: InnerLoopParams::default(),
            dt: 0.01,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !self.thresholds.is_valid() {
            return Err("controller thresholds must be positive".into());
        }
        if !self.slack.is_valid() {
            return Err("pretension must be non-negative".into());
        }
        if let Some(fc) = self.derivative_cutoff_hz {
            if !(fc > 0.0) || !fc.is_finite() {
                return Err("derivative cutoff must be positive".into());
            }
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err("control period must be positive".into());
        }
        if !self.inner.is_valid() {
            return Err("inner loop parameters are invalid".into());
        }
        Ok(())
    }
}

/// Largest lateral force [`ClosedLoop::reset_holding`] searches (N).
pub const HOLDING_FORCE_LIMIT: f64 = 1000.0;

/// Full closed-loop state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopState {
    pub plant: PlantState,
    pub mtj: MtjState,
    pub inner: InnerLoopState,
    previous_error: Option<Vec3>,
    filtered_rate: Vec3,
}

/// Telemetry of one cycle. `error` and `error_rate` are the values the
/// controller acted on, measured before the plant moved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub desired: Vec3,
    pub position: Vec3,
    pub error: Vec3,
    pub error_rate: Vec3,
    pub force: Vec3,
    pub factors: Vec3,
    pub raw_tensions: Vec6,
    pub commanded_tensions: Vec6,
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    pub plant: Plant,
    pub controller: ControllerConfig,
}

impl ClosedLoop {
    pub fn new(plant: Plant, controller: ControllerConfig) -> Result<Self, String> {
        controller.validate()?;
        if controller.cascade && plant.params.tension_time_constant <= 0.0 {
            return Err("the cascaded inner loop needs a positive tension time constant".into());
        }
        Ok(Self { plant, controller })
    }

    pub fn reset(&self, initial_tensions: TendonTensions) -> Result<LoopState, PlantError> {
        Ok(LoopState {
            plant: self.plant.settle(initial_tensions)?,
            mtj: MtjState::new(self.controller.thresholds),
            inner: InnerLoopState::default(),
            previous_error: None,
            filtered_rate: Vec3::zeros(),
        })
    }

    /// Rest state holding the tip at the lateral distance and azimuth of
    /// `target`, with the controller memory already carrying the holding
    /// force. Its height is that of the holdable surface, not `target.z`.
    pub fn reset_holding(&self, target: &Vec3) -> Result<LoopState, PlantError> {
        let radius = target.x.hypot(target.y);
        let force =
            holding_force(&self.plant, &self.controller.slack, radius, target.y.atan2(target.x), HOLDING_FORCE_LIMIT)?
                .ok_or_else(|| PlantError::InvalidParams(format!("lateral distance {radius} m cannot be held")))?;
        let plant = force_equilibrium(&self.plant, &self.controller.slack, &force)?;
        let inner = &self.controller.inner;
        let integral = if inner.ki > 0.0 { plant.tensions.0 / (inner.ki * inner.actuator_gain) } else { Vec6::zeros() };
        Ok(LoopState {
            plant,
            mtj: MtjState { previous_force: force, ..MtjState::new(self.controller.thresholds) },
            inner: InnerLoopState { integral },
            previous_error: None,
            filtered_rate: Vec3::zeros(),
        })
    }

    /// Runs one outer cycle toward `desired` with the given gains.
    pub fn step(
        &self,
        state: &LoopState,
        desired: &Vec3,
        gains: &GainSet,
    ) -> Result<(LoopState, StepRecord), PlantError> {
        let dt = self.controller.dt;
        let position = state.plant.position;
        let error = desired - position;
        let raw_rate = match state.previous_error {
            Some(prev) => (error - prev) / dt,
            None => Vec3::zeros(),
        };
        let error_rate = match self.controller.derivative_cutoff_hz {
            Some(fc) if state.previous_error.is_some() => {
                let alpha = dt / (dt + 1.0 / (2.0 * PI * fc));
                state.filtered_rate + (raw_rate - state.filtered_rate) * alpha
            }
            _ => raw_rate,
        };

        let j = actuation_jacobian(&state.plant.lengths, &self.plant.geometry)?.matrix;
        let (out, mtj) = mtj_control(&error, &error_rate, gains, &state.mtj, &j, dt, state.plant.saturated);
        let commanded = apply_slack_strategy(&TendonTensions(out.tensions), &self.controller.slack);

        let (plant, inner) = if self.controller.cascade {
            let inner_params = &self.controller.inner;
            let sub_dt = dt / inner_params.substeps as f64;
            let mut plant = state.plant;
            let mut inner = state.inner;
            let mut saturated = false;
            for _ in 0..inner_params.substeps {
                let (rate, next, _) = inner_loop_step(&commanded, &plant.tensions, &inner, inner_params, sub_dt);
                inner = next;
                let prev_position = plant.position;
                plant = self.plant.step(&actuator_command(&rate, inner_params), &plant, sub_dt)?;
                saturated |= plant.saturated;
                // Velocity over the whole outer period.
                plant.velocity = (plant.position - prev_position) / sub_dt;
            }
            plant.velocity = (plant.position - state.plant.position) / dt;
            plant.saturated = saturated;
            (plant, inner)
        } else {
            (self.plant.step(&commanded, &state.plant, dt)?, state.inner)
        };

        let record = StepRecord {
            desired: *desired,
            position,
            error,
            error_rate,
            force: out.force,
            factors: out.factors,
            raw_tensions: out.tensions,
            commanded_tensions: commanded.0,
            saturated: plant.saturated,
        };
        let next = LoopState { plant, mtj, inner, previous_error: Some(error), filtered_rate: error_rate };
        Ok((next, record))
    }
}
