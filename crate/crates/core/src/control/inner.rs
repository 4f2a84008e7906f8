//! Inner tension loop of the cascaded structure.
//!
//! Hardware with position/velocity servos cannot command tension directly, so
//! a decentralized PI loop per tendon turns the tension error into a tendon
//! shortening rate. In simulation the emulated actuator converts that rate
//! into a tension command (`actuator_gain`, N per m/s) which the plant's
//! first-order tension lag then realizes.

use serde::{Deserialize, Serialize};

use crate::numerics::Vec6;
use crate::plant::TendonTensions;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InnerLoopParams {
    /// Proportional gain (m/s per N).
    pub kp: f64,
    /// Integral gain (m/s per N·s).
    pub ki: f64,
    /// Inner sub-steps per outer control period.
    pub substeps: usize,
    /// Shortening-rate saturation (m/s).
    pub max_rate: f64,
    /// Tension produced per unit shortening rate by the emulated actuator.
    pub actuator_gain: f64,
}

impl Default for InnerLoopParams {
    fn default() -> Self {
        // Integral zero placed on the 0.05 s tension lag, 40 rad/s crossover
        // with a 2000 N/(m/s) actuator.
        Self { kp: 1e-3, ki: 2e-2, substeps: 10, max_rate: 0.5, actuator_gain: 2000.0 }
    }
}

impl InnerLoopParams {
    pub fn is_valid(&self) -> bool {
        self.kp >= 0.0
            && self.ki >= 0.0
            && self.substeps >= 1
            && self.max_rate > 0.0
            && self.actuator_gain > 0.0
            && [self.kp, self.ki, self.max_rate, self.actuator_gain].iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InnerLoopState {
    /// `∫(T_des − T_meas) dt` per tendon (N·s).
    pub integral: Vec6,
}

/// One inner PI update; returns the shortening-rate command and whether it
/// was clipped at `max_rate`.
///
/// The integrator holds while the output is clipped.
pub fn inner_loop_step(
    desired: &TendonTensions,
    measured: &TendonTensions,
    state: &InnerLoopState,
    params: &InnerLoopParams,
    dt: f64,
) -> (Vec6, InnerLoopState, bool) {
    let error = desired.0 - measured.0;
    let integral = state.integral + error * dt;
    let raw = error * params.kp + integral * params.ki;
    let saturated = raw.iter().any(|r| r.abs() > params.max_rate);
    if saturated {
        let clipped = raw.map(|r| r.clamp(-params.max_rate, params.max_rate));
        let held = state.integral.zip_zip_map(
            &integral,
            &raw,
            |old, new, r| {
                if r.abs() > params.max_rate {
                    old
                } else {
                    new
                }
            },
        );
        return (clipped, InnerLoopState { integral: held }, true);
    }
    (raw, InnerLoopState { integral }, false)
}

/// Tension command the emulated actuator issues for a shortening rate.
pub fn actuator_command(rate: &Vec6, params: &InnerLoopParams) -> TendonTensions {
    TendonTensions(rate * params.actuator_gain)
}
