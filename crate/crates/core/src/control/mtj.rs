//! Modified Transpose Jacobian control law.
//!
//! The task-space force is a diagonal PID term plus a memory term built from
//! the previous cycle's force, `h = K·F(t−Δt)`, whose per-axis weights
//! `kᵢ = exp(−(|eᵢ|/e_maxᵢ + |ėᵢ|/ė_maxᵢ))` fade the memory out when the
//! error or its rate is large. The force is mapped to tendons through `Jᵀ`.

use serde::{Deserialize, Serialize};

use crate::numerics::{Mat3x6, Vec3, Vec6};

/// Diagonal entries of `K_P`, `K_I` and `K_D`, one per task axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainSet {
    pub kp: Vec3,
    pub ki: Vec3,
    pub kd: Vec3,
}

impl GainSet {
    pub fn uniform(kp: f64, ki: f64, kd: f64) -> Self {
        Self { kp: Vec3::repeat(kp), ki: Vec3::repeat(ki), kd: Vec3::repeat(kd) }
    }

    /// Gains in action order `(Kp, Ki, Kd)` for x, then y, then z.
    pub fn to_array(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for axis in 0..3 {
            out[3 * axis] = self.kp[axis];
            out[3 * axis + 1] = self.ki[axis];
            out[3 * axis + 2] = self.kd[axis];
        }
        out
    }

    pub fn from_array(v: &[f64; 9]) -> Self {
        Self { kp: Vec3::new(v[0], v[3], v[6]), ki: Vec3::new(v[1], v[4], v[7]), kd: Vec3::new(v[2], v[5], v[8]) }
    }

    pub fn is_valid(&self) -> bool {
        self.to_array().iter().all(|g| g.is_finite() && *g >= 0.0)
    }
}

/// Sensitivity thresholds of the modification term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MtjThresholds {
    /// `e_max` per axis (m).
    pub error: Vec3,
    /// `ė_max` per axis (m/s).
    pub error_rate: Vec3,
}

impl Default for MtjThresholds {
    fn default() -> Self {
        Self { error: Vec3::repeat(1.0), error_rate: Vec3::repeat(10.0) }
    }
}

impl MtjThresholds {
    pub fn is_valid(&self) -> bool {
        self.error.iter().chain(self.error_rate.iter()).all(|v| *v > 0.0 && v.is_finite())
    }
}

/// Controller memory carried between cycles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MtjState {
    /// `∫e dt` (m·s).
    pub integral_error: Vec3,
    /// Task-space force of the previous cycle (N).
    pub previous_force: Vec3,
    pub thresholds: MtjThresholds,
}

impl MtjState {
    pub fn new(thresholds: MtjThresholds) -> Self {
        Self { integral_error: Vec3::zeros(), previous_force: Vec3::zeros(), thresholds }
    }
}

/// Per-axis weights of the modification term, each in `(0, 1]`.
pub fn modification_factor(e: &Vec3, edot: &Vec3, thresholds: &MtjThresholds) -> Vec3 {
    Vec3::from_fn(|i, _| (-(e[i].abs() / thresholds.error[i] + edot[i].abs() / thresholds.error_rate[i])).exp())
}

/// Everything one control cycle produces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MtjOutput {
    /// `Jᵀ F`, before any slack handling (N).
    pub tensions: Vec6,
    /// Task-space force `F` (N).
    pub force: Vec3,
    /// Modification weights `k`.
    pub factors: Vec3,
}

/// One MTJ cycle.
///
/// `j` is the force-distribution Jacobian (tip motion per unit tendon
/// shortening). With `freeze_integral` set the error integral is held, which
/// the closed loop uses while a tendon sits at its tension limit.
pub fn mtj_control(
    e: &Vec3,
    edot: &Vec3,
    gains: &GainSet,
    state: &MtjState,
    j: &Mat3x6,
    dt: f64,
    freeze_integral: bool,
) -> (MtjOutput, MtjState) {
    let integral_error = if freeze_integral { state.integral_error } else { state.integral_error + e * dt };
    let factors = modification_factor(e, edot, &state.thresholds);
    let memory = factors.component_mul(&state.previous_force);
    let force =
        gains.kp.component_mul(e) + gains.ki.component_mul(&integral_error) + gains.kd.component_mul(edot) + memory;
    let tensions = j.transpose() * force;
    let next = MtjState { integral_error, previous_force: force, thresholds: state.thresholds };
    (MtjOutput { tensions, force, factors }, next)
}
