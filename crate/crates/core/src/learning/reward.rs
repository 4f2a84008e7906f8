//! Per-step reward: squared tracking error plus a gain-ordering penalty.

use crate::control::GainSet;
use crate::numerics::Vec3;

/// Weight of each violated gain ordering.
pub const ORDERING_PENALTY: f64 = 10.0;

/// Number of violated orderings `Kp > Ki > Kd` over the three axes; a tie
/// counts as a violation.
pub fn gain_penalty(gains: &GainSet) -> u32 {
    (0..3)
        .map(|i| {
            let (kp, ki, kd) = (gains.kp[i], gains.ki[i], gains.kd[i]);
            (kp <= ki) as u32 + (kp <= kd) as u32 + (ki <= kd) as u32
        })
        .sum()
}

/// `−(‖e‖² + 10·penalty)`.
pub fn reward(error: &Vec3, gains: &GainSet) -> f64 {
    -(error.norm_squared() + ORDERING_PENALTY * gain_penalty(gains) as f64)
}
