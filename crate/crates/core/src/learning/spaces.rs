//! Observation and action spaces of the gain-tuning agent.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::control::GainSet;
use crate::numerics::{Vec3, Vec6};

pub const OBSERVATION_DIM: usize = 12;
pub const ACTION_DIM: usize = 9;

/// Divisors that bring observations to unit scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationScaling {
    /// Divisor for positions and errors (m).
    pub length: f64,
    /// Divisor for tensions (N).
    pub tension: f64,
}

impl ObservationScaling {
    pub fn is_valid(&self) -> bool {
        self.length > 0.0 && self.tension > 0.0 && self.length.is_finite() && self.tension.is_finite()
    }
}

/// Normalized `(x, y, z, e_x, e_y, e_z, T₁..T₆)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(pub [f64; OBSERVATION_DIM]);

impl Observation {
    pub fn assemble(position: &Vec3, error: &Vec3, tensions: &Vec6, scaling: &ObservationScaling) -> Self {
        let mut v = [0.0; OBSERVATION_DIM];
        for i in 0..3 {
            v[i] = position[i] / scaling.length;
            v[3 + i] = error[i] / scaling.length;
        }
        for i in 0..6 {
            v[6 + i] = tensions[i] / scaling.tension;
        }
        Self(v)
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }
}

/// Network output, one value in `[−1, 1]` per gain in `(Kp, Ki, Kd)` order for
/// x, then y, then z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action(pub [f64; ACTION_DIM]);

impl Action {
    /// Clamps every component to `[−1, 1]`.
    pub fn new(values: [f64; ACTION_DIM]) -> Self {
        Self(values.map(|v| v.clamp(-1.0, 1.0)))
    }

    pub fn zeros() -> Self {
        Self([0.0; ACTION_DIM])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainRange {
    pub min: f64,
    pub max: f64,
}

impl GainRange {
    /// Affine map with `−1 ↦ min` and `+1 ↦ max` exactly.
    pub fn map(&self, a: f64) -> f64 {
        let a = a.clamp(-1.0, 1.0);
        (self.min * (0.5 - 0.5 * a) + self.max * (0.5 + 0.5 * a)).clamp(self.min, self.max)
    }

    pub fn midpoint(&self) -> f64 {
        self.map(0.0)
    }
}

/// Per-axis ranges of each gain, shared by the three task axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainRanges {
    pub kp: GainRange,
    pub ki: GainRange,
    pub kd: GainRange,
}

impl Default for GainRanges {
    fn default() -> Self {
        Self {
            kp: GainRange { min: 0.0, max: 30.0 },
            ki: GainRange { min: 0.0, max: 3.0 },
            kd: GainRange { min: 0.0, max: 0.04 },
        }
    }
}

impl GainRanges {
    pub fn is_valid(&self) -> bool {
        [self.kp, self.ki, self.kd].iter().all(|r| r.min >= 0.0 && r.max > r.min && r.max.is_finite())
    }

    pub fn gains(&self, action: &Action) -> GainSet {
        let mut g = [0.0; ACTION_DIM];
        for axis in 0..3 {
            g[3 * axis] = self.kp.map(action.0[3 * axis]);
            g[3 * axis + 1] = self.ki.map(action.0[3 * axis + 1]);
            g[3 * axis + 2] = self.kd.map(action.0[3 * axis + 2]);
        }
        GainSet::from_array(&g)
    }

    /// Gains at the middle of every range.
    pub fn median(&self) -> GainSet {
        self.gains(&Action::zeros())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn range_ends_map_exactly() {
        let r = GainRange { min: 0.1, max: 0.3 };
        assert_eq!(r.map(-1.0), 0.1);
        assert_eq!(r.map(1.0), 0.3);
        assert_eq!(GainRanges::default().median(), GainSet::uniform(15.0, 1.5, 0.02));
    }

    #[test]
    fn observation_layout() {
        let scaling = ObservationScaling { length: 0.5, tension: 100.0 };
        let obs = Observation::assemble(
            &Vec3::new(0.1, 0.2, 0.3),
            &Vec3::new(-0.05, 0.0, 0.05),
            &Vec6::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0),
            &scaling,
        );
        assert_eq!(obs.0, [0.2, 0.4, 0.6, -0.1, 0.0, 0.1, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06]);
    }

    proptest! {
        #[test]
        fn gains_stay_in_range(a in proptest::array::uniform9(-3.0f64..3.0), lo in 0.0f64..5.0, w in 1e-6f64..10.0) {
            let r = GainRange { min: lo, max: lo + w };
            let ranges = GainRanges { kp: r, ki: r, kd: r };
            for g in ranges.gains(&Action(a)).to_array() {
                prop_assert!(g >= r.min && g <= r.max);
            }
        }
    }
}
