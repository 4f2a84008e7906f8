//! Quasi-static tendon-tension plant.
//!
//! Each segment bends like a linear Euler–Bernoulli beam under the moment of
//! every tendon that passes its distal disk: `κ⃗ⱼ = Mⱼ / EIⱼ` with
//! `Mⱼ = Σᵢ Tᵢ·d·(cos θᵢ, sin θᵢ)`. The backbone is inextensible, and
//! gravity, friction and inertia are neglected. Tensions can optionally lag
//! their command through a first-order filter, which stands in for the
//! tension dynamics of a real actuator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{
    arcs_to_lengths, forward_kinematics, KinematicsError, RobotGeometry, SegmentArc, TendonLengths, SEGMENTS, TENDONS,
    TENDONS_PER_SEGMENT,
};
use crate::numerics::{Vec3, Vec6};

/// Load-cell limit of the reference hardware (N).
pub const DEFAULT_MAX_TENSION: f64 = 294.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("segment {segment}: equilibrium curvature gives κ·d = {kappa_d:.4} ≥ 1")]
    CurvatureOverflow { segment: usize, kappa_d: f64 },
    #[error("tension {tendon} is not finite")]
    NonFiniteTension { tendon: usize },
    #[error("time step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("invalid plant parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// Six tendon tensions (N).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TendonTensions(pub Vec6);

impl TendonTensions {
    pub fn zeros() -> Self {
        Self(Vec6::zeros())
    }

    pub fn max(&self) -> f64 {
        self.0.max()
    }

    pub fn min(&self) -> f64 {
        self.0.min()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantParams {
    /// Flexural rigidity of each segment (N·m²).
    pub flexural_rigidity: [f64; SEGMENTS],
    /// First-order lag of realized tensions (s); 0 makes the plant memory-less.
    pub tension_time_constant: f64,
    /// Hard clamp on every realized tension (N).
    pub max_tension: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self { flexural_rigidity: [0.5, 0.5], tension_time_constant: 0.05, max_tension: DEFAULT_MAX_TENSION }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        if !self.flexural_rigidity.iter().all(|ei| *ei > 0.0 && ei.is_finite()) {
            return Err(PlantError::InvalidParams("flexural rigidity must be positive".into()));
        }
        if !(self.tension_time_constant >= 0.0) || !self.tension_time_constant.is_finite() {
            return Err(PlantError::InvalidParams("tension time constant must be non-negative".into()));
        }
        if !(self.max_tension > 0.0) || !self.max_tension.is_finite() {
            return Err(PlantError::InvalidParams("max tension must be positive".into()));
        }
        Ok(())
    }
}

/// Snapshot of the simulated arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub tensions: TendonTensions,
    pub arcs: [SegmentArc; 2],
    pub lengths: TendonLengths,
    pub position: Vec3,
    pub velocity: Vec3,
    pub time: f64,
    /// Some commanded tension was clipped at `max_tension` on the last step.
    pub saturated: bool,
    /// Some commanded tension was negative and clipped at zero on the last step.
    pub slack_clipped: bool,
}

/// Geometry plus statics parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    pub geometry: RobotGeometry,
    pub params: PlantParams,
}

impl Plant {
    pub fn new(geometry: RobotGeometry, params: PlantParams) -> Result<Self, PlantError> {
        geometry.validate()?;
        params.validate()?;
        Ok(Self { geometry, params })
    }

    /// Equilibrium arcs under the given tensions.
    pub fn static_equilibrium(&self, t: &TendonTensions) -> Result<[SegmentArc; 2], PlantError> {
        for (i, v) in t.0.iter().enumerate() {
            if !v.is_finite() {
                return Err(PlantError::NonFiniteTension { tendon: i + 1 });
            }
        }
        let d = self.geometry.pitch_radius;
        // Per-triple moments, taken about each triple's mean tension so an
        // equal offset on a triple cancels to round-off.
        let mut triple = [[0.0; 2]; SEGMENTS];
        for (s, m) in triple.iter_mut().enumerate() {
            let base = s * TENDONS_PER_SEGMENT;
            let mean = (t.0[base] + t.0[base + 1] + t.0[base + 2]) / 3.0;
            for i in base..base + TENDONS_PER_SEGMENT {
                let theta = self.geometry.tendon_angle(i);
                let dev = t.0[i] - mean;
                m[0] += dev * d * theta.cos();
                m[1] += dev * d * theta.sin();
            }
        }
        let mut arcs = [SegmentArc::straight(0.0); SEGMENTS];
        for j in 0..SEGMENTS {
            // Segment j carries every triple that terminates at or beyond it.
            let (mut mx, mut my) = (0.0, 0.0);
            for m in &triple[j..] {
                mx += m[0];
                my += m[1];
            }
            let ei = self.params.flexural_rigidity[j];
            let arc = SegmentArc::from_curvature_vector(mx / ei, my / ei, self.geometry.segment_lengths[j]);
            if arc.kappa * d >= 1.0 {
                return Err(PlantError::CurvatureOverflow { segment: j, kappa_d: arc.kappa * d });
            }
            arcs[j] = arc;
        }
        Ok(arcs)
    }

    /// Plant at rest under `tensions`, with zero velocity at time zero.
    pub fn settle(&self, tensions: TendonTensions) -> Result<PlantState, PlantError> {
        let (clamped, saturated, slack_clipped) = self.clamp(&tensions);
        let arcs = self.static_equilibrium(&clamped)?;
        let lengths = arcs_to_lengths(&arcs, &self.geometry)?;
        let position = forward_kinematics(&lengths, &self.geometry)?;
        Ok(PlantState {
            tensions: clamped,
            arcs,
            lengths,
            position,
            velocity: Vec3::zeros(),
            time: 0.0,
            saturated,
            slack_clipped,
        })
    }

    fn clamp(&self, t: &TendonTensions) -> (TendonTensions, bool, bool) {
        let max = self.params.max_tension;
        let saturated = t.0.iter().any(|v| *v > max);
        let slack_clipped = t.0.iter().any(|v| *v < 0.0);
        (TendonTensions(t.0.map(|v| v.clamp(0.0, max))), saturated, slack_clipped)
    }

    /// Advances the plant by `dt` under the commanded tensions.
    pub fn step(&self, command: &TendonTensions, state: &PlantState, dt: f64) -> Result<PlantState, PlantError> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(PlantError::InvalidStep(dt));
        }
        for (i, v) in command.0.iter().enumerate() {
            if !v.is_finite() {
                return Err(PlantError::NonFiniteTension { tendon: i + 1 });
            }
        }
        let (target, saturated, slack_clipped) = self.clamp(command);
        let tau = self.params.tension_time_constant;
        let tensions = if tau == 0.0 {
            target
        } else {
            // Exact zero-order-hold discretization of Ṫ = (T_cmd − T)/τ.
            let alpha = 1.0 - (-dt / tau).exp();
            TendonTensions(state.tensions.0 + (target.0 - state.tensions.0) * alpha)
        };
        let arcs = self.static_equilibrium(&tensions)?;
        let lengths = arcs_to_lengths(&arcs, &self.geometry)?;
        let position = forward_kinematics(&lengths, &self.geometry)?;
        Ok(PlantState {
            tensions,
            arcs,
            lengths,
            position,
            velocity: (position - state.position) / dt,
            time: state.time + dt,
            saturated,
            slack_clipped,
        })
    }
}

/// CSV header for [`plant_csv_row`].
pub const PLANT_CSV_HEADER: &str = "t,T1,T2,T3,T4,T5,T6,l1,l2,l3,l4,l5,l6,x,y,z";

/// One CSV row: time, six tensions, six lengths, tip position.
pub fn plant_csv_row(state: &PlantState) -> String {
    let mut row = format!("{}", state.time);
    for v in state.tensions.0.iter().chain(state.lengths.0.iter()).chain(state.position.iter()) {
        row.push(',');
        row.push_str(&v.to_string());
    }
    row
}

/// Tendon indices routed through segment `segment` (0-based).
pub fn tendons_of_segment(segment: usize) -> std::ops::Range<usize> {
    segment * TENDONS_PER_SEGMENT..(segment + 1) * TENDONS_PER_SEGMENT
}

const _: () = assert!(TENDONS == SEGMENTS * TENDONS_PER_SEGMENT);
