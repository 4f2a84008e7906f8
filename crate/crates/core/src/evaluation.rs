//! Reference trajectories, the RMSE metric and closed-loop evaluation runs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{ClosedLoop, ControllerConfig, GainSet, SlackStrategy, StepRecord};
use crate::learning::{LearningError, Policy};
use crate::numerics::Vec3;
use crate::plant::{Plant, PlantError};

/// Central-difference step for trajectories without an analytic velocity (s).
pub const VELOCITY_STEP: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvaluationError {
    #[error("membership support requires a < b, got a = {a}, b = {b}")]
    InvalidSupport { a: f64, b: f64 },
    #[error("no samples to evaluate")]
    EmptySequence,
    #[error("unknown trajectory '{0}'; valid names are: circle, lemniscate")]
    UnknownTrajectory(String),
    #[error(transparent)]
    Learning(#[from] LearningError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error("invalid controller: {0}")]
    Controller(String),
}

/// Linear S-shaped membership: 0 up to `a`, a straight ramp to 1 at `b`.
pub fn linsmf(x: f64, a: f64, b: f64) -> Result<f64, EvaluationError> {
    if !(a < b) {
        return Err(EvaluationError::InvalidSupport { a, b });
    }
    Ok(if x <= a {
        0.0
    } else if x >= b {
        1.0
    } else {
        (x - a) / (b - a)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub position: Vec3,
    pub velocity: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Trajectory {
    /// Horizontal circle of radius 0.15 m at z = 0.48 m, period 20π s.
    Circle,
    /// Figure-eight with a modulated radius and a height that drops with
    /// lateral distance. `alternate` puts `cos t` instead of `sin t` in x.
    Lemniscate {
        #[serde(default)]
        alternate: bool,
    },
}

impl Trajectory {
    pub const NAMES: [&'static str; 2] = ["circle", "lemniscate"];

    pub fn from_name(name: &str) -> Result<Self, EvaluationError> {
        match name {
            "circle" => Ok(Trajectory::Circle),
            "lemniscate" => Ok(Trajectory::Lemniscate { alternate: false }),
            other => Err(EvaluationError::UnknownTrajectory(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Trajectory::Circle => "circle",
            Trajectory::Lemniscate { .. } => "lemniscate",
        }
    }

    /// One full period (s).
    pub fn period(&self) -> f64 {
        match self {
            Trajectory::Circle => 20.0 * std::f64::consts::PI,
            Trajectory::Lemniscate { .. } => 2.0 * std::f64::consts::PI,
        }
    }

    pub fn sample(&self, t: f64) -> TrajectorySample {
        match *self {
            Trajectory::Circle => circle_trajectory(t),
            Trajectory::Lemniscate { alternate } => lemniscate_trajectory(t, alternate),
        }
    }
}

pub fn circle_trajectory(t: f64) -> TrajectorySample {
    let (s, c) = (0.1 * t).sin_cos();
    TrajectorySample {
        t,
        position: Vec3::new(0.15 * s, 0.15 * c, 0.48),
        velocity: Vec3::new(0.015 * c, -0.015 * s, 0.0),
    }
}

fn lemniscate_position(t: f64, alternate: bool) -> Vec3 {
    let radius = 0.2 + 0.025 * (14.0 * t).cos();
    let x = radius * if alternate { t.cos() } else { t.sin() };
    let y = radius * t.sin() * t.cos();
    let height = (0.4f64 * 0.4 - x * x - y * y).max(0.0).sqrt();
    let z = 0.2 * linsmf(height, 0.25, 0.4).expect("fixed support is valid") + 0.2;
    Vec3::new(x, y, z)
}

pub fn lemniscate_trajectory(t: f64, alternate: bool) -> TrajectorySample {
    let h = VELOCITY_STEP;
    let velocity = (lemniscate_position(t + h, alternate) - lemniscate_position(t - h, alternate)) / (2.0 * h);
    TrajectorySample { t, position: lemniscate_position(t, alternate), velocity }
}

/// `√(mean ‖e‖²)`.
pub fn rmse(errors: &[Vec3]) -> Result<f64, EvaluationError> {
    if errors.is_empty() {
        return Err(EvaluationError::EmptySequence);
    }
    Ok((errors.iter().map(|e| e.norm_squared()).sum::<f64>() / errors.len() as f64).sqrt())
}

/// Per-axis `√(mean eᵢ²)`.
pub fn rmse_per_axis(errors: &[Vec3]) -> Result<Vec3, EvaluationError> {
    if errors.is_empty() {
        return Err(EvaluationError::EmptySequence);
    }
    let sum = errors.iter().fold(Vec3::zeros(), |acc, e| acc + e.component_mul(e));
    Ok((sum / errors.len() as f64).map(f64::sqrt))
}

/// Source of the gains at every control step.
#[derive(Debug, Clone, Copy)]
pub enum GainSource<'a> {
    Fixed(GainSet),
    Policy(&'a Policy),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub rmse: f64,
    pub rmse_per_axis: [f64; 3],
    /// Largest commanded tension over the run (N).
    pub max_tension: f64,
    /// Steps on which some tension hit its upper limit.
    pub saturation_count: usize,
    /// Mean of each gain over the run, in action order.
    pub mean_gains: [f64; 9],
    pub steps: usize,
    /// Set when the plant failed before the run finished.
    pub failure: Option<String>,
}

pub const RUN_CSV_HEADER: &str = "t,xd,yd,zd,x,y,z,ex,ey,ez,\
Kp_x,Ki_x,Kd_x,Kp_y,Ki_y,Kd_y,Kp_z,Ki_z,Kd_z,\
T1,T2,T3,T4,T5,T6,T1_raw,T2_raw,T3_raw,T4_raw,T5_raw,T6_raw,k_x,k_y,k_z,saturated";

fn csv_row(t: f64, rec: &StepRecord, gains: &GainSet) -> String {
    let mut fields: Vec<String> = vec![t.to_string()];
    let values = rec
        .desired
        .iter()
        .chain(rec.position.iter())
        .chain(rec.error.iter())
        .copied()
        .chain(gains.to_array())
        .chain(rec.commanded_tensions.iter().copied())
        .chain(rec.raw_tensions.iter().copied())
        .chain(rec.factors.iter().copied());
    fields.extend(values.map(|v| v.to_string()));
    fields.push((rec.saturated as u8).to_string());
    fields.join(",")
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub metrics: RunMetrics,
    /// Per-step log with [`RUN_CSV_HEADER`] as its first line.
    pub csv: String,
    pub positions: Vec<Vec3>,
    pub records: Vec<StepRecord>,
}

/// Tracks `trajectory` for `duration` seconds, starting at rest on the
/// holdable surface below the trajectory's first point.
///
/// A plant failure ends the run early; metrics then cover the completed
/// steps and `failure` holds the reason.
pub fn evaluate_run(
    closed_loop: &ClosedLoop,
    trajectory: &Trajectory,
    source: GainSource<'_>,
    duration: f64,
) -> Result<RunResult, EvaluationError> {
    let dt = closed_loop.controller.dt;
    let steps = (duration / dt).round() as usize;
    let mut state = closed_loop.reset_holding(&trajectory.sample(0.0).position)?;
    let mut csv = String::from(RUN_CSV_HEADER);
    csv.push('\n');
    let mut errors = Vec::with_capacity(steps);
    let mut positions = Vec::with_capacity(steps);
    let mut records = Vec::with_capacity(steps);
    let mut gain_sum = [0.0; 9];
    let mut max_tension = 0.0f64;
    let mut saturation_count = 0;
    let mut failure = None;
    for n in 0..steps {
        let t = n as f64 * dt;
        let desired = trajectory.sample(t).position;
        let gains = match source {
            GainSource::Fixed(g) => g,
            GainSource::Policy(p) => {
                let plant = &state.plant;
                p.gains(&plant.position, &(desired - plant.position), &plant.tensions.0)?
            }
        };
        let (next, rec) = match closed_loop.step(&state, &desired, &gains) {
            Ok(v) => v,
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        };
        for (s, g) in gain_sum.iter_mut().zip(gains.to_array()) {
            *s += g;
        }
        max_tension = max_tension.max(rec.commanded_tensions.max());
        saturation_count += rec.saturated as usize;
        errors.push(rec.error);
        positions.push(rec.position);
        csv.push_str(&csv_row(t, &rec, &gains));
        csv.push('\n');
        records.push(rec);
        state = next;
    }
    let total = rmse(&errors)?;
    let per_axis = rmse_per_axis(&errors)?;
    let count = errors.len() as f64;
    let metrics = RunMetrics {
        rmse: total,
        rmse_per_axis: [per_axis.x, per_axis.y, per_axis.z],
        max_tension,
        saturation_count,
        mean_gains: gain_sum.map(|s| s / count),
        steps: errors.len(),
        failure,
    };
    Ok(RunResult { metrics, csv, positions, records })
}

/// Outcome of one slack strategy in [`compare_slack_strategies`].
#[derive(Debug, Clone)]
pub struct StrategyRun {
    pub strategy: SlackStrategy,
    pub result: Result<RunResult, EvaluationError>,
}

/// Runs the same fixed-gain tracking task once per slack strategy.
pub fn compare_slack_strategies(
    plant: &Plant,
    controller: &ControllerConfig,
    strategies: &[SlackStrategy],
    trajectory: &Trajectory,
    gains: GainSet,
    duration: f64,
) -> Vec<StrategyRun> {
    strategies
        .iter()
        .map(|&strategy| {
            let config = ControllerConfig { slack: strategy, ..controller.clone() };
            let result = ClosedLoop::new(plant.clone(), config)
                .map_err(EvaluationError::Controller)
                .and_then(|cl| evaluate_run(&cl, trajectory, GainSource::Fixed(gains), duration));
            StrategyRun { strategy, result }
        })
        .collect()
}

/// Largest pointwise distance between two position traces of equal length.
pub fn max_deviation(a: &[Vec3], b: &[Vec3]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    Some(a.iter().zip(b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::RobotGeometry;
    use crate::plant::PlantParams;
    use std::f64::consts::PI;

    fn closed_loop() -> ClosedLoop {
        ClosedLoop::new(
            Plant::new(RobotGeometry::default(), PlantParams::default()).unwrap(),
            ControllerConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn linsmf_values() {
        assert_eq!(linsmf(0.2, 0.25, 0.4).unwrap(), 0.0);
        assert_eq!(linsmf(0.4, 0.25, 0.4).unwrap(), 1.0);
        assert!((linsmf(0.325, 0.25, 0.4).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(linsmf(0.3, 0.4, 0.4), Err(EvaluationError::InvalidSupport { .. })));
    }

    #[test]
    fn lemniscate_values() {
        let s = lemniscate_trajectory(0.0, false);
        assert_eq!((s.position.x, s.position.y), (0.0, 0.0));
        assert_eq!(s.position.z, 0.4);
        let s = lemniscate_trajectory(PI / 2.0, false);
        let x = 0.2 + 0.025 * (7.0 * PI).cos();
        assert!((s.position.x - x).abs() < 1e-15);
        assert!(s.position.y.abs() < 1e-16);
    }

    #[test]
    fn circle_values() {
        let s = circle_trajectory(0.0);
        assert_eq!(s.position, Vec3::new(0.0, 0.15, 0.48));
        let s = circle_trajectory(5.0 * PI);
        assert!((s.position - Vec3::new(0.15, 0.0, 0.48)).norm() < 1e-15);
        for k in 0..100 {
            let p = circle_trajectory(k as f64 * 0.731).position;
            assert!((p.x * p.x + p.y * p.y - 0.0225).abs() < 1e-15);
        }
    }

    #[test]
    fn circle_velocity_matches_difference() {
        let t = 3.3;
        let h = 1e-5;
        let fd = (circle_trajectory(t + h).position - circle_trajectory(t - h).position) / (2.0 * h);
        assert!((fd - circle_trajectory(t).velocity).norm() < 1e-9);
    }

    #[test]
    fn rmse_cases() {
        assert_eq!(rmse(&[Vec3::new(3e-3, 4e-3, 0.0); 7]).unwrap(), 5e-3);
        assert_eq!(rmse(&[Vec3::zeros(); 3]).unwrap(), 0.0);
        let a = 0.37;
        assert_eq!(rmse(&[Vec3::new(a, 0.0, 0.0), Vec3::new(0.0, a, 0.0)]).unwrap(), a);
        assert_eq!(rmse(&[]), Err(EvaluationError::EmptySequence));
    }

    #[test]
    fn zero_duration_run_is_empty() {
        let r =
            evaluate_run(&closed_loop(), &Trajectory::Circle, GainSource::Fixed(GainSet::uniform(4.0, 1.5, 0.02)), 0.0);
        assert!(matches!(r, Err(EvaluationError::EmptySequence)));
    }

    #[test]
    fn unknown_trajectory_lists_names() {
        let e = Trajectory::from_name("spiral").unwrap_err();
        assert!(e.to_string().contains("circle, lemniscate"));
    }

    #[test]
    fn csv_has_one_row_per_step() {
        let r = evaluate_run(
            &closed_loop(),
            &Trajectory::Circle,
            GainSource::Fixed(GainSet::uniform(4.0, 1.5, 0.02)),
            0.05,
        )
        .unwrap();
        let lines: Vec<&str> = r.csv.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[0], RUN_CSV_HEADER);
        assert_eq!(lines[1].split(',').count(), RUN_CSV_HEADER.split(',').count());
    }
}
