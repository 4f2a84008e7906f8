//! Numerical self-checks run by `validate`: kinematics round trip, Jacobian
//! against finite differences, null-space projectors and network gradients.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use tdcr_core::kinematics::{
    analytic_jacobian, arcs_to_lengths, forward_kinematics, lengths_to_arcs, tip_position, KinematicsError,
    RobotGeometry, SegmentArc, TendonLengths,
};
use tdcr_core::learning::{check_actor_gradients, check_critic_gradients, LearningError, GRADIENT_TOLERANCE};
use tdcr_core::numerics::{
    finite_difference_jacobian, null_space_projector_force, null_space_projector_velocity, transpose_pseudo_inverse,
    NumericsError, Vec6,
};

pub const ROUND_TRIP_TOLERANCE: f64 = 1e-9;
pub const JACOBIAN_TOLERANCE: f64 = 1e-5;
pub const JACOBIAN_STEP: f64 = 1e-6;
pub const NULL_SPACE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Learning(#[from] LearningError),
    #[error("no full-rank pose found after {0} draws")]
    NoFullRankPose(usize),
}

/// Sample counts of the suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckSizes {
    pub round_trip: usize,
    pub jacobian: usize,
    pub null_space: usize,
    pub gradient_batches: usize,
}

impl CheckSizes {
    pub const FULL: Self = Self { round_trip: 1000, jacobian: 100, null_space: 1000, gradient_batches: 10 };
    pub const QUICK: Self = Self { round_trip: 100, jacobian: 20, null_space: 100, gradient_batches: 2 };
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub samples: usize,
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.worst < self.tolerance
    }
}

/// Random PCC pose with curvature below what the tendon pitch allows.
pub fn random_arcs<R: Rng + ?Sized>(rng: &mut R, geom: &RobotGeometry) -> [SegmentArc; 2] {
    let kmax = (0.9 / geom.pitch_radius).min(10.0);
    std::array::from_fn(|j| SegmentArc {
        kappa: rng.gen_range(0.0..kmax),
        phi: rng.gen_range(-PI..PI),
        ell: geom.segment_lengths[j] * rng.gen_range(0.8..1.2),
    })
}

/// Arcs → lengths → arcs → lengths, comparing lengths and tip positions.
pub fn kinematics_round_trip(geom: &RobotGeometry, samples: usize, seed: u64) -> Result<CheckResult, CheckError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let arcs = random_arcs(&mut rng, geom);
        let l = arcs_to_lengths(&arcs, geom)?;
        let back = lengths_to_arcs(&l, geom)?;
        let l2 = arcs_to_lengths(&back, geom)?;
        let tip = forward_kinematics(&l, geom)?;
        worst = worst.max((l.0 - l2.0).abs().max()).max((tip - tip_position(&arcs)).norm());
    }
    Ok(CheckResult { name: "kinematics round trip", samples, worst, tolerance: ROUND_TRIP_TOLERANCE })
}

/// Worst relative deviation of the analytic Jacobian from central differences.
pub fn jacobian_finite_difference(geom: &RobotGeometry, samples: usize, seed: u64) -> Result<CheckResult, CheckError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let l = arcs_to_lengths(&random_arcs(&mut rng, geom), geom)?;
        let analytic = analytic_jacobian(&l, geom)?.matrix;
        let fd = finite_difference_jacobian::<_, CheckError>(
            |v| Ok(forward_kinematics(&TendonLengths(*v), geom)?),
            &l.0,
            JACOBIAN_STEP,
        )?;
        worst = worst.max((analytic - fd).abs().max() / fd.abs().max());
    }
    Ok(CheckResult { name: "jacobian vs finite differences", samples, worst, tolerance: JACOBIAN_TOLERANCE })
}

/// Velocity and force null-space properties at random full-rank poses:
/// `‖J P ξ‖`, `‖(Jᵀ)† P_f ζ‖` and the idempotence of both projectors.
/// Rank-deficient poses are redrawn.
pub fn null_space_projection(geom: &RobotGeometry, samples: usize, seed: u64) -> Result<Vec<CheckResult>, CheckError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut motion: f64 = 0.0;
    let mut force: f64 = 0.0;
    let mut idempotence: f64 = 0.0;
    let mut accepted = 0;
    let mut attempts = 0;
    while accepted < samples {
        attempts += 1;
        if attempts > 100 * samples.max(1) {
            return Err(CheckError::NoFullRankPose(attempts));
        }
        let l = arcs_to_lengths(&random_arcs(&mut rng, geom), geom)?;
        let j = analytic_jacobian(&l, geom)?.matrix;
        let projectors = null_space_projector_velocity(&j)
            .and_then(|p| Ok((p, null_space_projector_force(&j)?, transpose_pseudo_inverse(&j)?)));
        let (p, pf, jt_pinv) = match projectors {
            Ok(v) => v,
            Err(NumericsError::SingularJacobian { .. }) => continue,
            Err(e) => return Err(e.into()),
        };
        accepted += 1;
        let xi = Vec6::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let zeta = Vec6::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        motion = motion.max((j * p * xi).norm());
        force = force.max((jt_pinv * pf * zeta).norm());
        idempotence = idempotence.max((p * p - p).abs().max()).max((pf * pf - pf).abs().max());
    }
    let result = |name, worst| CheckResult { name, samples, worst, tolerance: NULL_SPACE_TOLERANCE };
    Ok(vec![
        result("null-space motion ‖J(I−J†J)ξ‖", motion),
        result("null-space force of projected tensions", force),
        result("projector idempotence", idempotence),
    ])
}

/// Actor and critic gradients against central differences, one fresh
/// network and minibatch per seed.
pub fn network_gradients(width: usize, batches: usize, seed: u64) -> Result<Vec<CheckResult>, CheckError> {
    let mut actor: f64 = 0.0;
    let mut critic: f64 = 0.0;
    for k in 0..batches as u64 {
        actor = actor.max(check_actor_gradients(seed + k, width)?);
        critic = critic.max(check_critic_gradients(seed + k, width)?);
    }
    Ok(vec![
        CheckResult { name: "actor gradients", samples: batches, worst: actor, tolerance: GRADIENT_TOLERANCE },
        CheckResult { name: "critic gradients", samples: batches, worst: critic, tolerance: GRADIENT_TOLERANCE },
    ])
}

/// The whole suite in report order.
pub fn run_all(
    geom: &RobotGeometry,
    width: usize,
    sizes: CheckSizes,
    seed: u64,
) -> Result<Vec<CheckResult>, CheckError> {
    let mut out = vec![
        kinematics_round_trip(geom, sizes.round_trip, seed)?,
        jacobian_finite_difference(geom, sizes.jacobian, seed)?,
    ];
    out.extend(null_space_projection(geom, sizes.null_space, seed)?);
    out.extend(network_gradients(width, sizes.gradient_batches, seed)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes_on_defaults() {
        let results = run_all(&RobotGeometry::default(), 8, CheckSizes::QUICK, 0).unwrap();
        assert_eq!(results.len(), 7);
        for r in &results {
            assert!(r.passed(), "{} worst {:e}", r.name, r.worst);
        }
    }

    #[test]
    fn random_arcs_respect_pitch_limit() {
        let geom = RobotGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            for arc in random_arcs(&mut rng, &geom) {
                assert!(arc.kappa * geom.pitch_radius < 0.9);
            }
        }
    }
}
