//! Points the transpose-Jacobian loop can hold.
//!
//! At rest the loop applies `T = slack(Jᵀ(pose)·F)` for some task force `F`.
//! For a lateral force the fixed points of that map form a smooth surface of
//! tip-loaded cantilever shapes. Targets on it are held with bounded force;
//! targets off it need a force in the direction the arm barely responds to.

use super::slack::{apply_slack_strategy, SlackStrategy};
use crate::kinematics::actuation_jacobian;
use crate::numerics::Vec3;
use crate::plant::{Plant, PlantError, PlantState, TendonTensions};

const MAX_ITERATIONS: usize = 400;
const RELAXATION: f64 = 0.5;
const TENSION_TOLERANCE: f64 = 1e-11;
const BISECTION_STEPS: usize = 40;
/// Largest radial miss of a holding force accepted after bisection (m).
const REACH_TOLERANCE: f64 = 1e-6;

/// Rest state under a constant task force, found by relaxed fixed-point
/// iteration from the straight arm.
pub fn force_equilibrium(plant: &Plant, slack: &SlackStrategy, force: &Vec3) -> Result<PlantState, PlantError> {
    force_equilibrium_from(plant, slack, force, plant.settle(TendonTensions::zeros())?)
}

/// [`force_equilibrium`] started from `initial` instead of the straight arm.
pub fn force_equilibrium_from(
    plant: &Plant,
    slack: &SlackStrategy,
    force: &Vec3,
    initial: PlantState,
) -> Result<PlantState, PlantError> {
    let mut state = initial;
    for _ in 0..MAX_ITERATIONS {
        let j = actuation_jacobian(&state.lengths, &plant.geometry)?.matrix;
        let target = apply_slack_strategy(&TendonTensions(j.transpose() * force), slack);
        let blended = state.tensions.0 * (1.0 - RELAXATION) + target.0 * RELAXATION;
        let change = (blended - state.tensions.0).abs().max();
        state = plant.settle(TendonTensions(blended))?;
        if change < TENSION_TOLERANCE {
            break;
        }
    }
    Ok(state)
}

/// Lateral task force whose rest state sits at distance `radius` from the
/// base axis in direction `azimuth`, or `None` when more than `max_force`
/// newtons would be needed.
pub fn holding_force(
    plant: &Plant,
    slack: &SlackStrategy,
    radius: f64,
    azimuth: f64,
    max_force: f64,
) -> Result<Option<Vec3>, PlantError> {
    let dir = Vec3::new(azimuth.cos(), azimuth.sin(), 0.0);
    if radius <= 0.0 {
        return Ok(Some(Vec3::zeros()));
    }
    // Lateral reach at force `f`; an arm bent past its limit counts as beyond.
    let reach = |f: f64| match force_equilibrium(plant, slack, &(dir * f)) {
        Ok(s) => Ok(s.position.x.hypot(s.position.y)),
        Err(PlantError::CurvatureOverflow { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    };
    // Bracket from below by doubling: at large forces the arm curls and the
    // reach stops growing with force.
    let mut hi = max_force.min(1.0);
    while reach(hi)? < radius {
        if hi >= max_force {
            return Ok(None);
        }
        hi = (2.0 * hi).min(max_force);
    }
    let mut lo = 0.0;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if reach(mid)? < radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // A jump to over-bending inside the bracket means `radius` is never
    // reached by an equilibrium.
    let force = 0.5 * (lo + hi);
    if (reach(force)? - radius).abs() > REACH_TOLERANCE {
        return Ok(None);
    }
    Ok(Some(dir * force))
}

/// Holdable tip position at lateral distance `radius` from the base axis in
/// direction `azimuth`, or `None` when `radius` exceeds what a lateral force
/// of `max_force` newtons can reach.
pub fn lift_to_surface(
    plant: &Plant,
    slack: &SlackStrategy,
    radius: f64,
    azimuth: f64,
    max_force: f64,
) -> Result<Option<Vec3>, PlantError> {
    let Some(force) = holding_force(plant, slack, radius, azimuth, max_force)? else {
        return Ok(None);
    };
    let p = force_equilibrium(plant, slack, &force)?.position;
    if radius <= 0.0 {
        return Ok(Some(p));
    }
    // Bisection on the force leaves a small radial residual; project it out.
    let scale = radius / p.x.hypot(p.y);
    Ok(Some(Vec3::new(p.x * scale, p.y * scale, p.z)))
}

/// Tabulated profile `z(r)` of the holdable surface, which is symmetric
/// about the base axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachableSurface {
    radii: Vec<f64>,
    heights: Vec<f64>,
}

impl ReachableSurface {
    /// Tabulates the profile out to `max_radius` with `samples` points.
    pub fn new(plant: &Plant, slack: &SlackStrategy, max_radius: f64, samples: usize) -> Result<Self, PlantError> {
        if !(max_radius > 0.0) || samples < 2 {
            return Err(PlantError::InvalidParams("surface table needs a positive radius and two samples".into()));
        }
        // Force that reaches just past `max_radius`, so the table covers it.
        let mut f_max = 1.0;
        loop {
            match force_equilibrium(plant, slack, &Vec3::new(f_max, 0.0, 0.0)) {
                Ok(s) if s.position.x > max_radius => break,
                Ok(_) if f_max < 1e4 => f_max *= 2.0,
                Ok(_) | Err(PlantError::CurvatureOverflow { .. }) => {
                    return Err(PlantError::InvalidParams(format!("radius {max_radius} is not reachable")))
                }
                Err(e) => return Err(e),
            }
        }
        let (mut lo, mut hi) = (0.0, f_max);
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if force_equilibrium(plant, slack, &Vec3::new(mid, 0.0, 0.0))?.position.x < max_radius {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut state = plant.settle(TendonTensions::zeros())?;
        let mut radii = Vec::with_capacity(samples + 1);
        let mut heights = Vec::with_capacity(samples + 1);
        for i in 0..=samples {
            let f = hi * i as f64 / samples as f64;
            state = force_equilibrium_from(plant, slack, &Vec3::new(f, 0.0, 0.0), state)?;
            radii.push(state.position.x);
            heights.push(state.position.z);
        }
        if radii.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(PlantError::InvalidParams("surface profile is not monotone in radius".into()));
        }
        Ok(Self { radii, heights })
    }

    /// Largest tabulated radius.
    pub fn max_radius(&self) -> f64 {
        *self.radii.last().expect("table is never empty")
    }

    /// Height of the surface at lateral distance `radius`, by linear
    /// interpolation; `None` outside the table.
    pub fn height(&self, radius: f64) -> Option<f64> {
        if !(radius >= 0.0) || radius > self.max_radius() {
            return None;
        }
        let i = self.radii.partition_point(|r| *r <= radius).clamp(1, self.radii.len() - 1);
        let (r0, r1) = (self.radii[i - 1], self.radii[i]);
        let w = (radius - r0) / (r1 - r0);
        Some(self.heights[i - 1] + w * (self.heights[i] - self.heights[i - 1]))
    }

    pub fn point(&self, radius: f64, azimuth: f64) -> Option<Vec3> {
        self.height(radius).map(|z| Vec3::new(radius * azimuth.cos(), radius * azimuth.sin(), z))
    }
}
