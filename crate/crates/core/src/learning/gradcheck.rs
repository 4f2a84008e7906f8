//! Central-difference check of the actor and critic backward passes.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mlp::{Mlp, ParamSlices};
use super::networks::{init_actor, Critic};
use super::spaces::{ACTION_DIM, OBSERVATION_DIM};
use super::LearningError;

pub const GRADIENT_STEP: f64 = 1e-6;
pub const GRADIENT_TOLERANCE: f64 = 1e-5;

/// Gradients below this magnitude are compared against it instead of their
/// own size, since central differences resolve the objective only to about
/// 1e-10 in absolute terms.
pub const GRADIENT_FLOOR: f64 = 1e-4;

const BATCH: usize = 16;

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRADIENT_FLOOR)
}

fn random_batch(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// Weighted sum of outputs, a generic scalar objective.
fn actor_objective(actor: &Mlp, s: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<f64, LearningError> {
    Ok(actor.forward(s)?.0.component_mul(w).sum())
}

fn critic_objective(
    critic: &Critic,
    s: &DMatrix<f64>,
    a: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> Result<f64, LearningError> {
    let (q, _) = critic.forward(s, a)?;
    Ok((q - y).norm_squared() / s.ncols() as f64)
}

/// Worst relative error between analytic and central-difference gradients
/// over every parameter of a fresh network and random minibatch.
fn worst_parameter_error<N, F>(net: &mut N, analytic: &[f64], mut objective: F) -> Result<f64, LearningError>
where
    N: ParamSlices,
    F: FnMut(&N) -> Result<f64, LearningError>,
{
    let mut worst: f64 = 0.0;
    let mut k = 0;
    for slice in 0..net.slices().len() {
        for i in 0..net.slices()[slice].len() {
            let orig = net.slices()[slice][i];
            net.slices_mut()[slice][i] = orig + GRADIENT_STEP;
            let up = objective(net)?;
            net.slices_mut()[slice][i] = orig - GRADIENT_STEP;
            let down = objective(net)?;
            net.slices_mut()[slice][i] = orig;
            worst = worst.max(rel_err(analytic[k], (up - down) / (2.0 * GRADIENT_STEP)));
            k += 1;
        }
    }
    Ok(worst)
}

pub fn check_actor_gradients(seed: u64, width: usize) -> Result<f64, LearningError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut actor = init_actor(width, &mut rng)?;
    // Larger output weights so the tanh head is not in its linear regime.
    for v in actor.layers.last_mut().expect("actor has layers").weights.iter_mut() {
        *v = rng.gen_range(-0.5..0.5);
    }
    let s = random_batch(&mut rng, OBSERVATION_DIM, BATCH);
    let w = random_batch(&mut rng, ACTION_DIM, BATCH);
    let (_, cache) = actor.forward(&s)?;
    let (grads, _) = actor.backward(&cache, &w)?;
    let analytic: Vec<f64> = grads.slices().iter().flat_map(|s| s.iter().copied()).collect();
    worst_parameter_error(&mut actor, &analytic, |a| actor_objective(a, &s, &w))
}

/// Also checks the gradient with respect to the action input, which drives
/// the actor update.
pub fn check_critic_gradients(seed: u64, width: usize) -> Result<f64, LearningError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut critic = Critic::init(width, &mut rng)?;
    let s = random_batch(&mut rng, OBSERVATION_DIM, BATCH);
    let a = random_batch(&mut rng, ACTION_DIM, BATCH);
    let y = random_batch(&mut rng, 1, BATCH);
    let (q, cache) = critic.forward(&s, &a)?;
    let n = s.ncols() as f64;
    let (grads, g_action) = critic.backward(&cache, &((q - &y) * (2.0 / n)))?;
    let analytic: Vec<f64> = grads.slices().iter().flat_map(|s| s.iter().copied()).collect();
    let mut worst = worst_parameter_error(&mut critic, &analytic, |c| critic_objective(c, &s, &a, &y))?;

    let mut a_mut = a.clone();
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            let orig = a_mut[(r, c)];
            a_mut[(r, c)] = orig + GRADIENT_STEP;
            let up = critic_objective(&critic, &s, &a_mut, &y)?;
            a_mut[(r, c)] = orig - GRADIENT_STEP;
            let down = critic_objective(&critic, &s, &a_mut, &y)?;
            a_mut[(r, c)] = orig;
            worst = worst.max(rel_err(g_action[(r, c)], (up - down) / (2.0 * GRADIENT_STEP)));
        }
    }
    Ok(worst)
}
