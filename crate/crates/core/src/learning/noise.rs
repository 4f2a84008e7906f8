//! Ornstein–Uhlenbeck exploration noise.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::spaces::ACTION_DIM;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OuConfig {
    /// Mean reversion rate per step.
    pub theta: f64,
    /// Step-noise scale at the first episode.
    pub sigma: f64,
    /// Step-noise scale at the last episode; `sigma` decays linearly to it.
    pub sigma_final: f64,
}

impl Default for OuConfig {
    fn default() -> Self {
        Self { theta: 0.15, sigma: 0.2, sigma_final: 0.0 }
    }
}

impl OuConfig {
    pub fn is_valid(&self) -> bool {
        (0.0..=1.0).contains(&self.theta) && self.sigma >= 0.0 && self.sigma_final >= 0.0
    }

    /// Noise scale for `episode` out of `episodes`.
    pub fn sigma_at(&self, episode: usize, episodes: usize) -> f64 {
        if episodes <= 1 {
            return self.sigma;
        }
        let w = episode as f64 / (episodes - 1) as f64;
        self.sigma + (self.sigma_final - self.sigma) * w
    }
}

/// `x ← x + θ(μ − x) + σ·ξ` with zero mean and `ξ ~ N(0, I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuNoise {
    pub state: [f64; ACTION_DIM],
    pub theta: f64,
}

impl OuNoise {
    pub fn new(theta: f64) -> Self {
        Self { state: [0.0; ACTION_DIM], theta }
    }

    pub fn reset(&mut self) {
        self.state = [0.0; ACTION_DIM];
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, sigma: f64, rng: &mut R) -> [f64; ACTION_DIM] {
        for x in self.state.iter_mut() {
            let xi: f64 = rng.sample(StandardNormal);
            *x += -self.theta * *x + sigma * xi;
        }
        self.state
    }
}
