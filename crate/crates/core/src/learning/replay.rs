//! Fixed-capacity experience replay.

use rand::Rng;

use super::spaces::{Action, Observation};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: Observation,
    pub action: Action,
    pub reward: f64,
    pub next_state: Observation,
    /// The episode ended in a terminal condition, so the successor value is
    /// not bootstrapped. Running out of steps does not set this.
    pub done: bool,
}

/// Ring buffer that overwrites its oldest entry once full.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { items: Vec::with_capacity(capacity.min(1 << 20)), capacity, inserted: 0 }
    }

    pub fn push(&mut self, t: Transition) {
        let slot = (self.inserted % self.capacity as u64) as usize;
        if slot == self.items.len() {
            self.items.push(t);
        } else {
            self.items[slot] = t;
        }
        self.inserted += 1;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total insertions, including overwritten ones.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn get(&self, index: usize) -> Option<&Transition> {
        self.items.get(index)
    }

    /// Indices of a uniform minibatch drawn with replacement, or `None` while
    /// the buffer holds fewer than `batch` transitions.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Option<Vec<usize>> {
        if batch == 0 || self.items.len() < batch {
            return None;
        }
        Some((0..batch).map(|_| rng.gen_range(0..self.items.len())).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn transition(tag: f64) -> Transition {
        Transition {
            state: Observation([tag; 12]),
            action: Action::zeros(),
            reward: -tag,
            next_state: Observation([tag; 12]),
            done: false,
        }
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..5 {
            b.push(transition(i as f64));
        }
        assert_eq!(b.len(), 3);
        assert_eq!(b.inserted(), 5);
        let rewards: Vec<f64> = (0..3).map(|i| b.get(i).unwrap().reward).collect();
        assert_eq!(rewards, vec![-3.0, -4.0, -2.0]);
    }

    #[test]
    fn no_sample_below_batch_size() {
        let mut b = ReplayBuffer::new(10);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        b.push(transition(0.0));
        assert!(b.sample_indices(2, &mut rng).is_none());
        b.push(transition(1.0));
        assert_eq!(b.sample_indices(2, &mut rng).unwrap().len(), 2);
    }

    #[test]
    fn sampling_is_uniform() {
        let bins = 100;
        let mut b = ReplayBuffer::new(bins);
        for i in 0..bins + 37 {
            b.push(transition(i as f64));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = vec![0u64; bins];
        let draws = 100_000;
        let mut drawn = 0;
        while drawn < draws {
            for i in b.sample_indices(50, &mut rng).unwrap() {
                counts[i] += 1;
            }
            drawn += 50;
        }
        let expected = drawn as f64 / bins as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        let p = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(chi2);
        assert!(p > 0.01, "chi2 = {chi2}, p = {p}");
    }
}
