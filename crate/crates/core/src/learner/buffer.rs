use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    /// Ball position and velocity at the hitting plane.
    pub s: [f64; 6],
    /// Landing target.
    pub g: [f64; 2],
    /// Normalized action in `[-1, 1]³`.
    pub a: [f64; 3],
    pub r: f64,
    /// Contact position and velocity of the return.
    pub s_next: [f64; 6],
    /// Episode index within its stage at collection time.
    pub n: u64,
    /// Serve speed of the stage, m/s.
    pub stage: f64,
}

/// FIFO replay memory with uniform sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
    rng: ChaCha8Rng,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, seed: u64) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// `k` draws with replacement; empty when the buffer is.
    pub fn sample(&mut self, k: usize) -> Vec<Transition> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..k)
            .map(|_| self.items[self.rng.random_range(0..self.items.len())])
            .collect()
    }
}

/// Starts the next stage's buffer from the old transitions whose reward is
/// at least `delta`, in their original order. The sampling stream carries
/// over.
pub fn migrate_buffer(old: &ReplayBuffer, delta: f64) -> ReplayBuffer {
    let mut out = ReplayBuffer {
        capacity: old.capacity,
        items: VecDeque::with_capacity(old.items.len()),
        rng: old.rng.clone(),
    };
    for t in old.items.iter().filter(|t| t.r >= delta) {
        out.push(*t);
    }
    out
}
