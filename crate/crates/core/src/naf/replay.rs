use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{RewardBreakdown, SystemState};

/// Default replay capacity.
pub const DEFAULT_REPLAY_CAPACITY: usize = 1_000_000;

/// One stored interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub observation: Vec<f64>,
    /// Action on the policy's unit scale.
    pub action_unit: f64,
    pub reward_components: RewardBreakdown,
    /// Scalar learning signal (weighted, scaled, possibly lifted).
    pub reward: f64,
    pub next_observation: Vec<f64>,
    /// Last step of an episode; the TD target does not bootstrap.
    pub terminal: bool,
    /// Full simulator state the transition started from, kept for
    /// re-simulation.
    pub origin: Option<SystemState>,
}

impl Transition {
    pub fn is_finite(&self) -> bool {
        self.observation.iter().all(|x| x.is_finite())
            && self.next_observation.iter().all(|x| x.is_finite())
            && self.reward.is_finite()
            && (0.0..=1.0).contains(&self.action_unit)
    }
}

/// Fixed-capacity FIFO experience store with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
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

    /// Appends, evicting the oldest entry when full.
    pub fn push(&mut self, transition: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(transition);
    }

    pub fn get(&self, index: usize) -> Option<&Transition> {
        self.items.get(index)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// `count` entries drawn uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<&Transition> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..count)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect()
    }
}
