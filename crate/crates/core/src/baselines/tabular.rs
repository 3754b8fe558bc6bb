use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{epsilon_at, Policy};
use crate::augment::RateGrid;
use crate::env::Env;
use crate::error::{domain, Result};
use crate::naf::RateMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TabularQConfig {
    pub capacity_bins: usize,
    pub fill_bins: usize,
    /// Grid intervals when the env has no grid of its own.
    pub grid_resolution: usize,
    pub episodes: usize,
    pub episode_len: usize,
    pub learning_rate: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub reward_scale: f64,
}

impl Default for TabularQConfig {
    fn default() -> Self {
        Self {
            capacity_bins: 8,
            fill_bins: 8,
            grid_resolution: 8,
            episodes: 300,
            episode_len: 200,
            learning_rate: 0.1,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            reward_scale: 0.05,
        }
    }
}

/// One-step Q-learning over binned (capacity, fill, hit) states and grid
/// actions.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularQ {
    capacity_bins: usize,
    fill_bins: usize,
    grid: RateGrid,
    map: RateMap,
    table: Vec<f64>,
}

impl TabularQ {
    pub fn new(env: &Env, config: &TabularQConfig) -> Result<Self> {
        if config.capacity_bins < 2 || config.fill_bins < 2 {
            return Err(domain("tabular baseline needs at least 2 bins per axis"));
        }
        let cfg = env.config();
        let grid = match env.rate_grid() {
            Some(g) => g.clone(),
            None => RateGrid::new(cfg.rate_min, cfg.rate_max, config.grid_resolution)?,
        };
        let states = config.capacity_bins * config.fill_bins * 2;
        Ok(Self {
            capacity_bins: config.capacity_bins,
            fill_bins: config.fill_bins,
            table: vec![0.0; states * grid.levels().len()],
            map: RateMap::new(cfg.rate_min, cfg.rate_max)?,
            grid,
        })
    }

    pub fn num_states(&self) -> usize {
        self.capacity_bins * self.fill_bins * 2
    }

    pub fn num_actions(&self) -> usize {
        self.grid.levels().len()
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn grid(&self) -> &RateGrid {
        &self.grid
    }

    /// Bin index from an env observation (capacity, hit, size, fill, ...).
    pub fn state_index(&self, observation: &[f64]) -> usize {
        let bin = |x: f64, n: usize| ((x * n as f64).floor() as usize).min(n - 1);
        let c = bin(observation[0], self.capacity_bins);
        let f = bin(observation[3], self.fill_bins);
        let h = usize::from(observation[1] > 0.5);
        (c * self.fill_bins + f) * 2 + h
    }

    fn row(&self, s: usize) -> &[f64] {
        let n = self.num_actions();
        &self.table[s * n..(s + 1) * n]
    }

    /// First maximizing grid index.
    pub fn greedy_index(&self, observation: &[f64]) -> usize {
        let row = self.row(self.state_index(observation));
        let mut best = 0;
        for (i, &q) in row.iter().enumerate() {
            if q > row[best] {
                best = i;
            }
        }
        best
    }

    pub fn greedy_bitrate(&self, observation: &[f64]) -> f64 {
        self.grid.levels()[self.greedy_index(observation)]
    }

    /// Trains in place with epsilon-greedy exploration.
    pub fn train<R: Rng + ?Sized>(&mut self, env: &Env, config: &TabularQConfig, rng: &mut R) -> Result<()> {
        let gamma = env.config().discount;
        let n = self.num_actions();
        let total = config.episodes * config.episode_len;
        let mut step = 0;
        for _ in 0..config.episodes {
            let mut state = env.reset(rng);
            let mut obs = env.encode_observation(&state);
            for t in 0..config.episode_len {
                let eps = epsilon_at(config.epsilon_start, config.epsilon_end, step, total / 2);
                let a = if rng.random::<f64>() < eps {
                    rng.random_range(0..n)
                } else {
                    self.greedy_index(&obs)
                };
                let outcome = env.step(&state, env.action(self.grid.levels()[a])?, rng)?;
                let next_obs = env.encode_observation(&outcome.next_state);
                let r = config.reward_scale * outcome.reward.weighted_total;
                let s = self.state_index(&obs);
                let target = if t + 1 == config.episode_len {
                    r
                } else {
                    let next = self.row(self.state_index(&next_obs));
                    r + gamma * next.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                };
                let q = &mut self.table[s * n + a];
                *q += config.learning_rate * (target - *q);
                state = outcome.next_state;
                obs = next_obs;
                step += 1;
            }
        }
        Ok(())
    }
}

impl Policy for TabularQ {
    fn name(&self) -> &str {
        "tabular-q"
    }

    fn act(&self, observation: &[f64], _rng: &mut dyn RngCore) -> Result<f64> {
        self.map.from_bitrate(self.greedy_bitrate(observation))
    }
}
