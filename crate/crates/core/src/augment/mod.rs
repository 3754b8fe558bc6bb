//! Replay augmentation and self-transfer pretraining.
//!
//! [`isl_round`] re-simulates stored states under the current policy with
//! its action snapped to a discrete rate grid. [`stl_pretrain`] trains a
//! virtual agent on lifted pseudo-rewards and hands its networks to the main
//! agent through [`transfer_into`].

mod isl;
mod lifting;
mod stl;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

pub use isl::{isl_round, DEFAULT_ISL_PERIOD};
pub use lifting::{
    lift_reward, sample_split_weights, split_reward, LiftedReward, RewardPredictor, SplitWeights, PREDICTOR_HIDDEN,
    REWARD_DIM,
};
pub(crate) use stl::linear_noise;
pub use stl::{stl_pretrain, transfer_into, PretrainedBundle, StlConfig, BUNDLE_MAGIC, DEFAULT_STL_STEPS};

/// Uniform set of bitrate levels including both endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateGrid {
    levels: Vec<f64>,
    resolution: usize,
}

impl RateGrid {
    pub fn new(rate_min: f64, rate_max: f64, resolution: usize) -> Result<Self> {
        if resolution == 0 {
            return Err(domain("grid resolution must be at least 1"));
        }
        if !(rate_min < rate_max && rate_min.is_finite() && rate_max.is_finite()) {
            return Err(domain(format!(
                "grid needs rate_min < rate_max, got [{rate_min}, {rate_max}]"
            )));
        }
        let step = (rate_max - rate_min) / resolution as f64;
        let mut levels: Vec<f64> = (0..=resolution).map(|i| rate_min + i as f64 * step).collect();
        levels[resolution] = rate_max;
        Ok(Self { levels, resolution })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn spacing(&self) -> f64 {
        (self.levels[self.resolution] - self.levels[0]) / self.resolution as f64
    }

    pub fn min(&self) -> f64 {
        self.levels[0]
    }

    pub fn max(&self) -> f64 {
        self.levels[self.resolution]
    }

    /// Nearest level; an exact midpoint goes to the lower level. Inputs
    /// outside the grid clamp to the end levels.
    pub fn discretize(&self, bitrate: f64) -> f64 {
        let step = self.spacing();
        let pos = ((bitrate - self.min()) / step).clamp(0.0, self.resolution as f64);
        let lower = pos.floor() as usize;
        if lower >= self.resolution {
            return self.max();
        }
        let frac = pos - lower as f64;
        // Snap near-ties so float noise in `pos` does not flip the rule.
        if frac > 0.5 + 1e-9 {
            self.levels[lower + 1]
        } else {
            self.levels[lower]
        }
    }

    /// Index of the level equal to `bitrate`, if any.
    pub fn index_of(&self, bitrate: f64) -> Option<usize> {
        self.levels.iter().position(|&l| (l - bitrate).abs() <= 1e-9)
    }

    pub fn contains(&self, bitrate: f64) -> bool {
        self.index_of(bitrate).is_some()
    }
}

pub fn build_rate_grid(rate_min: f64, rate_max: f64, resolution: usize) -> Result<RateGrid> {
    RateGrid::new(rate_min, rate_max, resolution)
}

pub fn discretize_action(bitrate: f64, grid: &RateGrid) -> f64 {
    grid.discretize(bitrate)
}
