//! Per-slot QoE terms: cache miss, playback quality, packet loss and freeze.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

// Guards floor() against quotients such as 0.3 / 0.1 = 2.9999999999999996.
const FLOOR_SLACK: f64 = 1e-9;

/// Number of chunks of rate `bitrate` that fit in one slot of capacity `capacity`.
/// A zero bitrate is the idle action and offers nothing.
pub fn chunks_for(capacity: f64, bitrate: f64) -> usize {
    if bitrate <= 0.0 || capacity <= 0.0 {
        return 0;
    }
    (capacity / bitrate + FLOOR_SLACK).floor() as usize
}

/// Backhaul cost of serving `request`: zero on a cache hit, otherwise
/// proportional to the content size.
pub fn cache_miss_cost(request: usize, cached: &[bool], content_sizes: &[f64], cost_per_megabit: f64) -> Result<f64> {
    if request == 0 || request > content_sizes.len() || request > cached.len() {
        return Err(domain(format!(
            "unknown content id {request} (library has {})",
            content_sizes.len()
        )));
    }
    if cached[request - 1] {
        Ok(0.0)
    } else {
        Ok(content_sizes[request - 1] * cost_per_megabit)
    }
}

/// Accumulated bitrate of the chunks played out during the slot.
pub fn playback_quality(consumed_bitrates: &[f64]) -> f64 {
    consumed_bitrates.iter().sum()
}

/// Seconds of video dropped when the offered data overflows the buffer.
///
/// `offered` chunks of total size `incoming_size` arrive at a buffer holding
/// `buffer_fill` of `buffer_capacity` megabits; `accepted` of them fit.
pub fn packet_loss_cost(
    incoming_size: f64,
    buffer_fill: f64,
    buffer_capacity: f64,
    chunk_length: f64,
    accepted: usize,
    offered: usize,
) -> f64 {
    if incoming_size + buffer_fill > buffer_capacity {
        offered.saturating_sub(accepted) as f64 * chunk_length
    } else {
        0.0
    }
}

/// Seconds of stall in a slot of length `slot`.
pub fn freeze_cost(
    slot: f64,
    cache_hit: bool,
    download_time: f64,
    buffered_playback: f64,
    accepted: usize,
    chunk_length: f64,
) -> f64 {
    let miss_delay = if cache_hit { 0.0 } else { download_time };
    let uncovered = slot - miss_delay - buffered_playback - accepted as f64 * chunk_length;
    uncovered.max(0.0)
}

/// Weighted QoE reward over signed components `(r1, r2, r3, r4)`.
pub fn qoe_reward(components: [f64; 4], weights: [f64; 4]) -> f64 {
    components.iter().zip(weights.iter()).map(|(r, w)| r * w).sum()
}

/// The four signed reward components of one slot and their weighted sum.
///
/// Costs enter negatively: `cache_miss = -C_dl`, `loss = -C_loss`,
/// `freeze = -C_freeze`; `quality` is the consumed bitrate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub cache_miss: f64,
    pub quality: f64,
    pub loss: f64,
    pub freeze: f64,
    pub weighted_total: f64,
}

impl RewardBreakdown {
    /// Builds the breakdown from nonnegative costs.
    pub fn from_costs(miss_cost: f64, quality: f64, loss_seconds: f64, freeze_seconds: f64, weights: [f64; 4]) -> Self {
        Self::from_components([-miss_cost, quality, -loss_seconds, -freeze_seconds], weights)
    }

    pub fn from_components(components: [f64; 4], weights: [f64; 4]) -> Self {
        Self {
            cache_miss: components[0],
            quality: components[1],
            loss: components[2],
            freeze: components[3],
            weighted_total: qoe_reward(components, weights),
        }
    }

    pub fn components(&self) -> [f64; 4] {
        [self.cache_miss, self.quality, self.loss, self.freeze]
    }

    /// Same components re-weighted.
    pub fn reweighted(&self, weights: [f64; 4]) -> Self {
        Self::from_components(self.components(), weights)
    }
}
