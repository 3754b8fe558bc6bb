//! Cache-enabled video streaming environment.
//!
//! One user moves along a line of base stations. Each slot it requests a
//! content item (Zipf popularity), the link offers capacity `C`, and the
//! controller picks a chunk bitrate `b`. The base station pushes
//! `floor(C / b)` chunks into a FIFO client buffer, one chunk's worth of
//! playback is consumed, and the slot is scored by the weighted QoE reward.

mod config;
mod reward;
mod trajectory;
mod zipf;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::augment::RateGrid;
use crate::error::{domain, Error, Result};

pub use config::{CapacityModel, EnvConfig};
pub use reward::{
    cache_miss_cost, chunks_for, freeze_cost, packet_loss_cost, playback_quality, qoe_reward, RewardBreakdown,
};
pub use trajectory::{TrajectoryRow, TrajectoryWriter};
pub use zipf::{sample_request, zipf_distribution, zipf_pmf, RequestSampler};

const CONTENT_SIZE_RANGE: (f64, f64) = (20.0, 100.0);
const CONTENT_SEED_SALT: u64 = 0x5eed_c0de_0000_0001;
const TOLERANCE: f64 = 1e-9;

/// Snapshot of the system at the start of a slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    /// Link capacity in Mb/s.
    pub capacity: f64,
    /// Requested content id, 1-based.
    pub request: usize,
    /// Bitrates of buffered chunks in FIFO order; zero marks an empty slot.
    pub buffer: Vec<f64>,
    /// Serving base station, 1-based.
    pub bs_index: usize,
    /// Seconds until the next handoff.
    pub sojourn_remaining: f64,
}

impl SystemState {
    /// Number of occupied buffer slots.
    pub fn occupied(&self) -> usize {
        self.buffer.iter().take_while(|&&b| b > 0.0).count()
    }

    /// Buffered data in megabits.
    pub fn buffer_fill(&self, chunk_length: f64) -> f64 {
        self.buffer.iter().sum::<f64>() * chunk_length
    }
}

/// Chunk bitrate chosen for a slot; zero means idle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateAction(f64);

impl RateAction {
    pub const IDLE: RateAction = RateAction(0.0);

    pub fn new(bitrate: f64, rate_min: f64, rate_max: f64) -> Result<Self> {
        if bitrate == 0.0 || (bitrate.is_finite() && bitrate >= rate_min - TOLERANCE && bitrate <= rate_max + TOLERANCE)
        {
            Ok(Self(bitrate.clamp(0.0, rate_max)))
        } else {
            Err(domain(format!(
                "bitrate {bitrate} must be 0 or within [{rate_min}, {rate_max}]"
            )))
        }
    }

    pub fn bitrate(self) -> f64 {
        self.0
    }
}

/// Random quantities revealed between one slot and the next.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exogenous {
    pub capacity: f64,
    pub request: usize,
    pub bs_index: usize,
    pub sojourn_remaining: f64,
}

/// Everything produced by one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: SystemState,
    pub reward: RewardBreakdown,
    /// Bitrate actually used, after any grid snapping.
    pub executed_bitrate: f64,
    /// Chunks offered by the base station, `k`.
    pub offered_chunks: usize,
    /// Chunks accepted into the buffer, `tau`.
    pub delivered_chunks: usize,
    /// Chunks played out during the slot.
    pub consumed_chunks: usize,
    /// Seconds of video dropped on overflow.
    pub dropped_playback: f64,
    pub cache_hit: bool,
}

/// A simulated world: configuration plus the quantities drawn once from it.
#[derive(Debug, Clone)]
pub struct Env {
    config: EnvConfig,
    content_sizes: Vec<f64>,
    max_content_size: f64,
    cached: Vec<bool>,
    request_pmf: Vec<f64>,
    requests: RequestSampler,
    sojourn: Exp<f64>,
    grid: Option<RateGrid>,
}

impl Env {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let content_sizes = match &config.content_sizes {
            Some(sizes) => sizes.clone(),
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ CONTENT_SEED_SALT);
                (0..config.num_contents)
                    .map(|_| rng.random_range(CONTENT_SIZE_RANGE.0..=CONTENT_SIZE_RANGE.1))
                    .collect()
            }
        };
        let max_content_size = content_sizes.iter().cloned().fold(0.0, f64::max);
        let mut cached = vec![false; config.num_contents];
        for &id in &config.cache_set {
            cached[id - 1] = true;
        }
        let request_pmf = zipf_distribution(config.zipf_exponent, config.num_contents)?;
        let requests = RequestSampler::new(&request_pmf)?;
        let sojourn =
            Exp::new(1.0 / config.mean_sojourn).map_err(|e| Error::Config(vec![format!("mean_sojourn: {e}")]))?;
        let grid = match config.rate_grid {
            Some(d) => Some(RateGrid::new(config.rate_min, config.rate_max, d)?),
            None => None,
        };
        Ok(Self {
            config,
            content_sizes,
            max_content_size,
            cached,
            request_pmf,
            requests,
            sojourn,
            grid,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn content_sizes(&self) -> &[f64] {
        &self.content_sizes
    }

    pub fn request_pmf(&self) -> &[f64] {
        &self.request_pmf
    }

    pub fn is_cached(&self, request: usize) -> bool {
        self.cached.get(request.wrapping_sub(1)).copied().unwrap_or(false)
    }

    pub fn rate_grid(&self) -> Option<&RateGrid> {
        self.grid.as_ref()
    }

    /// Seconds needed to fetch `request` over the backhaul.
    pub fn download_time(&self, request: usize) -> f64 {
        self.content_sizes[request - 1] / self.config.backhaul_rate
    }

    /// Initial state: empty buffer, first base station, fresh draws for the rest.
    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> SystemState {
        let capacity = match &self.config.capacity_model {
            CapacityModel::Levels { values } => values[rng.random_range(0..values.len())],
            _ => self.uniform_capacity(rng),
        };
        SystemState {
            capacity,
            request: self.requests.sample(rng),
            buffer: vec![0.0; self.config.buffer_slots],
            bs_index: 1,
            sojourn_remaining: self.sojourn.sample(rng),
        }
    }

    fn uniform_capacity<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (lo, hi) = (self.config.capacity_min, self.config.capacity_max);
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..=hi)
        }
    }

    /// Draws next-slot capacity, request and mobility.
    pub fn draw_exogenous<R: Rng + ?Sized>(&self, state: &SystemState, rng: &mut R) -> Exogenous {
        let capacity = match &self.config.capacity_model {
            CapacityModel::Uniform => self.uniform_capacity(rng),
            CapacityModel::Ar1 { rho } => {
                let fresh = self.uniform_capacity(rng);
                (rho * state.capacity + (1.0 - rho) * fresh).clamp(self.config.capacity_min, self.config.capacity_max)
            }
            CapacityModel::Levels { values } => values[rng.random_range(0..values.len())],
        };
        let request = self.requests.sample(rng);
        let mut bs_index = state.bs_index;
        let mut sojourn_remaining = state.sojourn_remaining - self.config.slot_length;
        if sojourn_remaining <= 0.0 {
            bs_index = bs_index % self.config.num_base_stations + 1;
            sojourn_remaining = self.sojourn.sample(rng);
        }
        Exogenous {
            capacity,
            request,
            bs_index,
            sojourn_remaining,
        }
    }

    /// Validates and, on a discrete-rate world, snaps a requested bitrate.
    pub fn action(&self, bitrate: f64) -> Result<RateAction> {
        let action = RateAction::new(bitrate, self.config.rate_min, self.config.rate_max)?;
        match &self.grid {
            Some(grid) if action.bitrate() > 0.0 => Ok(RateAction(grid.discretize(action.bitrate()))),
            _ => Ok(action),
        }
    }

    /// Advances one slot, drawing the exogenous randomness from `rng`.
    pub fn step<R: Rng + ?Sized>(&self, state: &SystemState, action: RateAction, rng: &mut R) -> Result<StepOutcome> {
        let exo = self.draw_exogenous(state, rng);
        self.transition(state, action, &exo)
    }

    /// Deterministic part of a slot given the revealed exogenous quantities.
    pub fn transition(&self, state: &SystemState, action: RateAction, exo: &Exogenous) -> Result<StepOutcome> {
        self.check_state(state)?;
        let cfg = &self.config;
        let action = self.action(action.bitrate())?;
        let bitrate = action.bitrate();
        let dt_chunk = cfg.chunk_length;

        let offered = chunks_for(state.capacity, bitrate);
        let occupied = state.occupied();
        let fill = state.buffer_fill(dt_chunk);
        let accepted = if bitrate > 0.0 {
            let chunk_size = bitrate * dt_chunk;
            let by_size = ((cfg.buffer_capacity - fill) / chunk_size + TOLERANCE).floor().max(0.0) as usize;
            offered.min(by_size).min(cfg.buffer_slots - occupied)
        } else {
            0
        };
        let incoming = offered as f64 * bitrate * dt_chunk;
        let loss = packet_loss_cost(incoming, fill, cfg.buffer_capacity, dt_chunk, accepted, offered);

        let cache_hit = self.is_cached(state.request);
        let freeze = freeze_cost(
            cfg.slot_length,
            cache_hit,
            self.download_time(state.request),
            occupied as f64 * dt_chunk,
            accepted,
            dt_chunk,
        );
        let miss = cache_miss_cost(state.request, &self.cached, &self.content_sizes, cfg.cost_per_megabit)?;

        let mut queue: Vec<f64> = state.buffer[..occupied].to_vec();
        queue.extend(std::iter::repeat_n(bitrate, accepted));
        let playable = (cfg.slot_length / dt_chunk + TOLERANCE).floor() as usize;
        let consumed = playable.min(queue.len());
        let quality = playback_quality(&queue[..consumed]);

        let mut buffer = vec![0.0; cfg.buffer_slots];
        for (slot, &b) in buffer.iter_mut().zip(&queue[consumed..]) {
            *slot = b;
        }

        let reward = RewardBreakdown::from_costs(miss, quality, loss, freeze, cfg.weights);
        let next_state = SystemState {
            capacity: exo.capacity,
            request: exo.request,
            buffer,
            bs_index: exo.bs_index,
            sojourn_remaining: exo.sojourn_remaining,
        };
        self.check_state(&next_state)?;
        Ok(StepOutcome {
            next_state,
            reward,
            executed_bitrate: bitrate,
            offered_chunks: offered,
            delivered_chunks: accepted,
            consumed_chunks: consumed,
            dropped_playback: offered.saturating_sub(accepted) as f64 * dt_chunk,
            cache_hit,
        })
    }

    /// Verifies the state invariants without repairing anything.
    pub fn check_state(&self, state: &SystemState) -> Result<()> {
        let cfg = &self.config;
        let fail = |msg: String| Err(Error::Invariant(msg));
        if state.buffer.len() != cfg.buffer_slots {
            return fail(format!(
                "buffer has {} slots, expected {}",
                state.buffer.len(),
                cfg.buffer_slots
            ));
        }
        if !(state.capacity >= cfg.capacity_min - TOLERANCE && state.capacity <= cfg.capacity_max + TOLERANCE) {
            return fail(format!(
                "capacity {} outside [{}, {}]",
                state.capacity, cfg.capacity_min, cfg.capacity_max
            ));
        }
        if state.request == 0 || state.request > cfg.num_contents {
            return fail(format!("request {} unknown", state.request));
        }
        if state.bs_index == 0 || state.bs_index > cfg.num_base_stations {
            return fail(format!("base station {} unknown", state.bs_index));
        }
        if !(state.sojourn_remaining.is_finite() && state.sojourn_remaining > 0.0) {
            return fail(format!("sojourn {} must be positive", state.sojourn_remaining));
        }
        let mut seen_empty = false;
        for (i, &b) in state.buffer.iter().enumerate() {
            if b == 0.0 {
                seen_empty = true;
            } else if seen_empty {
                return fail(format!("FIFO packing broken at slot {i}"));
            } else if !(b >= cfg.rate_min - TOLERANCE && b <= cfg.rate_max + TOLERANCE) {
                return fail(format!("buffered bitrate {b} at slot {i} out of range"));
            }
        }
        let fill = state.buffer_fill(cfg.chunk_length);
        if fill > cfg.buffer_capacity + TOLERANCE {
            return fail(format!("buffer holds {fill} Mb, capacity {}", cfg.buffer_capacity));
        }
        Ok(())
    }

    /// Length of [`Env::encode_observation`] output.
    pub fn observation_dim(&self) -> usize {
        5 + self.config.buffer_slots
    }

    /// Normalized features, every entry in `[0, 1]`:
    /// capacity, cache hit, request size, buffer fill, occupancy, then the
    /// per-slot bitrates.
    pub fn encode_observation(&self, state: &SystemState) -> Vec<f64> {
        let cfg = &self.config;
        let mut obs = Vec::with_capacity(self.observation_dim());
        obs.push((state.capacity / cfg.capacity_max).clamp(0.0, 1.0));
        obs.push(if self.is_cached(state.request) { 1.0 } else { 0.0 });
        obs.push((self.content_sizes[state.request - 1] / self.max_content_size).clamp(0.0, 1.0));
        obs.push((state.buffer_fill(cfg.chunk_length) / cfg.buffer_capacity).clamp(0.0, 1.0));
        obs.push(state.occupied() as f64 / cfg.buffer_slots as f64);
        obs.extend(state.buffer.iter().map(|b| (b / cfg.rate_max).clamp(0.0, 1.0)));
        obs
    }
}
