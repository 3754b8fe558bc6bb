use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the link capacity evolves from slot to slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CapacityModel {
    /// I.i.d. uniform on `[capacity_min, capacity_max]`.
    Uniform,
    /// `C' = rho * C + (1 - rho) * X` with `X` uniform on the capacity range.
    Ar1 { rho: f64 },
    /// I.i.d. uniform choice among a finite set of capacities.
    Levels { values: Vec<f64> },
}

/// Parameters of one simulated world.
///
/// Every field maps to one key of the TOML config file; missing keys take
/// the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub num_base_stations: usize,
    pub num_contents: usize,
    /// Cached content ids, 1-based.
    pub cache_set: Vec<usize>,
    /// Per-content size in megabits. Drawn uniformly from [20, 100] using
    /// `seed` when absent.
    pub content_sizes: Option<Vec<f64>>,
    /// Chunk duration in seconds.
    pub chunk_length: f64,
    /// Client buffer size in megabits.
    pub buffer_capacity: f64,
    pub rate_min: f64,
    pub rate_max: f64,
    pub capacity_min: f64,
    pub capacity_max: f64,
    pub capacity_model: CapacityModel,
    pub zipf_exponent: f64,
    /// Mean time in seconds a user stays attached to one base station.
    pub mean_sojourn: f64,
    /// Decision slot length in seconds.
    pub slot_length: f64,
    /// Weights of (cache miss, quality, loss, freeze).
    pub weights: [f64; 4],
    pub discount: f64,
    /// Server-to-BS rate in megabits per second; sets the miss download delay.
    pub backhaul_rate: f64,
    pub cost_per_megabit: f64,
    /// Length of the buffer vector.
    pub buffer_slots: usize,
    /// When set, requested bitrates snap to a uniform grid of this many
    /// intervals over `[rate_min, rate_max]`.
    pub rate_grid: Option<usize>,
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            num_base_stations: 20,
            num_contents: 100,
            cache_set: (1..=20).collect(),
            content_sizes: None,
            chunk_length: 10.0,
            buffer_capacity: 180.0,
            rate_min: 2.0,
            rate_max: 10.0,
            capacity_min: 2.0,
            capacity_max: 80.0,
            capacity_model: CapacityModel::Uniform,
            zipf_exponent: 0.8,
            mean_sojourn: 60.0,
            slot_length: 10.0,
            weights: [1.0; 4],
            discount: 0.99,
            backhaul_rate: 50.0,
            cost_per_megabit: 0.1,
            buffer_slots: 16,
            rate_grid: None,
            seed: 0,
        }
    }
}

impl EnvConfig {
    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let mut check = |ok: bool, msg: String| {
            if !ok {
                bad.push(msg);
            }
        };
        let finite_pos = |x: f64| x.is_finite() && x > 0.0;

        check(self.num_base_stations >= 1, "num_base_stations must be >= 1".into());
        check(self.num_contents >= 1, "num_contents must be >= 1".into());
        for &id in &self.cache_set {
            check(
                (1..=self.num_contents).contains(&id),
                format!("cache_set entry {id} outside 1..={}", self.num_contents),
            );
        }
        if let Some(sizes) = &self.content_sizes {
            check(
                sizes.len() == self.num_contents,
                format!(
                    "content_sizes has {} entries, expected {}",
                    sizes.len(),
                    self.num_contents
                ),
            );
            check(
                sizes.iter().all(|&s| finite_pos(s)),
                "content_sizes must be finite and positive".into(),
            );
        }
        check(finite_pos(self.chunk_length), "chunk_length must be > 0".into());
        check(finite_pos(self.slot_length), "slot_length must be > 0".into());
        check(finite_pos(self.buffer_capacity), "buffer_capacity must be > 0".into());
        check(
            finite_pos(self.rate_min) && self.rate_min <= self.rate_max && self.rate_max.is_finite(),
            format!(
                "need 0 < rate_min <= rate_max (got {} and {})",
                self.rate_min, self.rate_max
            ),
        );
        check(
            finite_pos(self.capacity_min) && self.capacity_min <= self.capacity_max && self.capacity_max.is_finite(),
            format!(
                "need 0 < capacity_min <= capacity_max (got {} and {})",
                self.capacity_min, self.capacity_max
            ),
        );
        match &self.capacity_model {
            CapacityModel::Uniform => {}
            CapacityModel::Ar1 { rho } => check((0.0..1.0).contains(rho), format!("ar1 rho {rho} must lie in [0, 1)")),
            CapacityModel::Levels { values } => {
                check(!values.is_empty(), "capacity levels must be non-empty".into());
                check(
                    values
                        .iter()
                        .all(|v| (self.capacity_min..=self.capacity_max).contains(v)),
                    "capacity levels must lie in [capacity_min, capacity_max]".into(),
                );
            }
        }
        check(
            self.zipf_exponent.is_finite() && self.zipf_exponent >= 0.0,
            "zipf_exponent must be >= 0".into(),
        );
        check(finite_pos(self.mean_sojourn), "mean_sojourn must be > 0".into());
        check(
            self.weights.iter().all(|w| w.is_finite() && *w >= 0.0),
            "weights must be finite and >= 0".into(),
        );
        check(
            self.discount > 0.0 && self.discount < 1.0,
            format!("discount {} must lie in (0, 1)", self.discount),
        );
        check(finite_pos(self.backhaul_rate), "backhaul_rate must be > 0".into());
        check(
            self.cost_per_megabit.is_finite() && self.cost_per_megabit >= 0.0,
            "cost_per_megabit must be >= 0".into(),
        );
        check(self.buffer_slots >= 1, "buffer_slots must be >= 1".into());
        check(
            self.buffer_slots as f64 * self.rate_min * self.chunk_length >= self.buffer_capacity,
            format!(
                "buffer_slots * rate_min * chunk_length = {} cannot represent a full buffer of {}",
                self.buffer_slots as f64 * self.rate_min * self.chunk_length,
                self.buffer_capacity
            ),
        );
        if let Some(d) = self.rate_grid {
            check(d >= 1, "rate_grid must be >= 1".into());
            check(
                self.rate_min < self.rate_max,
                "rate_grid needs rate_min < rate_max".into(),
            );
        }

        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad))
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }
}
