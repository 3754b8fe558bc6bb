use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Env, StepOutcome, SystemState};
use crate::error::Result;

/// One CSV row of a trajectory dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub slot: usize,
    pub bs: usize,
    pub capacity: f64,
    pub request: usize,
    pub cache_hit: bool,
    pub action_bitrate: f64,
    pub tau: usize,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
    pub reward: f64,
    /// Buffered megabits after the slot.
    pub buffer_fill: f64,
}

impl TrajectoryRow {
    pub fn new(env: &Env, slot: usize, state: &SystemState, outcome: &StepOutcome) -> Self {
        let r = &outcome.reward;
        Self {
            slot,
            bs: state.bs_index,
            capacity: state.capacity,
            request: state.request,
            cache_hit: outcome.cache_hit,
            action_bitrate: outcome.executed_bitrate,
            tau: outcome.delivered_chunks,
            r1: r.cache_miss,
            r2: r.quality,
            r3: r.loss,
            r4: r.freeze,
            reward: r.weighted_total,
            buffer_fill: outcome.next_state.buffer_fill(env.config().chunk_length),
        }
    }
}

/// Streams trajectory rows as CSV with a header line.
pub struct TrajectoryWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(writer: W) -> Self {
        Self {
            inner: csv::Writer::from_writer(writer),
        }
    }

    pub fn write(&mut self, row: &TrajectoryRow) -> Result<()> {
        self.inner.serialize(row)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}
