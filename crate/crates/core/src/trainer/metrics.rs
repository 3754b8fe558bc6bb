use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Stl,
    Train,
    Eval,
}

/// One row of the training log. Reward fields are in env units; averages
/// are per slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub phase: Phase,
    pub episode: usize,
    /// Environment steps taken so far in this phase.
    pub step: usize,
    pub loss: Option<f64>,
    pub episode_reward: Option<f64>,
    pub discounted_reward: Option<f64>,
    pub average_reward: Option<f64>,
    pub cache_miss: Option<f64>,
    pub quality: Option<f64>,
    pub loss_cost: Option<f64>,
    pub freeze: Option<f64>,
    pub noise_scale: Option<f64>,
    pub buffer_len: Option<usize>,
    pub isl_added: Option<usize>,
    pub wall_time: Option<f64>,
}

impl MetricRecord {
    pub fn new(phase: Phase, episode: usize, step: usize) -> Self {
        Self {
            phase,
            episode,
            step,
            loss: None,
            episode_reward: None,
            discounted_reward: None,
            average_reward: None,
            cache_miss: None,
            quality: None,
            loss_cost: None,
            freeze: None,
            noise_scale: None,
            buffer_len: None,
            isl_added: None,
            wall_time: None,
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        let fields = [
            ("loss", self.loss),
            ("episode_reward", self.episode_reward),
            ("discounted_reward", self.discounted_reward),
            ("average_reward", self.average_reward),
            ("cache_miss", self.cache_miss),
            ("quality", self.quality),
            ("loss_cost", self.loss_cost),
            ("freeze", self.freeze),
            ("noise_scale", self.noise_scale),
        ];
        for (name, v) in fields {
            if let Some(x) = v {
                if !x.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "metric {name} at {:?} episode {} step {}",
                        self.phase, self.episode, self.step
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn write_metrics_csv(path: &Path, records: &[MetricRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_metrics_jsonl(path: &Path, records: &[MetricRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mut a = MetricRecord::new(Phase::Train, 3, 600);
        a.loss = Some(0.25);
        a.buffer_len = Some(600);
        let b = MetricRecord::new(Phase::Eval, 3, 600);
        write_metrics_csv(&path, &[a.clone(), b.clone()]).unwrap();
        assert_eq!(read_metrics_csv(&path).unwrap(), vec![a.clone(), b]);

        let jl = dir.path().join("m.jsonl");
        write_metrics_jsonl(&jl, &[a]).unwrap();
        let text = std::fs::read_to_string(jl).unwrap();
        assert!(text.starts_with("{\"phase\":\"train\""));
        assert_eq!(text.lines().count(), 1);
    }

    #[test]
    fn non_finite_rejected() {
        let mut r = MetricRecord::new(Phase::Train, 0, 1);
        r.loss = Some(f64::NAN);
        assert!(matches!(r.check_finite(), Err(Error::NonFinite(_))));
    }
}
