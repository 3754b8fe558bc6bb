use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate, train_method, Method, TrainConfig};
use crate::env::{Env, EnvConfig};
use crate::error::{domain, Error, Result};

/// Which env parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Client buffer size in megabits.
    Buffer,
    /// Upper end of the link capacity range.
    Capacity,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Buffer => "buffer",
            SweepKind::Capacity => "capacity",
        }
    }

    /// Default sweep points.
    pub fn default_points(self) -> Vec<f64> {
        match self {
            SweepKind::Buffer => (0..6).map(|i| 80.0 + 30.0 * i as f64).collect(),
            SweepKind::Capacity => (1..=4).map(|i| 20.0 * i as f64).collect(),
        }
    }

    pub fn apply(self, base: &EnvConfig, point: f64) -> EnvConfig {
        let mut cfg = base.clone();
        match self {
            SweepKind::Buffer => cfg.buffer_capacity = point,
            SweepKind::Capacity => cfg.capacity_max = point,
        }
        cfg
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "buffer" => Ok(SweepKind::Buffer),
            "capacity" => Ok(SweepKind::Capacity),
            other => Err(domain(format!("unknown sweep kind `{other}`; valid: buffer, capacity"))),
        }
    }
}

/// Parses `start:end:step` (inclusive) or a comma-separated list.
pub fn parse_range(text: &str) -> Result<Vec<f64>> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| domain(format!("`{t}` is not a number")))
    };
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(domain(format!("range `{text}` must be start:end:step")));
        }
        let (start, end, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || end < start {
            return Err(domain(format!("range `{text}` needs step > 0 and end >= start")));
        }
        let count = ((end - start) / step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| start + step * i as f64).collect())
    } else {
        let points = text.split(',').map(num).collect::<Result<Vec<_>>>()?;
        if points.is_empty() {
            return Err(domain("empty sweep range"));
        }
        Ok(points)
    }
}

/// One evaluated (point, method, seed) triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kind: SweepKind,
    pub point: f64,
    pub method: String,
    pub seed: u64,
    /// Per-slot average reward over the evaluation episodes.
    pub mean_reward: f64,
    pub std_reward: f64,
}

/// Trains and evaluates every method at every point for every seed. Jobs run
/// in parallel; rows come back in (point, method, seed) order.
pub fn run_sweep(
    kind: SweepKind,
    points: &[f64],
    methods: &[Method],
    seeds: &[u64],
    base_env: &EnvConfig,
    train_config: &TrainConfig,
) -> Result<Vec<SweepRow>> {
    if points.is_empty() || methods.is_empty() || seeds.is_empty() {
        return Err(domain("sweep needs at least one point, method and seed"));
    }
    let mut jobs = Vec::new();
    for &point in points {
        let env_cfg = kind.apply(base_env, point);
        env_cfg.validate()?;
        for &method in methods {
            for &seed in seeds {
                jobs.push((point, env_cfg.clone(), method, seed));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(point, env_cfg, method, seed)| {
            let cfg = TrainConfig {
                seed,
                ..train_config.clone()
            };
            let policy = train_method(method, &env_cfg, &cfg)?;
            let env = Env::new(env_cfg)?;
            let report = evaluate(
                &policy,
                &env,
                cfg.eval_episodes,
                cfg.steps_per_episode,
                seed.wrapping_add(1_000_003),
            )?;
            Ok(SweepRow {
                kind,
                point,
                method: method.name().to_string(),
                seed,
                mean_reward: report.mean_average,
                std_reward: report.std_average,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(
            parse_range("80:230:30").unwrap(),
            vec![80.0, 110.0, 140.0, 170.0, 200.0, 230.0]
        );
        assert_eq!(parse_range("5").unwrap(), vec![5.0]);
        assert_eq!(parse_range("1,2.5").unwrap(), vec![1.0, 2.5]);
        assert!(parse_range("3:1:1").is_err());
        assert!(parse_range("a:b").is_err());
        assert_eq!(SweepKind::Buffer.default_points(), parse_range("80:230:30").unwrap());
    }

    #[test]
    fn cardinality() {
        let cfg = TrainConfig {
            episodes: 1,
            steps_per_episode: 5,
            eval_episodes: 1,
            ..TrainConfig::default()
        };
        let rows = run_sweep(
            SweepKind::Buffer,
            &[80.0, 110.0],
            &[Method::Random, Method::NafNoDeep],
            &[1, 2, 3],
            &EnvConfig::default(),
            &cfg,
        )
        .unwrap();
        assert_eq!(rows.len(), 12);
        assert_eq!(rows[0].point, 80.0);
        assert_eq!(rows[11].seed, 3);
    }
}
