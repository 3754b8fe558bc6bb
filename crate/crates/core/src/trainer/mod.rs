//! End-to-end training: optional self-transfer pretraining, then the main
//! loop with exploration, replay, periodic augmentation and soft targets.

mod methods;
mod metrics;
mod sweep;

use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{isl_round, stl_pretrain, transfer_into, PretrainedBundle, RateGrid, StlConfig};
use crate::baselines::Policy;
use crate::env::{Env, EnvConfig};
use crate::error::{Error, Result};
use crate::naf::{NafAgent, NafConfig, RateMap, ReplayBuffer, Transition, DEFAULT_REPLAY_CAPACITY};

pub use methods::{train_method, Method, TrainedPolicy};
pub use metrics::{read_metrics_csv, write_metrics_csv, write_metrics_jsonl, MetricRecord, Phase};
pub use sweep::{parse_range, run_sweep, SweepKind, SweepRow};

/// Settings of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub learning_rate: f64,
    pub target_rate: f64,
    pub clip_norm: f64,
    pub hidden: Vec<usize>,
    /// Pretraining interactions; used only when `use_stl` is set.
    pub stl_steps: usize,
    pub use_stl: bool,
    pub use_isl: bool,
    /// Environment steps between augmentation rounds.
    pub isl_period: usize,
    /// Grid intervals for augmentation when the env has no grid.
    pub isl_resolution: usize,
    /// Episodes between evaluation records; 0 disables them.
    pub eval_interval: usize,
    pub eval_episodes: usize,
    pub noise_start: f64,
    pub noise_end: f64,
    /// Transitions required before the first gradient update. Defaults to
    /// ten batches.
    pub warmup: Option<usize>,
    /// Multiplier applied to env rewards before they reach the learner.
    pub reward_scale: f64,
    pub seed: u64,
    /// Fill the wall-clock column of metric records. Off by default so
    /// repeated runs produce identical files.
    pub record_wall_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 2000,
            steps_per_episode: 200,
            batch_size: 64,
            replay_capacity: DEFAULT_REPLAY_CAPACITY,
            learning_rate: 1e-3,
            target_rate: 0.005,
            clip_norm: 10.0,
            hidden: crate::nn::DEFAULT_HIDDEN.to_vec(),
            stl_steps: crate::augment::DEFAULT_STL_STEPS,
            use_stl: true,
            use_isl: true,
            isl_period: crate::augment::DEFAULT_ISL_PERIOD,
            isl_resolution: 8,
            eval_interval: 0,
            eval_episodes: 5,
            noise_start: 0.3,
            noise_end: 0.01,
            warmup: None,
            reward_scale: 0.05,
            seed: 0,
            record_wall_time: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        for (name, v) in [
            ("episodes", self.episodes),
            ("steps_per_episode", self.steps_per_episode),
            ("batch_size", self.batch_size),
            ("replay_capacity", self.replay_capacity),
            ("isl_period", self.isl_period),
            ("isl_resolution", self.isl_resolution),
            ("eval_episodes", self.eval_episodes),
        ] {
            if v == 0 {
                bad.push(format!("{name} must be >= 1"));
            }
        }
        if self.use_stl && self.stl_steps == 0 {
            bad.push("stl_steps must be >= 1 when pretraining is on".into());
        }
        for (name, v) in [("learning_rate", self.learning_rate), ("target_rate", self.target_rate)] {
            if !(v > 0.0 && v <= 1.0) {
                bad.push(format!("{name} {v} must lie in (0, 1]"));
            }
        }
        if !(self.noise_start >= 0.0 && self.noise_end >= 0.0) {
            bad.push("noise scales must be >= 0".into());
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            bad.push("reward_scale must be positive".into());
        }
        if !(self.clip_norm > 0.0) {
            bad.push("clip_norm must be positive".into());
        }
        if self.hidden.iter().any(|&h| h == 0) {
            bad.push("hidden layer sizes must be >= 1".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad))
        }
    }

    pub fn warmup_len(&self) -> usize {
        self.warmup.unwrap_or(10 * self.batch_size).max(1)
    }

    pub fn naf_config(&self, discount: f64) -> NafConfig {
        NafConfig {
            hidden: self.hidden.clone(),
            learning_rate: self.learning_rate,
            target_rate: self.target_rate,
            discount,
            clip_norm: self.clip_norm,
        }
    }

    pub fn stl_config(&self, discount: f64) -> StlConfig {
        StlConfig {
            steps: self.stl_steps,
            episode_len: self.steps_per_episode,
            batch_size: self.batch_size,
            warmup: self.warmup_len(),
            reward_scale: self.reward_scale,
            noise_start: self.noise_start,
            noise_end: self.noise_end,
            predictor_learning_rate: self.learning_rate,
            replay_capacity: self.replay_capacity,
            naf: self.naf_config(discount),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub agent: NafAgent,
    pub metrics: Vec<MetricRecord>,
    pub pretrained: Option<PretrainedBundle>,
    /// Total transitions contributed by augmentation.
    pub isl_added: usize,
    pub env_steps: usize,
}

/// Runs pretraining (when enabled) and the main loop. Deterministic per
/// `config.seed`.
pub fn train(env_config: &EnvConfig, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with_callback(env_config, config, |_| {})
}

/// [`train`] that also hands each metric record to `on_record` as it is
/// produced.
pub fn train_with_callback(
    env_config: &EnvConfig,
    config: &TrainConfig,
    mut on_record: impl FnMut(&MetricRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    let env = Env::new(env_config.clone())?;
    let started = Instant::now();
    let wall = |on: bool| {
        if on {
            Some(started.elapsed().as_secs_f64())
        } else {
            None
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let discount = env_config.discount;
    let map = RateMap::new(env_config.rate_min, env_config.rate_max)?;
    let mut agent = NafAgent::new(env.observation_dim(), config.naf_config(discount), &mut rng)?;
    let mut metrics = Vec::new();
    let mut emit = |rec: MetricRecord, metrics: &mut Vec<MetricRecord>| -> Result<()> {
        rec.check_finite()?;
        on_record(&rec);
        metrics.push(rec);
        Ok(())
    };

    let pretrained = if config.use_stl {
        let bundle = stl_pretrain(&env, &config.stl_config(discount), &mut rng)?;
        transfer_into(&mut agent, &bundle)?;
        let mut rec = MetricRecord::new(Phase::Stl, 0, config.stl_steps);
        rec.wall_time = wall(config.record_wall_time);
        emit(rec, &mut metrics)?;
        Some(bundle)
    } else {
        None
    };

    let grid = match env.rate_grid() {
        Some(g) => g.clone(),
        None => RateGrid::new(env_config.rate_min, env_config.rate_max, config.isl_resolution)?,
    };
    let mut buffer = ReplayBuffer::new(config.replay_capacity);
    let warmup = config.warmup_len();
    let total = config.episodes * config.steps_per_episode;
    let decay = total / 2;
    let mut step = 0usize;
    let mut isl_added = 0usize;

    for episode in 0..config.episodes {
        let mut state = env.reset(&mut rng);
        let mut episode_reward = 0.0;
        let mut discounted = 0.0;
        let mut weight = 1.0;
        let mut components = [0.0; 4];
        let mut loss_sum = 0.0;
        let mut updates = 0usize;
        let mut noise = config.noise_start;
        for t in 0..config.steps_per_episode {
            let observation = env.encode_observation(&state);
            noise = crate::augment::linear_noise(config.noise_start, config.noise_end, step, decay);
            let a = agent.select_action(&observation, noise, &mut rng)?;
            let outcome = env.step(&state, env.action(map.to_bitrate(a)?)?, &mut rng)?;
            let reward = outcome.reward.weighted_total;
            episode_reward += reward;
            discounted += weight * reward;
            weight *= discount;
            for (acc, c) in components.iter_mut().zip(outcome.reward.components()) {
                *acc += c;
            }
            buffer.push(Transition {
                observation,
                action_unit: map.from_bitrate(outcome.executed_bitrate)?,
                reward_components: outcome.reward,
                reward: config.reward_scale * reward,
                next_observation: env.encode_observation(&outcome.next_state),
                terminal: t + 1 == config.steps_per_episode,
                origin: Some(state),
            });
            step += 1;
            if config.use_isl && step % config.isl_period == 0 && buffer.len() >= config.batch_size {
                isl_added += isl_round(
                    &mut buffer,
                    &agent,
                    &env,
                    &grid,
                    config.batch_size,
                    config.reward_scale,
                    &mut rng,
                )?;
            }
            if buffer.len() >= warmup {
                let batch = buffer.sample(config.batch_size, &mut rng);
                let loss = agent
                    .update(&batch)
                    .map_err(|e| Error::NonFinite(format!("update at episode {episode}, step {step}: {e}")))?;
                loss_sum += loss;
                updates += 1;
            }
            state = outcome.next_state;
        }
        let steps = config.steps_per_episode as f64;
        let mut rec = MetricRecord::new(Phase::Train, episode, step);
        rec.loss = (updates > 0).then(|| loss_sum / updates as f64);
        rec.episode_reward = Some(episode_reward);
        rec.discounted_reward = Some(discounted);
        rec.average_reward = Some(episode_reward / steps);
        rec.cache_miss = Some(components[0] / steps);
        rec.quality = Some(components[1] / steps);
        rec.loss_cost = Some(components[2] / steps);
        rec.freeze = Some(components[3] / steps);
        rec.noise_scale = Some(noise);
        rec.buffer_len = Some(buffer.len());
        rec.isl_added = Some(isl_added);
        rec.wall_time = wall(config.record_wall_time);
        emit(rec, &mut metrics)?;

        if config.eval_interval > 0 && (episode + 1) % config.eval_interval == 0 {
            let report = evaluate(
                &agent,
                &env,
                config.eval_episodes,
                config.steps_per_episode,
                config.seed.wrapping_add(0x5eed).wrapping_add(episode as u64),
            )?;
            let mut rec = MetricRecord::new(Phase::Eval, episode, step);
            rec.episode_reward = Some(report.mean_return);
            rec.discounted_reward = Some(report.mean_discounted);
            rec.average_reward = Some(report.mean_average);
            rec.wall_time = wall(config.record_wall_time);
            emit(rec, &mut metrics)?;
        }
    }

    Ok(TrainOutcome {
        agent,
        metrics,
        pretrained,
        isl_added,
        env_steps: step,
    })
}

/// Summary of noise-free rollouts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub episodes: usize,
    /// Undiscounted per-episode return.
    pub mean_return: f64,
    pub std_return: f64,
    pub mean_discounted: f64,
    pub std_discounted: f64,
    /// Per-slot average reward.
    pub mean_average: f64,
    pub std_average: f64,
}

/// Rolls `policy` out for `episodes` episodes of `steps` slots each. Episode
/// `i` uses a world seeded from `seed` and `i`, so different policies see the
/// same exogenous draws.
pub fn evaluate(policy: &dyn Policy, env: &Env, episodes: usize, steps: usize, seed: u64) -> Result<EvalReport> {
    if episodes == 0 || steps == 0 {
        return Err(Error::Precondition(
            "evaluation needs episodes >= 1 and steps >= 1".into(),
        ));
    }
    let cfg = env.config();
    let map = RateMap::new(cfg.rate_min, cfg.rate_max)?;
    let mut returns = Vec::with_capacity(episodes);
    let mut discounted = Vec::with_capacity(episodes);
    for i in 0..episodes {
        let episode_seed = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i as u64);
        let mut world = ChaCha8Rng::seed_from_u64(episode_seed);
        let mut choice = ChaCha8Rng::seed_from_u64(episode_seed ^ 0xa076_1d64_78bd_642f);
        let mut state = env.reset(&mut world);
        let (mut total, mut disc, mut w) = (0.0, 0.0, 1.0);
        for _ in 0..steps {
            let obs = env.encode_observation(&state);
            let a = policy.act(&obs, &mut choice)?;
            let out = env.step(&state, env.action(map.to_bitrate(a)?)?, &mut world)?;
            total += out.reward.weighted_total;
            disc += w * out.reward.weighted_total;
            w *= cfg.discount;
            state = out.next_state;
        }
        if !total.is_finite() {
            return Err(Error::NonFinite(format!("evaluation episode {i}")));
        }
        returns.push(total);
        discounted.push(disc);
    }
    let (mean_return, std_return) = mean_std(&returns);
    let (mean_discounted, std_discounted) = mean_std(&discounted);
    Ok(EvalReport {
        episodes,
        mean_return,
        std_return,
        mean_discounted,
        std_discounted,
        mean_average: mean_return / steps as f64,
        std_average: std_return / steps as f64,
    })
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn checkpoint_save(agent: &NafAgent, path: &Path) -> Result<()> {
    agent.save(path)
}

pub fn checkpoint_load(path: &Path, observation_dim: Option<usize>) -> Result<NafAgent> {
    NafAgent::load(path, observation_dim)
}
