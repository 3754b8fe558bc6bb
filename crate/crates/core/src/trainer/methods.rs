use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{train, TrainConfig};
use crate::baselines::{ActorCritic, ActorCriticConfig, Policy, RandomPolicy, TabularQ, TabularQConfig};
use crate::env::{Env, EnvConfig};
use crate::error::{Error, Result};
use crate::naf::NafAgent;

/// Learners selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// NAF with self-transfer pretraining and replay augmentation.
    Dstrl,
    /// Plain NAF.
    DeepNaf,
    /// Tabular Q-learning on binned states and grid actions.
    NafNoDeep,
    ActorCritic,
    Random,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Dstrl,
        Method::DeepNaf,
        Method::NafNoDeep,
        Method::ActorCritic,
        Method::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Dstrl => "dstrl",
            Method::DeepNaf => "deep-naf",
            Method::NafNoDeep => "naf-no-deep",
            Method::ActorCritic => "actor-critic",
            Method::Random => "random",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
            Error::Domain(format!("unknown method `{s}`; valid: {}", names.join(", ")))
        })
    }
}

/// A trained policy of any method.
#[derive(Debug, Clone)]
pub enum TrainedPolicy {
    Naf(Box<NafAgent>),
    Tabular(TabularQ),
    ActorCritic(Box<ActorCritic>),
    Random(RandomPolicy),
}

impl Policy for TrainedPolicy {
    fn name(&self) -> &str {
        match self {
            TrainedPolicy::Naf(p) => p.name(),
            TrainedPolicy::Tabular(p) => p.name(),
            TrainedPolicy::ActorCritic(p) => p.name(),
            TrainedPolicy::Random(p) => p.name(),
        }
    }

    fn act(&self, observation: &[f64], rng: &mut dyn RngCore) -> Result<f64> {
        match self {
            TrainedPolicy::Naf(p) => p.act(observation, rng),
            TrainedPolicy::Tabular(p) => p.act(observation, rng),
            TrainedPolicy::ActorCritic(p) => p.act(observation, rng),
            TrainedPolicy::Random(p) => p.act(observation, rng),
        }
    }
}

/// Trains `method` with the episode budget, reward scale and seed of
/// `config`. NAF variants override the pretraining and augmentation flags.
pub fn train_method(method: Method, env_config: &EnvConfig, config: &TrainConfig) -> Result<TrainedPolicy> {
    config.validate()?;
    match method {
        Method::Dstrl | Method::DeepNaf => {
            let on = method == Method::Dstrl;
            let cfg = TrainConfig {
                use_stl: on,
                use_isl: on,
                ..config.clone()
            };
            Ok(TrainedPolicy::Naf(Box::new(train(env_config, &cfg)?.agent)))
        }
        Method::NafNoDeep => {
            let env = Env::new(env_config.clone())?;
            let tq = TabularQConfig {
                episodes: config.episodes,
                episode_len: config.steps_per_episode,
                reward_scale: config.reward_scale,
                grid_resolution: config.isl_resolution,
                ..TabularQConfig::default()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut q = TabularQ::new(&env, &tq)?;
            q.train(&env, &tq, &mut rng)?;
            Ok(TrainedPolicy::Tabular(q))
        }
        Method::ActorCritic => {
            let env = Env::new(env_config.clone())?;
            let ac = ActorCriticConfig {
                episodes: config.episodes,
                episode_len: config.steps_per_episode,
                reward_scale: config.reward_scale,
                actor_learning_rate: config.learning_rate,
                critic_learning_rate: config.learning_rate,
                ..ActorCriticConfig::default()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut learner = ActorCritic::new(&env, &ac, &mut rng)?;
            learner.train(&env, &ac, &mut rng)?;
            Ok(TrainedPolicy::ActorCritic(Box::new(learner)))
        }
        Method::Random => Ok(TrainedPolicy::Random(RandomPolicy)),
    }
}
