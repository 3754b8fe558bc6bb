use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Policy;
use crate::env::Env;
use crate::error::{domain, Error, Result};
use crate::naf::RateMap;
use crate::nn::{layer_dims, AdamState, Mlp, OutputActivation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActorCriticConfig {
    pub hidden: Vec<usize>,
    pub actor_learning_rate: f64,
    pub critic_learning_rate: f64,
    /// Fixed standard deviation of the Gaussian actor on the unit scale.
    pub action_std: f64,
    pub episodes: usize,
    pub episode_len: usize,
    pub reward_scale: f64,
    /// Overrides the env discount when set.
    pub discount: Option<f64>,
}

impl Default for ActorCriticConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 32],
            actor_learning_rate: 1e-3,
            critic_learning_rate: 1e-3,
            action_std: 0.1,
            episodes: 300,
            episode_len: 200,
            reward_scale: 0.05,
            discount: None,
        }
    }
}

/// Gaussian actor with a sigmoid mean and a state-value critic, trained
/// with one-step advantage updates.
#[derive(Debug, Clone)]
pub struct ActorCritic {
    actor: Mlp,
    critic: Mlp,
    adam_actor: AdamState,
    adam_critic: AdamState,
    action_std: f64,
    discount: f64,
    map: RateMap,
}

impl ActorCritic {
    pub fn new<R: Rng + ?Sized>(env: &Env, config: &ActorCriticConfig, rng: &mut R) -> Result<Self> {
        if !(config.action_std > 0.0) {
            return Err(domain("actor std must be positive"));
        }
        let discount = config.discount.unwrap_or(env.config().discount);
        if !(discount > 0.0 && discount < 1.0) {
            return Err(domain(format!("discount {discount} outside (0, 1)")));
        }
        let dims = layer_dims(env.observation_dim(), &config.hidden, 1);
        let actor = Mlp::new(&dims, OutputActivation::Sigmoid, rng)?;
        let critic = Mlp::new(&dims, OutputActivation::Identity, rng)?;
        Ok(Self {
            adam_actor: AdamState::new(actor.num_params(), config.actor_learning_rate),
            adam_critic: AdamState::new(critic.num_params(), config.critic_learning_rate),
            actor,
            critic,
            action_std: config.action_std,
            discount,
            map: RateMap::new(env.config().rate_min, env.config().rate_max)?,
        })
    }

    pub fn mean_action(&self, observation: &[f64]) -> Result<f64> {
        Ok(self.actor.forward(observation)?[0])
    }

    pub fn value(&self, observation: &[f64]) -> Result<f64> {
        Ok(self.critic.forward(observation)?[0])
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    /// One advantage update from a single transition; returns the TD error.
    pub fn learn(
        &mut self,
        observation: &[f64],
        action_unit: f64,
        reward: f64,
        next_observation: &[f64],
        terminal: bool,
    ) -> Result<f64> {
        let v = self.critic.trace(observation)?;
        let bootstrap = if terminal {
            0.0
        } else {
            self.discount * self.critic.forward(next_observation)?[0]
        };
        let td = reward + bootstrap - v.output()[0];
        if !td.is_finite() {
            return Err(Error::NonFinite("actor-critic TD error".into()));
        }
        let mut critic_grad = vec![0.0; self.critic.num_params()];
        // d(td^2)/dV = -2 td
        self.critic.accumulate_gradient(&v, &[-2.0 * td], &mut critic_grad);
        self.adam_critic
            .step(self.critic.params_mut().values_mut(), &critic_grad)?;

        let mu = self.actor.trace(observation)?;
        let score = (action_unit - mu.output()[0]) / (self.action_std * self.action_std);
        let mut actor_grad = vec![0.0; self.actor.num_params()];
        // Descend on -td * log pi.
        self.actor.accumulate_gradient(&mu, &[-td * score], &mut actor_grad);
        self.adam_actor
            .step(self.actor.params_mut().values_mut(), &actor_grad)?;
        Ok(td)
    }

    pub fn train<R: Rng + ?Sized>(&mut self, env: &Env, config: &ActorCriticConfig, rng: &mut R) -> Result<()> {
        let noise = Normal::new(0.0, self.action_std).expect("validated std");
        for _ in 0..config.episodes {
            let mut state = env.reset(rng);
            let mut obs = env.encode_observation(&state);
            for t in 0..config.episode_len {
                let a = (self.mean_action(&obs)? + noise.sample(rng)).clamp(0.0, 1.0);
                let outcome = env.step(&state, env.action(self.map.to_bitrate(a)?)?, rng)?;
                let next_obs = env.encode_observation(&outcome.next_state);
                let r = config.reward_scale * outcome.reward.weighted_total;
                self.learn(&obs, a, r, &next_obs, t + 1 == config.episode_len)?;
                state = outcome.next_state;
                obs = next_obs;
            }
        }
        Ok(())
    }
}

impl Policy for ActorCritic {
    fn name(&self) -> &str {
        "actor-critic"
    }

    fn act(&self, observation: &[f64], _rng: &mut dyn RngCore) -> Result<f64> {
        self.mean_action(observation)
    }
}
