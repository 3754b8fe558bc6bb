//! Comparison policies.
//!
//! Every policy maps the same observation vector the NAF agent sees to an
//! action on the unit interval, so all of them run through one rollout path.

mod actor_critic;
mod tabular;

use rand::{Rng, RngCore};

use crate::error::Result;
use crate::naf::NafAgent;

pub use actor_critic::{ActorCritic, ActorCriticConfig};
pub use tabular::{TabularQ, TabularQConfig};

/// Maps an observation to a unit-interval action.
pub trait Policy {
    fn name(&self) -> &str;

    fn act(&self, observation: &[f64], rng: &mut dyn RngCore) -> Result<f64>;
}

/// Uniform random allocation.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPolicy;

pub fn random_policy<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn act(&self, _observation: &[f64], rng: &mut dyn RngCore) -> Result<f64> {
        Ok(random_policy(rng))
    }
}

/// Greedy (noise-free) NAF policy.
impl Policy for NafAgent {
    fn name(&self) -> &str {
        "naf"
    }

    fn act(&self, observation: &[f64], _rng: &mut dyn RngCore) -> Result<f64> {
        self.policy(observation)
    }
}

/// Always the same unit action.
#[derive(Debug, Clone, Copy)]
pub struct ConstantPolicy(pub f64);

impl Policy for ConstantPolicy {
    fn name(&self) -> &str {
        "constant"
    }

    fn act(&self, _observation: &[f64], _rng: &mut dyn RngCore) -> Result<f64> {
        Ok(self.0)
    }
}

pub(crate) fn epsilon_at(start: f64, end: f64, step: usize, decay_steps: usize) -> f64 {
    if decay_steps == 0 || step >= decay_steps {
        end
    } else {
        start + (end - start) * step as f64 / decay_steps as f64
    }
}
