//! Normalized advantage function agent.
//!
//! The Q-function is split into a state value and a quadratic advantage,
//! `Q(s, a) = V(s) - 0.5 * L(s)^2 * (a - mu(s))^2`, so the greedy action is
//! the policy head `mu(s)` itself. Actions live on the unit interval and are
//! mapped affinely onto `[rate_min, rate_max]`.
//!
//! Learning consumes only stored [`Transition`]s; nothing here takes
//! transition probabilities.

mod checkpoint;
mod replay;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::nn::{clip_global_norm, layer_dims, AdamState, Mlp, OutputActivation, DEFAULT_HIDDEN};

pub use checkpoint::{AGENT_MAGIC, AGENT_VERSION};
pub use replay::{ReplayBuffer, Transition, DEFAULT_REPLAY_CAPACITY};

const UNIT_TOLERANCE: f64 = 1e-12;

/// Hyperparameters of a [`NafAgent`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NafConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    /// Soft target blend per update.
    pub target_rate: f64,
    pub discount: f64,
    /// Global gradient-norm cap applied before each Adam step.
    pub clip_norm: f64,
}

impl Default for NafConfig {
    fn default() -> Self {
        Self {
            hidden: DEFAULT_HIDDEN.to_vec(),
            learning_rate: 1e-3,
            target_rate: 0.005,
            discount: 0.99,
            clip_norm: 10.0,
        }
    }
}

/// Which heads are excluded from gradient updates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrozenHeads {
    pub mu: bool,
    pub value: bool,
    pub curvature: bool,
}

/// Head outputs for one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadValues {
    pub mu: f64,
    pub value: f64,
    /// `L(s)`, the square root of the advantage curvature.
    pub curvature: f64,
}

impl HeadValues {
    pub fn advantage(&self, action_unit: f64) -> f64 {
        let d = action_unit - self.mu;
        -0.5 * self.curvature * self.curvature * d * d
    }

    pub fn q_value(&self, action_unit: f64) -> f64 {
        self.value + self.advantage(action_unit)
    }
}

/// Affine map between the unit action interval and bitrates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateMap {
    pub rate_min: f64,
    pub rate_max: f64,
}

impl RateMap {
    pub fn new(rate_min: f64, rate_max: f64) -> Result<Self> {
        if !(rate_min > 0.0 && rate_min <= rate_max && rate_max.is_finite()) {
            return Err(domain(format!("invalid rate range [{rate_min}, {rate_max}]")));
        }
        Ok(Self { rate_min, rate_max })
    }

    pub fn to_bitrate(&self, action_unit: f64) -> Result<f64> {
        if !(action_unit >= -UNIT_TOLERANCE && action_unit <= 1.0 + UNIT_TOLERANCE) {
            return Err(domain(format!("unit action {action_unit} outside [0, 1]")));
        }
        let a = action_unit.clamp(0.0, 1.0);
        Ok(self.rate_min + a * (self.rate_max - self.rate_min))
    }

    pub fn from_bitrate(&self, bitrate: f64) -> Result<f64> {
        let span = self.rate_max - self.rate_min;
        if !(bitrate >= self.rate_min - 1e-9 && bitrate <= self.rate_max + 1e-9) {
            return Err(domain(format!(
                "bitrate {bitrate} outside [{}, {}]",
                self.rate_min, self.rate_max
            )));
        }
        if span == 0.0 {
            return Ok(0.0);
        }
        Ok(((bitrate - self.rate_min) / span).clamp(0.0, 1.0))
    }
}

/// `y = r + gamma * V'(s')`, or `y = r` on terminal transitions.
pub fn td_target(
    reward: f64,
    next_observation: &[f64],
    target_value: &Mlp,
    discount: f64,
    terminal: bool,
) -> Result<f64> {
    if terminal {
        return Ok(reward);
    }
    Ok(reward + discount * target_value.forward(next_observation)?[0])
}

/// Parameter gradients of the batch loss, one vector per head.
#[derive(Debug, Clone, PartialEq)]
pub struct NafGradients {
    pub mu: Vec<f64>,
    pub value: Vec<f64>,
    pub curvature: Vec<f64>,
}

/// The three-headed quadratic Q-network with its value target.
#[derive(Debug, Clone)]
pub struct NafAgent {
    mu_net: Mlp,
    value_net: Mlp,
    curvature_net: Mlp,
    target_value: Mlp,
    adam_mu: AdamState,
    adam_value: AdamState,
    adam_curvature: AdamState,
    frozen: FrozenHeads,
    config: NafConfig,
    observation_dim: usize,
}

impl NafAgent {
    pub fn new<R: Rng + ?Sized>(observation_dim: usize, config: NafConfig, rng: &mut R) -> Result<Self> {
        let dims = layer_dims(observation_dim, &config.hidden, 1);
        let mu_net = Mlp::new(&dims, OutputActivation::Sigmoid, rng)?;
        let value_net = Mlp::new(&dims, OutputActivation::Identity, rng)?;
        let curvature_net = Mlp::new(&dims, OutputActivation::Sigmoid, rng)?;
        Self::from_nets(mu_net, value_net, curvature_net, config)
    }

    /// Assembles an agent from existing heads; the target copies the value head.
    pub fn from_nets(mu_net: Mlp, value_net: Mlp, curvature_net: Mlp, config: NafConfig) -> Result<Self> {
        if !(config.discount > 0.0 && config.discount < 1.0) {
            return Err(domain(format!("discount {} outside (0, 1)", config.discount)));
        }
        if !(config.target_rate >= 0.0 && config.target_rate <= 1.0) {
            return Err(domain(format!("target rate {} outside [0, 1]", config.target_rate)));
        }
        let observation_dim = mu_net.input_dim();
        let dims = layer_dims(observation_dim, &config.hidden, 1);
        for (name, net, act) in [
            ("mu", &mu_net, OutputActivation::Sigmoid),
            ("value", &value_net, OutputActivation::Identity),
            ("curvature", &curvature_net, OutputActivation::Sigmoid),
        ] {
            if net.dims() != dims || net.output_activation() != act {
                return Err(domain(format!(
                    "{name} head has dims {:?} / {:?}, expected {dims:?} / {act:?}",
                    net.dims(),
                    net.output_activation()
                )));
            }
        }
        let lr = config.learning_rate;
        Ok(Self {
            adam_mu: AdamState::new(mu_net.num_params(), lr),
            adam_value: AdamState::new(value_net.num_params(), lr),
            adam_curvature: AdamState::new(curvature_net.num_params(), lr),
            target_value: value_net.clone(),
            mu_net,
            value_net,
            curvature_net,
            frozen: FrozenHeads::default(),
            config,
            observation_dim,
        })
    }

    pub fn config(&self) -> &NafConfig {
        &self.config
    }

    pub fn observation_dim(&self) -> usize {
        self.observation_dim
    }

    pub fn frozen(&self) -> FrozenHeads {
        self.frozen
    }

    pub fn set_frozen(&mut self, frozen: FrozenHeads) {
        self.frozen = frozen;
    }

    pub fn mu_net(&self) -> &Mlp {
        &self.mu_net
    }

    pub fn value_net(&self) -> &Mlp {
        &self.value_net
    }

    pub fn curvature_net(&self) -> &Mlp {
        &self.curvature_net
    }

    pub fn target_value_net(&self) -> &Mlp {
        &self.target_value
    }

    pub(crate) fn replace_heads(&mut self, mu_net: Option<Mlp>, value_net: Option<Mlp>, curvature_net: Option<Mlp>) {
        let lr = self.config.learning_rate;
        if let Some(net) = mu_net {
            self.adam_mu = AdamState::new(net.num_params(), lr);
            self.mu_net = net;
        }
        if let Some(net) = value_net {
            self.adam_value = AdamState::new(net.num_params(), lr);
            self.target_value = net.clone();
            self.value_net = net;
        }
        if let Some(net) = curvature_net {
            self.adam_curvature = AdamState::new(net.num_params(), lr);
            self.curvature_net = net;
        }
    }

    pub(crate) fn set_target_value(&mut self, net: Mlp) {
        self.target_value = net;
    }

    pub fn heads(&self, observation: &[f64]) -> Result<HeadValues> {
        Ok(HeadValues {
            mu: self.mu_net.forward(observation)?[0],
            value: self.value_net.forward(observation)?[0],
            curvature: self.curvature_net.forward(observation)?[0],
        })
    }

    /// Greedy action `mu(s)` on the unit interval.
    pub fn policy(&self, observation: &[f64]) -> Result<f64> {
        Ok(self.mu_net.forward(observation)?[0])
    }

    pub fn value(&self, observation: &[f64]) -> Result<f64> {
        Ok(self.value_net.forward(observation)?[0])
    }

    pub fn advantage(&self, observation: &[f64], action_unit: f64) -> Result<f64> {
        check_unit(action_unit)?;
        Ok(self.heads(observation)?.advantage(action_unit))
    }

    pub fn q_value(&self, observation: &[f64], action_unit: f64) -> Result<f64> {
        check_unit(action_unit)?;
        Ok(self.heads(observation)?.q_value(action_unit))
    }

    /// `clamp(mu(s) + N(0, noise_scale), 0, 1)`.
    pub fn select_action<R: Rng + ?Sized>(&self, observation: &[f64], noise_scale: f64, rng: &mut R) -> Result<f64> {
        if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
            return Err(domain(format!("noise scale {noise_scale} must be >= 0")));
        }
        let mu = self.policy(observation)?;
        if noise_scale == 0.0 {
            return Ok(mu);
        }
        let noise = Normal::new(0.0, noise_scale).expect("validated scale");
        Ok((mu + noise.sample(rng)).clamp(0.0, 1.0))
    }

    pub fn td_target(&self, transition: &Transition) -> Result<f64> {
        td_target(
            transition.reward,
            &transition.next_observation,
            &self.target_value,
            self.config.discount,
            transition.terminal,
        )
    }

    /// Mean squared TD error over the batch.
    pub fn batch_loss(&self, batch: &[&Transition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Precondition("empty batch".into()));
        }
        let mut total = 0.0;
        for t in batch {
            let y = self.td_target(t)?;
            let q = self.heads(&t.observation)?.q_value(t.action_unit);
            total += (y - q) * (y - q);
        }
        Ok(total / batch.len() as f64)
    }

    /// Batch loss and its gradient with respect to every head, targets held fixed.
    pub fn loss_and_gradients(&self, batch: &[&Transition]) -> Result<(f64, NafGradients)> {
        if batch.is_empty() {
            return Err(Error::Precondition("empty batch".into()));
        }
        let mut grads = NafGradients {
            mu: vec![0.0; self.mu_net.num_params()],
            value: vec![0.0; self.value_net.num_params()],
            curvature: vec![0.0; self.curvature_net.num_params()],
        };
        let inv_k = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for t in batch {
            let y = self.td_target(t)?;
            let mu_trace = self.mu_net.trace(&t.observation)?;
            let v_trace = self.value_net.trace(&t.observation)?;
            let l_trace = self.curvature_net.trace(&t.observation)?;
            let mu = mu_trace.output()[0];
            let l = l_trace.output()[0];
            let d = t.action_unit - mu;
            let q = v_trace.output()[0] - 0.5 * l * l * d * d;
            let err = q - y;
            total += err * err;
            let dq = 2.0 * err * inv_k;
            if !self.frozen.value {
                self.value_net.accumulate_gradient(&v_trace, &[dq], &mut grads.value);
            }
            if !self.frozen.mu {
                self.mu_net
                    .accumulate_gradient(&mu_trace, &[dq * l * l * d], &mut grads.mu);
            }
            if !self.frozen.curvature {
                self.curvature_net
                    .accumulate_gradient(&l_trace, &[-dq * l * d * d], &mut grads.curvature);
            }
        }
        Ok((total * inv_k, grads))
    }

    /// One gradient step on every unfrozen head followed by a soft target
    /// update. Returns the pre-update batch loss.
    pub fn update(&mut self, batch: &[&Transition]) -> Result<f64> {
        let (loss, mut grads) = self.loss_and_gradients(batch)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("batch loss {loss}")));
        }
        {
            let mut slices: Vec<&mut [f64]> = Vec::with_capacity(3);
            if !self.frozen.mu {
                slices.push(&mut grads.mu);
            }
            if !self.frozen.value {
                slices.push(&mut grads.value);
            }
            if !self.frozen.curvature {
                slices.push(&mut grads.curvature);
            }
            clip_global_norm(&mut slices, self.config.clip_norm);
        }
        if !self.frozen.mu {
            self.adam_mu.step(self.mu_net.params_mut().values_mut(), &grads.mu)?;
        }
        if !self.frozen.value {
            self.adam_value
                .step(self.value_net.params_mut().values_mut(), &grads.value)?;
        }
        if !self.frozen.curvature {
            self.adam_curvature
                .step(self.curvature_net.params_mut().values_mut(), &grads.curvature)?;
        }
        self.target_value
            .soft_update_from(&self.value_net, self.config.target_rate)?;
        Ok(loss)
    }

    /// Mutable access to a head's parameters, for finite-difference checks.
    pub fn head_params_mut(&mut self, head: Head) -> &mut [f64] {
        match head {
            Head::Mu => self.mu_net.params_mut().values_mut(),
            Head::Value => self.value_net.params_mut().values_mut(),
            Head::Curvature => self.curvature_net.params_mut().values_mut(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    Mu,
    Value,
    Curvature,
}

fn check_unit(action_unit: f64) -> Result<()> {
    if (0.0..=1.0).contains(&action_unit) {
        Ok(())
    } else {
        Err(domain(format!("unit action {action_unit} outside [0, 1]")))
    }
}
