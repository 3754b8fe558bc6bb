use rand::Rng;
use rand_distr::{Dirichlet, Distribution};

use crate::error::{domain, Result};
use crate::nn::{AdamState, Mlp, OutputActivation};

/// Number of reward components.
pub const REWARD_DIM: usize = 4;
pub const PREDICTOR_HIDDEN: [usize; 2] = [32, 32];

/// Nonnegative weights on the simplex used to split a reward vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitWeights([f64; REWARD_DIM]);

impl SplitWeights {
    pub fn new(weights: [f64; REWARD_DIM]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(domain(format!("split weights {weights:?} are not on the simplex")));
        }
        Ok(Self(weights))
    }

    pub fn values(&self) -> [f64; REWARD_DIM] {
        self.0
    }
}

/// Flat Dirichlet draw, renormalized so the sum is 1 to rounding.
pub fn sample_split_weights<R: Rng + ?Sized>(rng: &mut R) -> SplitWeights {
    let flat = Dirichlet::new([1.0; REWARD_DIM]).expect("flat concentration is valid");
    let mut w: [f64; REWARD_DIM] = flat.sample(rng);
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= sum);
    SplitWeights(w)
}

/// `(e * r, (1 - e) * r)` componentwise.
pub fn split_reward(reward: [f64; REWARD_DIM], weights: &SplitWeights) -> ([f64; REWARD_DIM], [f64; REWARD_DIM]) {
    let e = weights.0;
    let mut main = [0.0; REWARD_DIM];
    let mut residual = [0.0; REWARD_DIM];
    for i in 0..REWARD_DIM {
        main[i] = e[i] * reward[i];
        residual[i] = reward[i] - main[i];
    }
    (main, residual)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftedReward {
    pub total: f64,
    pub components: [f64; REWARD_DIM],
}

/// `r_hat_i = e_i r_i + ((1 - e_i) r_i - error_i) / 2`, summed for the total.
pub fn lift_reward(reward: [f64; REWARD_DIM], weights: &SplitWeights, error: [f64; REWARD_DIM]) -> LiftedReward {
    let e = weights.0;
    let mut components = [0.0; REWARD_DIM];
    for i in 0..REWARD_DIM {
        components[i] = e[i] * reward[i] + ((1.0 - e[i]) * reward[i] - error[i]) / 2.0;
    }
    LiftedReward {
        total: components.iter().sum(),
        components,
    }
}

/// Network predicting the residual `(1 - e) * r` from the kept part `e * r`.
#[derive(Debug, Clone)]
pub struct RewardPredictor {
    net: Mlp,
    adam: AdamState,
}

impl RewardPredictor {
    pub fn new<R: Rng + ?Sized>(learning_rate: f64, rng: &mut R) -> Result<Self> {
        let mut dims = vec![REWARD_DIM];
        dims.extend_from_slice(&PREDICTOR_HIDDEN);
        dims.push(REWARD_DIM);
        Self::from_net(Mlp::new(&dims, OutputActivation::Identity, rng)?, learning_rate)
    }

    pub fn from_net(net: Mlp, learning_rate: f64) -> Result<Self> {
        if net.input_dim() != REWARD_DIM || net.output_dim() != REWARD_DIM {
            return Err(domain(format!(
                "predictor must map {REWARD_DIM} to {REWARD_DIM}, got {:?}",
                net.dims()
            )));
        }
        Ok(Self {
            adam: AdamState::new(net.num_params(), learning_rate),
            net,
        })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn predict(&self, kept: [f64; REWARD_DIM]) -> Result<[f64; REWARD_DIM]> {
        let out = self.net.forward(&kept)?;
        Ok([out[0], out[1], out[2], out[3]])
    }

    /// `(1 - e) * r - G(e * r)` without training.
    pub fn prediction_error(&self, reward: [f64; REWARD_DIM], weights: &SplitWeights) -> Result<[f64; REWARD_DIM]> {
        let (kept, residual) = split_reward(reward, weights);
        let pred = self.predict(kept)?;
        Ok(std::array::from_fn(|i| residual[i] - pred[i]))
    }

    /// Squared-error loss `sum_i error_i^2` and its parameter gradient.
    pub fn loss_and_gradient(&self, reward: [f64; REWARD_DIM], weights: &SplitWeights) -> Result<(f64, Vec<f64>)> {
        let (kept, residual) = split_reward(reward, weights);
        let trace = self.net.trace(&kept)?;
        let out = trace.output();
        let upstream: Vec<f64> = (0..REWARD_DIM).map(|i| 2.0 * (out[i] - residual[i])).collect();
        let loss = (0..REWARD_DIM).map(|i| (out[i] - residual[i]).powi(2)).sum();
        let mut grad = vec![0.0; self.net.num_params()];
        self.net.accumulate_gradient(&trace, &upstream, &mut grad);
        Ok((loss, grad))
    }

    /// One Adam step toward the residual. Returns the pre-step loss.
    pub fn train_step(&mut self, reward: [f64; REWARD_DIM], weights: &SplitWeights) -> Result<f64> {
        let (loss, grad) = self.loss_and_gradient(reward, weights)?;
        self.adam.step(self.net.params_mut().values_mut(), &grad)?;
        Ok(loss)
    }

    /// Prediction error first, then one training step; the error feeds the
    /// lifted reward.
    pub fn error_then_train(&mut self, reward: [f64; REWARD_DIM], weights: &SplitWeights) -> Result<[f64; REWARD_DIM]> {
        let error = self.prediction_error(reward, weights)?;
        self.train_step(reward, weights)?;
        Ok(error)
    }
}
