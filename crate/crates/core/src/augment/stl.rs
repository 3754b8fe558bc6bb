use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Dirichlet, Distribution};
use serde::{Deserialize, Serialize};

use super::lifting::{lift_reward, sample_split_weights, RewardPredictor, REWARD_DIM};
use crate::env::Env;
use crate::error::{domain, Error, Result};
use crate::naf::{FrozenHeads, NafAgent, NafConfig, RateMap, ReplayBuffer, Transition};
use crate::nn::checkpoint::{read_magic, read_mlp, read_u32, read_u8, write_mlp, write_u32, write_u8};
use crate::nn::Mlp;

pub const DEFAULT_STL_STEPS: usize = 1500;
pub const BUNDLE_MAGIC: [u8; 4] = *b"VRPB";
const BUNDLE_VERSION: u32 = 1;
const PHASE_STL: u8 = 1;

/// Settings for the virtual agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StlConfig {
    pub steps: usize,
    pub episode_len: usize,
    pub batch_size: usize,
    /// Buffer size before the first update.
    pub warmup: usize,
    pub reward_scale: f64,
    pub noise_start: f64,
    pub noise_end: f64,
    pub predictor_learning_rate: f64,
    pub replay_capacity: usize,
    pub naf: NafConfig,
}

impl Default for StlConfig {
    fn default() -> Self {
        Self {
            steps: DEFAULT_STL_STEPS,
            episode_len: 200,
            batch_size: 64,
            warmup: 640,
            reward_scale: 0.05,
            noise_start: 0.3,
            noise_end: 0.01,
            predictor_learning_rate: 1e-3,
            replay_capacity: 100_000,
            naf: NafConfig::default(),
        }
    }
}

/// Networks handed from the virtual agent to the main agent.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainedBundle {
    pub mu: Mlp,
    pub value: Mlp,
    pub curvature: Mlp,
}

impl PretrainedBundle {
    pub fn from_agent(agent: &NafAgent) -> Self {
        Self {
            mu: agent.mu_net().clone(),
            value: agent.value_net().clone(),
            curvature: agent.curvature_net().clone(),
        }
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&BUNDLE_MAGIC)?;
        write_u32(w, BUNDLE_VERSION)?;
        write_u8(w, PHASE_STL)?;
        write_mlp(w, &self.mu)?;
        write_mlp(w, &self.value)?;
        write_mlp(w, &self.curvature)?;
        Ok(())
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        read_magic(r, BUNDLE_MAGIC)?;
        let version = read_u32(r)?;
        if version != BUNDLE_VERSION {
            return Err(Error::Checkpoint(format!("unsupported bundle version {version}")));
        }
        let phase = read_u8(r)?;
        if phase != PHASE_STL {
            return Err(Error::Checkpoint(format!("unknown bundle phase {phase}")));
        }
        Ok(Self {
            mu: read_mlp(r)?,
            value: read_mlp(r)?,
            curvature: read_mlp(r)?,
        })
    }
}

/// Per-episode component weights: a flat Dirichlet draw times 4, capped at 2.
fn sample_component_weights<R: Rng + ?Sized>(rng: &mut R) -> [f64; REWARD_DIM] {
    let flat = Dirichlet::new([1.0; REWARD_DIM]).expect("flat concentration is valid");
    let w: [f64; REWARD_DIM] = flat.sample(rng);
    w.map(|x| (4.0 * x).min(2.0))
}

pub(crate) fn linear_noise(start: f64, end: f64, step: usize, decay_steps: usize) -> f64 {
    if decay_steps == 0 || step >= decay_steps {
        return end;
    }
    start + (end - start) * step as f64 / decay_steps as f64
}

/// Trains a virtual agent on lifted rewards for `config.steps` interactions.
pub fn stl_pretrain<R: Rng + ?Sized>(env: &Env, config: &StlConfig, rng: &mut R) -> Result<PretrainedBundle> {
    if config.steps == 0 {
        return Err(Error::Precondition("pretraining needs at least one step".into()));
    }
    if config.episode_len == 0 || config.batch_size == 0 {
        return Err(domain("episode length and batch size must be positive"));
    }
    let map = RateMap::new(env.config().rate_min, env.config().rate_max)?;
    let mut agent = NafAgent::new(env.observation_dim(), config.naf.clone(), rng)?;
    let mut predictor = RewardPredictor::new(config.predictor_learning_rate, rng)?;
    let mut buffer = ReplayBuffer::new(config.replay_capacity.max(1));
    let decay = config.steps / 2;

    let mut step = 0;
    while step < config.steps {
        let split = sample_split_weights(rng);
        let lambda = sample_component_weights(rng);
        let mut state = env.reset(rng);
        for t in 0..config.episode_len {
            if step >= config.steps {
                break;
            }
            let observation = env.encode_observation(&state);
            let noise = linear_noise(config.noise_start, config.noise_end, step, decay);
            let a = agent.select_action(&observation, noise, rng)?;
            let action = env.action(map.to_bitrate(a)?)?;
            let outcome = env.step(&state, action, rng)?;
            let comps = outcome.reward.components();
            let weighted: [f64; REWARD_DIM] = std::array::from_fn(|i| config.reward_scale * lambda[i] * comps[i]);
            let error = predictor.error_then_train(weighted, &split)?;
            let lifted = lift_reward(weighted, &split, error);
            let terminal = t + 1 == config.episode_len || step + 1 == config.steps;
            let next_observation = env.encode_observation(&outcome.next_state);
            buffer.push(Transition {
                observation,
                action_unit: map.from_bitrate(outcome.executed_bitrate.max(map.rate_min))?,
                reward_components: outcome.reward,
                reward: lifted.total,
                next_observation,
                terminal,
                origin: Some(state),
            });
            if buffer.len() >= config.warmup.max(1) {
                let batch = buffer.sample(config.batch_size, rng);
                agent.update(&batch)?;
            }
            state = outcome.next_state;
            step += 1;
        }
    }
    Ok(PretrainedBundle::from_agent(&agent))
}

/// Installs pretrained networks: value and curvature frozen, policy trainable.
pub fn transfer_into(agent: &mut NafAgent, bundle: &PretrainedBundle) -> Result<()> {
    for (name, src, dst) in [
        ("policy", &bundle.mu, agent.mu_net()),
        ("value", &bundle.value, agent.value_net()),
        ("curvature", &bundle.curvature, agent.curvature_net()),
    ] {
        if src.dims() != dst.dims() || src.output_activation() != dst.output_activation() {
            return Err(domain(format!(
                "{name} network {:?} does not fit agent {:?}",
                src.dims(),
                dst.dims()
            )));
        }
    }
    agent.replace_heads(
        Some(bundle.mu.clone()),
        Some(bundle.value.clone()),
        Some(bundle.curvature.clone()),
    );
    agent.set_frozen(FrozenHeads {
        mu: false,
        value: true,
        curvature: true,
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::env::EnvConfig;

    fn quick() -> StlConfig {
        StlConfig {
            steps: 60,
            episode_len: 20,
            batch_size: 8,
            warmup: 16,
            naf: NafConfig {
                hidden: vec![8, 8],
                ..NafConfig::default()
            },
            ..StlConfig::default()
        }
    }

    #[test]
    fn noise_schedule() {
        assert_eq!(linear_noise(0.3, 0.01, 0, 100), 0.3);
        assert!((linear_noise(0.3, 0.01, 50, 100) - 0.155).abs() < 1e-12);
        assert_eq!(linear_noise(0.3, 0.01, 100, 100), 0.01);
        assert_eq!(linear_noise(0.3, 0.01, 5000, 100), 0.01);
    }

    #[test]
    fn component_weights_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let l = sample_component_weights(&mut rng);
            assert!(l.iter().all(|x| (0.0..=2.0).contains(x)));
        }
    }

    #[test]
    fn pretrain_is_seeded_and_transfers() {
        let env = Env::new(EnvConfig::default()).unwrap();
        let cfg = quick();
        let a = stl_pretrain(&env, &cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = stl_pretrain(&env, &cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert!(stl_pretrain(
            &env,
            &StlConfig {
                steps: 0,
                ..cfg.clone()
            },
            &mut ChaCha8Rng::seed_from_u64(5)
        )
        .is_err());

        let mut agent = NafAgent::new(
            env.observation_dim(),
            cfg.naf.clone(),
            &mut ChaCha8Rng::seed_from_u64(6),
        )
        .unwrap();
        transfer_into(&mut agent, &a).unwrap();
        assert_eq!(agent.value_net(), &a.value);
        transfer_into(&mut agent, &a).unwrap();
        assert_eq!(PretrainedBundle::from_agent(&agent), a);
        assert!(agent.frozen().value && agent.frozen().curvature && !agent.frozen().mu);

        let mut buf = Vec::new();
        a.write(&mut buf).unwrap();
        assert_eq!(PretrainedBundle::read(&mut buf.as_slice()).unwrap(), a);

        let mut small = NafAgent::new(
            env.observation_dim(),
            NafConfig {
                hidden: vec![4],
                ..NafConfig::default()
            },
            &mut ChaCha8Rng::seed_from_u64(6),
        )
        .unwrap();
        assert!(transfer_into(&mut small, &a).is_err());
    }
}
