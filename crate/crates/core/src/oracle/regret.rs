use rand::rngs::SmallRng;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{OracleEnv, SmallMdp};
use crate::baselines::Policy;
use crate::env::Env;
use crate::error::{domain, Error, Result};
use crate::naf::RateMap;

/// `P(max of m uniforms on [-1, 1] <= sigma)`.
pub fn cdf_max_uniform(sigma: f64, m: u32) -> Result<f64> {
    if m == 0 {
        return Err(domain("need at least one variable"));
    }
    Ok(if sigma <= -1.0 {
        0.0
    } else if sigma >= 1.0 {
        1.0
    } else {
        ((1.0 + sigma) / 2.0).powi(m as i32)
    })
}

/// `(m - 1) / (m + 1) + 2`.
pub fn regret_bound_closed_form(m: u64) -> f64 {
    (m as f64 - 1.0) / (m as f64 + 1.0) + 2.0
}

/// Monte Carlo mean of the max of `m` uniforms on `[-1, 1]`, plus 2, next to
/// the closed form. Every coordinate is drawn explicitly.
pub fn regret_bound_mc(m: u64, samples: u64, seed: u64) -> Result<(f64, f64)> {
    if m == 0 || samples == 0 {
        return Err(domain("m and samples must be at least 1"));
    }
    let mut rng = SmallRng::seed_from_u64(seed);
    // The max of uniform u64 words maps monotonically to the max uniform.
    let mut total = 0.0;
    for _ in 0..samples {
        let mut best = 0u64;
        for _ in 0..m {
            best = best.max(rng.next_u64());
        }
        let unit = (best >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        total += 2.0 * unit - 1.0;
    }
    Ok((total / samples as f64 + 2.0, regret_bound_closed_form(m)))
}

/// Time-averaged weighted reward of `policy` over `horizon` steps from a
/// reset, with exogenous draws seeded by `seed`.
pub fn rollout_average(env: &Env, policy: &dyn Policy, horizon: usize, seed: u64) -> Result<f64> {
    if horizon == 0 {
        return Err(domain("horizon must be at least 1"));
    }
    let cfg = env.config();
    let map = RateMap::new(cfg.rate_min, cfg.rate_max)?;
    // Separate streams keep the world identical across policies.
    let mut world = ChaCha8Rng::seed_from_u64(seed);
    let mut choice = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut state = env.reset(&mut world);
    let mut total = 0.0;
    for _ in 0..horizon {
        let obs = env.encode_observation(&state);
        let a = policy.act(&obs, &mut choice)?;
        let out = env.step(&state, env.action(map.to_bitrate(a)?)?, &mut world)?;
        total += out.reward.weighted_total;
        state = out.next_state;
    }
    Ok(total / horizon as f64)
}

/// Action distribution of `policy` in every oracle state, estimated from
/// `samples` draws per state.
pub fn policy_distribution(
    oracle: &OracleEnv,
    policy: &dyn Policy,
    samples: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<Vec<f64>>> {
    let samples = samples.max(1);
    let m = oracle.actions().len();
    (0..oracle.mdp().num_states())
        .map(|s| {
            let obs = oracle.observation(s);
            let mut counts = vec![0.0; m];
            for _ in 0..samples {
                counts[oracle.executed_action(policy.act(&obs, rng)?)?] += 1.0;
            }
            Ok(counts.into_iter().map(|c| c / samples as f64).collect())
        })
        .collect()
}

/// Discounted value of a stochastic stationary policy, by fixed-point
/// iteration to `tol`.
pub fn evaluate_discounted(mdp: &SmallMdp, policy: &[Vec<f64>], gamma: f64, tol: f64) -> Result<Vec<f64>> {
    let n = mdp.num_states();
    if policy.len() != n || policy.iter().any(|p| p.len() != mdp.num_actions()) {
        return Err(domain("policy shape does not match the mdp"));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(domain(format!("discount {gamma} outside (0, 1)")));
    }
    let mut v = vec![0.0; n];
    for _ in 0..super::MAX_SWEEPS {
        let next: Vec<f64> = (0..n)
            .map(|s| {
                policy[s]
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(a, p)| {
                        let ev: f64 = mdp.row(s, a).iter().zip(&v).map(|(q, x)| q * x).sum();
                        p * (mdp.reward(s, a) + gamma * ev)
                    })
                    .sum()
            })
            .collect();
        let change = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if change * gamma / (1.0 - gamma) < tol {
            return Ok(v);
        }
    }
    Err(Error::NoConvergence {
        iterations: super::MAX_SWEEPS,
        residual: f64::NAN,
    })
}

/// Regret of a policy against a reference on an oracle world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretReport {
    /// Time-averaged reward gap over matched rollouts.
    pub average_gap: f64,
    /// Standard error of `average_gap` across seeds.
    pub average_gap_stderr: f64,
    /// Mean over states of the discounted value gap.
    pub value_gap: f64,
}

/// Compares `policy` to `reference` on matched seeds, plus the value gap
/// under `gamma` averaged uniformly over states.
pub fn empirical_regret(
    oracle: &OracleEnv,
    policy: &dyn Policy,
    reference: &dyn Policy,
    horizon: usize,
    seeds: &[u64],
    gamma: f64,
) -> Result<RegretReport> {
    if seeds.is_empty() {
        return Err(domain("need at least one seed"));
    }
    let gaps = seeds
        .iter()
        .map(|&seed| {
            Ok(rollout_average(oracle.env(), reference, horizon, seed)?
                - rollout_average(oracle.env(), policy, horizon, seed)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let k = gaps.len() as f64;
    let mean = gaps.iter().sum::<f64>() / k;
    let stderr = if gaps.len() > 1 {
        (gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
    } else {
        0.0
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seeds[0]);
    let samples = 256;
    let p = policy_distribution(oracle, policy, samples, &mut rng)?;
    let q = policy_distribution(oracle, reference, samples, &mut rng)?;
    let vp = evaluate_discounted(oracle.mdp(), &p, gamma, 1e-9)?;
    let vq = evaluate_discounted(oracle.mdp(), &q, gamma, 1e-9)?;
    let value_gap = vq.iter().zip(&vp).map(|(a, b)| a - b).sum::<f64>() / vp.len() as f64;
    Ok(RegretReport {
        average_gap: mean,
        average_gap_stderr: stderr,
        value_gap,
    })
}
