use rand::Rng;

use super::RateGrid;
use crate::env::Env;
use crate::error::{Error, Result};
use crate::naf::{NafAgent, RateMap, ReplayBuffer, Transition};

/// Trainer steps between augmentation rounds.
pub const DEFAULT_ISL_PERIOD: usize = 100;

/// Samples `count` stored transitions, replays each origin state with the
/// policy's grid-snapped action, and appends the fresh transitions.
///
/// The stored reward is `reward_scale` times the weighted env reward, the
/// same convention the trainer uses. Returns the number of transitions
/// added.
pub fn isl_round<R: Rng + ?Sized>(
    buffer: &mut ReplayBuffer,
    agent: &NafAgent,
    env: &Env,
    grid: &RateGrid,
    count: usize,
    reward_scale: f64,
    rng: &mut R,
) -> Result<usize> {
    if count == 0 {
        return Ok(0);
    }
    if buffer.is_empty() {
        return Err(Error::Precondition("augmentation needs a non-empty buffer".into()));
    }
    let cfg = env.config();
    let map = RateMap::new(cfg.rate_min, cfg.rate_max)?;
    let picks: Vec<Transition> = buffer.sample(count, rng).into_iter().cloned().collect();
    let mut fresh = Vec::with_capacity(picks.len());
    for t in picks {
        let origin = t
            .origin
            .as_ref()
            .ok_or_else(|| Error::Precondition("stored transition has no origin state to replay".into()))?;
        let observation = env.encode_observation(origin);
        let proposed = map.to_bitrate(agent.policy(&observation)?)?;
        let bitrate = grid.discretize(proposed);
        let outcome = env.step(origin, env.action(bitrate)?, rng)?;
        fresh.push(Transition {
            next_observation: env.encode_observation(&outcome.next_state),
            observation,
            action_unit: map.from_bitrate(bitrate)?,
            reward: reward_scale * outcome.reward.weighted_total,
            reward_components: outcome.reward,
            terminal: t.terminal,
            origin: Some(origin.clone()),
        });
    }
    let added = fresh.len();
    for t in fresh {
        buffer.push(t);
    }
    Ok(added)
}
