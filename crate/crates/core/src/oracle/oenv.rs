//! A discretized miniature of the streaming world whose transition tensor is
//! enumerated exactly from the simulator.

use std::collections::VecDeque;

use rand::RngCore;

use super::{Criterion, SmallMdp};
use crate::baselines::Policy;
use crate::env::{CapacityModel, Env, EnvConfig, Exogenous, SystemState};
use crate::error::{domain, Result};
use crate::naf::RateMap;

const SOJOURN: f64 = 1e9;

/// Two capacity levels, two contents with one cached, five grid rates and a
/// three-slot, 60 Mb buffer.
pub fn oracle_env_config() -> EnvConfig {
    EnvConfig {
        num_base_stations: 1,
        num_contents: 2,
        cache_set: vec![1],
        content_sizes: Some(vec![10.0, 20.0]),
        buffer_capacity: 60.0,
        capacity_min: 4.0,
        capacity_max: 8.0,
        capacity_model: CapacityModel::Levels { values: vec![4.0, 8.0] },
        mean_sojourn: SOJOURN,
        buffer_slots: 3,
        rate_grid: Some(4),
        discount: 0.9,
        ..EnvConfig::default()
    }
}

/// The miniature world with its enumerated state space and MDP.
#[derive(Debug, Clone)]
pub struct OracleEnv {
    env: Env,
    states: Vec<SystemState>,
    actions: Vec<f64>,
    mdp: SmallMdp,
}

impl OracleEnv {
    pub fn new() -> Result<Self> {
        Self::from_config(oracle_env_config())
    }

    /// Builds the MDP by closing the reachable set under every grid action
    /// and every exogenous outcome. The config must use a capacity level
    /// model and a rate grid.
    pub fn from_config(config: EnvConfig) -> Result<Self> {
        let levels = match &config.capacity_model {
            CapacityModel::Levels { values } => values.clone(),
            _ => return Err(domain("oracle world needs a capacity level model")),
        };
        if config.num_base_stations != 1 {
            return Err(domain("oracle world has a single base station"));
        }
        let env = Env::new(config)?;
        let actions = env
            .rate_grid()
            .ok_or_else(|| domain("oracle world needs a rate grid"))?
            .levels()
            .to_vec();
        let pmf = env.request_pmf().to_vec();
        let slots = env.config().buffer_slots;

        // Exogenous outcomes with their probabilities.
        let mut outcomes = Vec::new();
        for &c in &levels {
            for (j, &p) in pmf.iter().enumerate() {
                let prob = p / levels.len() as f64;
                if prob > 0.0 {
                    outcomes.push((c, j + 1, prob));
                }
            }
        }
        let make = |capacity: f64, request: usize, buffer: Vec<f64>| SystemState {
            capacity,
            request,
            buffer,
            bs_index: 1,
            sojourn_remaining: SOJOURN,
        };

        let mut states: Vec<SystemState> = Vec::new();
        let mut queue = VecDeque::new();
        for &(c, j, _) in &outcomes {
            let s = make(c, j, vec![0.0; slots]);
            states.push(s.clone());
            queue.push_back(s);
        }
        let mut edges: Vec<(usize, usize, Vec<(usize, f64)>, f64)> = Vec::new();
        let index_of = |states: &mut Vec<SystemState>, queue: &mut VecDeque<SystemState>, s: SystemState| match states
            .iter()
            .position(|t| same_state(t, &s))
        {
            Some(i) => i,
            None => {
                states.push(s.clone());
                queue.push_back(s);
                states.len() - 1
            }
        };
        while let Some(s) = queue.pop_front() {
            let si = states
                .iter()
                .position(|t| same_state(t, &s))
                .expect("queued states are indexed");
            for (ai, &b) in actions.iter().enumerate() {
                let mut row = Vec::new();
                let mut reward = None;
                for &(c, j, p) in &outcomes {
                    let exo = Exogenous {
                        capacity: c,
                        request: j,
                        bs_index: 1,
                        sojourn_remaining: SOJOURN,
                    };
                    let out = env.transition(&s, env.action(b)?, &exo)?;
                    reward.get_or_insert(out.reward.weighted_total);
                    let ni = index_of(&mut states, &mut queue, out.next_state);
                    row.push((ni, p));
                }
                edges.push((si, ai, row, reward.unwrap_or(0.0)));
            }
        }

        let n = states.len();
        let m = actions.len();
        let mut transitions = vec![0.0; n * m * n];
        let mut rewards = vec![0.0; n * m];
        for (s, a, row, r) in edges {
            rewards[s * m + a] = r;
            for (next, p) in row {
                transitions[(s * m + a) * n + next] += p;
            }
        }
        // Absorb rounding so each row sums to one.
        for row in transitions.chunks_mut(n) {
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= sum);
        }
        let mdp = SmallMdp::new(n, m, transitions, rewards, Criterion::Average)?;
        Ok(Self {
            env,
            states,
            actions,
            mdp,
        })
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    pub fn mdp(&self) -> &SmallMdp {
        &self.mdp
    }

    pub fn states(&self) -> &[SystemState] {
        &self.states
    }

    /// Grid bitrates, indexed like the MDP actions.
    pub fn actions(&self) -> &[f64] {
        &self.actions
    }

    /// MDP index of a simulator state; mobility fields are ignored.
    pub fn state_index(&self, state: &SystemState) -> Option<usize> {
        self.states.iter().position(|t| same_state(t, state))
    }

    /// MDP index recovered from an observation vector.
    pub fn state_index_from_observation(&self, observation: &[f64]) -> Option<usize> {
        self.states
            .iter()
            .position(|s| close(&self.env.encode_observation(s), observation))
    }

    pub fn observation(&self, index: usize) -> Vec<f64> {
        self.env.encode_observation(&self.states[index])
    }

    pub fn action_index(&self, bitrate: f64) -> Option<usize> {
        self.actions.iter().position(|&b| (b - bitrate).abs() < 1e-9)
    }

    /// Grid index the simulator would execute for a unit action.
    pub fn executed_action(&self, action_unit: f64) -> Result<usize> {
        let cfg = self.env.config();
        let map = RateMap::new(cfg.rate_min, cfg.rate_max)?;
        let b = self.env.action(map.to_bitrate(action_unit)?)?.bitrate();
        self.action_index(b)
            .ok_or_else(|| domain(format!("executed bitrate {b} is not a grid level")))
    }
}

fn same_state(a: &SystemState, b: &SystemState) -> bool {
    a.capacity == b.capacity && a.request == b.request && a.buffer == b.buffer
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9)
}

/// Deterministic per-state policy on an [`OracleEnv`].
#[derive(Debug, Clone)]
pub struct TablePolicy {
    oracle: OracleEnv,
    actions: Vec<usize>,
    map: RateMap,
}

impl TablePolicy {
    pub fn new(oracle: &OracleEnv, actions: Vec<usize>) -> Result<Self> {
        if actions.len() != oracle.states.len() || actions.iter().any(|&a| a >= oracle.actions.len()) {
            return Err(domain("table policy must give a valid action for every state"));
        }
        let cfg = oracle.env.config();
        Ok(Self {
            map: RateMap::new(cfg.rate_min, cfg.rate_max)?,
            oracle: oracle.clone(),
            actions,
        })
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }
}

impl Policy for TablePolicy {
    fn name(&self) -> &str {
        "table"
    }

    fn act(&self, observation: &[f64], _rng: &mut dyn RngCore) -> Result<f64> {
        let s = self
            .oracle
            .state_index_from_observation(observation)
            .ok_or_else(|| domain("observation does not match any oracle state"))?;
        self.map.from_bitrate(self.oracle.actions[self.actions[s]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerates_small_valid_mdp() {
        let o = OracleEnv::new().unwrap();
        assert!(o.mdp().num_states() <= 24, "{}", o.mdp().num_states());
        assert_eq!(o.actions(), &[2.0, 4.0, 6.0, 8.0, 10.0]);
        let buffers: std::collections::BTreeSet<String> =
            o.states().iter().map(|s| format!("{:?}", s.buffer)).collect();
        assert_eq!(buffers.len(), 4, "{buffers:?}");
        for s in 0..o.mdp().num_states() {
            assert_eq!(o.state_index_from_observation(&o.observation(s)), Some(s));
        }
    }

    #[test]
    fn unit_actions_execute_on_grid() {
        let o = OracleEnv::new().unwrap();
        assert_eq!(o.executed_action(0.0).unwrap(), 0);
        assert_eq!(o.executed_action(1.0).unwrap(), 4);
        assert_eq!(o.executed_action(0.5).unwrap(), 2);
    }
}
