//! Exact solvers for small MDPs and regret measurements.

mod mdp_text;
mod oenv;
mod regret;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

pub use oenv::{oracle_env_config, OracleEnv, TablePolicy};
pub use regret::{
    cdf_max_uniform, empirical_regret, evaluate_discounted, policy_distribution, regret_bound_closed_form,
    regret_bound_mc, rollout_average, RegretReport,
};

/// Relative value iteration tolerance.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const MAX_SWEEPS: usize = 1_000_000;
/// Self-loop mixing used to make every chain aperiodic; the gain of the
/// mixed chain is rescaled by this factor.
const APERIODICITY_MIX: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Criterion {
    /// Long-run average reward.
    Average,
    Discounted(f64),
}

/// Finite MDP with dense transition and reward tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallMdp {
    num_states: usize,
    num_actions: usize,
    /// Row-major `[s][a][s']`.
    transitions: Vec<f64>,
    /// Row-major `[s][a]`.
    rewards: Vec<f64>,
    criterion: Criterion,
}

impl SmallMdp {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        criterion: Criterion,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(domain("mdp needs at least one state and one action"));
        }
        if transitions.len() != num_states * num_actions * num_states {
            return Err(domain(format!(
                "transition tensor has {} entries, expected {}",
                transitions.len(),
                num_states * num_actions * num_states
            )));
        }
        if rewards.len() != num_states * num_actions {
            return Err(domain(format!(
                "reward tensor has {} entries, expected {}",
                rewards.len(),
                num_states * num_actions
            )));
        }
        if let Criterion::Discounted(g) = criterion {
            if !(g > 0.0 && g < 1.0) {
                return Err(domain(format!("discount {g} outside (0, 1)")));
            }
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(domain("rewards must be finite"));
        }
        for (row_idx, row) in transitions.chunks(num_states).enumerate() {
            if row.iter().any(|p| !(*p >= 0.0 && *p <= 1.0)) {
                return Err(domain(format!("row {row_idx} has a probability outside [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(domain(format!(
                    "row (s={}, a={}) sums to {sum}",
                    row_idx / num_actions,
                    row_idx % num_actions
                )));
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            transitions,
            rewards,
            criterion,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn criterion(&self) -> Criterion {
        self.criterion
    }

    pub fn with_criterion(&self, criterion: Criterion) -> Result<Self> {
        Self::new(
            self.num_states,
            self.num_actions,
            self.transitions.clone(),
            self.rewards.clone(),
            criterion,
        )
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.num_actions + a]
    }

    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.transitions[start..start + self.num_states]
    }

    pub fn probability(&self, s: usize, a: usize, next: usize) -> f64 {
        self.row(s, a)[next]
    }

    fn backup(&self, s: usize, a: usize, values: &[f64]) -> f64 {
        let expect: f64 = self.row(s, a).iter().zip(values).map(|(p, v)| p * v).sum();
        match self.criterion {
            Criterion::Average => self.reward(s, a) + expect,
            Criterion::Discounted(g) => self.reward(s, a) + g * expect,
        }
    }

    /// Best backed-up value and its first maximizing action.
    fn greedy(&self, s: usize, values: &[f64]) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        for a in 0..self.num_actions {
            let q = self.backup(s, a, values);
            if q > best.0 + 1e-12 {
                best = (q, a);
            }
        }
        best
    }
}

/// Output of [`value_iteration`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSolution {
    /// Optimal long-run average reward; zero under the discounted criterion.
    pub gain: f64,
    /// Bias (average criterion, normalized to zero at state 0) or optimal
    /// discounted values.
    pub values: Vec<f64>,
    pub policy: Vec<usize>,
    pub sweeps: usize,
    pub residual: f64,
}

/// Solves the MDP under its criterion. Average reward uses relative value
/// iteration with span-seminorm stopping.
pub fn value_iteration(mdp: &SmallMdp, tol: f64) -> Result<ValueSolution> {
    if !(tol > 0.0) {
        return Err(domain("tolerance must be positive"));
    }
    match mdp.criterion {
        Criterion::Average => relative_value_iteration(mdp, tol),
        Criterion::Discounted(g) => discounted_value_iteration(mdp, g, tol),
    }
}

fn relative_value_iteration(mdp: &SmallMdp, tol: f64) -> Result<ValueSolution> {
    let n = mdp.num_states;
    let tau = APERIODICITY_MIX;
    let mut h = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for sweep in 1..=MAX_SWEEPS {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in 0..n {
            let (best, _) = mdp.greedy(s, &h);
            // Mixed operator: tau * T h + (1 - tau) * h.
            let mixed = tau * best + (1.0 - tau) * h[s];
            let diff = mixed - h[s];
            lo = lo.min(diff);
            hi = hi.max(diff);
            next[s] = mixed;
        }
        residual = (hi - lo) / tau;
        let reference = next[0];
        for (dst, src) in h.iter_mut().zip(&next) {
            *dst = src - reference;
        }
        if residual < tol {
            let gain = 0.5 * (lo + hi) / tau;
            let policy = (0..n).map(|s| mdp.greedy(s, &h).1).collect();
            let residual = bellman_residual(mdp, gain, &h);
            return Ok(ValueSolution {
                gain,
                values: h,
                policy,
                sweeps: sweep,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_SWEEPS,
        residual,
    })
}

fn discounted_value_iteration(mdp: &SmallMdp, gamma: f64, tol: f64) -> Result<ValueSolution> {
    let n = mdp.num_states;
    let mut v = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for sweep in 1..=MAX_SWEEPS {
        let next: Vec<f64> = (0..n).map(|s| mdp.greedy(s, &v).0).collect();
        let change = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        // Contraction bound on the distance to the fixed point.
        residual = change * gamma / (1.0 - gamma);
        if change < tol * (1.0 - gamma) / gamma.max(1e-300) || residual < tol {
            let policy = (0..n).map(|s| mdp.greedy(s, &v).1).collect();
            let residual = bellman_residual(mdp, 0.0, &v);
            return Ok(ValueSolution {
                gain: 0.0,
                values: v,
                policy,
                sweeps: sweep,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_SWEEPS,
        residual,
    })
}

/// `max_s |max_a backup(s, a) - gain - V(s)|`; `gain` is ignored under the
/// discounted criterion.
pub fn bellman_residual(mdp: &SmallMdp, gain: f64, values: &[f64]) -> f64 {
    let g = match mdp.criterion {
        Criterion::Average => gain,
        Criterion::Discounted(_) => 0.0,
    };
    (0..mdp.num_states)
        .map(|s| (mdp.greedy(s, values).0 - g - values[s]).abs())
        .fold(0.0, f64::max)
}

/// Single state, single action, reward `r`.
pub fn single_state_mdp(reward: f64) -> SmallMdp {
    SmallMdp::new(1, 1, vec![1.0], vec![reward], Criterion::Average).expect("valid by construction")
}

/// Two states forced to alternate, rewards 1 then 0.
pub fn two_state_chain() -> SmallMdp {
    SmallMdp::new(2, 1, vec![0.0, 1.0, 1.0, 0.0], vec![1.0, 0.0], Criterion::Average).expect("valid by construction")
}
