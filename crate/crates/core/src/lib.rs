//! Bitrate control for cache-enabled mobile video streaming.
//!
//! The crate bundles a slot-level streaming simulator ([`env`]), a small
//! dense network library ([`nn`]), a normalized-advantage Q-learner
//! ([`naf`]), replay augmentation and self-transfer pretraining
//! ([`augment`]), comparison policies ([`baselines`]), exact solvers for
//! small discretized instances ([`oracle`]) and the end-to-end training
//! loop ([`trainer`]).

pub mod augment;
pub mod baselines;
pub mod env;
pub mod error;
pub mod naf;
pub mod nn;
pub mod oracle;
pub mod trainer;

pub use augment::{transfer_into, PretrainedBundle, RateGrid, StlConfig};
pub use baselines::Policy;
pub use env::{Env, EnvConfig, RewardBreakdown, StepOutcome, SystemState};
pub use error::{Error, Result};
pub use naf::{NafAgent, NafConfig, RateMap, ReplayBuffer, Transition};
pub use nn::{Mlp, OutputActivation};
pub use oracle::{OracleEnv, SmallMdp};
pub use trainer::{evaluate, train, Method, MetricRecord, TrainConfig};
