//! Event-triggered reinforcement learning: a PPO variant that learns a control
//! policy together with the decision of when to broadcast it, executed under
//! zero-order hold.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`). The training,
//! evaluation and checkpoint pipeline runs in `f64`; the aliases below name the
//! common concrete types.

// Range checks are written `!(x > 0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atppo;
pub mod baseline;
pub mod checkpoint;
pub mod config;
pub mod envs;
pub mod error;
pub mod etc;
pub mod nn;
pub mod report;
pub mod rollout;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type NetworkF64 = nn::Network<f64>;
pub type NetworkF32 = nn::Network<f32>;
pub type PolicyF64 = atppo::Policy<f64>;
pub type PolicyF32 = atppo::Policy<f32>;
pub type LearnerF64 = atppo::Learner<f64>;
pub type AdamF64 = nn::AdamState<f64>;
pub type EtcStateF64 = etc::EtcState<f64>;
pub type IntegratorEnvF64 = envs::IntegratorEnv<f64>;
pub type PursuitEnvF64 = envs::PursuitEnv<f64>;
pub type RolloutBatchF64 = rollout::RolloutBatch<f64>;
