//! The single-view fast-forwarding agent: a Q-network maps the current
//! frame's feature to the number of frames to skip next.

mod forward;
mod network;
mod policy;
mod reward;
mod strategy;
mod train;

pub use forward::{
    fast_forward, AgentCursor, ConstantBank, ConstantSkip, PolicyBank, SelectionResult, SkipPolicy,
};
pub use network::{Adam, Mlp};
pub use policy::{
    read_checkpoint, write_checkpoint, Checkpoint, CheckpointKind, PolicySet, QPolicy,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use reward::{
    hit_reward, immediate_reward, sigmoid, skip_penalty, step_reward, RewardParams,
};
pub use strategy::Strategy;
pub use train::{train, train_policy_set, DqnLearner, Experience, TrainConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("empty skip interval")]
    EmptyInterval,
    #[error("skip interval of {len} frames exceeds T_skip={t_skip}")]
    IntervalTooLong { len: usize, t_skip: usize },
    #[error("action {action} outside [1, {max}]")]
    ActionOutOfRange { action: usize, max: usize },
    #[error("feature dimension {got} does not match policy input {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },
    #[error("no training streams")]
    NoStreams,
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
