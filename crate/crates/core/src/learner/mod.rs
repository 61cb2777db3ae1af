//! Policy network, PPO and the training loop.

pub mod adam;
pub mod checkpoint;
pub mod gae;
pub mod net;
pub mod policy;
pub mod ppo;
pub mod train;

pub use checkpoint::Checkpoint;
pub use net::{HeadOutput, PolicyNet};
pub use policy::{deterministic_action, log_prob_of, sample_action, PolicySample};
pub use ppo::{ppo_update, PpoConfig, RolloutBuffer, UpdateStats};
pub use train::{train, train_observed, CurvePoint, StepEvent, TrainOutcome};

#[derive(Debug, thiserror::Error)]
pub enum LearnerError {
    #[error("{what} has length {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("rollout buffer is empty")]
    EmptyBuffer,
    #[error("advantages have not been computed for this buffer")]
    AdvantagesMissing,
    #[error(
        "non-finite loss in epoch {epoch}, minibatch {minibatch}: policy {policy_loss}, value {value_loss}, entropy {entropy}, grad norm {grad_norm}"
    )]
    NonFinite {
        epoch: usize,
        minibatch: usize,
        policy_loss: f64,
        value_loss: f64,
        entropy: f64,
        grad_norm: f64,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
