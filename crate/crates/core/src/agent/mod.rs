//! Recurrent deterministic-policy-gradient optimizer and baselines.
//!
//! The agent couples an actor and a critic, each built from a backbone
//! (an LSTM cell over the recent observation window, or a plain dense
//! layer for the recurrence-free ablation) followed by rectified-linear
//! hidden layers. Training follows the usual deterministic
//! policy-gradient recipe: replayed length-`J` sub-trajectory windows,
//! bootstrapped critic targets from slowly blended target networks with
//! clipped smoothing noise, Adam updates, and per-step soft target
//! blending.
//!
//! Submodules:
//!
//! * [`networks`] — actor/critic containers with explicit backward passes;
//! * [`replay`] — ring buffer serving contiguous same-episode windows;
//! * [`ddpg`] — action selection, targets, train step, training loop;
//! * [`baselines`] — random policy and random search (fluid or fixed grid);
//! * [`checkpoint`] — self-describing parameter snapshots.

pub mod baselines;
pub mod checkpoint;
pub mod ddpg;
pub mod networks;
pub mod replay;

pub use baselines::{random_policy_curve, random_search, PlacementMode, SearchResult};
pub use checkpoint::{load_checkpoint, restore_policy, save_checkpoint, Checkpoint};
pub use ddpg::{
    act, critic_target, evaluate_policy, moving_average, run_training, train_step,
    RecurrentPolicy, TrainingRun,
};
pub use networks::{Backbone, Network};
pub use replay::{ReplayBuffer, Window};

use serde::{Deserialize, Serialize};

/// Learner hyperparameters. Defaults follow the reference configuration;
/// [`AgentConfig::desk`] is a scaled-down profile for fast experiments.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    /// Actor step size.
    pub actor_lr: f64,
    /// Critic step size.
    pub critic_lr: f64,
    /// Mini-batch size `H` (windows per update).
    pub batch_size: usize,
    /// Replay capacity `M` (transitions).
    pub buffer_capacity: usize,
    /// Target blending coefficient `tau`.
    pub tau: f64,
    /// Discount factor `gamma`.
    pub gamma: f64,
    /// Number of rectified-linear hidden layers after the backbone.
    pub hidden_layers: usize,
    /// Width of the backbone output and of each hidden layer.
    pub hidden_width: usize,
    /// Window length `J` fed to the recurrent cells.
    pub trajectory_len: usize,
    /// Exploration noise std at episode 0.
    pub noise_std_start: f64,
    /// Exploration noise std from mid-training onwards (linear anneal
    /// over the first half of the episodes).
    pub noise_std_end: f64,
    /// Std of the clipped Gaussian smoothing noise on target actions.
    pub target_noise_std: f64,
    /// Clip bound for the target smoothing noise.
    pub target_noise_clip: f64,
    /// Training episodes `E`.
    pub episodes: usize,
    /// Steps per episode `T`.
    pub episode_length: usize,
    /// Environment steps between gradient updates (1 = update every step).
    pub update_every: usize,
    /// True for the LSTM backbone, false for the dense ablation.
    pub recurrent: bool,
}

impl Default for AgentConfig {
    fn default() -> AgentConfig {
        AgentConfig {
            actor_lr: 5e-4,
            critic_lr: 1e-4,
            batch_size: 64,
            buffer_capacity: 10_000,
            tau: 1e-3,
            gamma: 0.9,
            hidden_layers: 2,
            hidden_width: 200,
            trajectory_len: 8,
            noise_std_start: 0.3,
            noise_std_end: 0.05,
            target_noise_std: 0.1,
            target_noise_clip: 0.3,
            episodes: 6000,
            episode_length: 100,
            update_every: 1,
            recurrent: true,
        }
    }
}

impl AgentConfig {
    /// Scaled-down profile that trains in minutes on one core.
    pub fn desk() -> AgentConfig {
        AgentConfig {
            batch_size: 32,
            buffer_capacity: 5_000,
            hidden_width: 48,
            episodes: 500,
            episode_length: 50,
            update_every: 2,
            ..AgentConfig::default()
        }
    }

    /// Checks the invariants the learner relies on.
    pub fn validate(&self) -> Result<(), AgentError> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(AgentError::Config(format!("tau {} outside (0, 1]", self.tau)));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(AgentError::Config(format!(
                "gamma {} outside [0, 1)",
                self.gamma
            )));
        }
        if self.batch_size > self.buffer_capacity {
            return Err(AgentError::Config(format!(
                "batch size {} exceeds buffer capacity {}",
                self.batch_size, self.buffer_capacity
            )));
        }
        if self.trajectory_len == 0 || self.batch_size == 0 || self.update_every == 0 {
            return Err(AgentError::Config(
                "trajectory_len, batch_size and update_every must be positive".to_string(),
            ));
        }
        if self.trajectory_len > self.episode_length {
            return Err(AgentError::Config(format!(
                "trajectory_len {} exceeds episode_length {}",
                self.trajectory_len, self.episode_length
            )));
        }
        Ok(())
    }
}

/// Errors surfaced by the learner.
#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    /// Replay buffer cannot serve the requested mini-batch yet.
    #[error("replay buffer underfull: {have} complete windows, need {need}")]
    BufferUnderfull {
        /// Complete windows currently stored.
        have: usize,
        /// Windows required for one mini-batch.
        need: usize,
    },
    /// A gradient or loss stopped being finite.
    #[error("numeric failure: {0}")]
    NumericFailure(String),
    /// Invalid hyperparameter combination.
    #[error("invalid agent config: {0}")]
    Config(String),
    /// Checkpoint file malformed or inconsistent.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
