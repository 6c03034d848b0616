//! The HAB and HAPS stochastic actors and everything needed to train and
//! run them: state encoding, action decoding, the replay buffer, the
//! entropy-regularised policy loss, and the training/evaluation loops.
//!
//! All `B` HABs act through one shared network; the HAPS has its own.
//! Each agent only ever sees the corrupted CSI of the users it serves
//! plus its own previous beams.

mod actor;
mod buffer;
mod checkpoint;
mod eval;
pub mod gradcheck;
mod loss;
mod state;
mod train;

use serde::{Deserialize, Serialize};

pub use actor::{ActOutput, ActionMode, Actor, ActorKind, ActorPair, Scaling, CONV_CHANNELS, HIDDEN_UNITS, KERNEL};
pub use buffer::{ReplayBuffer, Transition};
pub use checkpoint::{load_checkpoint, save_checkpoint, ActorManifest, CheckpointManifest};
pub use eval::{evaluate, EvalSeries, Method};
pub use loss::{actor_loss, surrogate_weights, LossOutput};
pub use state::{encode_state, AgentState};
pub use train::{initial_actors, train, EpisodeLog, TrainOutcome, TRAIN_LOG_HEADER};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperparams {
    /// Entropy coefficient of the HAB actor.
    pub gamma: f64,
    /// Entropy coefficient of the HAPS actor.
    pub gamma_haps: f64,
    /// Slots between updates.
    pub eta: usize,
    /// Episodes between checkpoints.
    pub eta_ckpt: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Training episodes.
    pub episodes: usize,
    pub lr: f64,
    /// Centre the loss weights on their batch mean.
    pub reward_baseline: bool,
    pub eval_episodes: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            gamma: 0.4,
            gamma_haps: 0.4,
            eta: 2,
            eta_ckpt: 10,
            batch_size: 32,
            buffer_capacity: 100_000,
            episodes: 200,
            lr: 1e-3,
            reward_baseline: true,
            eval_episodes: 500,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("hyperparams: {m}")));
        if !(self.gamma >= 0.0 && self.gamma_haps >= 0.0) {
            return fail("entropy coefficients must be non-negative");
        }
        if self.eta == 0 || self.eta_ckpt == 0 {
            return fail("eta and eta_ckpt must be at least 1");
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return fail("need 1 ≤ batch_size ≤ buffer_capacity");
        }
        if !(self.lr > 0.0) {
            return fail("lr must be positive");
        }
        Ok(())
    }
}
