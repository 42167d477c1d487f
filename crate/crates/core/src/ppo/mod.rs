//! Proximal policy optimisation with a clipped surrogate, GAE and Adam.

mod adam;
mod buffer;
mod config;
mod gae;
mod gaussian;
mod loss;
mod trainer;

pub use adam::{clip_grad_norm, Adam, BETA1, BETA2, EPS};
pub use buffer::{Batch, Rollout};
pub use config::PpoConfig;
pub use gae::{gae, normalize_advantages};
pub use gaussian::{entropy, entropy_taped, log_prob, log_prob_taped, sample_action, LN_2PI};
pub use loss::{clipped_surrogate, ppo_loss_taped, LossInputs, LossVars};
pub use trainer::{minibatch_loss, Critic, LossGrad, TrainOutcome, TrainSettings, Trainer, UpdateLog};
