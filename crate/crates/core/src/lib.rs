//! Differentiable central pattern generator used as a PPO actor.

// `!(x > 0.0)` style checks are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actors;
pub mod checkpoint;
pub mod cpg;
pub mod env;
pub mod error;
pub mod eval;
pub mod feedback;
pub mod grad;
pub mod hopper;
pub mod math;
pub mod nn;
pub mod normalize;
pub mod par;
pub mod ppo;
pub mod stats;

pub use error::{Error, Result};
