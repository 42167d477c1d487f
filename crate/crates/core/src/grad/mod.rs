//! Reverse-mode differentiation over a closed set of primitives.
//!
//! Values are batched 2-D tensors; every op records its result eagerly so the
//! forward pass on a tape is the same arithmetic as the direct evaluation.

mod check;
mod tape;
mod tensor;

pub use check::{central_differences, compare, finite_diff_check, rel_err, FdCheck, FdReport};
pub use tape::{record_forward, GradVector, Gradients, Primitive, Tape, Var};
pub use tensor::Tensor;
