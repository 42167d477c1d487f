//! Independent reference implementations used as test oracles.
//!
//! Nothing here depends on the library under test. Evaluators are written
//! straight from the model equations, generic over the scalar type.

pub mod dd;
pub mod fd;
pub mod models;
pub mod real;

pub use dd::DD;
pub use real::Real;
