//! Coupled Hopf-oscillator network.
//!
//! Per oscillator `i`, with the previous state on the right-hand side:
//!
//! ```text
//! θ̇ᵢ = 2π νᵢ(d) + ζᵢ + ξᵢ,   ζᵢ = Σⱼ λᵢⱼ rⱼ wᵢⱼ sin(θⱼ − θᵢ − φᵢⱼ)
//! r̈ᵢ = aᵢ (aᵢ/4 (ρᵢ(d) − rᵢ) − ṙᵢ) + κᵢ
//! ```
//!
//! integrated with the trapezoidal rule; the output is `rᵢ cos θᵢ`.

mod batch;
mod dynamics;
mod init;
mod params;
mod state;
mod taped;
mod topology;

pub use batch::batch_cpg_step;
pub use dynamics::{cpg_derivatives, cpg_integrate, cpg_output, cpg_step, unroll};
pub use init::{init_cpg, reset_state, CouplingInit, InitConfig};
pub use params::{map_a, map_affine, map_params, CpgParams, MappedParams, A_FLOOR};
pub use state::{CommandSignal, CpgDerivatives, CpgState, FeedbackSignals};
pub use taped::{cpg_step_taped, TapedState, TapedStep};
pub use topology::{CpgTopology, ParamLayout};
