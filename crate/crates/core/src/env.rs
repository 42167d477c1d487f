//! Environment interface shared by the trainer and the evaluators.

use rand_chacha::ChaCha8Rng;

use crate::cpg::CpgState;
use crate::error::Result;
use crate::hopper::{HopperState, StepInfo};

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub reward_terms: [f64; 5],
    pub done: bool,
    /// Ended by the horizon rather than by leaving the height band.
    pub truncated: bool,
    pub info: StepInfo,
}

pub trait Environment: Send {
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>>;
    fn step(&mut self, action: &[f64]) -> Result<StepResult>;
    /// Underlying physical state.
    fn hopper_state(&self) -> &HopperState;
    /// Oscillator state when the environment itself runs a CPG.
    fn cpg_state(&self) -> Option<&CpgState> {
        None
    }
}
