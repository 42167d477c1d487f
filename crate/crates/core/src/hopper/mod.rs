//! Single-leg vertical hopper: dynamics, PD actuation, contact and reward.

mod config;
mod env;
mod model;
mod reward;
pub mod trajectory;

pub use config::{HopperConfig, RewardConfig};
pub use env::{rest_state, HopperEnv, StepInfo, OBS_DIM};
pub use model::{
    bias_forces, clamp_joint_speed, energy, foot_jacobian, foot_position, mass_matrix, pd_torque, substep,
    ContactForces, HopperState,
};
pub use reward::{compute_reward, RewardInputs};
