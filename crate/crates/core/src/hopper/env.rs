use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::{HopperConfig, RewardConfig};
use super::model::{foot_jacobian, foot_position, pd_torque, substep, HopperState};
use super::reward::{compute_reward, RewardInputs};
use crate::env::{Environment, StepResult};
use crate::error::{Error, Result};

pub const OBS_DIM: usize = 8;

/// Diagnostics of the last control step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepInfo {
    /// Torques applied in the last physics substep (N·m).
    pub torque: [f64; 2],
    /// Horizontal foot velocity (m/s).
    pub foot_slip: f64,
    pub normal_force: f64,
}

/// Single leg on a vertical slider, driven by desired joint positions.
#[derive(Clone, Debug)]
pub struct HopperEnv {
    pub cfg: HopperConfig,
    pub reward: RewardConfig,
    state: HopperState,
    prev_desired: [f64; 2],
    steps: usize,
    done: bool,
}

impl HopperEnv {
    pub fn new(cfg: HopperConfig, reward: RewardConfig) -> Result<Self> {
        cfg.validate()?;
        reward.validate()?;
        let state = rest_state(&cfg, cfg.crouch);
        Ok(HopperEnv {
            prev_desired: cfg.crouch,
            cfg,
            reward,
            state,
            steps: 0,
            done: false,
        })
    }

    pub fn state(&self) -> &HopperState {
        &self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Places the leg in an arbitrary state, for targeted tests.
    pub fn set_state(&mut self, s: HopperState) {
        self.state = s;
        self.done = false;
    }

    pub fn observation(&self) -> Vec<f64> {
        let s = &self.state;
        vec![
            s.q[0],
            s.q[1],
            s.q_dot[0],
            s.q_dot[1],
            self.prev_desired[0],
            self.prev_desired[1],
            s.z,
            s.z_dot,
        ]
    }
}

/// Leg at rest on the ground with the foot sunk to its static penetration.
pub fn rest_state(cfg: &HopperConfig, q: [f64; 2]) -> HopperState {
    let rel = foot_position(cfg, 0.0, q);
    let sink = cfg.total_mass() * cfg.gravity / cfg.contact_stiffness;
    let z = -rel[1] - sink;
    HopperState {
        z,
        z_dot: 0.0,
        q,
        q_dot: [0.0; 2],
        foot_contact: true,
        foot_pos: foot_position(cfg, z, q),
    }
}

impl Environment for HopperEnv {
    fn obs_dim(&self) -> usize {
        OBS_DIM
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let n = self.cfg.reset_noise;
        let mut q = self.cfg.crouch;
        if n > 0.0 {
            for qj in &mut q {
                *qj += rng.gen_range(-n..=n);
            }
        }
        self.state = rest_state(&self.cfg, q);
        self.state.foot_contact = self.state.foot_pos[1] <= 0.0;
        self.prev_desired = q;
        self.steps = 0;
        self.done = false;
        Ok(self.observation())
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if action.len() != 2 {
            return Err(Error::Dimension {
                context: "hopper action",
                expected: 2,
                got: action.len(),
            });
        }
        if !action.iter().all(|a| a.is_finite()) {
            return Err(Error::NonFinite("desired joint positions".into()));
        }
        if self.done {
            return Err(Error::Contract("step called on a finished episode".into()));
        }
        let desired = [action[0], action[1]];
        let mut tau = [0.0; 2];
        let mut normal = 0.0;
        for _ in 0..self.cfg.substeps {
            tau = pd_torque(&self.cfg, desired, self.state.q, self.state.q_dot);
            let (next, f) = substep(&self.cfg, &self.state, tau).inspect_err(|_| self.done = true)?;
            self.state = next;
            normal = f.normal;
        }
        self.steps += 1;
        let s = &self.state;
        let (jt, _) = foot_jacobian(&self.cfg, s.q);
        let foot_slip = jt[1] * s.q_dot[0] + jt[2] * s.q_dot[1];
        let terms = compute_reward(
            &RewardInputs {
                hip_vel: s.z_dot,
                desired,
                measured: s.q,
                joint_vel: s.q_dot,
                torque: tau,
                foot_slip,
            },
            &self.reward,
        );
        let fell = s.z < self.cfg.z_min || s.z > self.cfg.z_max;
        let truncated = !fell && self.steps >= self.cfg.horizon;
        self.done = fell || truncated;
        self.prev_desired = desired;
        Ok(StepResult {
            observation: self.observation(),
            reward: terms.iter().sum(),
            reward_terms: terms,
            done: self.done,
            truncated,
            info: StepInfo {
                torque: tau,
                foot_slip,
                normal_force: normal,
            },
        })
    }

    fn hopper_state(&self) -> &HopperState {
        &self.state
    }
}
