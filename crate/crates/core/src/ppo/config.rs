use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PpoConfig {
    pub clip: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub lr: f64,
    pub minibatch: usize,
    pub epochs: usize,
    /// Steps per worker per rollout.
    pub rollout_len: usize,
    pub n_workers: usize,
    pub vf_coef: f64,
    pub ent_coef: f64,
    pub max_grad_norm: f64,
    pub init_log_std: f64,
    /// Divide rewards by the running std of the discounted return.
    pub reward_scaling: bool,
    pub critic_hidden: Vec<usize>,
    /// Rows per gradient chunk inside a minibatch.
    pub grad_chunk: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            clip: 0.2,
            gamma: 0.99,
            lambda: 0.95,
            lr: 3e-4,
            minibatch: 512,
            epochs: 4,
            rollout_len: 2048,
            n_workers: 8,
            vf_coef: 0.5,
            ent_coef: 0.0,
            max_grad_norm: 0.5,
            init_log_std: -1.0,
            reward_scaling: true,
            critic_hidden: vec![64, 64],
            grad_chunk: 128,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return Err(Error::config("ppo.clip", "must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("ppo.gamma", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::config("ppo.lambda", "must lie in [0, 1]"));
        }
        let positive = [("ppo.lr", self.lr), ("ppo.max_grad_norm", self.max_grad_norm)];
        for (field, x) in positive {
            if !(x > 0.0) || !x.is_finite() {
                return Err(Error::config(field, "must be positive"));
            }
        }
        let counts = [
            ("ppo.minibatch", self.minibatch),
            ("ppo.epochs", self.epochs),
            ("ppo.rollout_len", self.rollout_len),
            ("ppo.n_workers", self.n_workers),
            ("ppo.grad_chunk", self.grad_chunk),
        ];
        for (field, n) in counts {
            if n == 0 {
                return Err(Error::config(field, "must be positive"));
            }
        }
        if !(self.vf_coef >= 0.0) || !(self.ent_coef >= 0.0) {
            return Err(Error::config("ppo.vf_coef/ent_coef", "must be non-negative"));
        }
        if !self.init_log_std.is_finite() {
            return Err(Error::config("ppo.init_log_std", "must be finite"));
        }
        if self.critic_hidden.contains(&0) {
            return Err(Error::config("ppo.critic_hidden", "layer widths must be positive"));
        }
        Ok(())
    }

    pub fn steps_per_update(&self) -> usize {
        self.rollout_len * self.n_workers
    }
}
