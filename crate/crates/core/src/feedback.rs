//! MLP that reshapes the oscillator dynamics from proprioception.

use rand::Rng;

use crate::cpg::FeedbackSignals;
use crate::error::{Error, Result};
use crate::grad::{Tape, Var};
use crate::nn::MlpLayout;

#[derive(Clone, Debug, PartialEq)]
pub struct FeedbackConfig {
    pub hidden: Vec<usize>,
    /// Bound on `|ξ|` (rad/s).
    pub xi_scale: f64,
    /// Bound on `|κ|` (1/s²).
    pub kappa_scale: f64,
    pub hidden_gain: f64,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        FeedbackConfig {
            hidden: vec![32, 32],
            xi_scale: 4.0 * std::f64::consts::PI,
            kappa_scale: 50.0,
            hidden_gain: std::f64::consts::SQRT_2,
        }
    }
}

impl FeedbackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::config("feedback.hidden", "layer widths must be positive"));
        }
        if !(self.xi_scale > 0.0) || !(self.kappa_scale > 0.0) {
            return Err(Error::config("feedback.xi_scale/kappa_scale", "must be positive"));
        }
        Ok(())
    }
}

/// `obs → tanh MLP → [ξ | κ]`, each half squashed by a scaled tanh.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedbackNet {
    pub layout: MlpLayout,
    pub n_osc: usize,
    pub xi_scale: f64,
    pub kappa_scale: f64,
}

impl FeedbackNet {
    pub fn new(obs_dim: usize, n_osc: usize, cfg: &FeedbackConfig) -> Self {
        let mut sizes = vec![obs_dim];
        sizes.extend(&cfg.hidden);
        sizes.push(2 * n_osc);
        FeedbackNet {
            layout: MlpLayout::new(sizes),
            n_osc,
            xi_scale: cfg.xi_scale,
            kappa_scale: cfg.kappa_scale,
        }
    }

    pub fn n_params(&self) -> usize {
        self.layout.n_params()
    }

    /// Orthogonal hidden layers, zero output layer.
    pub fn init(&self, rng: &mut impl Rng, hidden_gain: f64) -> Vec<f64> {
        self.layout.init_orthogonal(rng, hidden_gain, 0.0)
    }

    pub fn forward(&self, w: &[f64], obs: &[f64]) -> Result<FeedbackSignals> {
        let z = self.layout.forward(w, obs)?;
        let n = self.n_osc;
        Ok(FeedbackSignals {
            xi: z[..n].iter().map(|&x| x.tanh() * self.xi_scale).collect(),
            kappa: z[n..].iter().map(|&x| x.tanh() * self.kappa_scale).collect(),
        })
    }

    /// Returns `(ξ, κ)`, each `[B, N]`.
    pub fn forward_taped(&self, tape: &mut Tape, params: Var, offset: usize, obs: Var) -> Result<(Var, Var)> {
        let z = self.layout.forward_taped(tape, params, offset, obs)?;
        let n = self.n_osc;
        let zx = tape.gather(z, &(0..n).collect::<Vec<_>>())?;
        let zk = tape.gather(z, &(n..2 * n).collect::<Vec<_>>())?;
        let tx = tape.tanh(zx);
        let tk = tape.tanh(zk);
        Ok((
            tape.mul_scalar(tx, self.xi_scale),
            tape.mul_scalar(tk, self.kappa_scale),
        ))
    }
}
