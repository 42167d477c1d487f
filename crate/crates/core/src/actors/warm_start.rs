//! Supervised fit of the baseline policy onto a reference oscillator vector.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::JointMap;
use crate::cpg::{CpgTopology, A_FLOOR};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::grad::{Tape, Tensor};
use crate::hopper::{HopperConfig, HopperEnv, RewardConfig};
use crate::math::inv_softplus;
use crate::nn::MlpLayout;
use crate::normalize::RunningNorm;
use crate::ppo::Adam;

#[derive(Clone, Debug, PartialEq)]
pub struct WarmStartConfig {
    /// Target frequency (Hz).
    pub nu: f64,
    pub rho: f64,
    /// Target convergence constant.
    pub a: f64,
    /// Target coupling weight on every edge.
    pub w: f64,
    /// Target coupling phase per edge, in edge order.
    pub phi: Vec<f64>,
    pub epochs: usize,
    pub lr: f64,
    pub minibatch: usize,
    /// Observations collected for fitting.
    pub samples: usize,
    /// Extra observations kept out of the fit.
    pub held_out: usize,
}

impl Default for WarmStartConfig {
    fn default() -> Self {
        WarmStartConfig {
            nu: 1.5,
            rho: 0.4,
            a: 20.0,
            w: 0.5,
            phi: vec![PI, -PI],
            epochs: 100,
            lr: 3e-3,
            minibatch: 64,
            samples: 4096,
            held_out: 1024,
        }
    }
}

impl WarmStartConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) || !(self.rho > 0.0) {
            return Err(Error::config("warm_start.nu/rho", "must be positive"));
        }
        if !(self.a > A_FLOOR) {
            return Err(Error::config("warm_start.a", format!("must exceed {A_FLOOR}")));
        }
        if !self.w.is_finite() || !self.phi.iter().all(|p| p.is_finite()) {
            return Err(Error::config("warm_start.w/phi", "must be finite"));
        }
        if !(self.lr > 0.0) || self.minibatch == 0 || self.samples == 0 {
            return Err(Error::config("warm_start.lr/minibatch/samples", "must be positive"));
        }
        Ok(())
    }

    /// Raw `V` with zero command slopes, so the mapped values hold for every `d`.
    pub fn target_vector(&self, topo: &CpgTopology) -> Vec<f64> {
        let l = topo.layout();
        let mut v = vec![0.0; topo.m()];
        for i in 0..topo.n() {
            v[l.beta[i]] = inv_softplus(self.nu);
            v[l.delta[i]] = inv_softplus(self.rho);
            v[l.a_raw[i]] = inv_softplus(self.a - A_FLOOR);
        }
        for e in 0..topo.edges().len() {
            v[l.w[e]] = self.w;
            v[l.phi[e]] = self.phi.get(e).copied().unwrap_or(0.0);
        }
        v
    }
}

#[derive(Clone, Debug)]
pub struct WarmStartReport {
    /// Training-set MSE before the first epoch.
    pub initial_loss: f64,
    /// Training-set MSE after each epoch.
    pub losses: Vec<f64>,
    /// Normalised observations never used for fitting.
    pub held_out: Vec<Vec<f64>>,
    pub normalizer: RunningNorm,
}

/// Observations from a leg driven by uniformly random joint targets within
/// the reach of the oscillator mapping.
pub fn random_action_observations(
    hopper: &HopperConfig,
    joints: &JointMap,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>> {
    let mut env = HopperEnv::new(hopper.clone(), RewardConfig::default())?;
    let mut obs = env.reset(rng)?;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        out.push(obs.clone());
        let action: Vec<f64> = (0..2)
            .map(|j| joints.offset[j] + joints.range[j] * rng.gen_range(-1.0..=1.0))
            .collect();
        let r = env.step(&action)?;
        obs = if r.done { env.reset(rng)? } else { r.observation };
    }
    Ok(out)
}

fn dataset_mse(layout: &MlpLayout, params: &[f64], xs: &[Vec<f64>], target: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for x in xs {
        let y = layout.forward(params, x)?;
        total += y.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    }
    Ok(total / (xs.len() * target.len()) as f64)
}

/// Fits `params` so the policy emits `target` for every observation.
/// With `epochs = 0` the parameters are left untouched.
pub fn warm_start(
    layout: &MlpLayout,
    params: &mut [f64],
    target: &[f64],
    cfg: &WarmStartConfig,
    hopper: &HopperConfig,
    joints: &JointMap,
    rng: &mut ChaCha8Rng,
) -> Result<WarmStartReport> {
    cfg.validate()?;
    let raw = random_action_observations(hopper, joints, cfg.samples + cfg.held_out, rng)?;
    let (train_raw, held_raw) = raw.split_at(cfg.samples);
    let mut normalizer = RunningNorm::new(layout.input());
    normalizer.update(train_raw)?;
    let train: Vec<Vec<f64>> = train_raw.iter().map(|x| normalizer.normalize(x)).collect();
    let held_out: Vec<Vec<f64>> = held_raw.iter().map(|x| normalizer.normalize(x)).collect();

    let initial_loss = dataset_mse(layout, params, &train, target)?;
    let mut adam = Adam::new(params.len(), cfg.lr);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch) {
            let rows: Vec<Vec<f64>> = chunk.iter().map(|&i| train[i].clone()).collect();
            let mut tape = Tape::new();
            let p = tape.leaf(Tensor::row(params.to_vec()));
            let x = tape.constant(Tensor::from_rows(&rows)?);
            let t = tape.constant(Tensor::row(target.to_vec()));
            let y = layout.forward_taped(&mut tape, p, 0, x)?;
            let d = tape.sub(y, t)?;
            let sq = tape.square(d);
            let loss = tape.mean(sq);
            let g = tape.backward(loss, &Tensor::scalar(1.0))?.to_vector();
            adam.step(params, &g.0)?;
        }
        losses.push(dataset_mse(layout, params, &train, target)?);
    }
    Ok(WarmStartReport {
        initial_loss,
        losses,
        held_out,
        normalizer,
    })
}
