//! Diagonal Gaussian with a state-independent log standard deviation.
//!
//! The direct and taped log-densities use the same operation order, so a
//! freshly sampled action re-evaluated on a tape gives a ratio of exactly 1.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::grad::{Tape, Var};

/// ln(2π).
pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn log_norm(dim: usize) -> f64 {
    -0.5 * dim as f64 * LN_2PI
}

pub fn log_prob(x: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    let s: f64 = x
        .iter()
        .zip(mean)
        .zip(log_std)
        .map(|((&xi, &mi), &ls)| {
            let z = (xi - mi) * (-ls).exp();
            z * z
        })
        .sum();
    let lsum: f64 = log_std.iter().sum();
    (s * -0.5 - lsum) + log_norm(x.len())
}

pub fn entropy(log_std: &[f64]) -> f64 {
    log_std.iter().sum::<f64>() + 0.5 * log_std.len() as f64 * (1.0 + LN_2PI)
}

/// Draws `mean + σ·ε` and returns it with its log-density.
pub fn sample_action(mean: &[f64], log_std: &[f64], rng: &mut impl Rng) -> (Vec<f64>, f64) {
    let a: Vec<f64> = mean
        .iter()
        .zip(log_std)
        .map(|(&m, &ls)| {
            let eps: f64 = rng.sample(StandardNormal);
            m + ls.exp() * eps
        })
        .collect();
    let lp = log_prob(&a, mean, log_std);
    (a, lp)
}

/// Row-wise log-density `[B, 1]` of constant actions under `mean` `[B, A]`
/// and `log_std` `[1, A]`.
pub fn log_prob_taped(tape: &mut Tape, actions: Var, mean: Var, log_std: Var) -> Result<Var> {
    let dim = tape.shape(log_std).1;
    let neg = tape.neg(log_std);
    let inv = tape.exp(neg);
    let diff = tape.sub(actions, mean)?;
    let z = tape.mul(diff, inv)?;
    let z2 = tape.square(z);
    let s = tape.sum_cols(z2);
    let half = tape.mul_scalar(s, -0.5);
    let lsum = tape.sum(log_std);
    let t = tape.sub(half, lsum)?;
    Ok(tape.add_scalar(t, log_norm(dim)))
}

pub fn entropy_taped(tape: &mut Tape, log_std: Var) -> Var {
    let dim = tape.shape(log_std).1;
    let s = tape.sum(log_std);
    tape.add_scalar(s, 0.5 * dim as f64 * (1.0 + LN_2PI))
}
