use crate::error::Result;
use crate::grad::{Tape, Var};

/// `min(r·Â, clip(r, 1−ε, 1+ε)·Â)` for one sample.
pub fn clipped_surrogate(ratio: f64, adv: f64, eps: f64) -> f64 {
    (ratio * adv).min(ratio.clamp(1.0 - eps, 1.0 + eps) * adv)
}

/// Tape values of one minibatch loss.
#[derive(Clone, Copy, Debug)]
pub struct LossVars {
    pub loss: Var,
    /// `−mean(min(r·Â, clip(r)·Â))`.
    pub surrogate: Var,
    pub value_loss: Var,
    pub entropy: Var,
}

/// Inputs in `[B, 1]` except `entropy` (`[1, 1]`).
#[derive(Clone, Copy, Debug)]
pub struct LossInputs {
    pub new_log_prob: Var,
    pub old_log_prob: Var,
    pub advantages: Var,
    pub values: Var,
    pub returns: Var,
    pub entropy: Var,
}

/// `−mean(min(rÂ, clip(r)Â)) + c_v·mean((V − R)²) − c_e·entropy`.
pub fn ppo_loss_taped(tape: &mut Tape, x: LossInputs, clip: f64, vf_coef: f64, ent_coef: f64) -> Result<LossVars> {
    let log_ratio = tape.sub(x.new_log_prob, x.old_log_prob)?;
    let ratio = tape.exp(log_ratio);
    let s1 = tape.mul(ratio, x.advantages)?;
    let clipped = tape.clip(ratio, 1.0 - clip, 1.0 + clip);
    let s2 = tape.mul(clipped, x.advantages)?;
    // −min(a, b) = max(−a, −b); ties keep the unclipped branch.
    let n1 = tape.neg(s1);
    let n2 = tape.neg(s2);
    let worst = tape.max(n1, n2)?;
    let surrogate = tape.mean(worst);
    let err = tape.sub(x.values, x.returns)?;
    let sq = tape.square(err);
    let value_loss = tape.mean(sq);
    let vl = tape.mul_scalar(value_loss, vf_coef);
    let total = tape.add(surrogate, vl)?;
    let ent = tape.mul_scalar(x.entropy, ent_coef);
    let loss = tape.sub(total, ent)?;
    Ok(LossVars {
        loss,
        surrogate,
        value_loss,
        entropy: x.entropy,
    })
}
