//! The CPG step recorded on a tape. Rows are batch entries.
//!
//! Arithmetic order mirrors the direct path in `dynamics` so forward values
//! agree bitwise.

use super::params::A_FLOOR;
use super::state::CpgState;
use super::topology::CpgTopology;
use crate::error::Result;
use crate::grad::{Tape, Tensor, Var};
use crate::math::TAU;

/// Batched state, each field `[B, N]`.
#[derive(Clone, Copy, Debug)]
pub struct TapedState {
    pub theta: Var,
    pub theta_dot: Var,
    pub r: Var,
    pub r_dot: Var,
    pub r_ddot: Var,
}

fn stack(states: &[CpgState], f: impl Fn(&CpgState) -> &Vec<f64>) -> Result<Tensor> {
    let rows: Vec<Vec<f64>> = states.iter().map(|s| f(s).clone()).collect();
    Tensor::from_rows(&rows)
}

impl TapedState {
    /// States enter a step as constants: no gradient crosses step boundaries.
    pub fn constants(tape: &mut Tape, states: &[CpgState]) -> Result<Self> {
        Self::register(tape, states, false)
    }

    /// States as differentiable leaves, for sensitivity checks.
    pub fn leaves(tape: &mut Tape, states: &[CpgState]) -> Result<Self> {
        Self::register(tape, states, true)
    }

    fn register(tape: &mut Tape, states: &[CpgState], grad: bool) -> Result<Self> {
        let mut put = |t: Tensor| if grad { tape.leaf(t) } else { tape.constant(t) };
        Ok(TapedState {
            theta: put(stack(states, |s| &s.theta)?),
            theta_dot: put(stack(states, |s| &s.theta_dot)?),
            r: put(stack(states, |s| &s.r)?),
            r_dot: put(stack(states, |s| &s.r_dot)?),
            r_ddot: put(stack(states, |s| &s.r_ddot)?),
        })
    }

    pub fn values(&self, tape: &Tape) -> Vec<CpgState> {
        let t = |v: Var| tape.value(v).clone();
        let (theta, theta_dot, r, r_dot, r_ddot) = (
            t(self.theta),
            t(self.theta_dot),
            t(self.r),
            t(self.r_dot),
            t(self.r_ddot),
        );
        (0..theta.rows())
            .map(|b| CpgState {
                theta: theta.row_slice(b).to_vec(),
                theta_dot: theta_dot.row_slice(b).to_vec(),
                r: r.row_slice(b).to_vec(),
                r_dot: r_dot.row_slice(b).to_vec(),
                r_ddot: r_ddot.row_slice(b).to_vec(),
            })
            .collect()
    }
}

/// Recorded outputs of one step.
#[derive(Clone, Copy, Debug)]
pub struct TapedStep {
    pub state: TapedState,
    /// Burst output `[B, N]`.
    pub output: Var,
    pub zeta: Var,
}

/// One CPG step on the tape.
///
/// `v` is `[1, M]` (shared) or `[B, M]` (per row), `cmd` is `[1 or B, d_cmd]`,
/// `xi` and `kappa` are `[B, N]` or broadcastable.
#[allow(clippy::too_many_arguments)]
pub fn cpg_step_taped(
    tape: &mut Tape,
    topo: &CpgTopology,
    v: Var,
    cmd: Var,
    xi: Var,
    kappa: Var,
    s: &TapedState,
    dt: f64,
) -> Result<TapedStep> {
    let n = topo.n();
    let l = topo.layout();
    let cmd_cols: Vec<usize> = (0..n).map(|i| topo.cmd_index(i)).collect();
    let d = tape.gather(cmd, &cmd_cols)?;

    let alpha = tape.gather(v, &l.alpha)?;
    let beta = tape.gather(v, &l.beta)?;
    let gamma = tape.gather(v, &l.gamma)?;
    let delta = tape.gather(v, &l.delta)?;
    let a_raw = tape.gather(v, &l.a_raw)?;
    let w = tape.gather(v, &l.w)?;
    let phi = tape.gather(v, &l.phi)?;

    let ad = tape.mul(alpha, d)?;
    let nu_pre = tape.add(ad, beta)?;
    let nu = tape.softplus(nu_pre);
    let gd = tape.mul(gamma, d)?;
    let rho_pre = tape.add(gd, delta)?;
    let rho = tape.softplus(rho_pre);
    let a_sp = tape.softplus(a_raw);
    let a = tape.add_scalar(a_sp, A_FLOOR);

    // Coupling: one column per edge, scattered onto the receiving oscillator.
    let dst: Vec<usize> = topo.edges().iter().map(|e| e.0).collect();
    let src: Vec<usize> = topo.edges().iter().map(|e| e.1).collect();
    let th_src = tape.gather(s.theta, &src)?;
    let th_dst = tape.gather(s.theta, &dst)?;
    let r_src = tape.gather(s.r, &src)?;
    let diff0 = tape.sub(th_src, th_dst)?;
    let diff = tape.sub(diff0, phi)?;
    let sin = tape.sin(diff);
    let rw = tape.mul(r_src, w)?;
    let terms = tape.mul(rw, sin)?;
    let zeta = tape.scatter_add(terms, &dst, n)?;

    let two_pi_nu = tape.mul_scalar(nu, TAU);
    let td0 = tape.add(two_pi_nu, zeta)?;
    let theta_dot = tape.add(td0, xi)?;

    let a4 = tape.mul_scalar(a, 0.25);
    let err = tape.sub(rho, s.r)?;
    let pull = tape.mul(a4, err)?;
    let inner = tape.sub(pull, s.r_dot)?;
    let acc0 = tape.mul(a, inner)?;
    let r_ddot = tape.add(acc0, kappa)?;

    let half = dt * 0.5;
    let th_sum = tape.add(s.theta_dot, theta_dot)?;
    let th_inc = tape.mul_scalar(th_sum, half);
    let theta = tape.add(s.theta, th_inc)?;
    let rd_sum = tape.add(s.r_ddot, r_ddot)?;
    let rd_inc = tape.mul_scalar(rd_sum, half);
    let r_dot = tape.add(s.r_dot, rd_inc)?;
    let r_sum = tape.add(s.r_dot, r_dot)?;
    let r_inc = tape.mul_scalar(r_sum, half);
    let r = tape.add(s.r, r_inc)?;

    let cos = tape.cos(theta);
    let output = tape.mul(r, cos)?;
    Ok(TapedStep {
        state: TapedState {
            theta,
            theta_dot,
            r,
            r_dot,
            r_ddot,
        },
        output,
        zeta,
    })
}
