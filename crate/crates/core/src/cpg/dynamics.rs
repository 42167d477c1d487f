use super::params::{map_params, MappedParams};
use super::state::{CommandSignal, CpgDerivatives, CpgState, FeedbackSignals};
use super::topology::CpgTopology;
use crate::error::{check_len, Error, Result};
use crate::math::TAU;

/// Phase rates and amplitude accelerations from the previous state only.
pub fn cpg_derivatives(
    topo: &CpgTopology,
    state: &CpgState,
    v: &[f64],
    cmd: &CommandSignal,
    fb: &FeedbackSignals,
) -> Result<CpgDerivatives> {
    let n = topo.n();
    state.check(n)?;
    check_len("feedback xi", n, fb.xi.len())?;
    check_len("feedback kappa", n, fb.kappa.len())?;
    let p = map_params(topo, v, cmd)?;
    Ok(derivatives_mapped(topo, state, &p, fb))
}

pub(crate) fn derivatives_mapped(
    topo: &CpgTopology,
    s: &CpgState,
    p: &MappedParams,
    fb: &FeedbackSignals,
) -> CpgDerivatives {
    let n = topo.n();
    let mut zeta = vec![0.0; n];
    for (e, &(i, j)) in topo.edges().iter().enumerate() {
        let diff = s.theta[j] - s.theta[i] - p.phi[e];
        zeta[i] += s.r[j] * p.w[e] * diff.sin();
    }
    let theta_dot = (0..n).map(|i| TAU * p.nu[i] + zeta[i] + fb.xi[i]).collect();
    let r_ddot = (0..n)
        .map(|i| p.a[i] * (p.a[i] * 0.25 * (p.rho[i] - s.r[i]) - s.r_dot[i]) + fb.kappa[i])
        .collect();
    CpgDerivatives {
        theta_dot,
        r_ddot,
        zeta,
    }
}

/// Trapezoidal update. The amplitude update uses the freshly updated `ṙ`.
pub fn cpg_integrate(state: &CpgState, old: &CpgDerivatives, new: &CpgDerivatives, dt: f64) -> Result<CpgState> {
    if !(dt > 0.0) {
        return Err(Error::config("cpg.dt", "must be positive"));
    }
    let n = state.n();
    for len in [
        old.theta_dot.len(),
        old.r_ddot.len(),
        new.theta_dot.len(),
        new.r_ddot.len(),
    ] {
        check_len("cpg derivatives", n, len)?;
    }
    Ok(integrate_unchecked(state, old, new, dt))
}

pub(crate) fn integrate_unchecked(s: &CpgState, old: &CpgDerivatives, new: &CpgDerivatives, dt: f64) -> CpgState {
    let n = s.n();
    let half = dt * 0.5;
    let theta = (0..n)
        .map(|i| s.theta[i] + (old.theta_dot[i] + new.theta_dot[i]) * half)
        .collect();
    let r_dot: Vec<f64> = (0..n)
        .map(|i| s.r_dot[i] + (old.r_ddot[i] + new.r_ddot[i]) * half)
        .collect();
    let r = (0..n).map(|i| s.r[i] + (s.r_dot[i] + r_dot[i]) * half).collect();
    CpgState {
        theta,
        theta_dot: new.theta_dot.clone(),
        r,
        r_dot,
        r_ddot: new.r_ddot.clone(),
    }
}

/// Burst output `xᵢ = rᵢ cos θᵢ`.
pub fn cpg_output(state: &CpgState) -> Vec<f64> {
    state.theta.iter().zip(&state.r).map(|(t, r)| r * t.cos()).collect()
}

/// One full step: derivatives, integration, output. The previous step's
/// derivatives are read from `state`.
pub fn cpg_step(
    topo: &CpgTopology,
    state: &CpgState,
    v: &[f64],
    cmd: &CommandSignal,
    fb: &FeedbackSignals,
    dt: f64,
) -> Result<(CpgState, Vec<f64>)> {
    let new = cpg_derivatives(topo, state, v, cmd, fb)?;
    let next = cpg_integrate(state, &state.stored_derivatives(), &new, dt)?;
    let x = cpg_output(&next);
    Ok((next, x))
}

/// Threads the state through `steps` calls of [`cpg_step`] with fixed inputs
/// and returns every output.
pub fn unroll(
    topo: &CpgTopology,
    state: &CpgState,
    v: &[f64],
    cmd: &CommandSignal,
    fb: &FeedbackSignals,
    dt: f64,
    steps: usize,
) -> Result<(CpgState, Vec<Vec<f64>>)> {
    let p = map_params(topo, v, cmd)?;
    state.check(topo.n())?;
    let mut s = state.clone();
    let mut outputs = Vec::with_capacity(steps);
    for _ in 0..steps {
        let new = derivatives_mapped(topo, &s, &p, fb);
        s = integrate_unchecked(&s, &s.stored_derivatives(), &new, dt);
        outputs.push(cpg_output(&s));
    }
    Ok((s, outputs))
}
