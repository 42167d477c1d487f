use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::params::{map_params, CpgParams, A_FLOOR};
use super::state::{CommandSignal, CpgState};
use super::topology::CpgTopology;
use crate::error::{Error, Result};
use crate::math::{inv_softplus, TAU};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CouplingInit {
    /// `w ~ N(0, std)`, `φ ~ U(−π, π)`.
    Random,
    /// All coupling weights zero.
    Zero,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitConfig {
    pub coupling: CouplingInit,
    /// Frequency (Hz) reached at the reference command.
    pub nu0: f64,
    /// Amplitude reached at the reference command.
    pub rho0: f64,
    /// Convergence constant at init.
    pub a0: f64,
    /// Std of the slopes α, γ and of the coupling weights.
    pub std: f64,
    /// Reference command `d₀`.
    pub d0: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            coupling: CouplingInit::Random,
            nu0: 1.5,
            rho0: 0.4,
            a0: 20.0,
            std: 0.1,
            d0: 1.0,
        }
    }
}

impl InitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu0 > 0.0) {
            return Err(Error::config("cpg.init.nu0", "must be positive"));
        }
        if !(self.rho0 > 0.0) {
            return Err(Error::config("cpg.init.rho0", "must be positive"));
        }
        if !(self.a0 > A_FLOOR) {
            return Err(Error::config("cpg.init.a0", format!("must exceed {A_FLOOR}")));
        }
        if !(self.std >= 0.0) {
            return Err(Error::config("cpg.init.std", "must be non-negative"));
        }
        if !(self.d0 >= 0.0) {
            return Err(Error::config("cpg.init.d0", "must be non-negative"));
        }
        Ok(())
    }
}

/// Draws parameters and an initial state with `r = ρ(d₀)` and uniform phases.
pub fn init_cpg(topo: &CpgTopology, seed: u64, cfg: &InitConfig) -> Result<(CpgParams, CpgState)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, cfg.std).expect("std validated");
    let l = topo.layout();
    let mut v = vec![0.0; topo.m()];
    let (sp_nu, sp_rho) = (inv_softplus(cfg.nu0), inv_softplus(cfg.rho0));
    for i in 0..topo.n() {
        let alpha = normal.sample(&mut rng);
        let gamma = normal.sample(&mut rng);
        v[l.alpha[i]] = alpha;
        v[l.beta[i]] = sp_nu - alpha * cfg.d0;
        v[l.gamma[i]] = gamma;
        v[l.delta[i]] = sp_rho - gamma * cfg.d0;
        v[l.a_raw[i]] = inv_softplus(cfg.a0 - A_FLOOR);
    }
    for e in 0..topo.edges().len() {
        v[l.w[e]] = match cfg.coupling {
            CouplingInit::Random => normal.sample(&mut rng),
            CouplingInit::Zero => 0.0,
        };
        v[l.phi[e]] = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    }
    let params = CpgParams { v };
    let cmd = CommandSignal(vec![cfg.d0; topo.d_cmd()]);
    let mapped = map_params(topo, &params.v, &cmd)?;
    let n = topo.n();
    let mut state = CpgState::zeros(n);
    for i in 0..n {
        state.theta[i] = rng.gen_range(0.0..TAU);
    }
    state.r = mapped.rho;
    Ok((params, state))
}

/// Fresh state for a new episode: uniform phases, amplitudes at `ρ(d)`.
pub fn reset_state(topo: &CpgTopology, v: &[f64], cmd: &CommandSignal, rng: &mut impl Rng) -> Result<CpgState> {
    let mapped = map_params(topo, v, cmd)?;
    let mut state = CpgState::zeros(topo.n());
    for i in 0..topo.n() {
        state.theta[i] = rng.gen_range(0.0..TAU);
    }
    state.r = mapped.rho;
    Ok(state)
}
