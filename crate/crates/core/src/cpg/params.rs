use super::state::CommandSignal;
use super::topology::CpgTopology;
use crate::error::{check_len, Result};
use crate::math::softplus;

/// Floor added to `softplus(a_raw)` so amplitude dynamics always converge.
pub const A_FLOOR: f64 = 0.1;

/// Flat trainable vector `v`; interpret through [`CpgTopology::layout`].
#[derive(Clone, Debug, PartialEq)]
pub struct CpgParams {
    pub v: Vec<f64>,
}

/// Parameters after the positivity maps, at a given command.
#[derive(Clone, Debug, PartialEq)]
pub struct MappedParams {
    /// Intrinsic frequency per oscillator (Hz).
    pub nu: Vec<f64>,
    /// Intrinsic amplitude per oscillator.
    pub rho: Vec<f64>,
    /// Convergence constant per oscillator.
    pub a: Vec<f64>,
    /// Coupling weight per edge.
    pub w: Vec<f64>,
    /// Coupling phase per edge (rad).
    pub phi: Vec<f64>,
}

/// `softplus(slope·d + bias)`, the frequency and amplitude map.
#[inline]
pub fn map_affine(slope: f64, bias: f64, d: f64) -> f64 {
    softplus(slope * d + bias)
}

#[inline]
pub fn map_a(a_raw: f64) -> f64 {
    softplus(a_raw) + A_FLOOR
}

/// Applies the positivity maps to a raw vector.
pub fn map_params(topo: &CpgTopology, v: &[f64], cmd: &CommandSignal) -> Result<MappedParams> {
    check_len("cpg params", topo.m(), v.len())?;
    check_len("cpg command", topo.d_cmd(), cmd.0.len())?;
    let l = topo.layout();
    let n = topo.n();
    let d = |i: usize| cmd.0[topo.cmd_index(i)];
    Ok(MappedParams {
        nu: (0..n).map(|i| map_affine(v[l.alpha[i]], v[l.beta[i]], d(i))).collect(),
        rho: (0..n).map(|i| map_affine(v[l.gamma[i]], v[l.delta[i]], d(i))).collect(),
        a: (0..n).map(|i| map_a(v[l.a_raw[i]])).collect(),
        w: l.w.iter().map(|&k| v[k]).collect(),
        phi: l.phi.iter().map(|&k| v[k]).collect(),
    })
}

impl CpgParams {
    pub fn new(topo: &CpgTopology, v: Vec<f64>) -> Result<Self> {
        check_len("cpg params", topo.m(), v.len())?;
        Ok(CpgParams { v })
    }

    pub fn mapped(&self, topo: &CpgTopology, cmd: &CommandSignal) -> Result<MappedParams> {
        map_params(topo, &self.v, cmd)
    }
}
