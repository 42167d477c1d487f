use super::dynamics::{derivatives_mapped, integrate_unchecked};
use super::params::map_params;
use super::state::{CommandSignal, CpgState, FeedbackSignals};
use super::topology::CpgTopology;
use crate::cpg::dynamics::cpg_output;
use crate::error::{Error, Result};
use crate::par::{map_range, Execution};

/// Applies one step to every batch element with shared parameters.
pub fn batch_cpg_step(
    topo: &CpgTopology,
    states: &[CpgState],
    v: &[f64],
    cmds: &[CommandSignal],
    fbs: &[FeedbackSignals],
    dt: f64,
    exec: Execution,
) -> Result<(Vec<CpgState>, Vec<Vec<f64>>)> {
    let b = states.len();
    if b == 0 {
        return Err(Error::Contract("batch_cpg_step needs at least one element".into()));
    }
    if cmds.len() != b || fbs.len() != b {
        return Err(Error::Contract(format!(
            "ragged batch: {} states, {} commands, {} feedback signals",
            b,
            cmds.len(),
            fbs.len()
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::config("cpg.dt", "must be positive"));
    }
    let n = topo.n();
    for k in 0..b {
        states[k].check(n)?;
        if fbs[k].xi.len() != n || fbs[k].kappa.len() != n {
            return Err(Error::Dimension {
                context: "batch feedback",
                expected: n,
                got: fbs[k].xi.len().min(fbs[k].kappa.len()),
            });
        }
    }
    let results = map_range(exec, b, |k| -> Result<(CpgState, Vec<f64>)> {
        let p = map_params(topo, v, &cmds[k])?;
        let s = &states[k];
        let new = derivatives_mapped(topo, s, &p, &fbs[k]);
        let next = integrate_unchecked(s, &s.stored_derivatives(), &new, dt);
        let x = cpg_output(&next);
        Ok((next, x))
    });
    let mut next = Vec::with_capacity(b);
    let mut out = Vec::with_capacity(b);
    for r in results {
        let (s, x) = r?;
        next.push(s);
        out.push(x);
    }
    Ok((next, out))
}
