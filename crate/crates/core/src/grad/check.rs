//! Central finite-difference gradient checks.

use super::tape::{Primitive, Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Per-coordinate comparison of an analytic gradient against central differences.
#[derive(Clone, Debug)]
pub struct FdReport {
    pub max_rel_err: f64,
    pub failing_indices: Vec<usize>,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub tol: f64,
}

impl FdReport {
    pub fn passed(&self) -> bool {
        self.failing_indices.is_empty()
    }

    pub fn rel_err(&self, i: usize) -> f64 {
        rel_err(self.analytic[i], self.numeric[i])
    }
}

/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-8);
    (analytic - numeric).abs() / denom
}

/// Builds a report from already computed gradients.
pub fn compare(analytic: Vec<f64>, numeric: Vec<f64>, tol: f64) -> FdReport {
    let mut max_rel_err = 0.0f64;
    let mut failing_indices = Vec::new();
    for (i, (&a, &n)) in analytic.iter().zip(&numeric).enumerate() {
        let e = rel_err(a, n);
        if !(e < tol) {
            failing_indices.push(i);
        }
        max_rel_err = max_rel_err.max(if e.is_nan() { f64::INFINITY } else { e });
    }
    FdReport {
        max_rel_err,
        failing_indices,
        analytic,
        numeric,
        tol,
    }
}

/// Central differences of a scalar function of a flat point.
pub fn central_differences(f: impl Fn(&[f64]) -> Result<f64>, point: &[f64], h: f64) -> Result<Vec<f64>> {
    let mut x = point.to_vec();
    let mut out = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        let x0 = x[i];
        x[i] = x0 + h;
        let fp = f(&x)?;
        x[i] = x0 - h;
        let fm = f(&x)?;
        x[i] = x0;
        out.push((fp - fm) / (2.0 * h));
    }
    Ok(out)
}

/// Configurable gradient check over a taped scalar function of one flat input.
#[derive(Clone, Debug)]
pub struct FdCheck {
    pub h: f64,
    pub tol: f64,
    faults: Vec<Primitive>,
}

impl FdCheck {
    pub fn new(h: f64, tol: f64) -> Self {
        FdCheck {
            h,
            tol,
            faults: Vec::new(),
        }
    }

    #[doc(hidden)]
    pub fn with_fault(mut self, prim: Primitive) -> Self {
        self.faults.push(prim);
        self
    }

    /// `f` receives a `[1, point.len()]` leaf and must return a 1×1 output.
    pub fn run<F>(&self, f: F, point: &[f64]) -> Result<FdReport>
    where
        F: Fn(&mut Tape, Var) -> Result<Var>,
    {
        let eval = |x: &[f64]| -> Result<(Tape, Var, Var)> {
            let mut tape = Tape::new();
            for &p in &self.faults {
                tape.inject_adjoint_fault(p);
            }
            let leaf = tape.leaf(Tensor::row(x.to_vec()));
            let out = f(&mut tape, leaf)?;
            if tape.shape(out) != (1, 1) {
                return Err(Error::Contract("finite_diff_check needs a scalar function".into()));
            }
            Ok((tape, leaf, out))
        };
        let (tape, leaf, out) = eval(point)?;
        let grads = tape.backward(out, &Tensor::scalar(1.0))?;
        let analytic = grads
            .wrt(leaf)
            .map(|t| t.data().to_vec())
            .unwrap_or_else(|| vec![0.0; point.len()]);
        let numeric = central_differences(
            |x| {
                let (tape, _, out) = eval(x)?;
                Ok(tape.value(out).item())
            },
            point,
            self.h,
        )?;
        Ok(compare(analytic, numeric, self.tol))
    }
}

/// Central-difference check of `f` at `point` with step `h` and relative tolerance `tol`.
pub fn finite_diff_check<F>(f: F, point: &[f64], h: f64, tol: f64) -> Result<FdReport>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    FdCheck::new(h, tol).run(f, point)
}
