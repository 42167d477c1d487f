//! Central finite differences with a double-double fallback.
//!
//! The f64 pass has roundoff near `ε·|f|/h`, which swamps partials that are
//! small relative to the function value. Coordinates whose f64 estimate
//! disagrees with the gradient under test are re-evaluated with the same
//! step `h` in double-double arithmetic, where roundoff is negligible and
//! only the O(h²) truncation error remains.

use crate::dd::DD;
use crate::real::Real;

/// A function evaluable at any precision.
pub trait VectorFn {
    fn eval<T: Real>(&self, x: &[T]) -> Vec<T>;
}

/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

/// Jacobian column `∂f/∂xᵢ` by central differences in precision `T`.
pub fn column<T: Real, F: VectorFn>(f: &F, x: &[f64], i: usize, h: f64) -> Vec<f64> {
    let mut xp: Vec<T> = x.iter().map(|&v| T::c(v)).collect();
    let mut xm = xp.clone();
    xp[i] = xp[i] + T::c(h);
    xm[i] = xm[i] - T::c(h);
    let (fp, fm) = (f.eval(&xp), f.eval(&xm));
    let inv = T::c(1.0) / T::c(2.0 * h);
    fp.iter().zip(&fm).map(|(&a, &b)| ((a - b) * inv).f()).collect()
}

/// Result of comparing an analytic Jacobian against central differences.
#[derive(Clone, Debug, Default)]
pub struct JacobianCheck {
    /// `numeric[k][i] = ∂f_k/∂x_i`.
    pub numeric: Vec<Vec<f64>>,
    pub max_rel_err: f64,
    /// `(output, input)` pairs failing the tolerance.
    pub failing: Vec<(usize, usize)>,
    /// Columns that needed the double-double pass.
    pub refined_columns: usize,
    pub entries: usize,
}

impl JacobianCheck {
    pub fn passed(&self) -> bool {
        self.failing.is_empty()
    }
}

/// `analytic[k][i]` is compared against central differences of output `k`
/// with respect to input `i`.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn check_jacobian<F: VectorFn>(f: &F, x: &[f64], analytic: &[Vec<f64>], h: f64, tol: f64) -> JacobianCheck {
    let outputs = analytic.len();
    let mut numeric = vec![vec![0.0; x.len()]; outputs];
    let mut out = JacobianCheck::default();
    for i in 0..x.len() {
        let mut col = column::<f64, F>(f, x, i, h);
        if (0..outputs).any(|k| !(rel_err(analytic[k][i], col[k]) < tol)) {
            col = column::<DD, F>(f, x, i, h);
            out.refined_columns += 1;
        }
        for k in 0..outputs {
            numeric[k][i] = col[k];
            let e = rel_err(analytic[k][i], col[k]);
            let e = if e.is_nan() { f64::INFINITY } else { e };
            out.max_rel_err = out.max_rel_err.max(e);
            if !(e < tol) {
                out.failing.push((k, i));
            }
            out.entries += 1;
        }
    }
    out.numeric = numeric;
    out
}
