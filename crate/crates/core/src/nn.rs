//! Fully connected networks over flat parameter slices.
//!
//! Layer `k` stores `W` (`[out, in]`, row-major) followed by `b` (`[out]`).
//! Hidden layers use tanh, the last layer is linear.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_len, Result};
use crate::grad::{Tape, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct MlpLayout {
    sizes: Vec<usize>,
}

impl MlpLayout {
    /// `sizes = [input, hidden..., output]`.
    pub fn new(sizes: Vec<usize>) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        MlpLayout { sizes }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input(&self) -> usize {
        self.sizes[0]
    }

    pub fn output(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn n_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }

    /// `(weight offset, bias offset, in, out)` of layer `k`.
    pub fn layer(&self, k: usize) -> (usize, usize, usize, usize) {
        let off: usize = self.sizes[..=k].windows(2).map(|w| w[1] * w[0] + w[1]).sum();
        let (n_in, n_out) = (self.sizes[k], self.sizes[k + 1]);
        (off, off + n_in * n_out, n_in, n_out)
    }

    /// Range of the last layer's parameters (weights then biases).
    pub fn output_layer_range(&self) -> std::ops::Range<usize> {
        let (w, _, n_in, n_out) = self.layer(self.n_layers() - 1);
        w..w + n_in * n_out + n_out
    }

    /// Direct evaluation for one input row.
    pub fn forward(&self, params: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        check_len("mlp params", self.n_params(), params.len())?;
        check_len("mlp input", self.input(), x.len())?;
        let mut h = x.to_vec();
        for k in 0..self.n_layers() {
            let (wo, bo, n_in, n_out) = self.layer(k);
            let last = k + 1 == self.n_layers();
            let mut y = Vec::with_capacity(n_out);
            for o in 0..n_out {
                let row = &params[wo + o * n_in..wo + (o + 1) * n_in];
                let mut acc = 0.0;
                for i in 0..n_in {
                    acc += h[i] * row[i];
                }
                let z = acc + params[bo + o];
                y.push(if last { z } else { z.tanh() });
            }
            h = y;
        }
        Ok(h)
    }

    /// Taped evaluation; parameters are read from `params` starting at `offset`.
    pub fn forward_taped(&self, tape: &mut Tape, params: Var, offset: usize, x: Var) -> Result<Var> {
        let mut h = x;
        for k in 0..self.n_layers() {
            let (wo, bo, n_in, n_out) = self.layer(k);
            let w = tape.view(params, offset + wo, n_out, n_in)?;
            let b = tape.view(params, offset + bo, 1, n_out)?;
            let acc = tape.matvec(h, w)?;
            let z = tape.add(acc, b)?;
            h = if k + 1 == self.n_layers() { z } else { tape.tanh(z) };
        }
        Ok(h)
    }

    /// Orthogonal weights scaled by `hidden_gain` (hidden layers) and
    /// `output_gain` (last layer), zero biases.
    pub fn init_orthogonal(&self, rng: &mut impl Rng, hidden_gain: f64, output_gain: f64) -> Vec<f64> {
        let mut p = vec![0.0; self.n_params()];
        for k in 0..self.n_layers() {
            let (wo, _, n_in, n_out) = self.layer(k);
            let gain = if k + 1 == self.n_layers() {
                output_gain
            } else {
                hidden_gain
            };
            if gain == 0.0 {
                continue;
            }
            let q = orthogonal(rng, n_out, n_in);
            for o in 0..n_out {
                for i in 0..n_in {
                    p[wo + o * n_in + i] = gain * q[(o, i)];
                }
            }
        }
        p
    }
}

/// `rows × cols` matrix with orthonormal rows or columns (whichever is fewer).
pub fn orthogonal(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let (tall, short) = (rows.max(cols), rows.min(cols));
    let a = DMatrix::<f64>::from_fn(tall, short, |_, _| rng.sample(StandardNormal));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    // Sign fix makes the result uniformly distributed.
    for j in 0..short {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if rows >= cols {
        q
    } else {
        q.transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layout_offsets() {
        let l = MlpLayout::new(vec![3, 4, 2]);
        assert_eq!(l.n_params(), 3 * 4 + 4 + 4 * 2 + 2);
        assert_eq!(l.layer(0), (0, 12, 3, 4));
        assert_eq!(l.layer(1), (16, 24, 4, 2));
        assert_eq!(l.output_layer_range(), 16..26);
    }

    #[test]
    fn orthogonal_rows_or_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (r, c) in [(5, 3), (3, 5), (4, 4)] {
            let q = orthogonal(&mut rng, r, c);
            let g = if r >= c { q.transpose() * &q } else { &q * q.transpose() };
            let id = DMatrix::<f64>::identity(r.min(c), r.min(c));
            assert!((g - id).abs().max() < 1e-12);
        }
    }
}
