//! Running per-entry observation statistics.

use crate::error::{check_len, Result};

pub const CLIP: f64 = 10.0;
const EPS: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct RunningNorm {
    pub count: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningNorm {
    pub fn new(dim: usize) -> Self {
        RunningNorm {
            count: 1e-4,
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// z-score clipped to `[−10, 10]`.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.var))
            .map(|(&xi, (&m, &v))| ((xi - m) / (v + EPS).sqrt()).clamp(-CLIP, CLIP))
            .collect()
    }

    /// Merges a batch of samples (parallel-variance combination).
    pub fn update(&mut self, batch: &[Vec<f64>]) -> Result<()> {
        if batch.is_empty() {
            return Ok(());
        }
        let d = self.dim();
        let n = batch.len() as f64;
        let mut bmean = vec![0.0; d];
        for x in batch {
            check_len("normalizer sample", d, x.len())?;
            for k in 0..d {
                bmean[k] += x[k];
            }
        }
        bmean.iter_mut().for_each(|m| *m /= n);
        let mut bvar = vec![0.0; d];
        for x in batch {
            for k in 0..d {
                bvar[k] += (x[k] - bmean[k]).powi(2);
            }
        }
        bvar.iter_mut().for_each(|v| *v /= n);
        let tot = self.count + n;
        for k in 0..d {
            let delta = bmean[k] - self.mean[k];
            let m2 = self.var[k] * self.count + bvar[k] * n + delta * delta * self.count * n / tot;
            self.mean[k] += delta * n / tot;
            self.var[k] = m2 / tot;
        }
        self.count = tot;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_batch_statistics() {
        let data: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64, (i as f64).sin()]).collect();
        let mut a = RunningNorm::new(2);
        a.update(&data[..37]).unwrap();
        a.update(&data[37..]).unwrap();
        let mean0 = 49.5;
        let var0 = data.iter().map(|x| (x[0] - mean0).powi(2)).sum::<f64>() / 100.0;
        assert!((a.mean[0] - mean0).abs() < 1e-4);
        assert!((a.var[0] - var0).abs() / var0 < 1e-5);
    }

    #[test]
    fn clips_outliers() {
        let n = RunningNorm::new(1);
        assert_eq!(n.normalize(&[1e6]), vec![CLIP]);
        assert_eq!(n.normalize(&[-1e6]), vec![-CLIP]);
    }
}
