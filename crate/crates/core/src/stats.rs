//! Summary statistics, spectral peak finding and rank tests.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64
}

pub fn std_dev(x: &[f64]) -> f64 {
    variance(x).sqrt()
}

/// Frequency (Hz) of the strongest non-DC spectral component. The mean is
/// removed, the signal is zero-padded `pad`-fold and the peak bin is refined
/// by a parabola through its neighbours.
pub fn dominant_frequency(signal: &[f64], dt: f64, pad: usize) -> f64 {
    let m = mean(signal);
    let len = signal.len() * pad.max(1);
    let mut buf: Vec<Complex<f64>> = (0..len)
        .map(|k| Complex::new(signal.get(k).map_or(0.0, |x| x - m), 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let mag: Vec<f64> = buf[..len / 2].iter().map(|c| c.norm()).collect();
    let k = (1..mag.len()).max_by(|&a, &b| mag[a].total_cmp(&mag[b])).unwrap_or(1);
    let shift = if k + 1 < mag.len() {
        let (a, b, c) = (mag[k - 1], mag[k], mag[k + 1]);
        let denom = a - 2.0 * b + c;
        if denom != 0.0 {
            0.5 * (a - c) / denom
        } else {
            0.0
        }
    } else {
        0.0
    };
    (k as f64 + shift) / (len as f64 * dt)
}

/// Mann–Whitney U statistic of `x` over `y` (ties count one half).
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> f64 {
    let mut u = 0.0;
    for &a in x {
        for &b in y {
            if a > b {
                u += 1.0;
            } else if a == b {
                u += 0.5;
            }
        }
    }
    u
}

/// Exact one-sided p-value of the rank-sum test for "`x` tends to exceed
/// `y`", by enumerating every split of the pooled sample.
pub fn rank_sum_p_greater(x: &[f64], y: &[f64]) -> f64 {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let n = x.len();
    let observed = mann_whitney_u(x, y);
    let mut hits = 0u64;
    let mut count = 0u64;
    let mut pick = Vec::with_capacity(n);
    fn rec(
        start: usize,
        pick: &mut Vec<usize>,
        n: usize,
        pooled: &[f64],
        observed: f64,
        hits: &mut u64,
        count: &mut u64,
    ) {
        if pick.len() == n {
            let xs: Vec<f64> = pick.iter().map(|&i| pooled[i]).collect();
            let ys: Vec<f64> = (0..pooled.len())
                .filter(|i| !pick.contains(i))
                .map(|i| pooled[i])
                .collect();
            *count += 1;
            if mann_whitney_u(&xs, &ys) >= observed - 1e-9 {
                *hits += 1;
            }
            return;
        }
        for i in start..pooled.len() {
            pick.push(i);
            rec(i + 1, pick, n, pooled, observed, hits, count);
            pick.pop();
        }
    }
    rec(0, &mut pick, n, &pooled, observed, &mut hits, &mut count);
    hits as f64 / count as f64
}

/// First Wasserstein distance between two empirical distributions.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let mut pts: Vec<f64> = a.iter().chain(&b).copied().collect();
    pts.sort_by(f64::total_cmp);
    let cdf = |s: &[f64], x: f64| s.partition_point(|&v| v <= x) as f64 / s.len() as f64;
    pts.windows(2)
        .map(|w| (cdf(&a, w[0]) - cdf(&b, w[0])).abs() * (w[1] - w[0]))
        .sum()
}

/// Counts per bin for fixed, ascending `edges`; values outside are clamped
/// into the first or last bin.
pub fn histogram(values: &[f64], edges: &[f64]) -> Vec<u64> {
    let bins = edges.len() - 1;
    let mut counts = vec![0; bins];
    for &v in values {
        let k = edges.partition_point(|&e| e <= v).saturating_sub(1).min(bins - 1);
        counts[k] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_sum_extremes() {
        let hi = [6.0, 7.0, 8.0, 9.0, 10.0];
        let lo = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((rank_sum_p_greater(&hi, &lo) - 1.0 / 252.0).abs() < 1e-15);
        assert_eq!(rank_sum_p_greater(&lo, &hi), 1.0);
        // U = 23; splits with U ≥ 23 number 1 + 1 + 2 (partitions of 0, 1, 2).
        let a = [4.0, 7.0, 8.0, 9.0, 10.0];
        let b = [1.0, 2.0, 3.0, 5.0, 6.0];
        assert_eq!(mann_whitney_u(&a, &b), 23.0);
        assert!((rank_sum_p_greater(&a, &b) - 4.0 / 252.0).abs() < 1e-15);
    }

    #[test]
    fn wasserstein_of_shift() {
        let a = [0.0, 1.0, 2.0];
        let b = [0.5, 1.5, 2.5];
        assert!((wasserstein1(&a, &b) - 0.5).abs() < 1e-15);
        assert_eq!(wasserstein1(&a, &a), 0.0);
    }

    #[test]
    fn histogram_fixed_edges() {
        let h = histogram(&[-5.0, 0.1, 0.2, 0.9, 3.0], &[0.0, 0.5, 1.0]);
        assert_eq!(h, vec![3, 2]);
    }

    #[test]
    fn finds_off_bin_frequency() {
        let dt = 0.01;
        let s: Vec<f64> = (0..1000)
            .map(|k| (2.0 * std::f64::consts::PI * 1.537 * k as f64 * dt).sin())
            .collect();
        let f = dominant_frequency(&s, dt, 8);
        assert!((f - 1.537).abs() < 0.005, "{f}");
    }
}
