//! Small statistical helpers shared by the Monte Carlo checks: moments with
//! standard errors, Kolmogorov-Smirnov statistics and binomial intervals.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use std::f64::consts::PI;

/// Standard deviation of the reference Gaussian Q = N(0, 1/(2π)).
pub const Q_STD: f64 = 0.398_942_280_401_432_7; // 1/sqrt(2π)

/// One draw from N(0, 1/(2π)).
#[inline]
pub fn sample_q<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    z * Q_STD
}

/// Sample mean together with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub variance: f64,
    pub n: usize,
}

impl MeanEstimate {
    pub fn from_slice(values: &[f64]) -> Self {
        let n = values.len();
        assert!(n > 0, "mean of an empty sample");
        let mean = values.iter().sum::<f64>() / n as f64;
        let variance = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            std_err: (variance / n as f64).sqrt(),
            variance,
            n,
        }
    }

    /// Whether `target` lies within `k` standard errors of the mean.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_err
    }
}

/// Sample variance about a known mean, with the standard error of that
/// variance estimate (from the fourth central moment).
pub fn variance_about(values: &[f64], center: f64) -> MeanEstimate {
    let sq: Vec<f64> = values.iter().map(|v| (v - center).powi(2)).collect();
    MeanEstimate::from_slice(&sq)
}

/// One-sample Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let lo = f - i as f64 / n;
            let hi = (i + 1) as f64 / n - f;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic Kolmogorov critical value c(α) = sqrt(-ln(α/2)/2).
pub fn ks_coefficient(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

/// One-sample KS critical value at level `alpha` for `n` samples.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    ks_coefficient(alpha) / (n as f64).sqrt()
}

/// Two-sample KS critical value at level `alpha`.
pub fn ks_critical_two_sample(n: usize, m: usize, alpha: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    ks_coefficient(alpha) * ((n + m) / (n * m)).sqrt()
}

/// Wilson score interval at ~95% for a binomial proportion.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z = 1.959_963_984_540_054;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Total variation between a histogram of `samples` on `bins` equal bins over
/// `[lo, hi]` and a reference law given by its CDF. Mass outside the range is
/// compared as one extra cell on each side.
pub fn histogram_tv<F: Fn(f64) -> f64>(samples: &[f64], cdf: F, lo: f64, hi: f64, bins: usize) -> f64 {
    let n = samples.len() as f64;
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins + 2];
    for &x in samples {
        let cell = if x < lo {
            0
        } else if x >= hi {
            bins + 1
        } else {
            1 + (((x - lo) / width) as usize).min(bins - 1)
        };
        counts[cell] += 1;
    }
    let mut edges = Vec::with_capacity(bins + 1);
    for i in 0..=bins {
        edges.push(cdf(lo + i as f64 * width));
    }
    let mut tv = (counts[0] as f64 / n - edges[0]).abs();
    for i in 0..bins {
        tv += (counts[i + 1] as f64 / n - (edges[i + 1] - edges[i])).abs();
    }
    tv += (counts[bins + 1] as f64 / n - (1.0 - edges[bins])).abs();
    0.5 * tv
}

/// CDF of N(0, 1/(2π)).
pub fn q_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x * PI.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding;

    #[test]
    fn ks_accepts_reference_sample() {
        let mut rng = seeding::stream(1, &[0]);
        let xs: Vec<f64> = (0..20_000).map(|_| sample_q(&mut rng)).collect();
        let d = ks_statistic(&xs, q_cdf);
        assert!(d < ks_critical(xs.len(), 0.01), "{d}");
        let shifted: Vec<f64> = xs.iter().map(|x| x + 0.05).collect();
        assert!(ks_statistic(&shifted, q_cdf) > ks_critical(xs.len(), 0.01));
    }

    #[test]
    fn two_sample_ks_basics() {
        let a = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        let b = [10.0, 11.0];
        assert_eq!(ks_two_sample(&a, &b), 1.0);
    }

    #[test]
    fn critical_value_at_one_percent() {
        assert!((ks_coefficient(0.01) - 1.627_6).abs() < 1e-4);
    }

    #[test]
    fn wilson_interval_contains_point_estimate() {
        let (lo, hi) = wilson_interval(95, 100);
        assert!(lo < 0.95 && 0.95 < hi);
        let (lo, hi) = wilson_interval(0, 1);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.5);
    }

    #[test]
    fn histogram_tv_is_small_for_matching_law() {
        let mut rng = seeding::stream(2, &[0]);
        let xs: Vec<f64> = (0..100_000).map(|_| sample_q(&mut rng)).collect();
        let tv = histogram_tv(&xs, q_cdf, -2.0, 2.0, 200);
        assert!(tv < 0.05, "{tv}");
    }
}
