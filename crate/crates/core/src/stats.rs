//! Monte Carlo summaries: running moments, batch-means standard errors and the
//! Kolmogorov–Smirnov test.

use serde::{Deserialize, Serialize};

/// Default number of batches for batch-means standard errors.
pub const DEFAULT_BATCHES: usize = 100;

/// Mean and standard error of a Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub mean: f64,
    pub std_error: f64,
    pub count: usize,
}

impl McSummary {
    /// `|mean - target| <= k * std_error`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error
    }
}

/// Associative `(sum, sum of squares, count)` accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulator {
    pub sum: f64,
    pub sum_sq: f64,
    pub count: usize,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.sum += x;
        self.sum_sq += x * x;
        self.count += 1;
    }

    pub fn merge(mut self, other: Accumulator) -> Accumulator {
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self.count += other.count;
        self
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.sum / self.count as f64
        }
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let mean = self.sum / n;
        ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    }

    pub fn summary(&self) -> McSummary {
        McSummary {
            mean: self.mean(),
            std_error: (self.variance() / self.count.max(1) as f64).sqrt(),
            count: self.count,
        }
    }
}

impl FromIterator<f64> for Accumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Accumulator::default();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

/// Mean with a batch-means standard error.
///
/// Values are split, in order, into `batches` contiguous groups of nearly equal
/// size. With fewer values than batches each value is its own batch.
pub fn batch_means(values: &[f64], batches: usize) -> McSummary {
    let count = values.len();
    if count == 0 {
        return McSummary { mean: f64::NAN, std_error: f64::NAN, count: 0 };
    }
    let mean = values.iter().sum::<f64>() / count as f64;
    let b = batches.clamp(1, count);
    if b < 2 {
        return McSummary { mean, std_error: 0.0, count };
    }
    let base = count / b;
    let extra = count % b;
    let mut start = 0;
    let mut ss = 0.0;
    for k in 0..b {
        let len = base + usize::from(k < extra);
        let bm = values[start..start + len].iter().sum::<f64>() / len as f64;
        ss += (bm - mean) * (bm - mean);
        start += len;
    }
    let var_of_mean = ss / (b as f64 * (b as f64 - 1.0));
    McSummary { mean, std_error: var_of_mean.sqrt(), count }
}

/// Excess-free sample kurtosis `m4 / m2²` (3 for a Gaussian).
pub fn sample_kurtosis(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return f64::NAN;
    }
    let mean = values.iter().sum::<f64>() / n;
    let (m2, m4) = values.iter().fold((0.0, 0.0), |(m2, m4), x| {
        let d = (x - mean) * (x - mean);
        (m2 + d, m4 + d * d)
    });
    let (m2, m4) = (m2 / n, m4 / n);
    if m2 == 0.0 {
        return 0.0;
    }
    m4 / (m2 * m2)
}

/// Two-sided Kolmogorov–Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of the KS statistic `d` for sample size `n`, with
/// Stephens' small-sample correction.
pub fn ks_pvalue(n: usize, d: f64) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut q = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        q += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * q).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulator_merge_is_associative() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let whole: Accumulator = xs.iter().copied().collect();
        let left: Accumulator = xs[..40].iter().copied().collect();
        let right: Accumulator = xs[40..].iter().copied().collect();
        let merged = left.merge(right);
        assert_eq!(merged.count, whole.count);
        assert!((merged.mean() - whole.mean()).abs() < 1e-15);
        assert!((merged.variance() - whole.variance()).abs() < 1e-14);
    }

    #[test]
    fn batch_means_of_iid_matches_plain_se_roughly() {
        let mut rng = crate::rng::stream_rng(1, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| crate::rng::standard_normal(&mut rng)).collect();
        let bm = batch_means(&xs, 100);
        let plain = xs.iter().copied().collect::<Accumulator>().summary();
        assert!((bm.std_error / plain.std_error - 1.0).abs() < 0.3);
        assert_eq!(bm.mean, plain.mean);
    }

    #[test]
    fn constant_values_have_zero_error() {
        let bm = batch_means(&[2.0; 500], 100);
        assert_eq!(bm.mean, 2.0);
        assert_eq!(bm.std_error, 0.0);
    }

    #[test]
    fn ks_pvalue_reference_points() {
        // lambda = 1.3581 is the 5% critical point of the Kolmogorov law
        let n = 1_000_000;
        let d = 1.3581 / ((n as f64).sqrt() + 0.12 + 0.11 / (n as f64).sqrt());
        assert!((ks_pvalue(n, d) - 0.05).abs() < 1e-3);
        assert!(ks_pvalue(100, 0.5) < 1e-15);
    }
}
