//! Moments of `Z_max = max(Z_1, …, Z_n)` for i.i.d. `Z_i ~ N(0, 1/n)`.
//!
//! Exact values come from tail integrals of `P(Z_max² ≥ t)`, split into the
//! two events `Z_max ≤ −√t` and `Z_max ≥ √t`, whose probabilities are
//! `Q(√(nt))ⁿ` and `1 − (1 − Q(√(nt)))ⁿ` with `Q` the standard normal upper
//! tail. Integration runs in `x = √t`, which removes the square-root
//! behaviour of both tails at the origin.

use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{LabError, Result};
use crate::exec::Execution;
use crate::quad;
use crate::rng::{standard_normal, stream_rng};
use crate::stats::McSummary;

/// Relative size of the neglected tail integral.
const TAIL_CUTOFF: f64 = 1e-18;

/// Number of contiguous trial batches in Monte Carlo runs.
const MC_BATCHES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentKind {
    /// `E[Z_max²]`
    Square,
    /// `E[Z_max⁴]`
    Fourth,
    /// `E[exp(Z_max²)]`
    ExpSquare,
}

impl MomentKind {
    pub fn label(self) -> &'static str {
        match self {
            MomentKind::Square => "square",
            MomentKind::Fourth => "fourth",
            MomentKind::ExpSquare => "exp-square",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxGaussQuery {
    pub n: usize,
    pub moment: MomentKind,
    pub trials: usize,
}

impl MaxGaussQuery {
    pub fn new(n: usize, moment: MomentKind, trials: usize) -> Result<Self> {
        let q = Self { n, moment, trials };
        q.validate()?;
        Ok(q)
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(LabError::InvalidArgument("n must be at least 1".into()));
        }
        if self.moment == MomentKind::ExpSquare && self.n < 3 {
            return Err(LabError::InvalidArgument(format!(
                "E[exp(Z_max²)] is infinite for n = {} (needs n ≥ 3)",
                self.n
            )));
        }
        Ok(())
    }
}

/// Standard normal upper tail `Q(x) = P(N(0,1) > x)`.
pub fn normal_upper_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Exact `(P(Z_max ≤ −√t), P(Z_max ≥ √t))`.
pub fn zmax_tails_exact(n: usize, t: f64) -> (f64, f64) {
    let q = normal_upper_tail((n as f64 * t).sqrt());
    let nf = n as f64;
    let lower = q.powf(nf);
    let upper = -(nf * (-q).ln_1p()).exp_m1();
    (lower, upper)
}

/// Closed-form bounds `((½)ⁿ e^{−n²t/2}, (n/2)e^{−nt/2} / (1 − ½e^{−nt/2}))`
/// on the two tails.
pub fn zmax_tail_bounds(n: usize, t: f64) -> (f64, f64) {
    let nf = n as f64;
    let lower = 0.5f64.powf(nf) * (-nf * nf * t / 2.0).exp();
    let e = (-nf * t / 2.0).exp();
    let upper = (nf / 2.0) * e / (1.0 - 0.5 * e);
    (lower, upper)
}

fn survival_x(n: usize, x: f64) -> f64 {
    let (lo, hi) = zmax_tails_exact(n, x * x);
    lo + hi
}

/// Integral of the weight times `(n + 1)e^{−nt/2}` over `[t, ∞)`. The bound
/// `(n + 1)e^{−nt/2}` dominates the sum of both tail bounds once
/// `½e^{−nt/2} ≤ ½`.
fn tail_remainder(moment: MomentKind, n: usize, t: f64) -> f64 {
    let nf = n as f64;
    let c = nf + 1.0;
    match moment {
        MomentKind::Square => 2.0 * c / nf * (-nf * t / 2.0).exp(),
        MomentKind::Fourth => 2.0 * c * (-nf * t / 2.0).exp() * (2.0 * t / nf + 4.0 / (nf * nf)),
        MomentKind::ExpSquare => {
            let rate = nf / 2.0 - 1.0;
            c * (-rate * t).exp() / rate
        }
    }
}

/// Exact moment by adaptive quadrature of the tail integral.
pub fn zmax_exact(query: &MaxGaussQuery) -> Result<f64> {
    query.validate()?;
    let n = query.n;
    let moment = query.moment;
    let integrand = |x: f64| -> f64 {
        let s = survival_x(n, x);
        match moment {
            MomentKind::Square => 2.0 * x * s,
            MomentKind::Fourth => 4.0 * x * x * x * s,
            MomentKind::ExpSquare => 2.0 * x * (x * x).exp() * s,
        }
    };
    let mut t_hi = 4.0 / n as f64;
    let mut x_lo = 0.0;
    let mut acc = 0.0;
    for _ in 0..64 {
        let x_hi = t_hi.sqrt();
        acc += quad::adaptive(integrand, x_lo, x_hi, 1e-300, 1e-14)?;
        if tail_remainder(moment, n, t_hi) <= TAIL_CUTOFF * acc {
            return Ok(match moment {
                MomentKind::ExpSquare => 1.0 + acc,
                _ => acc,
            });
        }
        x_lo = x_hi;
        t_hi *= 2.0;
    }
    Err(LabError::QuadratureFailure(format!("tail of {} moment for n = {n} did not vanish", moment.label())))
}

/// Monte Carlo estimate of the moment with a batch-means standard error.
/// `ExpSquare` averages in the log domain.
pub fn zmax_mc(query: &MaxGaussQuery, seed: u64, exec: Execution) -> Result<McSummary> {
    query.validate()?;
    if query.trials == 0 {
        return Err(LabError::InvalidArgument("at least one trial is required".into()));
    }
    let n = query.n;
    let trials = query.trials;
    let batches = MC_BATCHES.min(trials);
    let scale = (n as f64).sqrt().recip();
    let base = trials / batches;
    let extra = trials % batches;
    let moment = query.moment;
    // per batch: (count, mean of g(Z_max²)) with ExpSquare held as a log-mean
    let per_batch = exec.map_indexed(batches, |b| {
        let len = base + usize::from(b < extra);
        let mut rng = stream_rng(seed, b as u64);
        let mut sum = 0.0;
        let mut log_terms = Vec::new();
        for _ in 0..len {
            let mut max = f64::NEG_INFINITY;
            for _ in 0..n {
                max = max.max(standard_normal(&mut rng) * scale);
            }
            let sq = max * max;
            match moment {
                MomentKind::Square => sum += sq,
                MomentKind::Fourth => sum += sq * sq,
                MomentKind::ExpSquare => log_terms.push(sq),
            }
        }
        let value = match moment {
            MomentKind::ExpSquare => {
                let top = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                top + (log_terms.iter().map(|v| (v - top).exp()).sum::<f64>() / len as f64).ln()
            }
            _ => sum / len as f64,
        };
        (len, value)
    });
    let total = trials as f64;
    let shift = match moment {
        MomentKind::ExpSquare => per_batch.iter().map(|b| b.1).fold(f64::NEG_INFINITY, f64::max),
        _ => 0.0,
    };
    let to_linear = |v: f64| match moment {
        MomentKind::ExpSquare => (v - shift).exp(),
        _ => v,
    };
    let mean_scaled = per_batch.iter().map(|&(len, v)| len as f64 * to_linear(v)).sum::<f64>() / total;
    let std_error = if batches < 2 {
        0.0
    } else {
        let ss: f64 = per_batch.iter().map(|&(_, v)| (to_linear(v) - mean_scaled).powi(2)).sum();
        (ss / (batches as f64 * (batches as f64 - 1.0))).sqrt()
    };
    let factor = shift.exp();
    Ok(McSummary { mean: mean_scaled * factor, std_error: std_error * factor, count: trials })
}

/// Least-squares fit of `log value` against `log x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Standard error of the slope (0 with a perfect fit or two points).
    pub slope_se: f64,
    pub used: usize,
    /// Points dropped because their value was not positive.
    pub rejected: Vec<(f64, f64)>,
}

/// Fits `log(value) = intercept + slope·log(x)` over points with positive
/// values. Needs at least three usable points.
pub fn rate_fit(points: &[(f64, f64)]) -> Result<RateFit> {
    let mut rejected = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(x, v) in points {
        if v > 0.0 && v.is_finite() && x > 0.0 {
            xs.push(x.ln());
            ys.push(v.ln());
        } else {
            rejected.push((x, v));
        }
    }
    let k = xs.len();
    if k < 3 {
        return Err(LabError::InvalidArgument(format!(
            "rate fit needs at least 3 positive points, have {k} ({} rejected)",
            rejected.len()
        )));
    }
    let kf = k as f64;
    let mx = xs.iter().sum::<f64>() / kf;
    let my = ys.iter().sum::<f64>() / kf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(LabError::InvalidArgument("rate fit needs distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let slope_se = if k > 2 { (sse / (kf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(RateFit { slope, intercept, r2, slope_se, used: k, rejected })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact(n: usize, moment: MomentKind) -> f64 {
        zmax_exact(&MaxGaussQuery::new(n, moment, 0).unwrap()).unwrap()
    }

    #[test]
    fn small_n_closed_forms() {
        assert!((exact(1, MomentKind::Square) - 1.0).abs() < 1e-12);
        assert!((exact(2, MomentKind::Square) - 0.5).abs() < 1e-12);
        assert!((exact(1, MomentKind::Fourth) - 3.0).abs() < 1e-11);
        // reference values from an independent adaptive quadrature of the same tails
        assert!((exact(16, MomentKind::Square) - 0.213_358_463_084_619_4).abs() < 1e-12);
        assert!((exact(16, MomentKind::ExpSquare) - 1.249_338_966_898_44).abs() < 1e-10);
        assert!((exact(1024, MomentKind::ExpSquare) - 1.010_481_177_431_917).abs() < 1e-10);
    }

    #[test]
    fn expsquare_requires_three_samples() {
        assert!(MaxGaussQuery::new(2, MomentKind::ExpSquare, 0).is_err());
        assert!(MaxGaussQuery::new(0, MomentKind::Square, 0).is_err());
    }

    #[test]
    fn tail_bound_reference_values() {
        let (lo, hi) = zmax_tails_exact(2, 1.0);
        let (blo, bhi) = zmax_tail_bounds(2, 1.0);
        // Φ(−√2)² and 1 − Φ(√2)², computed independently
        assert!((lo - 6.185_760_134_662_109e-3).abs() < 1e-15);
        assert!((hi - 0.151_113_446_915_622_9).abs() < 1e-14);
        assert!((blo - 0.25 * (-2f64).exp()).abs() < 1e-17);
        assert!((bhi - (-1f64).exp() / (1.0 - 0.5 * (-1f64).exp())).abs() < 1e-15);
        assert!(lo <= blo && hi <= bhi);
        let (a, b) = zmax_tail_bounds(8, 1e3);
        assert!(a < 1e-300 && b < 1e-300);
    }

    #[test]
    fn rate_fit_synthetic() {
        let inv: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0].iter().map(|&n| (n, 1.0 / n)).collect();
        let fit = rate_fit(&inv).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-14);
        assert!((fit.r2 - 1.0).abs() < 1e-14);
        let flat: Vec<(f64, f64)> = [1.0, 2.0, 4.0].iter().map(|&n| (n, 3.0)).collect();
        assert_eq!(rate_fit(&flat).unwrap().slope, 0.0);
        let with_bad = [(1.0, 1.0), (2.0, 0.5), (4.0, -1.0), (8.0, 0.125)];
        let fit = rate_fit(&with_bad).unwrap();
        assert_eq!(fit.rejected, vec![(4.0, -1.0)]);
        assert!(rate_fit(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
    }

    #[test]
    fn mc_small_n_cases() {
        let q = MaxGaussQuery::new(1, MomentKind::Square, 1_000_000).unwrap();
        assert!(zmax_mc(&q, 1, Execution::Parallel).unwrap().within(1.0, 3.0));
        let q = MaxGaussQuery::new(2, MomentKind::Square, 1_000_000).unwrap();
        assert!(zmax_mc(&q, 2, Execution::Parallel).unwrap().within(0.5, 3.0));
    }

    #[test]
    fn mc_is_independent_of_execution_mode() {
        let q = MaxGaussQuery::new(8, MomentKind::ExpSquare, 5_000).unwrap();
        let a = zmax_mc(&q, 3, Execution::Parallel).unwrap();
        let b = zmax_mc(&q, 3, Execution::Sequential).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn moments_decrease_in_n() {
        for moment in [MomentKind::Square, MomentKind::Fourth] {
            let mut prev = f64::INFINITY;
            for n in [2, 3, 4, 8, 16, 64] {
                let v = exact(n, moment);
                assert!(v < prev - 1e-12, "{moment:?} n={n}");
                prev = v;
            }
        }
    }
}
