//! Likelihood-ratio mutual information for the feedback channel.
//!
//! For `dY = g(s, M, Y_0^s) ds + dB` the density of the output law given a
//! message against Wiener measure is `exp(−ρ₁(m, Y))` with
//!
//! ```text
//! ρ₁(m, Y) = −∫ g(s, m, Y_0^s) dY(s) + ½ ∫ g(s, m, Y_0^s)² ds.
//! ```
//!
//! `ρ₂` is the same functional with the drift frozen at the left end of each
//! sampling interval and evaluated on the piecewise-linear interpolation of
//! the samples, so it depends on the samples alone. Mutual information
//! between a finite message and the output is estimated by Monte Carlo as
//! `E[−ρ(M, Y) − log Σ_m p(m) e^{−ρ(m, Y)}]`.
//!
//! Every trial draws its message and its Brownian path from its own stream,
//! and the same path feeds the continuous functional and every coarse grid
//! (common random numbers).

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::exec::Execution;
use crate::gaussmi::{MiEstimate, MiMethod};
use crate::rng::stream_rng;
use crate::simulate::{
    bridge_sup_norm, brownian, integrate_and_dump, transmit_feedback, transmit_feedback_with_noise, DriftSpec,
    PathRecord, PathView, SampleGrid,
};
use crate::stats::{batch_means, sample_kurtosis, McSummary, DEFAULT_BATCHES};

/// Exponents `−ρ` are clipped to `[−CLIP, CLIP]` before mixing.
pub const EXPONENT_CLIP: f64 = 700.0;

/// Kurtosis above which a likelihood-ratio sample is flagged heavy-tailed.
pub const HEAVY_TAIL_KURTOSIS: f64 = 50.0;

/// Left-endpoint Girsanov sum over a path sampled at spacing `dt`.
fn girsanov_sum(drift: &DriftSpec, m: f64, values: &[f64], grid: &SampleGrid) -> Result<f64> {
    let dt = grid.delta();
    let mut stochastic = 0.0;
    let mut energy = 0.0;
    for k in 0..values.len() - 1 {
        let g = drift.eval_checked(grid.time(k), m, PathView::new(dt, &values[..=k]))?;
        stochastic += g * (values[k + 1] - values[k]);
        energy += g * g;
    }
    Ok(-stochastic + 0.5 * energy * dt)
}

/// `ρ₁(m, y)` on the grid of `y`.
pub fn rho1(drift: &DriftSpec, m: f64, y: &PathRecord) -> Result<f64> {
    girsanov_sum(drift, m, &y.values, &y.grid)
}

/// `ρ₂(Δ, m, y)` from the samples `Y(t_0), …, Y(t_n)` on `coarse`.
pub fn rho2(drift: &DriftSpec, m: f64, samples: &[f64], coarse: &SampleGrid) -> Result<f64> {
    if samples.len() != coarse.intervals() + 1 {
        return Err(LabError::GridMismatch(format!(
            "{} samples for a grid with {} intervals",
            samples.len(),
            coarse.intervals()
        )));
    }
    girsanov_sum(drift, m, samples, coarse)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Per-trial information density `−ρ(M) − log Σ_m p(m) e^{−ρ(m)}`.
fn information_density(rhos: &[f64], truth: usize, log_prior: &[f64], clips: &mut usize) -> f64 {
    let exponents: Vec<f64> = rhos
        .iter()
        .map(|r| {
            let e = -r;
            if e.abs() > EXPONENT_CLIP {
                *clips += 1;
                e.clamp(-EXPONENT_CLIP, EXPONENT_CLIP)
            } else {
                e
            }
        })
        .collect();
    let mixed: Vec<f64> = exponents.iter().zip(log_prior).map(|(e, lp)| e + lp).collect();
    exponents[truth] - log_sum_exp(&mixed)
}

/// Everything one Monte Carlo trial contributes.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub message_index: usize,
    /// Information density from `ρ₁` on the fine grid.
    pub continuous: f64,
    /// Information density from `ρ₂` on each coarse grid.
    pub sampled: Vec<f64>,
    /// `ρ₁(M, Y) − ρ₂(Δ, M, Y)` for the true message on each coarse grid.
    pub rho_gap: Vec<f64>,
    /// Clipped exponents in the fine-grid density.
    pub continuous_clips: usize,
    /// Clipped exponents per coarse grid.
    pub sampled_clips: Vec<usize>,
}

/// Runs trial `index` of stream family `seed`.
pub fn run_trial(
    drift: &DriftSpec,
    fine: &SampleGrid,
    coarse: &[SampleGrid],
    seed: u64,
    index: u64,
) -> Result<TrialOutcome> {
    let mut rng = stream_rng(seed, index);
    let alphabet = &drift.alphabet;
    let log_prior: Vec<f64> = alphabet.probs().iter().map(|p| p.ln()).collect();
    let truth = alphabet.sample_index(&mut rng);
    let (y, _) = transmit_feedback(drift, alphabet.values()[truth], fine, &mut rng)?;
    let mut continuous_clips = 0;
    let rho_fine = alphabet.values().iter().map(|&m| rho1(drift, m, &y)).collect::<Result<Vec<_>>>()?;
    let continuous = information_density(&rho_fine, truth, &log_prior, &mut continuous_clips);
    let mut sampled = Vec::with_capacity(coarse.len());
    let mut rho_gap = Vec::with_capacity(coarse.len());
    let mut sampled_clips = Vec::with_capacity(coarse.len());
    for grid in coarse {
        let samples = integrate_and_dump(&y, grid)?;
        let rhos = alphabet
            .values()
            .iter()
            .map(|&m| rho2(drift, m, &samples, grid))
            .collect::<Result<Vec<_>>>()?;
        let mut clips = 0;
        sampled.push(information_density(&rhos, truth, &log_prior, &mut clips));
        sampled_clips.push(clips);
        rho_gap.push(rho_fine[truth] - rhos[truth]);
    }
    Ok(TrialOutcome { message_index: truth, continuous, sampled, rho_gap, continuous_clips, sampled_clips })
}

/// Runs `trials` trials with streams `0..trials`.
pub fn run_trials(
    drift: &DriftSpec,
    fine: &SampleGrid,
    coarse: &[SampleGrid],
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<TrialOutcome>> {
    if trials == 0 {
        return Err(LabError::InvalidArgument("at least one trial is required".into()));
    }
    for grid in coarse {
        fine.refinement_of(grid)?;
    }
    exec.map_indexed(trials, |i| run_trial(drift, fine, coarse, seed, i as u64))
        .into_iter()
        .collect()
}

/// CRN-coupled estimates for one fine grid and several coarse grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEstimate {
    pub continuous: MiEstimate,
    pub sampled: Vec<MiEstimate>,
    /// `continuous − sampled` per coarse grid, with batch-means SE of the
    /// per-trial differences.
    pub gaps: Vec<McSummary>,
    /// Mean of `(ρ₁ − ρ₂)²` per coarse grid.
    pub rho_gap_sq: Vec<McSummary>,
    pub continuous_clips: usize,
    pub sampled_clips: Vec<usize>,
    pub trials: usize,
}

fn mc_estimate(values: &[f64]) -> MiEstimate {
    let s = batch_means(values, DEFAULT_BATCHES);
    MiEstimate { value: s.mean, method: MiMethod::MonteCarlo, trials: s.count, std_error: s.std_error, uncertainty: 0.0 }
}

/// Aggregates trial outcomes in trial order.
pub fn summarize(outcomes: &[TrialOutcome]) -> FeedbackEstimate {
    let grids = outcomes.first().map_or(0, |o| o.sampled.len());
    let continuous: Vec<f64> = outcomes.iter().map(|o| o.continuous).collect();
    let mut sampled = Vec::with_capacity(grids);
    let mut gaps = Vec::with_capacity(grids);
    let mut rho_gap_sq = Vec::with_capacity(grids);
    for j in 0..grids {
        let s: Vec<f64> = outcomes.iter().map(|o| o.sampled[j]).collect();
        let d: Vec<f64> = outcomes.iter().map(|o| o.continuous - o.sampled[j]).collect();
        let r: Vec<f64> = outcomes.iter().map(|o| o.rho_gap[j] * o.rho_gap[j]).collect();
        sampled.push(mc_estimate(&s));
        gaps.push(batch_means(&d, DEFAULT_BATCHES));
        rho_gap_sq.push(batch_means(&r, DEFAULT_BATCHES));
    }
    FeedbackEstimate {
        continuous: mc_estimate(&continuous),
        sampled,
        gaps,
        rho_gap_sq,
        continuous_clips: outcomes.iter().map(|o| o.continuous_clips).sum(),
        sampled_clips: (0..grids).map(|j| outcomes.iter().map(|o| o.sampled_clips[j]).sum()).collect(),
        trials: outcomes.len(),
    }
}

/// Continuous and sampled feedback mutual information under common random
/// numbers.
pub fn estimate_feedback_mi(
    drift: &DriftSpec,
    fine: &SampleGrid,
    coarse: &[SampleGrid],
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<FeedbackEstimate> {
    Ok(summarize(&run_trials(drift, fine, coarse, trials, seed, exec)?))
}

/// Estimate of `I(M; Y(Δ))` through `ρ₂`, simulating on `fine`.
pub fn mi_feedback_sampled(
    drift: &DriftSpec,
    fine: &SampleGrid,
    coarse: &SampleGrid,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<MiEstimate> {
    let est = estimate_feedback_mi(drift, fine, std::slice::from_ref(coarse), trials, seed, exec)?;
    Ok(est.sampled[0])
}

/// Estimate of `I(M; Y_0^T)` through `ρ₁` on `fine`.
pub fn mi_feedback_continuous(
    drift: &DriftSpec,
    fine: &SampleGrid,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<MiEstimate> {
    Ok(estimate_feedback_mi(drift, fine, &[], trials, seed, exec)?.continuous)
}

/// Posterior message weights given the observed prefix.
pub fn posterior_weights(drift: &DriftSpec, prefix: &PathRecord) -> Result<Vec<f64>> {
    let alphabet = &drift.alphabet;
    let logs = alphabet
        .values()
        .iter()
        .zip(alphabet.probs())
        .map(|(&m, p)| Ok(p.ln() - rho1(drift, m, prefix)?))
        .collect::<Result<Vec<f64>>>()?;
    let norm = log_sum_exp(&logs);
    Ok(logs.iter().map(|l| (l - norm).exp()).collect())
}

/// `ĝ(s) = E[g(s, M, Y_0^s) | Y_0^s]` for a grid time `s` of `prefix`.
pub fn posterior_drift(drift: &DriftSpec, prefix: &PathRecord, s: f64) -> Result<f64> {
    let dt = prefix.grid.delta();
    let pos = s / dt;
    let k = pos.round();
    if (pos - k).abs() > 1e-9 || k < 0.0 || k as usize > prefix.grid.intervals() {
        return Err(LabError::InvalidArgument(format!("time {s} is not a grid time of the prefix")));
    }
    let k = k as usize;
    let weights = if k == 0 {
        drift.alphabet.probs().to_vec()
    } else {
        let grid = SampleGrid::new(prefix.grid.time(k), k)?;
        posterior_weights(drift, &PathRecord::new(grid, prefix.values[..=k].to_vec())?)?
    };
    let view = prefix.prefix(k);
    drift
        .alphabet
        .values()
        .iter()
        .zip(&weights)
        .map(|(&m, w)| Ok(w * drift.eval_checked(s, m, view)?))
        .sum()
}

/// Result of a Monte Carlo normalization check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NovikovCheck {
    pub summary: McSummary,
    pub kurtosis: f64,
    pub heavy_tail: bool,
}

/// Monte Carlo estimate of `E[exp(−∫ g dB − ½ ∫ g² ds)]` along simulated
/// `(M, B, Y)`, which should equal 1.
pub fn novikov_check(
    drift: &DriftSpec,
    fine: &SampleGrid,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<NovikovCheck> {
    if trials == 0 {
        return Err(LabError::InvalidArgument("at least one trial is required".into()));
    }
    let dt = fine.delta();
    let values = exec
        .map_indexed(trials, |i| -> Result<f64> {
            let mut rng = stream_rng(seed, i as u64);
            let m = drift.alphabet.values()[drift.alphabet.sample_index(&mut rng)];
            let b = brownian(fine, &mut rng)?;
            let y = transmit_feedback_with_noise(drift, m, &b)?;
            let mut exponent = 0.0;
            for k in 0..fine.intervals() {
                let g = drift.eval_checked(fine.time(k), m, y.prefix(k))?;
                exponent -= g * (b.values[k + 1] - b.values[k]) + 0.5 * g * g * dt;
            }
            Ok(exponent.exp())
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let kurtosis = sample_kurtosis(&values);
    Ok(NovikovCheck {
        summary: batch_means(&values, DEFAULT_BATCHES),
        kurtosis,
        heavy_tail: kurtosis > HEAVY_TAIL_KURTOSIS,
    })
}

/// Monte Carlo estimate of `E[exp(ε·sup_t |Y(t)|²)]` with the sup taken over
/// the continuous path (grid values plus bridge-sampled interval extremes).
pub fn sup_norm_moment_check(
    drift: &DriftSpec,
    fine: &SampleGrid,
    epsilon: f64,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<McSummary> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(LabError::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    if trials == 0 {
        return Err(LabError::InvalidArgument("at least one trial is required".into()));
    }
    let values = exec
        .map_indexed(trials, |i| -> Result<f64> {
            let mut rng = stream_rng(seed, i as u64);
            let m = drift.alphabet.values()[drift.alphabet.sample_index(&mut rng)];
            let (y, _) = transmit_feedback(drift, m, fine, &mut rng)?;
            let sup = bridge_sup_norm(&y, &mut rng);
            let exponent = epsilon * sup * sup;
            if exponent > EXPONENT_CLIP {
                return Err(LabError::MomentOverflow { exponent });
            }
            Ok(exponent.exp())
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    Ok(batch_means(&values, DEFAULT_BATCHES))
}
