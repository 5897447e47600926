use std::time::Instant;

use serde_json::json;

use super::config::{ExperimentConfig, ExperimentKind};
use super::report::{
    moment_excess, Check, FeedbackRow, MaxGaussRow, NonfeedbackRow, Rows, RunReport, SanityRow, SlopeReport,
};
use crate::error::Result;
use crate::exec::Execution;
use crate::extremes::{rate_fit, zmax_exact, zmax_mc, zmax_tail_bounds, zmax_tails_exact, MaxGaussQuery, MomentKind};
use crate::feedmi::{mi_feedback_continuous, novikov_check, run_trials, summarize, sup_norm_moment_check};
use crate::gaussmi::{
    cor1_bound, mi_continuous_oracle, mi_sampled, power_bound, thm1a_bound, thm1b_bound, MONOTONE_SLACK,
};
use crate::rng::{derive_seed, stream_rng};
use crate::simulate::{bridge_max, brownian, check_conditions, DriftSpec, SampleGrid};
use crate::spectra::PsdSpec;
use crate::stats::{batch_means, ks_pvalue, ks_statistic, DEFAULT_BATCHES};

/// Rounding slack for deterministic comparisons.
const SLACK: f64 = 1e-9;

/// Runs the experiment selected in `cfg`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut report = match cfg.kind()? {
        ExperimentKind::NonfeedbackGap => run_nonfeedback_gap(cfg)?,
        ExperimentKind::FeedbackGap => run_feedback_gap(cfg)?,
        ExperimentKind::Maxgauss => run_maxgauss(cfg)?,
        ExperimentKind::Sanity => run_sanity(cfg)?,
    };
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

fn fit_slope(name: &str, points: &[(f64, f64)]) -> SlopeReport {
    match rate_fit(points) {
        Ok(fit) => SlopeReport { name: name.into(), fit: Some(fit), note: String::new() },
        Err(e) => SlopeReport { name: name.into(), fit: None, note: format!("insufficient points: {e}") },
    }
}

/// Passes when the fitted slope, widened by two standard errors, reaches
/// `floor`. A fit that could not be made passes with a note.
fn slope_floor_check(name: &str, slope: &SlopeReport, floor: f64) -> Check {
    match &slope.fit {
        Some(f) => Check::new(
            name,
            f.slope + 2.0 * f.slope_se >= floor,
            format!("slope {:.4} ± {:.4} (floor {floor})", f.slope, f.slope_se),
        ),
        None => Check::new(name, true, slope.note.clone()),
    }
}

pub fn run_nonfeedback_gap(cfg: &ExperimentConfig) -> Result<RunReport> {
    let psd = cfg.psd_spec()?;
    let t = cfg.horizon;
    let oracle = mi_continuous_oracle(&psd, t, cfg.fine_n, cfg.oracle_tol)?;
    let (m0, m1) = psd.spectral_moments()?;
    let rows = cfg
        .execution
        .map_slice(&cfg.n_list, |&n| -> Result<NonfeedbackRow> {
            let sampled = mi_sampled(&psd, t, n)?.value;
            Ok(NonfeedbackRow {
                n,
                delta: t / n as f64,
                mi_sampled_nats: sampled,
                mi_oracle_nats: oracle.value(),
                gap_nats: oracle.value() - sampled,
                thm1b_bound_nats: thm1b_bound(&psd, t, n)?,
                cor1_bound_nats: cor1_bound(&psd, t, n)?,
                sqrt_mi_upper_bound: thm1a_bound(&psd, t, n, sampled)?,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let unc = oracle.uncertainty();
    let power = power_bound(&psd, t)?;
    let mut checks = vec![
        Check::new(
            "gap-nonnegative",
            rows.iter().all(|r| r.gap_nats >= -MONOTONE_SLACK),
            format!("min gap {:e}", rows.iter().map(|r| r.gap_nats).fold(f64::INFINITY, f64::min)),
        ),
        Check::new(
            "gap-below-thm1b",
            rows.iter().all(|r| r.gap_nats + unc <= r.thm1b_bound_nats + SLACK),
            worst_ratio(rows.iter().map(|r| (r.gap_nats + unc, r.thm1b_bound_nats))),
        ),
        Check::new(
            "gap-below-cor1",
            rows.iter().all(|r| r.gap_nats + unc <= r.cor1_bound_nats + SLACK),
            worst_ratio(rows.iter().map(|r| (r.gap_nats + unc, r.cor1_bound_nats))),
        ),
        Check::new(
            "sqrt-mi-below-thm1a",
            rows.iter().all(|r| (oracle.value() + unc).sqrt() <= r.sqrt_mi_upper_bound + SLACK),
            worst_ratio(rows.iter().map(|r| ((oracle.value() + unc).sqrt(), r.sqrt_mi_upper_bound))),
        ),
        Check::new(
            "mi-below-power-bound",
            oracle.value() <= power + SLACK && rows.iter().all(|r| r.mi_sampled_nats <= power + SLACK),
            format!("oracle {:.6} vs T·m0/2 = {power:.6}", oracle.value()),
        ),
        Check::new(
            "gap-monotone",
            rows.windows(2).all(|w| w[1].gap_nats <= w[0].gap_nats + SLACK),
            "gap non-increasing in n".to_string(),
        ),
    ];
    let slope = fit_slope("gap-vs-delta", &rows.iter().map(|r| (r.delta, r.gap_nats)).collect::<Vec<_>>());
    checks.push(slope_floor_check("gap-slope", &slope, cfg.slope_floor_for(ExperimentKind::NonfeedbackGap)));

    let mut report = RunReport::new(ExperimentKind::NonfeedbackGap, cfg, Rows::NonfeedbackGap(rows));
    report.checks = checks;
    report.slopes.push(slope);
    report.extras.insert("oracle_nats".into(), json!(oracle.value()));
    report.extras.insert("oracle_bits".into(), json!(oracle.estimate.bits()));
    report.extras.insert("oracle_uncertainty_nats".into(), json!(unc));
    report.extras.insert("oracle_ladder".into(), json!(oracle.ladder));
    report.extras.insert("m0".into(), json!(m0));
    report.extras.insert("m1".into(), json!(m1));
    report.extras.insert("power_bound_nats".into(), json!(power));
    Ok(report)
}

fn worst_ratio(pairs: impl Iterator<Item = (f64, f64)>) -> String {
    let worst = pairs.map(|(v, b)| if b > 0.0 { v / b } else { 0.0 }).fold(0.0, f64::max);
    format!("largest value/bound ratio {worst:.4}")
}

pub fn run_feedback_gap(cfg: &ExperimentConfig) -> Result<RunReport> {
    let drift = cfg.drift_spec()?;
    let t = cfg.horizon;
    let fine = SampleGrid::new(t, cfg.fine_n)?;
    let coarse = cfg.n_list.iter().map(|&n| SampleGrid::new(t, n)).collect::<Result<Vec<_>>>()?;
    let mut warnings = Vec::new();
    let conditions = condition_spot_check(cfg, &drift)?;
    if !conditions.holds() {
        warnings.push(format!(
            "drift violates its declared constants on {} of {} spot checks",
            conditions.lipschitz_violations + conditions.growth_violations,
            conditions.checked
        ));
    }

    let outcomes = run_trials(&drift, &fine, &coarse, cfg.trials, cfg.seed, cfg.execution)?;
    let est = summarize(&outcomes);
    let rows: Vec<FeedbackRow> = coarse
        .iter()
        .enumerate()
        .map(|(j, g)| FeedbackRow {
            n: g.intervals(),
            delta: g.delta(),
            mi_sampled_nats: est.sampled[j].value,
            se_sampled: est.sampled[j].std_error,
            mi_continuous_nats: est.continuous.value,
            se_continuous: est.continuous.std_error,
            gap_nats: est.gaps[j].mean,
            gap_se: est.gaps[j].std_error,
            clip_count: est.sampled_clips[j] + est.continuous_clips,
            rho_gap_sq: est.rho_gap_sq[j].mean,
            rho_gap_sq_se: est.rho_gap_sq[j].std_error,
        })
        .collect();

    let h = drift.alphabet.entropy();
    let in_range = |v: f64, se: f64| v <= h + 3.0 * se + SLACK && v >= -3.0 * se - SLACK;
    let mut checks = vec![
        Check::new(
            "mi-within-entropy",
            in_range(est.continuous.value, est.continuous.std_error)
                && rows.iter().all(|r| in_range(r.mi_sampled_nats, r.se_sampled)),
            format!("H(M) = {h:.6} nats"),
        ),
        Check::new(
            "gap-nonnegative",
            rows.iter().all(|r| r.gap_nats >= -3.0 * r.gap_se - SLACK),
            format!(
                "min gap/se {:.3}",
                rows.iter()
                    .map(|r| if r.gap_se > 0.0 { r.gap_nats / r.gap_se } else { 0.0 })
                    .fold(f64::INFINITY, f64::min)
            ),
        ),
    ];

    // finer nested grids see a richer sample set, so their MI cannot be smaller
    let mut refinement_ok = true;
    let mut worst_z = f64::INFINITY;
    for j in 1..coarse.len() {
        if coarse[j].intervals() % coarse[j - 1].intervals() != 0 {
            continue;
        }
        let diffs: Vec<f64> = outcomes.iter().map(|o| o.sampled[j] - o.sampled[j - 1]).collect();
        let d = batch_means(&diffs, DEFAULT_BATCHES);
        if d.std_error > 0.0 {
            worst_z = worst_z.min(d.mean / d.std_error);
        }
        refinement_ok &= d.mean >= -3.0 * d.std_error - SLACK;
    }
    checks.push(Check::new("refinement-monotone", refinement_ok, format!("min z-score {worst_z:.3}")));

    let total_clips = est.continuous_clips + est.sampled_clips.iter().sum::<usize>();
    let exponents = (cfg.trials * drift.alphabet.len() * (coarse.len() + 1)) as f64;
    let clip_fraction = total_clips as f64 / exponents;
    checks.push(Check::new(
        "clip-fraction",
        clip_fraction <= cfg.max_clip_fraction,
        format!("{total_clips} clipped exponents ({clip_fraction:e} of all)"),
    ));

    let floor = cfg.slope_floor_for(ExperimentKind::FeedbackGap);
    let gap_slope = fit_slope("gap-vs-delta", &rows.iter().map(|r| (r.delta, r.gap_nats)).collect::<Vec<_>>());
    checks.push(slope_floor_check("gap-slope", &gap_slope, floor));
    let rho_slope =
        fit_slope("rho-gap-sq-vs-delta", &rows.iter().map(|r| (r.delta, r.rho_gap_sq)).collect::<Vec<_>>());

    let mut report = RunReport::new(ExperimentKind::FeedbackGap, cfg, Rows::FeedbackGap(rows));
    report.checks = checks;
    report.slopes = vec![gap_slope, rho_slope];
    report.warnings = warnings;
    report.extras.insert("entropy_nats".into(), json!(h));
    report.extras.insert("mi_continuous_bits".into(), json!(est.continuous.bits()));
    report.extras.insert("conditions".into(), serde_json::to_value(conditions)?);
    report.extras.insert("trials".into(), json!(est.trials));
    Ok(report)
}

fn condition_spot_check(cfg: &ExperimentConfig, drift: &DriftSpec) -> Result<crate::simulate::ConditionReport> {
    let grid = SampleGrid::new(cfg.horizon, cfg.fine_n.min(256))?;
    check_conditions(drift, &grid, cfg.condition_pairs, derive_seed(cfg.seed, 0xC0))
}

const MOMENTS: [MomentKind; 3] = [MomentKind::Square, MomentKind::Fourth, MomentKind::ExpSquare];

pub fn run_maxgauss(cfg: &ExperimentConfig) -> Result<RunReport> {
    let jobs: Vec<(usize, MomentKind, usize)> = MOMENTS
        .iter()
        .enumerate()
        .flat_map(|(k, &m)| {
            cfg.n_list
                .iter()
                .filter(move |&&n| m != MomentKind::ExpSquare || n >= 3)
                .map(move |&n| (n, m, k))
        })
        .collect();
    let exact = cfg
        .execution
        .map_slice(&jobs, |&(n, m, _)| zmax_exact(&MaxGaussQuery::new(n, m, 0)?))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;

    let mut rows = Vec::with_capacity(jobs.len());
    for (&(n, m, k), &value) in jobs.iter().zip(&exact) {
        let mc = if cfg.trials > 0 {
            let query = MaxGaussQuery::new(n, m, cfg.trials)?;
            Some(zmax_mc(&query, derive_seed(cfg.seed, (n as u64) << 2 | k as u64), cfg.execution)?)
        } else {
            None
        };
        let mut pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r: &&MaxGaussRow| r.moment == m)
            .map(|r| (r.n as f64, moment_excess(m, r.exact)))
            .collect();
        pts.push((n as f64, moment_excess(m, value)));
        rows.push(MaxGaussRow {
            n,
            moment: m,
            exact: value,
            mc_mean: mc.map(|s| s.mean),
            mc_se: mc.map(|s| s.std_error),
            fitted_slope_so_far: rate_fit(&pts).ok().map(|f| f.slope),
        });
    }

    let slopes: Vec<SlopeReport> = MOMENTS
        .iter()
        .map(|&m| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.moment == m)
                .map(|r| (r.n as f64, moment_excess(m, r.exact)))
                .collect();
            fit_slope(&format!("{}-vs-n", m.label()), &pts)
        })
        .collect();

    let in_window = |s: &SlopeReport, w: [f64; 2]| match &s.fit {
        Some(f) => (f.slope >= w[0] && f.slope <= w[1], format!("slope {:.4} (window [{}, {}])", f.slope, w[0], w[1])),
        None => (false, s.note.clone()),
    };
    let (sq_ok, sq_detail) = in_window(&slopes[0], cfg.square_slope_range);
    let (q_ok, q_detail) = in_window(&slopes[1], cfg.fourth_slope_range);
    let (exp_ok, exp_detail) = match (&slopes[0].fit, &slopes[2].fit) {
        (Some(a), Some(b)) => (
            (a.slope - b.slope).abs() <= cfg.exp_slope_tolerance,
            format!("exp-square slope {:.4} vs square slope {:.4}", b.slope, a.slope),
        ),
        _ => (false, "slope unavailable".to_string()),
    };
    let mut checks = vec![
        Check::new("square-slope", sq_ok, sq_detail),
        Check::new("fourth-slope", q_ok, q_detail),
        Check::new("exp-square-slope", exp_ok, exp_detail),
    ];

    let decreasing = MOMENTS.iter().all(|&m| {
        let v: Vec<f64> = rows.iter().filter(|r| r.moment == m).map(|r| r.exact).collect();
        v.windows(2).all(|w| w[1] <= w[0])
    });
    checks.push(Check::new("moments-decreasing", decreasing, "exact moments non-increasing in n"));

    if cfg.trials > 0 {
        let worst = rows
            .iter()
            .filter_map(|r| Some((r.mc_mean? - r.exact).abs() / r.mc_se?.max(f64::MIN_POSITIVE)))
            .fold(0.0, f64::max);
        checks.push(Check::new(
            "mc-agrees-with-exact",
            worst <= cfg.mc_se_multiple,
            format!("largest |mc − exact|/se {worst:.3} (limit {})", cfg.mc_se_multiple),
        ));
    }

    let (bound_ok, evaluated) = tail_bound_grid(&cfg.n_list);
    checks.push(Check::new(
        "tail-bounds",
        bound_ok,
        format!("exact tails below closed-form bounds on {evaluated} (n, t) points"),
    ));

    let mut report = RunReport::new(ExperimentKind::Maxgauss, cfg, Rows::Maxgauss(rows));
    report.checks = checks;
    report.slopes = slopes;
    Ok(report)
}

/// Compares exact tails with their bounds on about 1000 `(n, t)` points.
fn tail_bound_grid(n_list: &[usize]) -> (bool, usize) {
    let per_n = 1000usize.div_ceil(n_list.len().max(1));
    let mut ok = true;
    let mut count = 0;
    for &n in n_list {
        for k in 0..per_n {
            // t spans [1e-4, 1e2] geometrically
            let t = 1e-4 * 1e6f64.powf(k as f64 / (per_n - 1).max(1) as f64);
            let (lo, hi) = zmax_tails_exact(n, t);
            let (blo, bhi) = zmax_tail_bounds(n, t);
            ok &= lo <= blo * (1.0 + 1e-12) && hi <= bhi * (1.0 + 1e-12);
            count += 1;
        }
    }
    (ok, count)
}

pub fn run_sanity(cfg: &ExperimentConfig) -> Result<RunReport> {
    let drift = cfg.drift_spec()?;
    let fine = SampleGrid::new(cfg.horizon, cfg.fine_n)?;
    let mut rows = Vec::new();
    let mut warnings = Vec::new();

    let nov = novikov_check(&drift, &fine, cfg.trials, derive_seed(cfg.seed, 1), cfg.execution)?;
    let nov_ok = (nov.summary.mean - 1.0).abs() <= 3.0 * nov.summary.std_error + SLACK;
    if nov.heavy_tail {
        warnings.push(format!("likelihood-ratio samples are heavy tailed (kurtosis {:.1})", nov.kurtosis));
    }
    rows.push(SanityRow {
        check: "novikov-normalization".into(),
        value: nov.summary.mean,
        std_error: nov.summary.std_error,
        target: 1.0,
        passed: nov_ok,
    });

    let a = sup_norm_moment_check(&drift, &fine, cfg.epsilon, cfg.trials, derive_seed(cfg.seed, 2), cfg.execution)?;
    let b =
        sup_norm_moment_check(&drift, &fine, cfg.epsilon, 2 * cfg.trials, derive_seed(cfg.seed, 3), cfg.execution)?;
    let combined = a.std_error.hypot(b.std_error);
    let stable = a.mean.is_finite() && b.mean.is_finite() && (a.mean - b.mean).abs() <= 3.0 * combined + SLACK;
    rows.push(SanityRow {
        check: "sup-moment".into(),
        value: a.mean,
        std_error: a.std_error,
        target: b.mean,
        passed: stable,
    });

    let conditions = condition_spot_check(cfg, &drift)?;
    if !conditions.holds() {
        warnings.push(format!(
            "drift violates its declared constants on {} of {} spot checks",
            conditions.lipschitz_violations + conditions.growth_violations,
            conditions.checked
        ));
    }
    rows.push(SanityRow {
        check: "drift-conditions".into(),
        value: (conditions.lipschitz_violations + conditions.growth_violations) as f64,
        std_error: 0.0,
        target: 0.0,
        passed: conditions.holds(),
    });

    let blind = DriftSpec::linear_feedback(0.0, cfg.kappa, drift.alphabet.clone());
    let blind_mi = mi_feedback_continuous(&blind, &fine, cfg.trials, derive_seed(cfg.seed, 4), cfg.execution)?;
    let blind_ok = blind_mi.value.abs() <= 3.0 * blind_mi.std_error + 1e-12;
    rows.push(SanityRow {
        check: "message-blind-mi".into(),
        value: blind_mi.value,
        std_error: blind_mi.std_error,
        target: 0.0,
        passed: blind_ok,
    });

    let zero_mi = mi_sampled(&PsdSpec::zero(), cfg.horizon, cfg.fine_n)?.value;
    rows.push(SanityRow {
        check: "zero-input-mi".into(),
        value: zero_mi,
        std_error: 0.0,
        target: 0.0,
        passed: zero_mi == 0.0,
    });

    let mut checks = vec![
        Check::new("novikov-normalization", nov_ok, format!("{:.5} ± {:.5}", nov.summary.mean, nov.summary.std_error)),
        Check::new("sup-moment-stable", stable, format!("{:.5} vs {:.5} at twice the trials", a.mean, b.mean)),
        Check::new("message-blind-mi", blind_ok, format!("{:e} ± {:e}", blind_mi.value, blind_mi.std_error)),
        Check::new("zero-input-mi", zero_mi == 0.0, format!("{zero_mi:e}")),
    ];

    if cfg.ks_paths > 0 {
        let p = brownian_max_ks(cfg.fine_n, cfg.ks_paths, derive_seed(cfg.seed, 5), cfg.execution)?;
        let ok = p.1 >= cfg.ks_significance;
        rows.push(SanityRow { check: "brownian-max-ks".into(), value: p.0, std_error: 0.0, target: p.1, passed: ok });
        checks.push(Check::new(
            "brownian-max-ks",
            ok,
            format!("D = {:.5}, p = {:.4} over {} paths", p.0, p.1, cfg.ks_paths),
        ));
    }

    let mut report = RunReport::new(ExperimentKind::Sanity, cfg, Rows::Sanity(rows));
    report.checks = checks;
    report.warnings = warnings;
    report.extras.insert("novikov_kurtosis".into(), json!(nov.kurtosis));
    report.extras.insert("conditions".into(), serde_json::to_value(conditions)?);
    Ok(report)
}

/// KS statistic and p-value of bridge-sampled maxima of standard Brownian
/// motion on `[0, 1]` against the law of `|N(0, 1)|`.
pub fn brownian_max_ks(intervals: usize, paths: usize, seed: u64, exec: Execution) -> Result<(f64, f64)> {
    let grid = SampleGrid::new(1.0, intervals)?;
    let maxima = exec
        .map_indexed(paths, |i| -> Result<f64> {
            let mut rng = stream_rng(seed, i as u64);
            let b = brownian(&grid, &mut rng)?;
            Ok(bridge_max(&b, &mut rng))
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let cdf = |x: f64| if x <= 0.0 { 0.0 } else { libm::erf(x / std::f64::consts::SQRT_2) };
    let d = ks_statistic(&maxima, cdf);
    Ok((d, ks_pvalue(paths, d)))
}
