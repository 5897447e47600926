//! Brownian motion, the non-feedback and feedback channels on a fine grid, and
//! the integrate-and-dump sampler.
//!
//! Paths live on an evenly spaced [`SampleGrid`] and are read between grid
//! times by linear interpolation. Coarse sampling grids are required to nest
//! in the fine simulation grid, so sampling is an exact subsequence.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::rng::{self, StreamId};

/// Evenly spaced times `t_i = i·T/n`, `i = 0..=n`, on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    horizon: f64,
    intervals: usize,
}

impl SampleGrid {
    pub fn new(horizon: f64, intervals: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(LabError::InvalidGrid(format!("horizon must be positive, got {horizon}")));
        }
        if intervals == 0 {
            return Err(LabError::InvalidGrid("need at least one interval".into()));
        }
        Ok(Self { horizon, intervals })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Spacing `δ = T/n`.
    pub fn delta(&self) -> f64 {
        self.horizon / self.intervals as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.intervals {
            self.horizon
        } else {
            i as f64 * self.delta()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.intervals).map(|i| self.time(i))
    }

    /// Number of fine steps per coarse step when `coarse` nests in `self`.
    pub fn refinement_of(&self, coarse: &SampleGrid) -> Result<usize> {
        if (self.horizon - coarse.horizon).abs() > 1e-12 * self.horizon {
            return Err(LabError::GridMismatch(format!(
                "horizons differ: {} vs {}",
                self.horizon, coarse.horizon
            )));
        }
        if !self.intervals.is_multiple_of(coarse.intervals) {
            return Err(LabError::GridMismatch(format!(
                "fine grid with {} intervals does not nest a grid with {}",
                self.intervals, coarse.intervals
            )));
        }
        Ok(self.intervals / coarse.intervals)
    }
}

/// Read-only view of a path known on `[0, (len - 1)·dt]`.
#[derive(Debug, Clone, Copy)]
pub struct PathView<'a> {
    pub dt: f64,
    pub values: &'a [f64],
}

impl<'a> PathView<'a> {
    pub fn new(dt: f64, values: &'a [f64]) -> Self {
        debug_assert!(!values.is_empty());
        Self { dt, values }
    }

    /// Value at the end of the known history.
    pub fn current(&self) -> f64 {
        *self.values.last().expect("empty path view")
    }

    /// End time of the known history.
    pub fn end_time(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.dt
    }

    /// Sup norm; exact for the piecewise-linear path.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Linear interpolation, with the path stopped after its end time.
    pub fn at(&self, t: f64) -> f64 {
        interpolate(self.dt, self.values, t)
    }
}

fn interpolate(dt: f64, values: &[f64], t: f64) -> f64 {
    let last = values.len() - 1;
    if t <= 0.0 {
        return values[0];
    }
    let pos = t / dt;
    if pos >= last as f64 {
        return values[last];
    }
    let k = pos.floor() as usize;
    let frac = pos - k as f64;
    values[k] + frac * (values[k + 1] - values[k])
}

/// A realized path on a grid, read by linear interpolation between grid times.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub grid: SampleGrid,
    pub values: Vec<f64>,
}

impl PathRecord {
    pub fn new(grid: SampleGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.intervals() + 1 {
            return Err(LabError::GridMismatch(format!(
                "{} values for a grid with {} intervals",
                values.len(),
                grid.intervals()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: SampleGrid) -> Self {
        Self { grid, values: vec![0.0; grid.intervals() + 1] }
    }

    pub fn value_at(&self, t: f64) -> f64 {
        interpolate(self.grid.delta(), &self.values, t)
    }

    /// History up to and including grid index `k`.
    pub fn prefix(&self, k: usize) -> PathView<'_> {
        PathView::new(self.grid.delta(), &self.values[..=k])
    }

    pub fn view(&self) -> PathView<'_> {
        PathView::new(self.grid.delta(), &self.values)
    }

    /// Maximum over grid values.
    pub fn grid_max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.view().sup_norm()
    }

    /// Writes `t,value` rows preceded by a commented metadata header.
    pub fn write_csv<W: Write>(&self, mut out: W, stream: StreamId) -> Result<()> {
        writeln!(out, "# seed={} stream={}", stream.seed, stream.stream)?;
        writeln!(out, "t,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", self.grid.time(i), v)?;
        }
        Ok(())
    }

    /// Writes little-endian `f64` pairs `(t, value)` after a header holding
    /// the seed, the stream id and the row count as `u64`.
    pub fn write_binary<W: Write>(&self, mut out: W, stream: StreamId) -> Result<()> {
        out.write_all(&stream.seed.to_le_bytes())?;
        out.write_all(&stream.stream.to_le_bytes())?;
        out.write_all(&(self.values.len() as u64).to_le_bytes())?;
        for (i, v) in self.values.iter().enumerate() {
            out.write_all(&self.grid.time(i).to_le_bytes())?;
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
}

/// Finite message alphabet with prior probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageAlphabet {
    values: Vec<f64>,
    probs: Vec<f64>,
}

impl MessageAlphabet {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() {
            return Err(LabError::InvalidDrift(format!(
                "{} messages with {} probabilities",
                values.len(),
                probs.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LabError::InvalidDrift("message values must be finite".into()));
        }
        if probs.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(LabError::InvalidDrift("prior probabilities must be positive".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(LabError::InvalidDrift(format!("prior sums to {total}, not 1")));
        }
        Ok(Self { values, probs })
    }

    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        let p = 1.0 / values.len().max(1) as f64;
        let probs = vec![p; values.len()];
        Self::new(values, probs)
    }

    /// Uniform on `{-1, +1}`.
    pub fn antipodal() -> Self {
        Self { values: vec![-1.0, 1.0], probs: vec![0.5, 0.5] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self.probs.iter().map(|p| p * p.ln()).sum::<f64>()
    }

    /// Index of the message selected by a uniform draw `u ∈ [0, 1)`.
    pub fn index_for(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.index_for(rng.random::<f64>())
    }
}

/// Time profile of a message-scaled drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Pulse {
    Constant { level: f64 },
    Sine { amplitude: f64, angular_frequency: f64 },
}

impl Pulse {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            Pulse::Constant { level } => level,
            Pulse::Sine { amplitude, angular_frequency } => amplitude * (angular_frequency * s).sin(),
        }
    }

    fn sup(&self) -> f64 {
        match *self {
            Pulse::Constant { level } => level.abs(),
            Pulse::Sine { amplitude, .. } => amplitude.abs(),
        }
    }

    fn lipschitz(&self) -> f64 {
        match *self {
            Pulse::Constant { .. } => 0.0,
            Pulse::Sine { amplitude, angular_frequency } => (amplitude * angular_frequency).abs(),
        }
    }
}

type DriftFn = dyn Fn(f64, f64, PathView<'_>) -> f64 + Send + Sync;

/// User-supplied drift `g(s, m, y_0^s)`.
#[derive(Clone)]
pub struct CustomDrift {
    pub name: String,
    func: Arc<DriftFn>,
}

impl CustomDrift {
    pub fn new<F>(name: impl Into<String>, func: F) -> Self
    where
        F: Fn(f64, f64, PathView<'_>) -> f64 + Send + Sync + 'static,
    {
        Self { name: name.into(), func: Arc::new(func) }
    }
}

impl fmt::Debug for CustomDrift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomDrift").field("name", &self.name).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum DriftFamily {
    /// `g = θ·m·φ(s)`.
    MessageScaled { theta: f64, pulse: Pulse },
    /// `g = θ·m − κ·y(s)`.
    LinearFeedback { theta: f64, kappa: f64 },
    Custom(CustomDrift),
}

/// Feedback drift together with its declared regularity constants and the
/// message prior.
#[derive(Debug, Clone)]
pub struct DriftSpec {
    pub family: DriftFamily,
    pub lipschitz: f64,
    pub growth: f64,
    pub alphabet: MessageAlphabet,
}

impl DriftSpec {
    pub fn message_scaled(theta: f64, pulse: Pulse, alphabet: MessageAlphabet) -> Self {
        let mmax = alphabet.max_abs();
        Self {
            lipschitz: (theta.abs() * mmax * pulse.lipschitz()).max(f64::MIN_POSITIVE),
            growth: (theta.abs() * mmax * pulse.sup()).max(f64::MIN_POSITIVE),
            family: DriftFamily::MessageScaled { theta, pulse },
            alphabet,
        }
    }

    pub fn linear_feedback(theta: f64, kappa: f64, alphabet: MessageAlphabet) -> Self {
        let mmax = alphabet.max_abs();
        Self {
            lipschitz: kappa.abs().max(f64::MIN_POSITIVE),
            growth: (theta.abs() * mmax).max(kappa.abs()).max(f64::MIN_POSITIVE),
            family: DriftFamily::LinearFeedback { theta, kappa },
            alphabet,
        }
    }

    /// The zero drift.
    pub fn zero(alphabet: MessageAlphabet) -> Self {
        Self::message_scaled(0.0, Pulse::Constant { level: 0.0 }, alphabet)
    }

    pub fn custom(
        drift: CustomDrift,
        lipschitz: f64,
        growth: f64,
        alphabet: MessageAlphabet,
    ) -> Result<Self> {
        if !(lipschitz > 0.0 && growth > 0.0) {
            return Err(LabError::InvalidDrift(
                "custom drifts must declare positive Lipschitz and growth constants".into(),
            ));
        }
        Ok(Self { family: DriftFamily::Custom(drift), lipschitz, growth, alphabet })
    }

    /// `g(s, m, y_0^s)` where `history` ends at time `s`.
    #[inline]
    pub fn eval(&self, s: f64, m: f64, history: PathView<'_>) -> f64 {
        match &self.family {
            DriftFamily::MessageScaled { theta, pulse } => theta * m * pulse.eval(s),
            DriftFamily::LinearFeedback { theta, kappa } => theta * m - kappa * history.current(),
            DriftFamily::Custom(c) => (c.func)(s, m, history),
        }
    }

    /// Like [`DriftSpec::eval`] but rejecting non-finite values.
    #[inline]
    pub fn eval_checked(&self, s: f64, m: f64, history: PathView<'_>) -> Result<f64> {
        let g = self.eval(s, m, history);
        if g.is_finite() {
            Ok(g)
        } else {
            Err(LabError::NonFiniteDrift { time: s })
        }
    }

    /// True when the drift cannot depend on the message.
    pub fn ignores_message(&self) -> bool {
        match &self.family {
            DriftFamily::MessageScaled { theta, pulse } => *theta == 0.0 || pulse.sup() == 0.0,
            DriftFamily::LinearFeedback { theta, .. } => *theta == 0.0,
            DriftFamily::Custom(_) => false,
        }
    }
}

/// Outcome of spot-checking the declared Lipschitz and growth constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub checked: usize,
    pub lipschitz_violations: usize,
    pub growth_violations: usize,
    /// Largest observed ratio `|Δg| / (|Δs| + ‖Δy‖)`.
    pub worst_lipschitz_ratio: f64,
}

impl ConditionReport {
    pub fn holds(&self) -> bool {
        self.lipschitz_violations == 0 && self.growth_violations == 0
    }
}

/// Sup distance between two paths stopped at grid indices `i` and `j`.
fn stopped_distance(y: &[f64], i: usize, z: &[f64], j: usize) -> f64 {
    let end = i.max(j);
    (0..=end).fold(0.0, |m, r| m.max((y[r.min(i)] - z[r.min(j)]).abs()))
}

/// Evaluates the drift on `pairs` random pairs of scaled Brownian histories
/// and counts violations of the uniform Lipschitz and linear growth bounds.
pub fn check_conditions(
    drift: &DriftSpec,
    grid: &SampleGrid,
    pairs: usize,
    seed: u64,
) -> Result<ConditionReport> {
    let dt = grid.delta();
    let mut report = ConditionReport {
        checked: 0,
        lipschitz_violations: 0,
        growth_violations: 0,
        worst_lipschitz_ratio: 0.0,
    };
    for pair in 0..pairs {
        let mut rng = rng::stream_rng(seed, pair as u64);
        let scale_y = 0.5 + 2.0 * rng.random::<f64>();
        let scale_z = 0.5 + 2.0 * rng.random::<f64>();
        let y: Vec<f64> = brownian(grid, &mut rng)?.values.iter().map(|v| v * scale_y).collect();
        let z: Vec<f64> = brownian(grid, &mut rng)?.values.iter().map(|v| v * scale_z).collect();
        let n = grid.intervals();
        let (s1, s2, t1, t2) = (
            rng.random_range(0..=n),
            rng.random_range(0..=n),
            rng.random_range(0..=n),
            rng.random_range(0..=n),
        );
        for &m in drift.alphabet.values() {
            let gy = drift.eval_checked(s1 as f64 * dt, m, PathView::new(dt, &y[..=s2]))?;
            let gz = drift.eval_checked(t1 as f64 * dt, m, PathView::new(dt, &z[..=t2]))?;
            let dist = (s1 as f64 - t1 as f64).abs() * dt + stopped_distance(&y, s2, &z, t2);
            let diff = (gy - gz).abs();
            let tol = 1e-12 * (1.0 + gy.abs().max(gz.abs()));
            if dist > 0.0 {
                report.worst_lipschitz_ratio = report.worst_lipschitz_ratio.max(diff / dist);
            }
            if diff > drift.lipschitz * dist + tol {
                report.lipschitz_violations += 1;
            }
            let norm = PathView::new(dt, &y[..=s2]).sup_norm();
            if gy.abs() > drift.growth * (1.0 + norm) + tol {
                report.growth_violations += 1;
            }
            report.checked += 1;
        }
    }
    Ok(report)
}

/// Standard Brownian motion on `grid`: `B(0) = 0` with independent
/// `N(0, Δ)` increments.
pub fn brownian<R: Rng + ?Sized>(grid: &SampleGrid, rng: &mut R) -> Result<PathRecord> {
    let sd = grid.delta().sqrt();
    let mut values = Vec::with_capacity(grid.intervals() + 1);
    let mut b = 0.0;
    values.push(b);
    for _ in 0..grid.intervals() {
        b += sd * rng::standard_normal(rng);
        values.push(b);
    }
    PathRecord::new(*grid, values)
}

/// `Y(t_k) = ∫₀^{t_k} x(s) ds + b(t_k)` with the trapezoid rule on the shared
/// grid.
pub fn transmit_nonfeedback(x: &PathRecord, b: &PathRecord) -> Result<PathRecord> {
    if x.grid != b.grid {
        return Err(LabError::GridMismatch("input and noise paths use different grids".into()));
    }
    let dt = x.grid.delta();
    let mut values = Vec::with_capacity(b.values.len());
    let mut integral = 0.0;
    values.push(b.values[0]);
    for k in 1..b.values.len() {
        integral += 0.5 * dt * (x.values[k - 1] + x.values[k]);
        values.push(integral + b.values[k]);
    }
    PathRecord::new(x.grid, values)
}

/// Euler–Maruyama solution of `dY = g(s, m, Y_0^s) ds + dB` driven by the
/// given noise path. The drift is evaluated at the left endpoint of every step
/// on the path built so far.
pub fn transmit_feedback_with_noise(drift: &DriftSpec, m: f64, b: &PathRecord) -> Result<PathRecord> {
    let grid = b.grid;
    let dt = grid.delta();
    let n = grid.intervals();
    let mut values = Vec::with_capacity(n + 1);
    values.push(0.0);
    for k in 0..n {
        let g = drift.eval_checked(grid.time(k), m, PathView::new(dt, &values))?;
        let next = values[k] + g * dt + (b.values[k + 1] - b.values[k]);
        values.push(next);
    }
    PathRecord::new(grid, values)
}

/// Simulates the feedback channel for message `m`; returns `(Y, B)`.
pub fn transmit_feedback<R: Rng + ?Sized>(
    drift: &DriftSpec,
    m: f64,
    grid: &SampleGrid,
    rng: &mut R,
) -> Result<(PathRecord, PathRecord)> {
    let b = brownian(grid, rng)?;
    let y = transmit_feedback_with_noise(drift, m, &b)?;
    Ok((y, b))
}

/// Reads the path at the times of a coarse grid nested in its own grid.
pub fn integrate_and_dump(y: &PathRecord, coarse: &SampleGrid) -> Result<Vec<f64>> {
    let ratio = y.grid.refinement_of(coarse)?;
    Ok(y.values.iter().step_by(ratio).copied().collect())
}

/// `(Y(t_i) − Y(t_{i−1})) / √δ`.
pub fn normalize_increments(samples: &[f64], delta: f64) -> Vec<f64> {
    let scale = delta.sqrt().recip();
    samples.windows(2).map(|w| (w[1] - w[0]) * scale).collect()
}

/// Exact draw of the running maximum of a unit-diffusion path over `[0, T]`
/// given its grid values, sampling the maximum of the Brownian bridge on
/// every grid interval.
pub fn bridge_max<R: Rng + ?Sized>(path: &PathRecord, rng: &mut R) -> f64 {
    let dt = path.grid.delta();
    path.values
        .windows(2)
        .map(|w| bridge_interval_max(w[0], w[1], dt, rng))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Sup norm of a unit-diffusion path with bridge-sampled interval extremes.
/// The maximum and minimum on each interval are drawn from their exact
/// marginals with independent uniforms.
pub fn bridge_sup_norm<R: Rng + ?Sized>(path: &PathRecord, rng: &mut R) -> f64 {
    let dt = path.grid.delta();
    path.values
        .windows(2)
        .map(|w| {
            let hi = bridge_interval_max(w[0], w[1], dt, rng);
            let lo = -bridge_interval_max(-w[0], -w[1], dt, rng);
            hi.abs().max(lo.abs())
        })
        .fold(0.0, f64::max)
}

#[inline]
fn bridge_interval_max<R: Rng + ?Sized>(a: f64, b: f64, dt: f64, rng: &mut R) -> f64 {
    let u = rng::open_unit(rng);
    0.5 * (a + b + ((b - a) * (b - a) - 2.0 * dt * u.ln()).sqrt())
}
