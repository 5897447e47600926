//! Power spectral densities of stationary inputs and the covariances they
//! induce on the sampled channel.
//!
//! A PSD `f` is even and nonnegative. Its autocovariance is
//! `r(v) = ∫ f(λ) cos(vλ) dλ`, and the normalized block integrals
//! `V_i = δ^{-1/2} ∫_{t_{i-1}}^{t_i} X(s) ds` have the Toeplitz covariance
//!
//! ```text
//! Σ[i, j] = ψ((i − j)δ),   ψ(h) = δ ∫ f(λ) cos(hλ) sinc²(λδ/2) dλ.
//! ```
//!
//! All spectral integrals run over the nonnegative half-line with composite
//! 32-node Gauss–Legendre panels sized to the oscillation of the integrand.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg;
use crate::quad;
use crate::rng;
use crate::simulate::{PathRecord, SampleGrid};

/// Tolerance on negative eigenvalues of a block covariance.
pub const PSD_TOLERANCE: f64 = 1e-9;

/// Radians of oscillation allowed per quadrature panel.
const RADIANS_PER_PANEL: f64 = 4.0;

/// `sin(x)/x`, by its Taylor series near zero.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// A PSD tabulated at ascending nonnegative frequencies, linear between nodes,
/// zero outside the table and mirrored to negative frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedPsd {
    freqs: Vec<f64>,
    values: Vec<f64>,
}

impl TabulatedPsd {
    /// Accepts either a half table (all frequencies ≥ 0) or a full table
    /// symmetric about zero.
    pub fn new(freqs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if freqs.len() != values.len() {
            return Err(LabError::InvalidPsd(format!(
                "{} frequencies but {} values",
                freqs.len(),
                values.len()
            )));
        }
        if freqs.len() < 2 {
            return Err(LabError::InvalidPsd("a table needs at least two nodes".into()));
        }
        if freqs.iter().chain(&values).any(|x| !x.is_finite()) {
            return Err(LabError::InvalidPsd("table entries must be finite".into()));
        }
        if values.iter().any(|&v| v < 0.0) {
            return Err(LabError::InvalidPsd("PSD values must be nonnegative".into()));
        }
        if freqs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LabError::InvalidPsd("frequencies must be strictly ascending".into()));
        }
        if freqs[0] >= 0.0 {
            return Ok(Self { freqs, values });
        }
        let full = Self { freqs: freqs.clone(), values: values.clone() };
        let scale = values.iter().fold(0.0f64, |m, v| m.max(*v)).max(f64::MIN_POSITIVE);
        for &l in &freqs {
            let diff = (full.eval_raw(l) - full.eval_raw(-l)).abs();
            if diff > 1e-9 * scale {
                return Err(LabError::InvalidPsd(format!(
                    "table is not symmetric: f({l}) differs from f({}) by {diff:e}",
                    -l
                )));
            }
        }
        let mut half_f = Vec::new();
        let mut half_v = Vec::new();
        if !freqs.contains(&0.0) && freqs[freqs.len() - 1] > 0.0 {
            half_f.push(0.0);
            half_v.push(full.eval_raw(0.0));
        }
        for (&l, &v) in freqs.iter().zip(&values) {
            if l >= 0.0 {
                half_f.push(l);
                half_v.push(v);
            }
        }
        if half_f.len() < 2 {
            return Err(LabError::InvalidPsd("table has no positive-frequency part".into()));
        }
        Ok(Self { freqs: half_f, values: half_v })
    }

    /// Parses whitespace-separated `λ f(λ)` rows; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut freqs = Vec::new();
        let mut values = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 2 {
                return Err(LabError::Parse {
                    line: idx + 1,
                    message: format!("expected two columns, found {}", cols.len()),
                });
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| LabError::Parse {
                    line: idx + 1,
                    message: format!("{s:?}: {e}"),
                })
            };
            freqs.push(parse(cols[0])?);
            values.push(parse(cols[1])?);
        }
        Self::new(freqs, values)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Piecewise-linear value on the stored table, zero outside it.
    fn eval_raw(&self, l: f64) -> f64 {
        let (first, last) = (self.freqs[0], self.freqs[self.freqs.len() - 1]);
        if l < first || l > last {
            return 0.0;
        }
        let k = self.freqs.partition_point(|&x| x <= l).clamp(1, self.freqs.len() - 1);
        let (a, b) = (self.freqs[k - 1], self.freqs[k]);
        let w = (l - a) / (b - a);
        self.values[k - 1] + w * (self.values[k] - self.values[k - 1])
    }

    fn segments(&self) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        self.freqs
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(l, v)| (l[0], l[1], v[0], v[1]))
    }
}

/// Power spectral density of a stationary input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PsdSpec {
    /// `f(λ) = P/(2W)` on `[−W, W]`, zero outside.
    BandLimitedFlat { power: f64, bandwidth: f64 },
    Tabulated(TabulatedPsd),
}

impl PsdSpec {
    pub fn band_limited_flat(power: f64, bandwidth: f64) -> Result<Self> {
        if !(power.is_finite() && power >= 0.0) {
            return Err(LabError::InvalidPsd(format!("power must be nonnegative, got {power}")));
        }
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(LabError::InvalidPsd(format!("bandwidth must be positive, got {bandwidth}")));
        }
        Ok(PsdSpec::BandLimitedFlat { power, bandwidth })
    }

    pub fn tabulated(freqs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Ok(PsdSpec::Tabulated(TabulatedPsd::new(freqs, values)?))
    }

    /// The identically zero PSD.
    pub fn zero() -> Self {
        PsdSpec::BandLimitedFlat { power: 0.0, bandwidth: 1.0 }
    }

    /// `f(λ)`.
    pub fn density(&self, l: f64) -> f64 {
        match self {
            PsdSpec::BandLimitedFlat { power, bandwidth } => {
                if l.abs() <= *bandwidth {
                    power / (2.0 * bandwidth)
                } else {
                    0.0
                }
            }
            PsdSpec::Tabulated(t) => t.eval_raw(l.abs()),
        }
    }

    /// Smallest `W` with `f(λ) = 0` for `|λ| > W`.
    pub fn support_edge(&self) -> f64 {
        match self {
            PsdSpec::BandLimitedFlat { bandwidth, .. } => *bandwidth,
            PsdSpec::Tabulated(t) => t.freqs[t.freqs.len() - 1],
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            PsdSpec::BandLimitedFlat { power, .. } => *power == 0.0,
            PsdSpec::Tabulated(t) => t.values.iter().all(|&v| v == 0.0),
        }
    }

    /// `∫₀^∞ f(λ) w(λ) dλ` where `w` oscillates at angular rate at most
    /// `oscillation`.
    fn half_line_integral<W: Fn(f64) -> f64>(&self, weight: W, oscillation: f64) -> f64 {
        let rule = quad::gl32();
        let panels = |width: f64| ((oscillation * width / RADIANS_PER_PANEL).ceil() as usize).max(1);
        match self {
            PsdSpec::BandLimitedFlat { power, bandwidth } => {
                let level = power / (2.0 * bandwidth);
                level * rule.integrate_panels(&weight, 0.0, *bandwidth, panels(*bandwidth))
            }
            PsdSpec::Tabulated(t) => t
                .segments()
                .map(|(a, b, fa, fb)| {
                    if fa == 0.0 && fb == 0.0 {
                        return 0.0;
                    }
                    let slope = (fb - fa) / (b - a);
                    rule.integrate_panels(|l| (fa + slope * (l - a)) * weight(l), a, b, panels(b - a))
                })
                .sum(),
        }
    }

    /// Autocovariance `r(v) = ∫ f(λ) cos(vλ) dλ`.
    pub fn autocovariance(&self, v: f64) -> Result<f64> {
        let r = match self {
            PsdSpec::BandLimitedFlat { power, bandwidth } => power * sinc(bandwidth * v),
            PsdSpec::Tabulated(_) => 2.0 * self.half_line_integral(|l| (v * l).cos(), v.abs()),
        };
        if r.is_finite() {
            Ok(r)
        } else {
            Err(LabError::InvalidPsd(format!("autocovariance at lag {v} is not finite")))
        }
    }

    /// `(∫ f dλ, ∫ f |λ| dλ)`.
    pub fn spectral_moments(&self) -> Result<(f64, f64)> {
        let (m0, m1) = match self {
            PsdSpec::BandLimitedFlat { power, bandwidth } => (*power, power * bandwidth / 2.0),
            PsdSpec::Tabulated(_) => (
                2.0 * self.half_line_integral(|_| 1.0, 0.0),
                2.0 * self.half_line_integral(|l| l, 0.0),
            ),
        };
        if m0.is_finite() && m1.is_finite() {
            Ok((m0, m1))
        } else {
            Err(LabError::InvalidPsd("spectral moments are not finite".into()))
        }
    }

    /// `ψ(h) = (1/δ) ∫₀^δ ∫₀^δ r(h + s − u) ds du`, the covariance of two
    /// normalized block integrals whose left ends are `h` apart.
    pub fn block_lag(&self, h: f64, delta: f64) -> f64 {
        let half_delta = 0.5 * delta;
        2.0 * delta
            * self.half_line_integral(
                |l| {
                    let s = sinc(l * half_delta);
                    (h * l).cos() * s * s
                },
                h.abs() + delta,
            )
    }
}

/// Symmetric Toeplitz covariance of the normalized block integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCovariance {
    pub grid: SampleGrid,
    lags: Vec<f64>,
}

impl BlockCovariance {
    /// `σ(k) = Σ[i, i + k]`.
    pub fn lags(&self) -> &[f64] {
        &self.lags
    }

    pub fn dim(&self) -> usize {
        self.lags.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.lags[i.abs_diff(j)]
    }

    pub fn dense(&self) -> DMatrix<f64> {
        linalg::symmetric_toeplitz(&self.lags)
    }
}

/// Covariance matrix of `V_i = δ^{-1/2} ∫_{t_{i−1}}^{t_i} X(s) ds`,
/// computed once per distinct lag.
pub fn block_covariance(psd: &PsdSpec, grid: &SampleGrid) -> Result<BlockCovariance> {
    let delta = grid.delta();
    let lags: Vec<f64> = (0..grid.intervals()).map(|k| psd.block_lag(k as f64 * delta, delta)).collect();
    if lags.iter().any(|v| !v.is_finite()) {
        return Err(LabError::InvalidPsd("block covariance is not finite".into()));
    }
    let mut shifted = lags.clone();
    shifted[0] += PSD_TOLERANCE;
    if linalg::levinson_logdet(&shifted).is_err() {
        let min = linalg::min_eigenvalue(&linalg::symmetric_toeplitz(&lags));
        if min < -PSD_TOLERANCE {
            return Err(LabError::NotPositiveSemidefinite(format!(
                "block covariance has eigenvalue {min:e}"
            )));
        }
    }
    Ok(BlockCovariance { grid: *grid, lags })
}

/// Sampler of a zero-mean stationary Gaussian path at the times of a grid,
/// factorized once and reused across draws.
#[derive(Debug, Clone)]
pub struct GpSampler {
    grid: SampleGrid,
    root: Option<DMatrix<f64>>,
}

impl GpSampler {
    pub fn new(psd: &PsdSpec, grid: &SampleGrid) -> Result<Self> {
        let r0 = psd.autocovariance(0.0)?;
        if r0 == 0.0 {
            return Ok(Self { grid: *grid, root: None });
        }
        let delta = grid.delta();
        let lags = (0..=grid.intervals())
            .map(|k| psd.autocovariance(k as f64 * delta))
            .collect::<Result<Vec<_>>>()?;
        let cov = linalg::symmetric_toeplitz(&lags);
        let root = linalg::psd_sqrt_with_jitter(&cov, r0)?;
        Ok(Self { grid: *grid, root: Some(root) })
    }

    pub fn grid(&self) -> &SampleGrid {
        &self.grid
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PathRecord {
        let len = self.grid.intervals() + 1;
        let values = match &self.root {
            None => vec![0.0; len],
            Some(root) => {
                let z = DVector::from_fn(len, |_, _| rng::standard_normal(rng));
                (root * z).iter().copied().collect()
            }
        };
        PathRecord { grid: self.grid, values }
    }
}

/// One stationary Gaussian path with autocovariance `r` on `fine_grid`.
pub fn gp_sample<R: Rng + ?Sized>(psd: &PsdSpec, fine_grid: &SampleGrid, rng: &mut R) -> Result<PathRecord> {
    Ok(GpSampler::new(psd, fine_grid)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use std::f64::consts::PI;

    fn flat(p: f64, w: f64) -> PsdSpec {
        PsdSpec::band_limited_flat(p, w).unwrap()
    }

    fn triangle() -> PsdSpec {
        PsdSpec::tabulated(vec![-1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]).unwrap()
    }

    #[test]
    fn flat_autocovariance_values() {
        let psd = flat(1.0, 4.0);
        assert_eq!(psd.autocovariance(0.0).unwrap(), 1.0);
        assert!(psd.autocovariance(PI / 4.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn triangle_autocovariance_matches_simpson() {
        // independent composite Simpson over the full table [-1, 1]
        let v = 0.5;
        let n = 20_000;
        let h = 2.0 / n as f64;
        let f = |l: f64| (1.0 - l.abs()) * (v * l).cos();
        let mut s = f(-1.0) + f(1.0);
        for k in 1..n {
            let l = -1.0 + k as f64 * h;
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(l);
        }
        let simpson = s * h / 3.0;
        let got = triangle().autocovariance(v).unwrap();
        assert!((got - simpson).abs() < 1e-8, "{got} vs {simpson}");
        // closed form 2(1 - cos v)/v²
        assert!((got - 2.0 * (1.0 - v.cos()) / (v * v)).abs() < 1e-14);
    }

    #[test]
    fn moments() {
        let (m0, m1) = flat(1.0, 4.0).spectral_moments().unwrap();
        assert_eq!((m0, m1), (1.0, 2.0));
        let (m0, m1) = flat(2.0, 1.0).spectral_moments().unwrap();
        assert_eq!((m0, m1), (2.0, 1.0));
        let zero = PsdSpec::tabulated(vec![0.0, 1.0, 2.0], vec![0.0; 3]).unwrap();
        assert_eq!(zero.spectral_moments().unwrap(), (0.0, 0.0));
        let (m0, m1) = triangle().spectral_moments().unwrap();
        assert!((m0 - 1.0).abs() < 1e-15);
        assert!((m1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn flat_moments_agree_with_quadrature_route() {
        let psd = flat(1.0, 4.0);
        let table = PsdSpec::tabulated(vec![0.0, 4.0], vec![0.125, 0.125]).unwrap();
        let (a0, a1) = psd.spectral_moments().unwrap();
        let (b0, b1) = table.spectral_moments().unwrap();
        assert!((a0 - b0).abs() < 1e-14 && (a1 - b1).abs() < 1e-14);
    }

    #[test]
    fn autocovariance_is_even() {
        for psd in [flat(1.3, 2.0), triangle()] {
            for v in [0.1, 0.7, 3.3] {
                assert_eq!(psd.autocovariance(v).unwrap(), psd.autocovariance(-v).unwrap());
            }
        }
    }

    #[test]
    fn asymmetric_or_negative_tables_are_rejected() {
        assert!(PsdSpec::tabulated(vec![-1.0, 0.0, 1.0], vec![0.5, 1.0, 0.0]).is_err());
        assert!(PsdSpec::tabulated(vec![0.0, 1.0], vec![1.0, -0.1]).is_err());
        assert!(PsdSpec::tabulated(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn full_table_without_zero_node_is_halved() {
        let psd = PsdSpec::tabulated(vec![-2.0, 2.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(psd.density(0.0), 1.0);
        assert_eq!(psd.density(-1.5), 1.0);
        assert!((psd.spectral_moments().unwrap().0 - 4.0).abs() < 1e-14);
    }

    #[test]
    fn parses_two_column_files() {
        let psd = TabulatedPsd::parse("# lambda f\n0 1\n\n1.5 0.5  # tail\n3 0\n").unwrap();
        assert_eq!(psd.freqs(), &[0.0, 1.5, 3.0]);
        assert!(matches!(TabulatedPsd::parse("0 1\n1 x\n"), Err(LabError::Parse { line: 2, .. })));
        assert!(matches!(TabulatedPsd::parse("0 1 2\n"), Err(LabError::Parse { line: 1, .. })));
    }

    #[test]
    fn near_constant_kernel_gives_constant_blocks() {
        let psd = flat(0.7, 1e-9);
        let grid = SampleGrid::new(2.0, 5).unwrap();
        let cov = block_covariance(&psd, &grid).unwrap();
        for &v in cov.lags() {
            assert!((v - 0.7 * grid.delta()).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn block_covariance_is_toeplitz() {
        let cov = block_covariance(&triangle(), &SampleGrid::new(3.0, 6).unwrap()).unwrap();
        let m = cov.dense();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(m[(i, j)], m[(i + 1, j + 1)]);
            }
        }
    }

    #[test]
    fn block_lag_small_delta_limit() {
        let psd = flat(1.0, 4.0);
        let d = 1e-4;
        assert!((psd.block_lag(0.3, d) / d - psd.autocovariance(0.3).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn zero_psd_gives_zero_paths() {
        let grid = SampleGrid::new(1.0, 8).unwrap();
        let p = gp_sample(&PsdSpec::zero(), &grid, &mut stream_rng(0, 0)).unwrap();
        assert!(p.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gp_sampling_is_deterministic() {
        let grid = SampleGrid::new(1.0, 16).unwrap();
        let psd = flat(1.0, 4.0);
        let a = gp_sample(&psd, &grid, &mut stream_rng(3, 1)).unwrap();
        let b = gp_sample(&psd, &grid, &mut stream_rng(3, 1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sinc_series_matches_direct_form() {
        for x in [1e-5, 5e-5, 9.9e-5] {
            assert!((sinc(x) - x.sin() / x).abs() < 4e-16);
        }
    }
}
