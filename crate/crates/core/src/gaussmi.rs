//! Mutual information of the non-feedback sampled channel.
//!
//! With a stationary Gaussian input the normalized sampled channel is the
//! vector Gaussian channel `Z = √snr·V + N` with `V ~ N(0, Σ_V)`, so
//! `I = ½ log det(I + snr·Σ_V)`. The same value is recovered from the
//! I-MMSE relationship `I = ½ ∫₀¹ mmse(s) ds`. Continuous-time mutual
//! information is approximated from below by dyadic refinement of the grid.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg;
use crate::quad;
use crate::simulate::SampleGrid;
use crate::spectra::{block_covariance, PsdSpec};

/// Size at and above which Toeplitz log-determinants use Levinson.
pub const LEVINSON_THRESHOLD: usize = 1024;

/// Slack allowed for a dyadic sequence of sampled values to decrease.
pub const MONOTONE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MiMethod {
    LogDet,
    IMmseQuadrature,
    MonteCarlo,
}

/// A mutual information value in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiEstimate {
    pub value: f64,
    pub method: MiMethod,
    /// Monte Carlo trial count, 0 for deterministic methods.
    pub trials: usize,
    pub std_error: f64,
    /// Discretization uncertainty of a refinement oracle; 0 otherwise.
    pub uncertainty: f64,
}

impl MiEstimate {
    pub fn exact(value: f64, method: MiMethod) -> Self {
        Self { value, method, trials: 0, std_error: 0.0, uncertainty: 0.0 }
    }

    pub fn bits(&self) -> f64 {
        self.value / std::f64::consts::LN_2
    }
}

fn check_square(sigma: &DMatrix<f64>) -> Result<()> {
    if sigma.nrows() != sigma.ncols() {
        return Err(LabError::InvalidArgument(format!(
            "covariance must be square, got {}x{}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    Ok(())
}

fn identity_plus(sigma: &DMatrix<f64>, snr: f64) -> DMatrix<f64> {
    let n = sigma.nrows();
    DMatrix::identity(n, n) + sigma * snr
}

/// `½ log det(I + snr·Σ)` by Cholesky factorization.
pub fn mi_logdet(sigma: &DMatrix<f64>, snr: f64) -> Result<MiEstimate> {
    check_square(sigma)?;
    if sigma.nrows() == 0 {
        return Ok(MiEstimate::exact(0.0, MiMethod::LogDet));
    }
    let logdet = linalg::cholesky_logdet(identity_plus(sigma, snr))?;
    Ok(MiEstimate::exact(0.5 * logdet, MiMethod::LogDet))
}

/// `½ log det(I + snr·Σ)` for the symmetric Toeplitz `Σ` with first column
/// `lags`: Levinson from [`LEVINSON_THRESHOLD`] on, Cholesky below.
pub fn mi_logdet_toeplitz(lags: &[f64], snr: f64) -> Result<MiEstimate> {
    if lags.len() >= LEVINSON_THRESHOLD {
        let mut col: Vec<f64> = lags.iter().map(|v| v * snr).collect();
        col[0] += 1.0;
        let logdet = linalg::levinson_logdet(&col)?;
        Ok(MiEstimate::exact(0.5 * logdet, MiMethod::LogDet))
    } else {
        mi_logdet(&linalg::symmetric_toeplitz(lags), snr)
    }
}

/// Total MMSE `tr(Σ − snr·Σ(I + snr·Σ)⁻¹Σ) = tr((I + snr·Σ)⁻¹Σ)` of
/// estimating `V` from `√snr·V + N`.
pub fn mmse_trace(sigma: &DMatrix<f64>, snr: f64) -> Result<f64> {
    check_square(sigma)?;
    if sigma.nrows() == 0 {
        return Ok(0.0);
    }
    let chol = identity_plus(sigma, snr).cholesky().ok_or_else(|| {
        LabError::NotPositiveSemidefinite("I + snr·Σ is not positive definite".into())
    })?;
    Ok(chol.solve(sigma).trace())
}

/// `½ ∫₀¹ mmse(s) ds` with the 64-node Gauss–Legendre rule.
pub fn mi_via_immse(sigma: &DMatrix<f64>) -> Result<MiEstimate> {
    let rule = quad::gl64();
    let mut acc = 0.0;
    for (x, w) in rule.nodes().iter().zip(rule.weights()) {
        acc += w * mmse_trace(sigma, 0.5 * (x + 1.0))?;
    }
    Ok(MiEstimate::exact(0.25 * acc, MiMethod::IMmseQuadrature))
}

/// `I(X_0^T; Y(Δ_{T,n}))` for a stationary Gaussian input.
pub fn mi_sampled(psd: &PsdSpec, horizon: f64, n: usize) -> Result<MiEstimate> {
    let grid = SampleGrid::new(horizon, n)?;
    if psd.is_zero() {
        return Ok(MiEstimate::exact(0.0, MiMethod::LogDet));
    }
    let cov = block_covariance(psd, &grid)?;
    mi_logdet_toeplitz(cov.lags(), 1.0)
}

/// Continuous-time reference value obtained by dyadic grid refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousOracle {
    /// Value at the finest grid, with the last dyadic increment attached as
    /// `uncertainty`.
    pub estimate: MiEstimate,
    /// `(n, mi_sampled)` for `n = N/4, N/2, N`.
    pub ladder: Vec<(usize, f64)>,
}

impl ContinuousOracle {
    pub fn value(&self) -> f64 {
        self.estimate.value
    }

    pub fn uncertainty(&self) -> f64 {
        self.estimate.uncertainty
    }
}

/// `mi_sampled` at `n_fine` with a dyadic convergence check over
/// `n_fine/4 → n_fine/2 → n_fine`.
pub fn mi_continuous_oracle(psd: &PsdSpec, horizon: f64, n_fine: usize, tol: f64) -> Result<ContinuousOracle> {
    if !n_fine.is_power_of_two() {
        return Err(LabError::InvalidArgument(format!("fine grid size {n_fine} is not a power of two")));
    }
    let levels: Vec<usize> = [n_fine / 4, n_fine / 2, n_fine].into_iter().filter(|&n| n >= 1).collect();
    let ladder = levels
        .iter()
        .map(|&n| mi_sampled(psd, horizon, n).map(|e| (n, e.value)))
        .collect::<Result<Vec<_>>>()?;
    for w in ladder.windows(2) {
        if w[1].1 < w[0].1 - MONOTONE_SLACK {
            return Err(LabError::NumericalFault(format!(
                "sampled mutual information decreased from {} (n={}) to {} (n={})",
                w[0].1, w[0].0, w[1].1, w[1].0
            )));
        }
    }
    let increment = match ladder.len() {
        0 | 1 => 0.0,
        k => (ladder[k - 1].1 - ladder[k - 2].1).max(0.0),
    };
    if increment > tol {
        return Err(LabError::OracleNotConverged { increment, tolerance: tol });
    }
    let value = ladder.last().map(|l| l.1).unwrap_or(0.0);
    Ok(ContinuousOracle {
        estimate: MiEstimate { value, method: MiMethod::LogDet, trials: 0, std_error: 0.0, uncertainty: increment },
        ladder,
    })
}

/// Upper bound on `√I(X_0^T; Y_0^T)` from the sampled value:
/// `(√(2Tδm₁) + √(2Tδm₁ + 4·I_sampled)) / 2`.
pub fn thm1a_bound(psd: &PsdSpec, horizon: f64, n: usize, sampled: f64) -> Result<f64> {
    let (_, m1) = psd.spectral_moments()?;
    let delta = SampleGrid::new(horizon, n)?.delta();
    let a = 2.0 * horizon * delta * m1;
    Ok((a.sqrt() + (a + 4.0 * sampled.max(0.0)).sqrt()) / 2.0)
}

/// Upper bound `T·√δ·√m₁·√m₀` on the sampling gap.
pub fn thm1b_bound(psd: &PsdSpec, horizon: f64, n: usize) -> Result<f64> {
    let (m0, m1) = psd.spectral_moments()?;
    let delta = SampleGrid::new(horizon, n)?.delta();
    Ok(horizon * delta.sqrt() * m1.sqrt() * m0.sqrt())
}

/// Band-limited form `T·P·√(Wδ)` of the gap bound, with `P = ∫f` and `W` the
/// support edge of the PSD.
pub fn cor1_bound(psd: &PsdSpec, horizon: f64, n: usize) -> Result<f64> {
    let (m0, _) = psd.spectral_moments()?;
    let delta = SampleGrid::new(horizon, n)?.delta();
    Ok(horizon * m0 * (psd.support_edge() * delta).sqrt())
}

/// `½·T·∫f`, the input-power bound on mutual information over `[0, T]`.
pub fn power_bound(psd: &PsdSpec, horizon: f64) -> Result<f64> {
    Ok(0.5 * horizon * psd.spectral_moments()?.0)
}
