use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::exec::Execution;
use crate::simulate::{DriftSpec, MessageAlphabet, Pulse};
use crate::spectra::{PsdSpec, TabulatedPsd};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    NonfeedbackGap,
    FeedbackGap,
    Maxgauss,
    Sanity,
}

impl ExperimentKind {
    /// File stem used for every artifact of the experiment.
    pub fn stem(self) -> &'static str {
        match self {
            ExperimentKind::NonfeedbackGap => "nonfeedback_gap",
            ExperimentKind::FeedbackGap => "feedback_gap",
            ExperimentKind::Maxgauss => "maxgauss",
            ExperimentKind::Sanity => "sanity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsdChoice {
    BandLimitedFlat,
    Tabulated,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftChoice {
    /// `g = θ·m − κ·y(s)`
    LinearFeedback,
    /// `g = θ·m·level`
    MessageScaled,
    Zero,
}

/// Flat experiment configuration, read from TOML and overridable from the
/// command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<ExperimentKind>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub execution: Execution,

    /// Horizon `T` in seconds.
    pub horizon: f64,
    pub n_list: Vec<usize>,
    pub fine_n: usize,
    pub trials: usize,

    pub psd: PsdChoice,
    pub power: f64,
    pub bandwidth: f64,
    pub psd_file: Option<PathBuf>,

    pub drift: DriftChoice,
    pub theta: f64,
    pub kappa: f64,
    pub pulse_level: f64,
    pub messages: Vec<f64>,
    pub priors: Option<Vec<f64>>,

    /// Largest accepted last dyadic increment of the continuous-time oracle.
    pub oracle_tol: f64,
    /// Minimum fitted log-log slope of the gap against `δ`. Defaults to 0.5
    /// for the non-feedback run and `0.5 − rate_epsilon` for the feedback run.
    pub slope_floor: Option<f64>,
    pub rate_epsilon: f64,
    /// Largest tolerated fraction of clipped likelihood exponents.
    pub max_clip_fraction: f64,
    /// `ε` in `E[exp(ε·sup|Y|²)]`.
    pub epsilon: f64,
    pub square_slope_range: [f64; 2],
    pub fourth_slope_range: [f64; 2],
    pub exp_slope_tolerance: f64,
    /// Multiple of the standard error allowed between Monte Carlo and exact
    /// moments.
    pub mc_se_multiple: f64,
    /// Number of Brownian paths in the maximum-of-Brownian check (0 skips it).
    pub ks_paths: usize,
    pub ks_significance: f64,
    /// Random path pairs used to spot-check the drift's declared constants.
    pub condition_pairs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            seed: 20_190_101,
            out_dir: PathBuf::from("out"),
            execution: Execution::Parallel,
            horizon: 8.0,
            n_list: vec![8, 16, 32, 64, 128, 256, 512],
            fine_n: 4096,
            trials: 100_000,
            psd: PsdChoice::BandLimitedFlat,
            power: 1.0,
            bandwidth: 4.0,
            psd_file: None,
            drift: DriftChoice::LinearFeedback,
            theta: 1.0,
            kappa: 1.0,
            pulse_level: 1.0,
            messages: vec![-1.0, 1.0],
            priors: None,
            oracle_tol: 1e-3,
            slope_floor: None,
            rate_epsilon: 0.1,
            max_clip_fraction: 1e-3,
            epsilon: 0.01,
            square_slope_range: [-1.0, -0.80],
            fourth_slope_range: [-2.0, -1.60],
            exp_slope_tolerance: 0.1,
            mc_se_multiple: 4.0,
            ks_paths: 10_000,
            ks_significance: 0.01,
            condition_pairs: 64,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    /// Reads a config file; a relative `psd_file` is resolved against the
    /// config file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        if let (Some(file), Some(dir)) = (cfg.psd_file.as_ref(), path.parent()) {
            if file.is_relative() {
                cfg.psd_file = Some(dir.join(file));
            }
        }
        Ok(cfg)
    }

    pub fn kind(&self) -> Result<ExperimentKind> {
        self.experiment.ok_or_else(|| LabError::Config("no experiment selected".into()))
    }

    pub fn psd_spec(&self) -> Result<PsdSpec> {
        match self.psd {
            PsdChoice::BandLimitedFlat => PsdSpec::band_limited_flat(self.power, self.bandwidth),
            PsdChoice::Zero => Ok(PsdSpec::zero()),
            PsdChoice::Tabulated => {
                let file = self
                    .psd_file
                    .as_ref()
                    .ok_or_else(|| LabError::Config("psd = \"tabulated\" needs psd_file".into()))?;
                Ok(PsdSpec::Tabulated(TabulatedPsd::from_file(file)?))
            }
        }
    }

    pub fn alphabet(&self) -> Result<MessageAlphabet> {
        match &self.priors {
            Some(p) => MessageAlphabet::new(self.messages.clone(), p.clone()),
            None => MessageAlphabet::uniform(self.messages.clone()),
        }
    }

    pub fn drift_spec(&self) -> Result<DriftSpec> {
        let alphabet = self.alphabet()?;
        Ok(match self.drift {
            DriftChoice::LinearFeedback => DriftSpec::linear_feedback(self.theta, self.kappa, alphabet),
            DriftChoice::MessageScaled => {
                DriftSpec::message_scaled(self.theta, Pulse::Constant { level: self.pulse_level }, alphabet)
            }
            DriftChoice::Zero => DriftSpec::zero(alphabet),
        })
    }

    pub fn slope_floor_for(&self, kind: ExperimentKind) -> f64 {
        self.slope_floor.unwrap_or(match kind {
            ExperimentKind::FeedbackGap => 0.5 - self.rate_epsilon,
            _ => 0.5,
        })
    }

    /// Checks the invariants the selected experiment relies on.
    pub fn validate(&self) -> Result<()> {
        let kind = self.kind()?;
        if self.n_list.is_empty() {
            return Err(LabError::Config("n_list is empty".into()));
        }
        if self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LabError::Config("n_list must be strictly increasing".into()));
        }
        if self.n_list.contains(&0) {
            return Err(LabError::Config("n_list entries must be positive".into()));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(LabError::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        let needs_fine = matches!(kind, ExperimentKind::NonfeedbackGap | ExperimentKind::FeedbackGap);
        if needs_fine {
            if let Some(n) = self.n_list.iter().find(|&&n| !self.fine_n.is_multiple_of(n)) {
                return Err(LabError::Config(format!("n = {n} does not divide fine_n = {}", self.fine_n)));
            }
        }
        if kind == ExperimentKind::NonfeedbackGap && !self.fine_n.is_power_of_two() {
            return Err(LabError::Config(format!("fine_n = {} is not a power of two", self.fine_n)));
        }
        if matches!(kind, ExperimentKind::FeedbackGap | ExperimentKind::Sanity) && self.trials == 0 {
            return Err(LabError::Config("trials must be positive".into()));
        }
        if kind == ExperimentKind::Sanity && self.fine_n == 0 {
            return Err(LabError::Config("fine_n must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_keys_and_keeps_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            "experiment = \"feedback-gap\"\nhorizon = 2.0\nn_list = [8, 16]\nfine_n = 64\ntheta = 1.5\n",
        )
        .unwrap();
        assert_eq!(cfg.kind().unwrap(), ExperimentKind::FeedbackGap);
        assert_eq!(cfg.theta, 1.5);
        assert_eq!(cfg.kappa, 1.0);
        cfg.validate().unwrap();
        assert!((cfg.slope_floor_for(ExperimentKind::FeedbackGap) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_grids() {
        assert!(ExperimentConfig::from_toml_str("bogus = 1").is_err());
        let mut cfg = ExperimentConfig { experiment: Some(ExperimentKind::NonfeedbackGap), ..Default::default() };
        cfg.n_list = vec![16, 8];
        assert!(cfg.validate().is_err());
        cfg.n_list = vec![3];
        assert!(cfg.validate().is_err());
        cfg.n_list = vec![8];
        cfg.fine_n = 24;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn tabulated_psd_needs_a_file() {
        let cfg = ExperimentConfig { psd: PsdChoice::Tabulated, ..Default::default() };
        assert!(cfg.psd_spec().is_err());
    }
}
