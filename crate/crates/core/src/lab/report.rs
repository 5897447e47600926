use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind};
use crate::error::Result;
use crate::extremes::{MomentKind, RateFit};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

/// A log-log rate fit, or the reason it could not be made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub name: String,
    pub fit: Option<RateFit>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonfeedbackRow {
    pub n: usize,
    pub delta: f64,
    pub mi_sampled_nats: f64,
    pub mi_oracle_nats: f64,
    pub gap_nats: f64,
    pub thm1b_bound_nats: f64,
    pub cor1_bound_nats: f64,
    /// Upper bound on the square root of the continuous-time value.
    pub sqrt_mi_upper_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRow {
    pub n: usize,
    pub delta: f64,
    pub mi_sampled_nats: f64,
    pub se_sampled: f64,
    pub mi_continuous_nats: f64,
    pub se_continuous: f64,
    pub gap_nats: f64,
    pub gap_se: f64,
    pub clip_count: usize,
    /// Mean of `(ρ₁ − ρ₂)²` for the true message.
    pub rho_gap_sq: f64,
    pub rho_gap_sq_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxGaussRow {
    pub n: usize,
    pub moment: MomentKind,
    pub exact: f64,
    pub mc_mean: Option<f64>,
    pub mc_se: Option<f64>,
    pub fitted_slope_so_far: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SanityRow {
    pub check: String,
    pub value: f64,
    pub std_error: f64,
    pub target: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "kebab-case")]
pub enum Rows {
    NonfeedbackGap(Vec<NonfeedbackRow>),
    FeedbackGap(Vec<FeedbackRow>),
    Maxgauss(Vec<MaxGaussRow>),
    Sanity(Vec<SanityRow>),
}

/// Everything one experiment produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    pub crate_version: String,
    pub config: ExperimentConfig,
    pub rows: Rows,
    pub checks: Vec<Check>,
    pub slopes: Vec<SlopeReport>,
    pub warnings: Vec<String>,
    pub extras: serde_json::Map<String, serde_json::Value>,
    /// Not serialized, so that reports are byte-identical across runs.
    #[serde(skip)]
    pub wall_clock_seconds: f64,
}

impl RunReport {
    pub fn new(experiment: ExperimentKind, config: &ExperimentConfig, rows: Rows) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            rows,
            checks: Vec::new(),
            slopes: Vec::new(),
            warnings: Vec::new(),
            extras: serde_json::Map::new(),
            wall_clock_seconds: 0.0,
        }
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn slope(&self, name: &str) -> Option<&RateFit> {
        self.slopes.iter().find(|s| s.name == name).and_then(|s| s.fit.as_ref())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match &self.rows {
            Rows::NonfeedbackGap(rows) => {
                out.push_str("n,delta,mi_sampled_nats,mi_oracle_nats,gap_nats,thm1b_bound_nats,cor1_bound_nats\n");
                for r in rows {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{}",
                        r.n,
                        num(r.delta),
                        num(r.mi_sampled_nats),
                        num(r.mi_oracle_nats),
                        num(r.gap_nats),
                        num(r.thm1b_bound_nats),
                        num(r.cor1_bound_nats)
                    );
                }
            }
            Rows::FeedbackGap(rows) => {
                out.push_str(
                    "n,delta,mi_sampled_nats,se_sampled,mi_continuous_nats,se_continuous,gap_nats,gap_se,clip_count\n",
                );
                for r in rows {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{},{}",
                        r.n,
                        num(r.delta),
                        num(r.mi_sampled_nats),
                        num(r.se_sampled),
                        num(r.mi_continuous_nats),
                        num(r.se_continuous),
                        num(r.gap_nats),
                        num(r.gap_se),
                        r.clip_count
                    );
                }
            }
            Rows::Maxgauss(rows) => {
                out.push_str("n,moment,exact,mc_mean,mc_se,fitted_slope_so_far\n");
                for r in rows {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        r.n,
                        r.moment.label(),
                        num(r.exact),
                        opt(r.mc_mean),
                        opt(r.mc_se),
                        opt(r.fitted_slope_so_far)
                    );
                }
            }
            Rows::Sanity(rows) => {
                out.push_str("check,value,std_error,target,passed\n");
                for r in rows {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{}",
                        r.check,
                        num(r.value),
                        num(r.std_error),
                        num(r.target),
                        r.passed
                    );
                }
            }
        }
        out
    }

    /// Plot-ready whitespace-separated `(log x, log y)` series, one per file.
    pub fn plot_series(&self) -> Vec<(String, String)> {
        let series = |header: &str, pts: Vec<(f64, f64)>| {
            let mut s = format!("# {header}\n");
            for (x, y) in pts.into_iter().filter(|&(x, y)| x > 0.0 && y > 0.0) {
                let _ = writeln!(s, "{} {}", num(x.ln()), num(y.ln()));
            }
            s
        };
        let stem = self.experiment.stem();
        match &self.rows {
            Rows::NonfeedbackGap(rows) => vec![(
                format!("{stem}_loglog.dat"),
                series("log_delta log_gap_nats", rows.iter().map(|r| (r.delta, r.gap_nats)).collect()),
            )],
            Rows::FeedbackGap(rows) => vec![(
                format!("{stem}_loglog.dat"),
                series("log_delta log_gap_nats", rows.iter().map(|r| (r.delta, r.gap_nats)).collect()),
            )],
            Rows::Maxgauss(rows) => [MomentKind::Square, MomentKind::Fourth, MomentKind::ExpSquare]
                .into_iter()
                .map(|m| {
                    let pts = rows
                        .iter()
                        .filter(|r| r.moment == m)
                        .map(|r| (r.n as f64, moment_excess(m, r.exact)))
                        .collect();
                    let header = match m {
                        MomentKind::ExpSquare => "log_n log_moment_minus_one",
                        _ => "log_n log_moment",
                    };
                    (format!("{stem}_{}_loglog.dat", m.label()), series(header, pts))
                })
                .collect(),
            Rows::Sanity(_) => Vec::new(),
        }
    }

    /// Writes CSV, JSON and plot files into `dir` and returns their paths.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let stem = self.experiment.stem();
        let mut files = vec![
            (format!("{stem}.csv"), self.to_csv()),
            (format!("{stem}_report.json"), self.to_json()?),
        ];
        files.extend(self.plot_series());
        let mut written = Vec::with_capacity(files.len());
        for (name, contents) in files {
            let path = dir.join(name);
            std::fs::write(&path, contents)?;
            written.push(path);
        }
        Ok(written)
    }

    /// One line per check, for terminal output.
    pub fn summary_lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| format!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))
            .chain(self.warnings.iter().map(|w| format!("[WARN] {w}")))
            .collect()
    }
}

/// Quantity whose decay rate is fitted: the moment itself, or `E[e^{Z²}] − 1`.
pub fn moment_excess(moment: MomentKind, value: f64) -> f64 {
    match moment {
        MomentKind::ExpSquare => value - 1.0,
        _ => value,
    }
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
