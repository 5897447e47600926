use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use sampled_awgn::lab::{run, ExperimentConfig, ExperimentKind};
use sampled_awgn::Execution;

/// Sampling-gap experiments for the continuous-time AWGN channel.
#[derive(Parser)]
#[command(name = "awgn-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gaussian-input gap between continuous-time and sampled mutual information.
    NonfeedbackGap(Common),
    /// Monte Carlo gap for a channel with feedback.
    FeedbackGap(Common),
    /// Moments of the maximum of Gaussian variables.
    Maxgauss(Common),
    /// Normalization, moment and zero-information checks.
    Sanity(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Parallel,
    Sequential,
}

#[derive(Args)]
struct Common {
    /// TOML config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    fine_n: Option<usize>,
    #[arg(long, value_enum)]
    execution: Option<Mode>,
}

impl Command {
    fn split(&self) -> (ExperimentKind, &Common) {
        match self {
            Command::NonfeedbackGap(c) => (ExperimentKind::NonfeedbackGap, c),
            Command::FeedbackGap(c) => (ExperimentKind::FeedbackGap, c),
            Command::Maxgauss(c) => (ExperimentKind::Maxgauss, c),
            Command::Sanity(c) => (ExperimentKind::Sanity, c),
        }
    }
}

fn build_config(kind: ExperimentKind, args: &Common) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path).with_context(|| format!("reading {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(found) = cfg.experiment {
        anyhow::ensure!(found == kind, "config is for {found:?}, not {kind:?}");
    }
    cfg.experiment = Some(kind);
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = &args.out_dir {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = args.trials {
        cfg.trials = v;
    }
    if let Some(v) = args.fine_n {
        cfg.fine_n = v;
    }
    if let Some(m) = args.execution {
        cfg.execution = match m {
            Mode::Parallel => Execution::Parallel,
            Mode::Sequential => Execution::Sequential,
        };
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = cli.command.split();
    match execute(kind, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn execute(kind: ExperimentKind, args: &Common) -> anyhow::Result<bool> {
    let cfg = build_config(kind, args)?;
    let report = run(&cfg)?;
    let written = report.write_to(&cfg.out_dir)?;
    for line in report.summary_lines() {
        println!("{line}");
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    println!("wall clock {:.2} s", report.wall_clock_seconds);
    Ok(report.all_passed())
}
