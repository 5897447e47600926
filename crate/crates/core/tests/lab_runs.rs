use sampled_awgn::lab::{run, ExperimentConfig, ExperimentKind, RunReport, SCHEMA_VERSION};
use sampled_awgn::Execution;

fn small(kind: ExperimentKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig { experiment: Some(kind), ..Default::default() };
    match kind {
        ExperimentKind::NonfeedbackGap => {
            cfg.n_list = vec![4, 8, 16, 32];
            cfg.fine_n = 1024;
        }
        ExperimentKind::FeedbackGap => {
            cfg.horizon = 1.0;
            cfg.n_list = vec![4, 8, 16];
            cfg.fine_n = 128;
            cfg.trials = 2_000;
        }
        ExperimentKind::Maxgauss => {
            cfg.n_list = vec![16, 32, 64, 128];
            cfg.trials = 2_000;
        }
        ExperimentKind::Sanity => {
            cfg.horizon = 0.5;
            cfg.fine_n = 128;
            cfg.trials = 2_000;
            cfg.ks_paths = 1_000;
        }
    }
    cfg
}

fn emitted(report: &RunReport) -> Vec<(String, Vec<u8>)> {
    let dir = tempfile::tempdir().unwrap();
    let mut files: Vec<(String, Vec<u8>)> = report
        .write_to(dir.path())
        .unwrap()
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

const KINDS: [ExperimentKind; 4] =
    [ExperimentKind::NonfeedbackGap, ExperimentKind::FeedbackGap, ExperimentKind::Maxgauss, ExperimentKind::Sanity];

#[test]
fn same_seed_gives_identical_bytes_in_both_execution_modes() {
    for kind in KINDS {
        let cfg = small(kind);
        let first = emitted(&run(&cfg).unwrap());
        let again = emitted(&run(&cfg).unwrap());
        let seq = emitted(&run(&ExperimentConfig { execution: Execution::Sequential, ..cfg.clone() }).unwrap());
        assert_eq!(first, again, "{kind:?}");
        // the echoed config differs only in the execution field
        let strip = |files: Vec<(String, Vec<u8>)>| -> Vec<(String, Vec<u8>)> {
            files.into_iter().filter(|(n, _)| !n.ends_with(".json")).collect()
        };
        assert_eq!(strip(first), strip(seq), "{kind:?}");
    }
}

#[test]
fn csv_headers_follow_documented_schemas() {
    let expected = [
        (ExperimentKind::NonfeedbackGap, "n,delta,mi_sampled_nats,mi_oracle_nats,gap_nats,thm1b_bound_nats,cor1_bound_nats"),
        (
            ExperimentKind::FeedbackGap,
            "n,delta,mi_sampled_nats,se_sampled,mi_continuous_nats,se_continuous,gap_nats,gap_se,clip_count",
        ),
        (ExperimentKind::Maxgauss, "n,moment,exact,mc_mean,mc_se,fitted_slope_so_far"),
    ];
    for (kind, header) in expected {
        let report = run(&small(kind)).unwrap();
        let csv = report.to_csv();
        assert_eq!(csv.lines().next().unwrap(), header);
        assert_eq!(csv.lines().count(), 1 + report_row_count(&report));
    }
}

fn report_row_count(report: &RunReport) -> usize {
    use sampled_awgn::lab::Rows;
    match &report.rows {
        Rows::NonfeedbackGap(r) => r.len(),
        Rows::FeedbackGap(r) => r.len(),
        Rows::Maxgauss(r) => r.len(),
        Rows::Sanity(r) => r.len(),
    }
}

#[test]
fn json_report_round_trips_with_schema_version() {
    let report = run(&small(ExperimentKind::NonfeedbackGap)).unwrap();
    let text = report.to_json().unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["schema_version"], SCHEMA_VERSION);
    assert!(value.get("wall_clock_seconds").is_none());
    let back: RunReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back.rows, report.rows);
    assert_eq!(back.checks, report.checks);
}

#[test]
fn zero_drift_sanity_is_exact() {
    let mut cfg = small(ExperimentKind::Sanity);
    cfg.drift = sampled_awgn::lab::DriftChoice::Zero;
    let report = run(&cfg).unwrap();
    let nov = report.check("novikov-normalization").unwrap();
    assert!(nov.passed, "{}", nov.detail);
    assert!(report.check("zero-input-mi").unwrap().passed);
    assert!(report.check("message-blind-mi").unwrap().passed);
}

#[test]
fn nonfeedback_zero_psd_has_no_gap() {
    let mut cfg = small(ExperimentKind::NonfeedbackGap);
    cfg.psd = sampled_awgn::lab::PsdChoice::Zero;
    let report = run(&cfg).unwrap();
    assert!(report.all_passed(), "{:?}", report.summary_lines());
    assert!(report.slopes[0].fit.is_none());
}

#[test]
fn invalid_configs_are_rejected_before_running() {
    let mut cfg = small(ExperimentKind::FeedbackGap);
    cfg.n_list = vec![3, 8];
    assert!(run(&cfg).is_err());
    let mut cfg = small(ExperimentKind::NonfeedbackGap);
    cfg.fine_n = 96;
    assert!(run(&cfg).is_err());
    assert!(run(&ExperimentConfig::default()).is_err());
}

#[test]
fn committed_configs_parse_and_validate() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["nonfeedback_gap.toml", "feedback_gap.toml", "maxgauss.toml", "sanity.toml"] {
        let cfg = ExperimentConfig::from_file(dir.join(name)).unwrap();
        cfg.validate().unwrap();
    }
}

#[test]
fn tabulated_psd_file_is_resolved_next_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("table.txt"), "# rad/s density\n0 1.0\n2 0.5\n4 0\n").unwrap();
    let cfg_path = dir.path().join("run.toml");
    std::fs::write(
        &cfg_path,
        "experiment = \"nonfeedback-gap\"\npsd = \"tabulated\"\npsd_file = \"table.txt\"\nhorizon = 4.0\nn_list = [4, 8, 16]\nfine_n = 1024\n",
    )
    .unwrap();
    let cfg = ExperimentConfig::from_file(&cfg_path).unwrap();
    let report = run(&cfg).unwrap();
    assert!(report.all_passed(), "{:?}", report.summary_lines());
}
