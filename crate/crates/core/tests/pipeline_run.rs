//! Full runs on synthetic panels.

use std::path::Path;

use sharpecast::data::{write_returns, write_risk_free};
use sharpecast::metrics::read_cells;
use sharpecast::pipeline::{run_pipeline, Algorithm, ErrorKind, RunConfig, RunManifest, StageStatus};
use sharpecast::synth::{generate, Regime, SynthSpec};

fn write_inputs(dir: &Path, n_funds: usize, seed: u64) -> (std::path::PathBuf, std::path::PathBuf) {
    let spec = SynthSpec { n_funds, n_months: 240, seed, regime: Regime::Ar1, cross_corr: 0.4 };
    let (r, rf) = generate(&spec).unwrap();
    let (rp, fp) = (dir.join("returns.csv"), dir.join("risk_free.csv"));
    write_returns(std::fs::File::create(&rp).unwrap(), &r).unwrap();
    write_risk_free(std::fs::File::create(&fp).unwrap(), &rf).unwrap();
    (rp, fp)
}

fn stats_config(dir: &Path) -> RunConfig {
    let (rp, fp) = write_inputs(dir, 20, 1);
    let mut c = RunConfig::new(9, dir.join("out"));
    c.returns = Some(rp);
    c.risk_free = Some(fp);
    c.horizons = vec![6];
    c.algorithms = vec![Algorithm::Arima, Algorithm::Ets, Algorithm::Theta, Algorithm::Naive];
    c
}

#[test]
fn stats_only_run_counts_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = stats_config(dir.path());
    let summary = run_pipeline(&config).unwrap();
    let out = dir.path().join("out");
    let cells = read_cells(std::fs::File::open(out.join("metrics.csv")).unwrap()).unwrap();
    assert_eq!(cells, summary.cells);
    for alg in ["arima", "ets", "theta", "naive", "ens_stats_global", "ens_all_local"] {
        assert_eq!(cells.iter().filter(|c| c.algorithm == alg).count(), 20 * 6, "{alg}");
    }
    for f in ["sharpe.csv", "cv_h6.csv", "preprocess_h6.json", "stat_models_h6.csv", "weights_h6.csv", "forecasts.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    for f in ["table2.md", "table2.csv", "table3.csv", "table4.csv", "horizon_6.md", "mase_h6.svg"] {
        assert!(out.join("report").join(f).exists(), "{f}");
    }
    let manifest: RunManifest = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest.stages.iter().all(|s| s.status == StageStatus::Complete));
    assert_eq!(manifest.inputs.len(), 2);
    for h in manifest.output_hashes() {
        let bytes = std::fs::read(out.join(&h.path)).unwrap();
        assert_eq!(sharpecast::pipeline::sha256_hex(&bytes), h.sha256, "{}", h.path);
    }
    assert_eq!(std::fs::read_to_string(out.join("cv_h6.csv")).unwrap().lines().nth(1).unwrap(), "1,218,219,224");
}

#[test]
fn small_neural_run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (rp, fp) = write_inputs(dir.path(), 4, 2);
    let mut c = RunConfig::new(5, dir.path().join("a"));
    c.returns = Some(rp);
    c.risk_free = Some(fp);
    c.horizons = vec![6];
    c.algorithms = vec![Algorithm::Lstm, Algorithm::Gru, Algorithm::Naive];
    c.hpo_iterations = 2;
    run_pipeline(&c).unwrap();
    let first = std::fs::read(dir.path().join("a/metrics.csv")).unwrap();
    c.out_dir = dir.path().join("b");
    run_pipeline(&c).unwrap();
    assert_eq!(first, std::fs::read(dir.path().join("b/metrics.csv")).unwrap());
    let trials = std::fs::read_to_string(dir.path().join("b/hpo/lstm_h6_trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 3);
    assert!(dir.path().join("b/hpo/gru_h6_best.json").exists());
}

#[test]
fn failing_stage_marked_incomplete() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = stats_config(dir.path());
    config.min_train = 230;
    let err = run_pipeline(&config).unwrap_err();
    assert_eq!((err.kind, err.stage.as_str()), (ErrorKind::Data, "cv"));
    let manifest: RunManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    let last = manifest.stages.last().unwrap();
    assert_eq!((last.name.as_str(), last.status), ("cv/h6", StageStatus::Incomplete));
}

#[test]
fn empty_horizons_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = stats_config(dir.path());
    config.horizons.clear();
    assert_eq!(run_pipeline(&config).unwrap_err().kind, ErrorKind::Config);
    assert!(!dir.path().join("out").exists());
}
