use std::time::{Duration, Instant};

use dln_lda::dynamics::Termination;
use dln_lda::harness::{
    read_table_file, run_experiment, run_experiment_with_pair, verify_suite, ExperimentConfig, RunArtifact, Scope,
    TableFormat,
};
use dln_lda::scatter::{synthesize_scatter, ScatterPair};

fn config_in(dir: &tempfile::TempDir) -> ExperimentConfig {
    ExperimentConfig { output_dir: dir.path().to_path_buf(), ..ExperimentConfig::default() }
}

#[test]
fn identical_matrices_leave_single_layer_stationary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { dim: 3, depths: vec![1], epochs: 500, ..config_in(&dir) };
    let s = synthesize_scatter(3, 1, cfg.spread()).unwrap();
    let pair = ScatterPair::new(s.s_w().clone(), s.s_w().clone()).unwrap();
    let art = run_experiment_with_pair(&cfg, &pair).unwrap();
    let run = art.run(1).unwrap();
    assert_eq!(run.conservation.max_relative_drift, 0.0);
    assert_eq!(run.final_weights, vec![1.0; 3]);
}

#[test]
fn short_two_dimensional_run_descends() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { dim: 2, depths: vec![2], eta: 1e-3, epochs: 100, record_every: 10, ..config_in(&dir) };
    let art = run_experiment(&cfg).unwrap();
    let run = art.run(2).unwrap();
    assert_eq!(run.rows, 11);
    assert!(run.final_loss <= run.initial_loss);
    assert!(run.final_loss >= art.oracle.lambda_min);
    assert!(run.final_loss_gap >= 0.0);
}

#[test]
fn reference_config_writes_readable_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_in(&dir);
    let art = run_experiment(&cfg).unwrap();
    assert_eq!(art.runs.len(), 5);
    for run in &art.runs {
        assert_eq!(run.rows, 1001);
        assert_eq!(run.termination, Termination::Completed);
        let rows = read_table_file(&art.trajectory_path(run), TableFormat::Csv).unwrap();
        assert_eq!(rows.len(), cfg.expected_rows());
        assert_eq!(rows.last().unwrap().w.as_slice(), run.final_weights.as_slice());
        assert_eq!(rows.last().unwrap().loss, run.final_loss);
    }
    let text = std::fs::read_to_string(dir.path().join("artifact.json")).unwrap();
    let back: RunArtifact = serde_json::from_str(&text).unwrap();
    assert_eq!(back.oracle.lambda_min, art.oracle.lambda_min);
    assert_eq!(back.runs.len(), art.runs.len());
    assert_eq!(back.scatter, art.scatter);
}

#[test]
fn json_tables_match_csv_tables() {
    let csv_dir = tempfile::tempdir().unwrap();
    let json_dir = tempfile::tempdir().unwrap();
    let base = ExperimentConfig { dim: 3, depths: vec![1, 5], epochs: 2000, ..ExperimentConfig::default() };
    let a = run_experiment(&ExperimentConfig { ..base.clone() }.with_dir(&csv_dir)).unwrap();
    let b = run_experiment(&ExperimentConfig { format: TableFormat::Json, ..base }.with_dir(&json_dir)).unwrap();
    for (x, y) in a.runs.iter().zip(&b.runs) {
        assert!(y.trajectory_file.ends_with(".json"));
        let rx = read_table_file(&a.trajectory_path(x), TableFormat::Csv).unwrap();
        let ry = read_table_file(&b.trajectory_path(y), TableFormat::Json).unwrap();
        assert_eq!(rx, ry);
    }
}

trait WithDir {
    fn with_dir(self, dir: &tempfile::TempDir) -> Self;
}

impl WithDir for ExperimentConfig {
    fn with_dir(self, dir: &tempfile::TempDir) -> Self {
        ExperimentConfig { output_dir: dir.path().to_path_buf(), ..self }
    }
}

#[test]
fn verification_suites_pass() {
    let start = Instant::now();
    let all = verify_suite(Scope::All, 1, 3);
    assert!(all.passed(), "{all}");
    assert!(start.elapsed() < Duration::from_secs(60));
    let objective = verify_suite(Scope::Objective, 1000, 4);
    assert!(objective.passed(), "{objective}");
    assert!(objective.checks.iter().all(|c| c.samples >= 500));
}
