use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{emit_table, ExperimentConfig, HarnessError};
use crate::dynamics::{conservation_report, gd_run, ConservationReport, FlowConfig, Termination, Trajectory};
use crate::network::balanced_init;
use crate::oracle::{generalized_eig_min, GeneralizedEigenResult};
use crate::scatter::{synthesize_scatter, ScatterDocument, ScatterPair};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub lambda_min: f64,
    pub v_min: Vec<f64>,
}

/// Result of one depth in an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthRun {
    pub depth: usize,
    /// File name inside the output directory.
    pub trajectory_file: String,
    pub rows: usize,
    pub termination: Termination,
    pub conservation: ConservationReport,
    pub first_unstable_epoch: Option<f64>,
    pub initial_loss: f64,
    pub final_epoch: f64,
    pub final_loss: f64,
    /// `final_loss − lambda_min`; never negative beyond rounding.
    pub final_loss_gap: f64,
    pub final_weights: Vec<f64>,
    /// `min_i w_i / max_i w_i` at the final recorded epoch.
    pub sparsity_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifact {
    pub config: ExperimentConfig,
    pub scatter: ScatterDocument,
    pub oracle: OracleSummary,
    pub runs: Vec<DepthRun>,
}

impl RunArtifact {
    pub fn run(&self, depth: usize) -> Option<&DepthRun> {
        self.runs.iter().find(|r| r.depth == depth)
    }

    pub fn trajectory_path(&self, run: &DepthRun) -> PathBuf {
        self.config.output_dir.join(&run.trajectory_file)
    }
}

/// Runs gradient descent for every configured depth over the scatter pair
/// synthesized from the config seed, writing one table per depth plus
/// `artifact.json` into `config.output_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunArtifact, HarnessError> {
    config.validate()?;
    let pair = synthesize_scatter(config.dim, config.seed, config.spread())?;
    run_experiment_with_pair(config, &pair)
}

/// [`run_experiment`] over a caller-supplied pair. The artifact still records
/// the config's seed and spread as provenance alongside the actual matrices.
pub fn run_experiment_with_pair(config: &ExperimentConfig, pair: &ScatterPair) -> Result<RunArtifact, HarnessError> {
    config.validate()?;
    if pair.dim() != config.dim {
        return Err(HarnessError::Config(format!(
            "scatter pair has dimension {}, config says {}",
            pair.dim(),
            config.dim
        )));
    }
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;

    let eig = generalized_eig_min(pair)?;
    let w0 = config.init_magnitudes.resolve(config.dim);

    // Depths are independent; each thread owns its output file.
    let results: Vec<Result<DepthRun, HarnessError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = config
            .depths
            .iter()
            .map(|&depth| {
                let w0 = &w0;
                let eig = &eig;
                scope.spawn(move || run_depth(config, pair, eig, w0, depth))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("depth worker panicked"))
            .collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let artifact = RunArtifact {
        config: config.clone(),
        scatter: ScatterDocument::new(pair, config.seed, config.spread()),
        oracle: OracleSummary {
            lambda_min: eig.lambda_min,
            v_min: eig.v_min,
        },
        runs,
    };
    let path = dir.join("artifact.json");
    let file = File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, &artifact)
        .map_err(|e| HarnessError::io(&path, e.into()))?;
    std::io::Write::write_all(&mut out, b"\n").map_err(|e| HarnessError::io(&path, e))?;
    Ok(artifact)
}

fn run_depth(
    config: &ExperimentConfig,
    pair: &ScatterPair,
    eig: &GeneralizedEigenResult,
    w0: &[f64],
    depth: usize,
) -> Result<DepthRun, HarnessError> {
    let stack = balanced_init(w0, depth)?;
    let flow = FlowConfig::gradient_descent(depth, config.eta, config.epochs)
        .with_record_every(config.record_every);
    let trajectory = gd_run(&stack, pair, &flow)?;

    let name = format!("L{depth}.{}", config.format.extension());
    write_table(&config.output_dir.join(&name), &trajectory, config)?;

    let first = &trajectory.snapshots[0];
    let last = trajectory.last();
    let w = last.w.as_slice();
    let max = w.iter().copied().fold(f64::MIN, f64::max);
    let min = w.iter().copied().fold(f64::MAX, f64::min);
    Ok(DepthRun {
        depth,
        trajectory_file: name,
        rows: trajectory.snapshots.len(),
        termination: trajectory.termination.clone(),
        conservation: conservation_report(&trajectory.snapshots, depth)?,
        first_unstable_epoch: trajectory.first_unstable,
        initial_loss: first.loss,
        final_epoch: last.t,
        final_loss: last.loss,
        final_loss_gap: last.loss - eig.lambda_min,
        final_weights: w.to_vec(),
        sparsity_ratio: min / max,
    })
}

fn write_table(path: &Path, trajectory: &Trajectory, config: &ExperimentConfig) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    emit_table(&trajectory.snapshots, config.dim, config.format, BufWriter::new(file))
        .map_err(|e| HarnessError::io(path, e))
}
