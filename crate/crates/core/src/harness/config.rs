use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::scatter::Spread;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Ones,
}

/// Initial effective weights: a named preset or explicit per-coordinate values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitMagnitudes {
    Preset(Preset),
    Values(Vec<f64>),
}

impl InitMagnitudes {
    pub fn resolve(&self, dim: usize) -> Vec<f64> {
        match self {
            InitMagnitudes::Preset(Preset::Ones) => vec![1.0; dim],
            InitMagnitudes::Values(v) => v.clone(),
        }
    }
}

impl std::str::FromStr for InitMagnitudes {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().eq_ignore_ascii_case("ones") {
            return Ok(Self::Preset(Preset::Ones));
        }
        s.split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(Self::Values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Json,
}

impl TableFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TableFormat::Csv => "csv",
            TableFormat::Json => "json",
        }
    }
}

/// Flat experiment description; defaults reproduce the reference run
/// (d = 5, L ∈ {1, 2, 5, 10, 20}, η = 0.005, 100000 epochs, seed 8086).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub depths: Vec<usize>,
    pub eta: f64,
    pub epochs: usize,
    pub seed: u64,
    pub spread: [f64; 2],
    pub init_magnitudes: InitMagnitudes,
    pub record_every: usize,
    pub output_dir: PathBuf,
    pub format: TableFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dim: 5,
            depths: vec![1, 2, 5, 10, 20],
            eta: 0.005,
            epochs: 100_000,
            seed: 8086,
            spread: [0.4, 0.6],
            init_magnitudes: InitMagnitudes::Preset(Preset::Ones),
            record_every: 100,
            output_dir: PathBuf::from("out"),
            format: TableFormat::Csv,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }

    pub fn spread(&self) -> Spread {
        Spread::new(self.spread[0], self.spread[1])
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.dim == 0 {
            return bad("dim must be positive".into());
        }
        if self.depths.is_empty() {
            return bad("depths must not be empty".into());
        }
        if self.depths.contains(&0) {
            return bad("every depth must be at least 1".into());
        }
        let mut seen = self.depths.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.depths.len() {
            return bad("depths must be distinct".into());
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if self.record_every == 0 {
            return bad("record_every must be positive".into());
        }
        let [lo, hi] = self.spread;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return bad(format!("spread must satisfy 0 < lo < hi, got [{lo}, {hi}]"));
        }
        if let InitMagnitudes::Values(v) = &self.init_magnitudes {
            if v.len() != self.dim {
                return bad(format!(
                    "init_magnitudes has {} entries, dim is {}",
                    v.len(),
                    self.dim
                ));
            }
            if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return bad("init_magnitudes must be positive".into());
            }
        }
        Ok(())
    }

    /// Number of rows a trajectory table holds when the run completes.
    pub fn expected_rows(&self) -> usize {
        self.epochs / self.record_every + 1 + usize::from(!self.epochs.is_multiple_of(self.record_every))
    }
}
