//! Outcome-supervised training, evaluation against withheld intermediate
//! truth, and the program-disruption harness.
//!
//! `train` sees only final labels. Everything that reads
//! [`crate::world::intermediate_truth`] lives in `eval`.

mod disrupt;
mod eval;
mod loss;
mod train;

pub use disrupt::disrupt_programs;
pub use eval::{evaluate, run_experiment, EvalReport};
pub use loss::{example_nll, nll_loss, NLL_CLAMP};
pub use train::{train, train_with, EpochStats, TrainOutcome};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::diff::{DiffError, OptimizerConfig};
use crate::engine::{EngineError, InferenceMode};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("label `{label}` cannot occur in a prediction over {support}")]
    LabelNotInSupport { label: String, support: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("the `{0}` modules read ground truth and cannot be trained")]
    TruthModules(String),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("metrics output: {0}")]
    Output(String),
}

/// One curriculum stage: cases with at most `max_visual_steps` visual
/// steps, optionally capped at the first `limit` of them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub max_visual_steps: usize,
    #[serde(default)]
    pub limit: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisruptionConfig {
    pub fraction: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub mode: InferenceMode,
    pub optimizer: OptimizerConfig,
    pub batch_size: usize,
    pub epochs_per_stage: usize,
    pub stages: Vec<StageSpec>,
    /// When false, each stage trains on a random sample of all eligible
    /// cases of the same size as the curriculum stage.
    pub curriculum: bool,
    /// Seeds shuffling and parameter initialization.
    pub seed: u64,
    /// Standard deviation of the initial toy weights.
    pub init_sigma: f64,
    pub disruption: DisruptionConfig,
    /// Reports zero wall time so metrics files are byte-reproducible.
    /// Gradient reduction is ordered by example index regardless.
    pub deterministic: bool,
    /// Worker threads for per-example forward/backward passes.
    pub jobs: usize,
    /// Evaluate every this many epochs (and after the last one).
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: InferenceMode::Exact,
            optimizer: OptimizerConfig::default(),
            batch_size: 32,
            epochs_per_stage: 5,
            stages: (1..=4)
                .map(|k| StageSpec {
                    max_visual_steps: k,
                    limit: None,
                })
                .collect(),
            curriculum: true,
            seed: 7,
            init_sigma: 0.01,
            disruption: DisruptionConfig::default(),
            deterministic: true,
            jobs: 1,
            eval_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !matches!(self.mode, InferenceMode::Exact | InferenceMode::Factorized) {
            return bad("mode must be `exact` or `factorized`");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.jobs == 0 {
            return bad("jobs must be positive");
        }
        if self.eval_every == 0 {
            return bad("eval_every must be positive");
        }
        if self.stages.is_empty() {
            return bad("at least one stage is required");
        }
        if self
            .stages
            .windows(2)
            .any(|w| w[0].max_visual_steps > w[1].max_visual_steps)
        {
            return bad("stage thresholds must be non-decreasing");
        }
        if !(0.0..=1.0).contains(&self.disruption.fraction) {
            return bad("disruption.fraction must lie in [0, 1]");
        }
        if !(self.optimizer.lr() > 0.0 && self.optimizer.lr().is_finite()) {
            return bad("optimizer lr must be positive");
        }
        if !(self.init_sigma >= 0.0 && self.init_sigma.is_finite()) {
            return bad("init_sigma must be finite and non-negative");
        }
        Ok(())
    }

    pub fn total_epochs(&self) -> usize {
        self.epochs_per_stage * self.stages.len()
    }
}

/// Why an example produced no gradient.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Failure {
    /// Parse, EVAL or type errors: the program is at fault.
    Program,
    /// A visual module rejected its input.
    Module,
    Other,
}

impl Failure {
    pub fn of(e: &EngineError) -> Self {
        match e {
            EngineError::Eval { .. } | EngineError::ValueType { .. } => Failure::Program,
            EngineError::Module { .. } => Failure::Module,
            _ => Failure::Other,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub program: usize,
    pub module: usize,
    pub other: usize,
}

impl ErrorCounts {
    pub fn add(&mut self, f: Failure) {
        match f {
            Failure::Program => self.program += 1,
            Failure::Module => self.module += 1,
            Failure::Other => self.other += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.program + self.module + self.other
    }
}

/// One line of the metrics file. Epoch 0 is the evaluation before training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub epoch: usize,
    /// 1-based curriculum stage; 0 for the initial row and for runs without
    /// a curriculum.
    pub stage: usize,
    /// Mean training NLL over the epoch (evaluation-set NLL on row 0).
    pub loss: f64,
    pub acc_final: f64,
    pub acc_loc: f64,
    pub acc_vqa: f64,
    pub err_program: usize,
    pub err_module: usize,
    pub err_other: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rows: Vec<MetricsRow>,
    /// Training examples skipped because inference failed.
    pub skipped: ErrorCounts,
}

impl Metrics {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), TrainError> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r).map_err(|e| TrainError::Output(e.to_string()))?;
        }
        w.flush().map_err(|e| TrainError::Output(e.to_string()))
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }

    pub fn last(&self) -> Option<&MetricsRow> {
        self.rows.last()
    }

    pub fn first(&self) -> Option<&MetricsRow> {
        self.rows.first()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!(c.total_epochs(), 20);
        assert_eq!(c.optimizer.lr(), 0.05);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = TrainConfig::default();
        c.stages.swap(0, 3);
        assert!(c.validate().is_err());
        let c = TrainConfig {
            mode: InferenceMode::Argmax,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
        let c = TrainConfig {
            disruption: DisruptionConfig { fraction: 1.5, seed: 0 },
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn csv_header_matches_columns() {
        let m = Metrics {
            rows: vec![MetricsRow {
                epoch: 0,
                stage: 0,
                loss: 0.5,
                acc_final: 1.0,
                acc_loc: 0.25,
                acc_vqa: 0.75,
                err_program: 0,
                err_module: 1,
                err_other: 2,
                seconds: 0.0,
            }],
            skipped: ErrorCounts::default(),
        };
        let csv = m.to_csv();
        assert_eq!(
            csv.lines().next().unwrap(),
            "epoch,stage,loss,acc_final,acc_loc,acc_vqa,err_program,err_module,err_other,seconds"
        );
        assert_eq!(csv.lines().nth(1).unwrap(), "0,0,0.5,1.0,0.25,0.75,0,1,2,0.0");
    }
}
