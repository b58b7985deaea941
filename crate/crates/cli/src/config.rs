use std::path::{Path, PathBuf};

use anyhow::Context;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use diffvp::trainer::TrainConfig;

/// Named consumers of the master seed.
#[derive(Clone, Copy, Debug)]
pub enum Stream {
    Dataset = 1,
    EvalDataset = 2,
    Shuffle = 3,
    Disruption = 4,
    Init = 5,
}

/// Child seed for `stream`: the first word of a ChaCha8 stream keyed by the
/// master seed.
pub fn derive_seed(seed: u64, stream: Stream) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng.next_u64()
}

/// A training run: where the data comes from, how to train, where to write.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// JSONL files; generated from the seeds below when absent.
    pub train: Option<PathBuf>,
    pub eval: Option<PathBuf>,
    pub train_cases: usize,
    pub eval_cases: usize,
    pub train_seed: u64,
    pub eval_seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            train: None,
            eval: None,
            train_cases: 2000,
            eval_cases: 500,
            train_seed: 1,
            eval_seed: 2,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("runs/default"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: ExperimentConfig = toml::from_str(&text).with_context(|| format!("in {}", path.display()))?;
        config
            .train
            .validate()
            .with_context(|| format!("in {}", path.display()))?;
        Ok(config)
    }

    /// Applies the global flags. A master seed replaces every seed in the
    /// file.
    pub fn apply_flags(&mut self, seed: Option<u64>, jobs: Option<usize>, deterministic: bool) {
        if let Some(s) = seed {
            self.data.train_seed = derive_seed(s, Stream::Dataset);
            self.data.eval_seed = derive_seed(s, Stream::EvalDataset);
            self.train.seed = derive_seed(s, Stream::Shuffle);
            self.train.disruption.seed = derive_seed(s, Stream::Disruption);
        }
        if let Some(j) = jobs {
            self.train.jobs = j;
        }
        self.train.deterministic |= deterministic;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_default_config_parses() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
        let c = ExperimentConfig::load(&path).unwrap();
        assert_eq!(c.train, TrainConfig::default());
        assert_eq!(c.data.train_cases, 2000);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = toml::from_str::<ExperimentConfig>("[train]\nbatch = 3\n").unwrap_err();
        assert!(err.to_string().contains("batch"), "{err}");
    }

    #[test]
    fn derived_seeds_differ_by_stream() {
        let a = derive_seed(9, Stream::Dataset);
        assert_eq!(a, derive_seed(9, Stream::Dataset));
        assert_ne!(a, derive_seed(9, Stream::Shuffle));
        assert_ne!(a, derive_seed(10, Stream::Dataset));
    }
}
