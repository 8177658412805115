use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{ShuffleSpec, SplitRatio};
use crate::autodiff::LrSchedule;
use crate::chanmodel::ScenarioConfig;
use crate::error::{Error, Result};
use crate::model::{MixerHyperparams, ModelDescriptor, ModelVariant};

/// Where the channel samples of an experiment come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    /// A `CMXD` file on disk.
    File { path: PathBuf },
    /// Generate the samples in memory from a scenario.
    Generate {
        scenario: ScenarioConfig,
        samples: usize,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl std::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            other => Err(Error::Config(format!(
                "unknown precision '{other}' (expected f32 or f64)"
            ))),
        }
    }
}

/// Everything needed to reproduce one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub model: ModelDescriptor,
    pub batch_size: usize,
    /// Keep a final batch smaller than `batch_size` instead of rejecting the config.
    #[serde(default)]
    pub allow_short_batch: bool,
    pub epochs: usize,
    pub schedule: LrSchedule,
    pub seed: u64,
    #[serde(default)]
    pub precision: Precision,
    #[serde(default)]
    pub split: SplitRatio,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub shuffle: ShuffleSpec,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

/// Scenario used by the synthetic benchmark: few paths inside a narrow
/// azimuth sector, so that 5 of 32 antennas still resolve the direction.
pub fn toy_scenario(seed: u64) -> ScenarioConfig {
    use std::f64::consts::PI;
    ScenarioConfig {
        azimuth_range: [0.45 * PI, 0.55 * PI],
        ..ScenarioConfig::default_32x32(seed)
    }
}

impl ExperimentConfig {
    /// Batch 250, 2000 epochs, decay every 500 epochs, 50 000 samples.
    pub fn table1(seed: u64) -> Self {
        Self {
            dataset: DatasetSource::Generate {
                scenario: ScenarioConfig::default_32x32(seed),
                samples: 50_000,
            },
            model: ModelDescriptor {
                variant: ModelVariant::CMIXER,
                hyper: MixerHyperparams::reference(5, 5),
            },
            batch_size: 250,
            allow_short_batch: false,
            epochs: 2000,
            schedule: LrSchedule::default(),
            seed,
            precision: Precision::F32,
            split: SplitRatio::default(),
            output_dir: default_output_dir(),
            shuffle: ShuffleSpec::default(),
        }
    }

    /// 2000 train / 500 test samples, 300 epochs, batch 100, decay every 75 epochs.
    pub fn toy(seed: u64) -> Self {
        Self {
            dataset: DatasetSource::Generate {
                scenario: toy_scenario(seed),
                samples: 2500,
            },
            batch_size: 100,
            epochs: 300,
            schedule: LrSchedule::with_period(1e-3, 75),
            ..Self::table1(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.hyper.validate()?;
        self.schedule.validate()?;
        self.split.validate()?;
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config(
                "batch_size and epochs must be positive".into(),
            ));
        }
        if let DatasetSource::Generate { scenario, samples } = &self.dataset {
            scenario.validate()?;
            if *samples == 0 {
                return Err(Error::Config("dataset needs at least one sample".into()));
            }
            self.check_channel_size(scenario.n_t, scenario.n_c)?;
        }
        Ok(())
    }

    /// The model must produce channels of the dataset's size.
    pub fn check_channel_size(&self, n_t: usize, n_c: usize) -> Result<()> {
        let hp = &self.model.hyper;
        if (hp.n_t, hp.n_c) != (n_t, n_c) {
            return Err(Error::Config(format!(
                "model outputs {}x{} channels but the dataset holds {n_t}x{n_c}",
                hp.n_t, hp.n_c
            )));
        }
        Ok(())
    }

    /// Batch policy: the training set must split into whole batches unless
    /// a short final batch is allowed.
    pub fn check_batching(&self, n_train: usize) -> Result<()> {
        if !n_train.is_multiple_of(self.batch_size) && !self.allow_short_batch {
            return Err(Error::Config(format!(
                "{n_train} training samples do not split into batches of {}; set allow_short_batch",
                self.batch_size
            )));
        }
        Ok(())
    }
}
