//! TOML experiment configuration: dataset recipe, architecture, training
//! hyperparameters, output location. Every run echoes the effective settings
//! (defaults and overrides resolved) to `config.echo.json`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pqcnn_core::train::{Architecture, GradientMethod, ReadoutStrategy, TrainConfig};

use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub architecture: ArchitectureConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// "bas", "custom-bas" or "mnist8".
    pub kind: String,
    /// Number of generated samples (bas / custom-bas).
    #[serde(default = "default_n")]
    pub n: usize,
    /// Loader-angle noise for custom-bas, in radians.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// The two digits kept from the 8x8 digits file, mapped to labels 0/1.
    #[serde(default = "default_digit_pair")]
    pub digit_pair: (u8, u8),
    /// Source CSV: required for mnist8, optional override for the generated
    /// kinds (takes precedence over generation).
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Loader-angle sidecar to attach when loading from `path`.
    #[serde(default)]
    pub angles_path: Option<PathBuf>,
    /// Generation and split-shuffle seed.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_train_n")]
    pub train_n: usize,
    #[serde(default = "default_test_n")]
    pub test_n: usize,
}

fn default_n() -> usize {
    600
}
fn default_sigma() -> f64 {
    0.1
}
fn default_digit_pair() -> (u8, u8) {
    (0, 1)
}
fn default_train_n() -> usize {
    400
}
fn default_test_n() -> usize {
    200
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureConfig {
    pub register_sizes: Vec<usize>,
    #[serde(default = "default_filter")]
    pub filter: usize,
    #[serde(default)]
    pub alpha: usize,
    /// Dense mesh layers; omit for the full universal mesh.
    #[serde(default)]
    pub dense_layers: Option<usize>,
    #[serde(default)]
    pub dense_random_phases: bool,
    /// Encode non-outer-product images as their nearest rank-1
    /// approximation (also switched on by `--nearest-rank1`).
    #[serde(default)]
    pub rank1_approx: bool,
    /// When set, the run refuses to start unless the trainable-angle count
    /// matches.
    #[serde(default)]
    pub expected_params: Option<usize>,
}

fn default_filter() -> usize {
    2
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_wd")]
    pub weight_decay: f64,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    /// Base seed; seed i of a run uses `seed + i`.
    #[serde(default)]
    pub seed: u64,
    /// Samples per optimizer step; 0 means full-batch.
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_gradient")]
    pub gradient: GradientMethod,
    #[serde(default = "default_init_max_angle")]
    pub init_max_angle: f64,
    #[serde(default = "default_true")]
    pub shuffle_each_epoch: bool,
    /// Optional post-hoc readout-layer search on the best seed's model.
    #[serde(default)]
    pub readout_search: Option<ReadoutStrategy>,
}

fn default_epochs() -> usize {
    30
}
fn default_lr() -> f64 {
    1e-3
}
fn default_wd() -> f64 {
    1e-4
}
fn default_seeds() -> usize {
    5
}
fn default_batch() -> usize {
    1
}
fn default_gradient() -> GradientMethod {
    GradientMethod::Analytic
}
fn default_init_max_angle() -> f64 {
    std::f64::consts::FRAC_PI_2
}
fn default_true() -> bool {
    true
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            epochs: default_epochs(),
            learning_rate: default_lr(),
            weight_decay: default_wd(),
            seeds: default_seeds(),
            seed: 0,
            batch_size: default_batch(),
            gradient: default_gradient(),
            init_max_angle: default_init_max_angle(),
            shuffle_each_epoch: true,
            readout_search: None,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match self.dataset.kind.as_str() {
            "bas" | "custom-bas" | "mnist8" => {}
            other => {
                return Err(CliError::Config(format!(
                    "unknown dataset kind {other:?} (expected bas, custom-bas or mnist8)"
                )))
            }
        }
        if self.dataset.kind == "mnist8" && self.dataset.path.is_none() {
            return Err(CliError::Config(
                "mnist8 is file-based: set dataset.path".into(),
            ));
        }
        if self.architecture.register_sizes.len() != 2 {
            return Err(CliError::Config(
                "architecture.register_sizes must list exactly two registers".into(),
            ));
        }
        if self.train.epochs == 0 && self.train.seeds == 0 {
            return Err(CliError::Config("train.seeds must be at least 1".into()));
        }
        Ok(())
    }

    /// Expected image shape from the register sizes.
    pub fn image_shape(&self) -> (usize, usize) {
        (
            self.architecture.register_sizes[0],
            self.architecture.register_sizes[1],
        )
    }

    pub fn architecture(&self, nearest_rank1: bool) -> Architecture {
        Architecture {
            register_sizes: self.architecture.register_sizes.clone(),
            filter: self.architecture.filter,
            alpha: self.architecture.alpha,
            dense_layers: self.architecture.dense_layers,
            dense_random_phases: self.architecture.dense_random_phases,
            rank1_approx: self.architecture.rank1_approx || nearest_rank1,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            learning_rate: self.train.learning_rate,
            weight_decay: self.train.weight_decay,
            seeds: self.train.seeds,
            base_seed: self.train.seed,
            batch_size: if self.train.batch_size == 0 {
                None
            } else {
                Some(self.train.batch_size)
            },
            gradient: self.train.gradient,
            init_max_angle: self.train.init_max_angle,
            shuffle_each_epoch: self.train.shuffle_each_epoch,
        }
    }
}

/// The fully resolved settings of a run, written as `config.echo.json`.
#[derive(Serialize)]
pub struct ConfigEcho<'a> {
    pub command: &'a str,
    pub dataset: &'a DatasetConfig,
    pub architecture: &'a ArchitectureConfig,
    pub train: &'a TrainSection,
    pub output_dir: &'a Path,
    pub nearest_rank1: bool,
    pub params_conv: usize,
    pub params_dense: usize,
    pub params_total: usize,
}

pub fn write_echo(echo: &ConfigEcho<'_>) -> Result<(), CliError> {
    std::fs::create_dir_all(echo.output_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", echo.output_dir.display())))?;
    let path = echo.output_dir.join("config.echo.json");
    let json = serde_json::to_string_pretty(echo).expect("echo serialization");
    std::fs::write(&path, json)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}
