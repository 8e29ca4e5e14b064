use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsio::{read_string, write_atomic};
use crate::network::{LrSchedule, MlpSpec, SgdParams};
use crate::pruning::{PruneCriterion, RewindPolicy};

/// Environment variable overriding the default output root.
pub const OUTPUT_ROOT_ENV: &str = "LRRLAB_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    /// Gaussian mixture generated from the run seed.
    #[default]
    Synthetic,
    /// Image files in IDX format.
    Idx,
    /// A task file written by `gen-data`.
    File,
}

/// Where the training and test data come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskConfig {
    pub kind: TaskKind,
    pub classes: usize,
    pub dim: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Distance between any two class means. The default 0.6 puts the
    /// nearest-mean error of the default task near 10%.
    pub separation: f64,
    /// Fixed data seed; when absent every run seed draws its own data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_images: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_labels: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_images: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_labels: Option<PathBuf>,
    /// Task file for `kind = "file"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            kind: TaskKind::Synthetic,
            classes: 10,
            dim: 64,
            n_train: 2000,
            n_test: 2000,
            separation: 0.6,
            data_seed: None,
            train_images: None,
            train_labels: None,
            test_images: None,
            test_labels: None,
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub widths: Vec<usize>,
    /// Batch norm after every hidden affine layer.
    pub batchnorm: bool,
    pub bias: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            widths: vec![64, 256, 256, 10],
            batchnorm: true,
            bias: true,
        }
    }
}

impl ModelConfig {
    pub fn spec(&self) -> MlpSpec {
        MlpSpec::new(self.widths.clone(), self.batchnorm, self.bias)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub momentum: f64,
    /// Applied to kept weights only.
    pub weight_decay: f64,
    pub batch_size: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let p = SgdParams::default();
        Self {
            momentum: p.momentum,
            weight_decay: p.weight_decay,
            batch_size: p.batch_size,
        }
    }
}

impl OptimizerConfig {
    pub fn sgd(&self, lr: f64) -> SgdParams {
        SgdParams {
            lr,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PruningConfig {
    pub criterion: PruneCriterion,
    /// Fraction of the remaining weights kept at each level.
    pub keep_fraction: f64,
    /// When set, overrides `keep_fraction` with
    /// `(1 - target_sparsity)^(1 / levels)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_sparsity: Option<f64>,
    /// Pruning levels after the dense level 0.
    pub levels: usize,
    /// Epoch of the dense run whose parameters serve as the rewind point;
    /// 0 rewinds to initialization.
    pub rewind_epoch: usize,
    /// Training examples used to score SNIP.
    pub probe_size: usize,
}

impl Default for PruningConfig {
    fn default() -> Self {
        Self {
            criterion: PruneCriterion::MagnitudeGlobal,
            keep_fraction: 0.8,
            target_sparsity: None,
            levels: 10,
            rewind_epoch: 5,
            probe_size: 256,
        }
    }
}

impl PruningConfig {
    pub fn effective_keep_fraction(&self) -> f64 {
        match self.target_sparsity {
            Some(s) => (1.0 - s).powf(1.0 / self.levels as f64),
            None => self.keep_fraction,
        }
    }
}

/// Flip the signs of a fraction of kept weights after pruning to `level`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbConfig {
    pub level: usize,
    pub fraction: f64,
}

/// Masks and rewind point taken from the matching seed of an earlier run
/// matrix, e.g. to train LRR under the masks IMP found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransplantConfig {
    /// Output root of the source matrix.
    pub root: PathBuf,
    pub scheme: RewindPolicy,
    #[serde(default = "yes")]
    pub masks: bool,
    #[serde(default)]
    pub rewind_point: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Seeds `base_seed .. base_seed + seeds`.
    pub seeds: usize,
    pub base_seed: u64,
    pub schemes: Vec<RewindPolicy>,
    /// Concurrent runs; 0 uses every available core.
    pub workers: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_root: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seeds: 3,
            base_seed: 0,
            schemes: vec![RewindPolicy::None, RewindPolicy::Weights],
            workers: 0,
            output_root: None,
        }
    }
}

/// Full description of a pruning experiment. Every field has a default, so
/// an empty file is a valid configuration.
///
/// The defaults are desk-scale engineering choices for the synthetic task,
/// not values transferred from large image benchmarks.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub task: TaskConfig,
    pub model: ModelConfig,
    pub schedule: LrSchedule,
    pub optimizer: OptimizerConfig,
    pub pruning: PruningConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturb: Option<PerturbConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transplant: Option<TransplantConfig>,
    pub run: RunConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_toml().as_bytes())
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.model.spec();
        spec.validate()?;
        self.schedule.validate()?;
        self.optimizer.sgd(self.schedule.base_lr).validate()?;
        let t = &self.task;
        match t.kind {
            TaskKind::Synthetic => {
                if t.classes < 2 {
                    return Err(Error::config("a task needs at least two classes"));
                }
                if t.classes > t.dim {
                    return Err(Error::config("synthetic tasks need classes <= dim"));
                }
                if t.n_train == 0 || t.n_test == 0 {
                    return Err(Error::config("train and test sets must be non-empty"));
                }
                if !(t.separation >= 0.0 && t.separation.is_finite()) {
                    return Err(Error::config("separation must be finite and non-negative"));
                }
                if spec.input_width() != t.dim || spec.output_width() != t.classes {
                    return Err(Error::config(format!(
                        "model widths {:?} do not fit a task with dim {} and {} classes",
                        spec.widths, t.dim, t.classes
                    )));
                }
            }
            TaskKind::Idx => {
                if t.train_images.is_none()
                    || t.train_labels.is_none()
                    || t.test_images.is_none()
                    || t.test_labels.is_none()
                {
                    return Err(Error::config("idx tasks need all four file paths"));
                }
            }
            TaskKind::File => {
                if t.path.is_none() {
                    return Err(Error::config("file tasks need a path"));
                }
            }
        }
        let p = &self.pruning;
        if let Some(s) = p.target_sparsity {
            if !(s > 0.0 && s < 1.0) || p.levels == 0 {
                return Err(Error::config(
                    "target sparsity needs 0 < s < 1 and levels > 0",
                ));
            }
        }
        let kf = p.effective_keep_fraction();
        if !(kf > 0.0 && kf < 1.0) {
            return Err(Error::config(format!(
                "keep fraction {kf} must lie in (0, 1)"
            )));
        }
        if p.rewind_epoch > self.schedule.total_epochs {
            return Err(Error::config(
                "rewind epoch lies beyond the dense training run",
            ));
        }
        if p.criterion == PruneCriterion::Snip && p.probe_size == 0 {
            return Err(Error::config("snip needs a positive probe size"));
        }
        if let Some(pt) = &self.perturb {
            if pt.level == 0 || pt.level > p.levels {
                return Err(Error::config("perturbation level must be a pruning level"));
            }
            if !(0.0..=1.0).contains(&pt.fraction) {
                return Err(Error::config("perturbation fraction must lie in [0, 1]"));
            }
        }
        if self.run.schemes.is_empty() {
            return Err(Error::config("at least one scheme is required"));
        }
        Ok(())
    }

    /// Output root: the environment variable, else the configured value,
    /// else `runs`.
    pub fn output_root(&self) -> PathBuf {
        std::env::var_os(OUTPUT_ROOT_ENV)
            .map(PathBuf::from)
            .or_else(|| self.run.output_root.clone())
            .unwrap_or_else(|| PathBuf::from("runs"))
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.run.seeds as u64)
            .map(|i| self.run.base_seed + i)
            .collect()
    }
}
