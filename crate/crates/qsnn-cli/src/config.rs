//! Experiment configuration: JSON schema, defaults, validation.
//!
//! A config document is schema-validated before any computation; every
//! defaulted field is echoed back into the resolved config written next to
//! the run artifacts, so a run is reproducible from (resolved config, seed)
//! alone.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use qsnn::datasets::Orientation;
use qsnn::models::RecallMode;
use qsnn::optimizer::AcceptMode;
use qsnn::sampler::LossBackend;

/// Model kind and shape.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Shallow {
        inputs: usize,
        #[serde(default)]
        hidden: Vec<usize>,
        outputs: usize,
    },
    Hopfield {
        n: usize,
    },
    Rbm {
        visible: usize,
        hidden: usize,
    },
    Autoencoder {
        visible: usize,
        hidden: usize,
    },
    Cnn {
        height: usize,
        width: usize,
        kernel: (usize, usize),
        stride: usize,
        #[serde(default)]
        fc_hidden: Vec<usize>,
        outputs: usize,
    },
}

impl ModelConfig {
    pub fn build(&self) -> qsnn::Result<qsnn::NetworkTopology> {
        match self {
            ModelConfig::Shallow {
                inputs,
                hidden,
                outputs,
            } => qsnn::models::shallow(*inputs, hidden, *outputs),
            ModelConfig::Hopfield { n } => qsnn::models::hopfield(*n),
            ModelConfig::Rbm { visible, hidden } => qsnn::models::rbm(*visible, *hidden),
            ModelConfig::Autoencoder { visible, hidden } => {
                qsnn::models::autoencoder(*visible, *hidden)
            }
            ModelConfig::Cnn {
                height,
                width,
                kernel,
                stride,
                fc_hidden,
                outputs,
            } => qsnn::models::cnn(*height, *width, *kernel, *stride, fc_hidden, *outputs),
        }
    }

    /// Reconstruction models train against their own inputs.
    pub fn is_reconstruction(&self) -> bool {
        matches!(self, ModelConfig::Rbm { .. } | ModelConfig::Autoencoder { .. })
    }
}

/// Binary-encoding knobs for UCI sources.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodingSection {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub feature_subset: Option<Vec<usize>>,
    #[serde(default)]
    pub identity_dims: Vec<usize>,
    #[serde(default)]
    pub per_dim_k: BTreeMap<usize, usize>,
}

fn default_k() -> usize {
    3
}

impl Default for EncodingSection {
    fn default() -> Self {
        EncodingSection {
            k: default_k(),
            feature_subset: None,
            identity_dims: Vec::new(),
            per_dim_k: BTreeMap::new(),
        }
    }
}

impl EncodingSection {
    pub fn to_config(&self) -> qsnn::datasets::EncodingConfig {
        qsnn::datasets::EncodingConfig {
            k: self.k,
            feature_subset: self.feature_subset.clone(),
            identity_dims: self.identity_dims.clone(),
            per_dim_k: self.per_dim_k.clone(),
        }
    }
}

/// Data source and its preprocessing parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    Uci {
        name: qsnn::datasets::UciName,
        path: PathBuf,
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
        #[serde(default)]
        encoding: EncodingSection,
    },
    Mnist {
        images: PathBuf,
        labels: PathBuf,
        #[serde(default = "default_mnist_classes")]
        classes: Vec<u8>,
        #[serde(default = "default_mnist_train")]
        train: usize,
        #[serde(default = "default_mnist_test")]
        test: usize,
    },
    BarsAndStripes {
        side: usize,
        #[serde(default = "default_orientation")]
        orientation: Orientation,
        /// Extra copies of each positive pattern added to the training set
        /// to counter the heavy class imbalance; evaluation always runs on
        /// the plain pattern set.
        #[serde(default)]
        oversample_positives: usize,
    },
    /// All 2^(h*w) binary grids, labeled 1 iff exactly one cell is set.
    OneDot {
        height: usize,
        width: usize,
    },
    Xor,
    /// Vertical stripe patterns over an n x n grid for Hopfield memorization,
    /// with optional one-bit-corrupted probes mapped to their source pattern.
    HopfieldStripes {
        side: usize,
        #[serde(default = "default_true")]
        augment_corrupted: bool,
    },
}

fn default_test_fraction() -> f64 {
    0.2
}

fn default_mnist_classes() -> Vec<u8> {
    vec![0, 1, 2, 3, 4]
}

fn default_mnist_train() -> usize {
    4500
}

fn default_mnist_test() -> usize {
    500
}

fn default_orientation() -> Orientation {
    Orientation::Vertical
}

fn default_true() -> bool {
    true
}

/// Optimizer schedules and loop knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub budget: usize,
    pub subset: usize,
    pub mode: AcceptMode,
    pub a0: f64,
    pub c0: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub t0: f64,
    pub beta: f64,
    pub damping: f64,
    pub init_low: f64,
    pub init_high: f64,
    pub eval_cadence: usize,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let kw = qsnn::optimizer::KwSchedule::default();
        let anneal = qsnn::optimizer::AnnealSchedule::default();
        OptimizerSection {
            budget: 2000,
            subset: 8,
            mode: AcceptMode::Anneal,
            a0: kw.a0,
            c0: kw.c0,
            alpha: kw.alpha,
            gamma: kw.gamma,
            t0: anneal.t0,
            beta: anneal.beta,
            damping: anneal.damping,
            init_low: 0.05,
            init_high: 0.5,
            eval_cadence: 0,
        }
    }
}

impl OptimizerSection {
    pub fn kw(&self) -> qsnn::optimizer::KwSchedule {
        qsnn::optimizer::KwSchedule {
            a0: self.a0,
            c0: self.c0,
            alpha: self.alpha,
            gamma: self.gamma,
        }
    }

    pub fn anneal(&self) -> qsnn::optimizer::AnnealSchedule {
        qsnn::optimizer::AnnealSchedule {
            t0: self.t0,
            beta: self.beta,
            damping: self.damping,
        }
    }
}

/// Loss/eval backend selection.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", untagged)]
pub enum BackendConfig {
    Name(BackendName),
    Shots { shots: u32 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum BackendName {
    Statevector,
    ExactSampler,
}

impl BackendConfig {
    pub fn to_backend(self, seed: u64) -> LossBackend {
        match self {
            BackendConfig::Name(BackendName::Statevector) => LossBackend::Statevector,
            BackendConfig::Name(BackendName::ExactSampler) => LossBackend::Exact,
            BackendConfig::Shots { shots } => LossBackend::Shots { shots, seed },
        }
    }
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Name(BackendName::ExactSampler)
    }
}

/// Hopfield recall section.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecallSection {
    pub max_iters: usize,
    pub mode: RecallMode,
    /// Seeded sample-mode repetitions per probe.
    pub runs: usize,
    /// Probe every one-bit corruption of each stored pattern.
    pub corrupted_probes: bool,
}

impl Default for RecallSection {
    fn default() -> Self {
        RecallSection {
            max_iters: 5,
            mode: RecallMode::Sample,
            runs: 100,
            corrupted_probes: true,
        }
    }
}

/// Generative sampling section.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroverSection {
    pub iterations: usize,
    pub shots: usize,
    /// Marked output qubit; defaults to the single output.
    pub marked: Option<usize>,
}

impl Default for GroverSection {
    fn default() -> Self {
        GroverSection {
            iterations: 1,
            shots: 4096,
            marked: None,
        }
    }
}

/// One experiment: model, data, optimization, execution backend, outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Existing model to load instead of training (eval/hopfield/grover).
    #[serde(default)]
    pub model_file: Option<PathBuf>,
    #[serde(default)]
    pub recall: RecallSection,
    #[serde(default)]
    pub grover: GroverSection,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| anyhow::anyhow!("config schema error in {}: {e}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    /// Collect every invalid field into one schema error.
    pub fn validate(&self) -> anyhow::Result<()> {
        let mut bad = Vec::new();
        if self.optimizer.budget == 0 {
            bad.push("optimizer.budget must be at least 1".to_string());
        }
        if self.optimizer.a0 <= 0.0 || self.optimizer.c0 <= 0.0 {
            bad.push("optimizer.a0 and optimizer.c0 must be positive".to_string());
        }
        if self.optimizer.t0 <= 0.0 || !(0.0..1.0).contains(&self.optimizer.beta) {
            bad.push("optimizer.t0 must be positive and optimizer.beta in (0, 1)".to_string());
        }
        if self.optimizer.damping <= 0.0 {
            bad.push("optimizer.damping must be positive".to_string());
        }
        if !(0.0..=1.0).contains(&self.optimizer.init_low)
            || !(self.optimizer.init_low..=1.0).contains(&self.optimizer.init_high)
        {
            bad.push("optimizer.init_low/init_high must satisfy 0 <= low <= high <= 1".to_string());
        }
        if self.seeds.is_empty() {
            bad.push("seeds must list at least one seed".to_string());
        }
        if let DatasetConfig::Uci { test_fraction, encoding, .. } = &self.dataset {
            if !(0.0..1.0).contains(test_fraction) {
                bad.push("dataset.test_fraction must lie in [0, 1)".to_string());
            }
            if encoding.k == 0 {
                bad.push("dataset.encoding.k must be at least 1".to_string());
            }
        }
        if let BackendConfig::Shots { shots } = self.backend {
            if shots == 0 {
                bad.push("backend.shots must be at least 1".to_string());
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            bail!("invalid config: {}", bad.join("; "))
        }
    }

    /// Serialize with every default filled in.
    pub fn resolved_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
