//! TOML configuration covering every stage. Every section and key is
//! optional; missing values take their defaults.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::GeneratorConfig;
use crate::explain::{derive_seed, ExplainConfig};
use crate::harness::NullPolicy;
use crate::pipeline::Variant;
use crate::preprocess::ClassifierConfig;
use crate::scoring::{GbtConfig, RatingConfig};
use crate::semantic::SemanticConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// train / validation / test fractions
    pub split: [f64; 3],
    /// Extra abbreviation file, one entry per line.
    pub abbreviations: Option<PathBuf>,
    /// Scoring lexicon; defaults to the generator's scoring lexicon.
    pub lexicon: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            split: [0.7, 0.1, 0.2],
            abbreviations: None,
            lexicon: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub null_policy: NullPolicy,
    /// Route sentences by their gold aspect tags instead of the classifiers.
    pub oracle_aspects: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaithfulnessConfig {
    /// Defaults to `0..=k_max` over the test set.
    pub ks: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub variants: Vec<Variant>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            variants: Variant::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub generator: GeneratorConfig,
    pub data: DataConfig,
    pub classifier: ClassifierConfig,
    pub gbt: GbtConfig,
    pub rating: RatingConfig,
    pub semantic: SemanticConfig,
    pub explain: ExplainConfig,
    pub eval: EvalConfig,
    pub faithfulness: FaithfulnessConfig,
    pub ablation: AblationConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: DEFAULT_SEED,
            generator: GeneratorConfig::default(),
            data: DataConfig::default(),
            classifier: ClassifierConfig::default(),
            gbt: GbtConfig::default(),
            rating: RatingConfig {
                epochs: 40,
                ..RatingConfig::default()
            },
            semantic: SemanticConfig {
                epochs: 60,
                learning_rate: 0.1,
                ..SemanticConfig::default()
            },
            explain: ExplainConfig::default(),
            eval: EvalConfig::default(),
            faithfulness: FaithfulnessConfig::default(),
            ablation: AblationConfig::default(),
        }
        .with_seed(DEFAULT_SEED)
    }
}

pub const DEFAULT_SEED: u64 = 42;

/// Component slots for seed derivation.
const SPLIT: u64 = 1;
const CLASSIFIER: u64 = 2;
const GBT: u64 = 3;
const RATING: u64 = 4;
const SEMANTIC: u64 = 5;
const EXPLAIN: u64 = 6;

impl PipelineConfig {
    /// Component `seed` keys are always rederived from the master `seed`.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig = toml::from_str(text)?;
        cfg.validate()?;
        let seed = cfg.seed;
        Ok(cfg.with_seed(seed))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.generator
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.semantic
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let split = self.data.split;
        if split.iter().any(|v| !(0.0..=1.0).contains(v)) || (split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(ConfigError::Invalid("data.split must be three fractions summing to 1".into()));
        }
        if split[0] == 0.0 || split[2] == 0.0 {
            return Err(ConfigError::Invalid("data.split needs non-empty train and test parts".into()));
        }
        if self.rating.d == 0 || self.rating.heads == 0 || self.rating.d % self.rating.heads != 0 {
            return Err(ConfigError::Invalid("rating.d must be a positive multiple of rating.heads".into()));
        }
        if self.explain.n_perm == 0 {
            return Err(ConfigError::Invalid("explain.n_perm must be at least 1".into()));
        }
        if self.ablation.variants.is_empty() {
            return Err(ConfigError::Invalid("ablation.variants is empty".into()));
        }
        Ok(())
    }

    /// Replaces the master seed and rederives every component seed from it.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.classifier.seed = derive_seed(seed, CLASSIFIER);
        self.gbt.seed = derive_seed(seed, GBT);
        self.rating.seed = derive_seed(seed, RATING);
        self.semantic.seed = derive_seed(seed, SEMANTIC);
        self.explain.seed = derive_seed(seed, EXPLAIN);
        self
    }

    pub fn split_seed(&self) -> u64 {
        derive_seed(self.seed, SPLIT)
    }

    pub fn split_ratios(&self) -> (f64, f64, f64) {
        let [a, b, c] = self.data.split;
        (a, b, c)
    }
}
