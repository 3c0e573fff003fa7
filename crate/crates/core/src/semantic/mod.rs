//! Semantic branch: both aspect sentence sets packed as
//! `[CLS] S1 [SEP] S2 [SEP] [PAD]...`, encoded, and mapped to three logits.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ComparativeLabel;
use crate::nn::{
    train_sgd, EncoderInput, EncoderParams, EncoderShape, LabeledSequence, LinearHead, SequenceClassifier,
    SgdConfig,
};

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const MASK: &str = "[MASK]";
pub const SPECIALS: [&str; 5] = [PAD, UNK, CLS, SEP, MASK];
pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const CLS_ID: usize = 2;
pub const SEP_ID: usize = 3;
pub const MASK_ID: usize = 4;

pub const CHECKPOINT_VERSION: u32 = 1;

pub type SemanticHead = LinearHead;

#[derive(Debug, Error)]
pub enum SemanticError {
    #[error("both aspect sentence sets must be non-empty")]
    EmptySide,
    #[error("embedding has dimension {got}, head expects {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("training labels must cover at least two of worse/similar/better and contain no null")]
    DegenerateLabels,
    #[error("invalid semantic config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint version {0} is not supported")]
    UnsupportedVersion(u32),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Token vocabulary: the five specials first, then corpus tokens in sorted order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a String>) -> Self {
        let specials: BTreeSet<&str> = SPECIALS.into_iter().collect();
        let words: BTreeSet<&String> = tokens.into_iter().filter(|t| !specials.contains(t.as_str())).collect();
        let all: Vec<String> = SPECIALS
            .iter()
            .map(|s| s.to_string())
            .chain(words.into_iter().cloned())
            .collect();
        Vocab::from(all)
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Fixed-length model input. Padding only ever forms a suffix.
#[derive(Debug, Clone, PartialEq)]
pub struct PairInput {
    pub ids: Vec<usize>,
    pub segments: Vec<u8>,
    pub mask: Vec<bool>,
    pub truncated: bool,
}

impl PairInput {
    pub fn content_len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// The unpadded prefix, which is all the encoder attends over.
    pub fn encoder_input(&self) -> EncoderInput<'_> {
        let n = self.content_len();
        EncoderInput {
            ids: &self.ids[..n],
            segments: &self.segments[..n],
        }
    }
}

/// Token budget per side once `3` special tokens are placed: a side shorter
/// than half the budget keeps everything and the other side takes the rest.
fn side_budgets(n1: usize, n2: usize, budget: usize) -> (usize, usize) {
    if n1 + n2 <= budget {
        return (n1, n2);
    }
    let half = budget / 2;
    if n1 <= half {
        (n1, budget - n1)
    } else if n2 <= budget - half {
        (budget - n2, n2)
    } else {
        (half, budget - half)
    }
}

pub fn build_pair_input(
    first: &[String],
    second: &[String],
    vocab: &Vocab,
    max_len: usize,
) -> Result<PairInput, SemanticError> {
    if first.is_empty() || second.is_empty() {
        return Err(SemanticError::EmptySide);
    }
    let (k1, k2) = side_budgets(first.len(), second.len(), max_len - 3);
    let mut ids = Vec::with_capacity(max_len);
    let mut segments = Vec::with_capacity(max_len);
    ids.push(CLS_ID);
    segments.push(0);
    ids.extend(first[..k1].iter().map(|t| vocab.id(t)));
    ids.push(SEP_ID);
    segments.resize(ids.len(), 0);
    ids.extend(second[..k2].iter().map(|t| vocab.id(t)));
    ids.push(SEP_ID);
    segments.resize(ids.len(), 1);
    let content = ids.len();
    ids.resize(max_len, PAD_ID);
    segments.resize(max_len, 0);
    let mask = (0..max_len).map(|i| i < content).collect();
    Ok(PairInput {
        ids,
        segments,
        mask,
        truncated: k1 < first.len() || k2 < second.len(),
    })
}

pub fn semantic_logits(z: &[f64], head: &SemanticHead) -> Result<[f64; 3], SemanticError> {
    if z.len() != head.input_dim() {
        return Err(SemanticError::DimMismatch {
            expected: head.input_dim(),
            got: z.len(),
        });
    }
    Ok(head.logits(z))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemanticConfig {
    pub d: usize,
    pub heads: usize,
    pub max_len: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Also train on every pair with its sides swapped and the label reversed.
    pub swap_augment: bool,
    pub seed: u64,
}

impl Default for SemanticConfig {
    fn default() -> Self {
        let sgd = SgdConfig::default();
        SemanticConfig {
            d: 64,
            heads: 4,
            max_len: 64,
            learning_rate: sgd.learning_rate,
            epochs: sgd.epochs,
            batch_size: sgd.batch_size,
            swap_augment: true,
            seed: 0,
        }
    }
}

impl SemanticConfig {
    pub fn sgd(&self) -> SgdConfig {
        SgdConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), SemanticError> {
        if self.max_len < 8 {
            return Err(SemanticError::InvalidConfig("max_len must be at least 8".into()));
        }
        if self.d == 0 || self.batch_size == 0 {
            return Err(SemanticError::InvalidConfig("d and batch_size must be positive".into()));
        }
        if self.heads == 0 || self.d % self.heads != 0 {
            return Err(SemanticError::InvalidConfig("d must be a multiple of heads".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(SemanticError::InvalidConfig("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Token lists of both sides with a gold comparative label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub first: Vec<String>,
    pub second: Vec<String>,
    pub label: ComparativeLabel,
}

impl LabeledPair {
    pub fn swapped(&self) -> Self {
        LabeledPair {
            first: self.second.clone(),
            second: self.first.clone(),
            label: self.label.reversed(),
        }
    }
}

/// Trained branch: vocabulary, encoder and head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticModel {
    pub vocab: Vocab,
    pub max_len: usize,
    pub classifier: SequenceClassifier,
}

impl SemanticModel {
    pub fn init(vocab: Vocab, config: &SemanticConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let shape = EncoderShape {
            vocab_size: vocab.len(),
            d: config.d,
            max_len: config.max_len,
            heads: config.heads,
        };
        let encoder = EncoderParams::init(shape, &mut rng);
        let head = LinearHead::init(config.d, &mut rng);
        SemanticModel {
            vocab,
            max_len: config.max_len,
            classifier: SequenceClassifier { encoder, head },
        }
    }

    pub fn input(&self, first: &[String], second: &[String]) -> Result<PairInput, SemanticError> {
        build_pair_input(first, second, &self.vocab, self.max_len)
    }

    /// `[CLS]` embedding and the truncation flag.
    pub fn encode_pair(&self, first: &[String], second: &[String]) -> Result<(Vec<f64>, bool), SemanticError> {
        let input = self.input(first, second)?;
        Ok((self.classifier.encoder.forward(&input.encoder_input()), input.truncated))
    }

    pub fn logits(&self, first: &[String], second: &[String]) -> Result<[f64; 3], SemanticError> {
        let (z, _) = self.encode_pair(first, second)?;
        semantic_logits(&z, &self.classifier.head)
    }

    fn labeled(&self, pair: &LabeledPair) -> Result<LabeledSequence, SemanticError> {
        let input = self.input(&pair.first, &pair.second)?;
        let n = input.content_len();
        Ok(LabeledSequence {
            ids: input.ids[..n].to_vec(),
            segments: input.segments[..n].to_vec(),
            label: pair.label.class_index().ok_or(SemanticError::DegenerateLabels)?,
        })
    }
}

/// Checks that labels are non-null and span at least two classes.
pub fn check_labels(labels: impl IntoIterator<Item = ComparativeLabel>) -> Result<(), SemanticError> {
    let mut seen = [false; 3];
    for l in labels {
        seen[l.class_index().ok_or(SemanticError::DegenerateLabels)?] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(SemanticError::DegenerateLabels);
    }
    Ok(())
}

/// Builds the vocabulary from the training tokens and fits encoder and head
/// by minibatch SGD on cross-entropy. Returns the per-epoch mean loss.
pub fn train_branch(train: &[LabeledPair], config: &SemanticConfig) -> Result<(SemanticModel, Vec<f64>), SemanticError> {
    config.validate()?;
    check_labels(train.iter().map(|p| p.label))?;
    let vocab = Vocab::build(train.iter().flat_map(|p| p.first.iter().chain(&p.second)));
    let mut model = SemanticModel::init(vocab, config);
    let mut examples = train.iter().map(|p| model.labeled(p)).collect::<Result<Vec<_>, _>>()?;
    if config.swap_augment {
        for p in train {
            examples.push(model.labeled(&p.swapped())?);
        }
    }
    let history = train_sgd(
        &mut model.classifier,
        &examples,
        &config.sgd(),
        |m: &SequenceClassifier, ex, g| m.loss_and_grad(ex, g),
    );
    Ok((model, history))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticCheckpoint {
    pub version: u32,
    pub config: SemanticConfig,
    pub model: SemanticModel,
}

impl SemanticCheckpoint {
    pub fn new(model: SemanticModel, config: SemanticConfig) -> Self {
        SemanticCheckpoint {
            version: CHECKPOINT_VERSION,
            config,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String, SemanticError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, SemanticError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if version != CHECKPOINT_VERSION {
            return Err(SemanticError::UnsupportedVersion(version));
        }
        let ckpt: SemanticCheckpoint = serde_json::from_value(value)?;
        ckpt.model
            .classifier
            .encoder
            .validate()
            .map_err(SemanticError::InvalidConfig)?;
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SemanticError> {
        Ok(fs::write(path, self.to_json()?)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SemanticError> {
        SemanticCheckpoint::from_json(&fs::read_to_string(path)?)
    }
}
