//! Review pairs, their JSONL encoding, the synthetic generator and splitting.

mod jsonl;
mod split;
mod synthetic;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Index, IndexMut};
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use jsonl::{load_corpus, parse_corpus, save_corpus, write_corpus};
pub use split::split;
pub use synthetic::{generate_synthetic, planted_label, GeneratorConfig, Template, TemplateSet};

/// Rating on the 0 to 5 scale used throughout the pipeline.
pub type RatingScore = f64;

pub const MIN_SCORE: RatingScore = 0.0;
pub const MAX_SCORE: RatingScore = 5.0;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed JSON record: {message}")]
    ParseError { line: usize, message: String },
    #[error("line {line}: missing or invalid field `{field}`")]
    MissingField { field: String, line: usize },
    #[error("line {line}: the two reviews belong to different users")]
    UserMismatch { line: usize },
    #[error("line {line}: duplicate review id `{id}`")]
    DuplicateReview { id: String, line: usize },
    #[error("corpus contains no review pairs")]
    EmptyCorpus,
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("split ratios must be positive and sum to 1, got {0:?}")]
    BadRatios((f64, f64, f64)),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One of the four beer-review aspects, in their fixed ordinal order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AspectId {
    Appearance,
    Aroma,
    Palate,
    Taste,
}

impl AspectId {
    pub const ALL: [AspectId; 4] = [
        AspectId::Appearance,
        AspectId::Aroma,
        AspectId::Palate,
        AspectId::Taste,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            AspectId::Appearance => "appearance",
            AspectId::Aroma => "aroma",
            AspectId::Palate => "palate",
            AspectId::Taste => "taste",
        }
    }
}

impl fmt::Display for AspectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AspectId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AspectId::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown aspect `{s}`"))
    }
}

/// Per-aspect comparative judgement of the first review against the second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ComparativeLabel {
    Worse,
    Similar,
    Better,
    Null,
}

impl ComparativeLabel {
    /// Non-null labels in class-index order.
    pub const CLASSES: [ComparativeLabel; 3] = [
        ComparativeLabel::Worse,
        ComparativeLabel::Similar,
        ComparativeLabel::Better,
    ];

    pub fn code(self) -> Option<i8> {
        match self {
            ComparativeLabel::Worse => Some(-1),
            ComparativeLabel::Similar => Some(0),
            ComparativeLabel::Better => Some(1),
            ComparativeLabel::Null => None,
        }
    }

    pub fn from_code(code: Option<i64>) -> Option<Self> {
        match code {
            None => Some(ComparativeLabel::Null),
            Some(-1) => Some(ComparativeLabel::Worse),
            Some(0) => Some(ComparativeLabel::Similar),
            Some(1) => Some(ComparativeLabel::Better),
            Some(_) => None,
        }
    }

    /// The label of the same pair with its reviews swapped.
    pub fn reversed(self) -> Self {
        match self {
            ComparativeLabel::Worse => ComparativeLabel::Better,
            ComparativeLabel::Better => ComparativeLabel::Worse,
            other => other,
        }
    }

    /// Class index 0/1/2 for Worse/Similar/Better.
    pub fn class_index(self) -> Option<usize> {
        self.code().map(|c| (c + 1) as usize)
    }

    pub fn from_class_index(k: usize) -> Self {
        Self::CLASSES[k]
    }

    pub fn is_null(self) -> bool {
        self == ComparativeLabel::Null
    }
}

impl Serialize for ComparativeLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.code().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComparativeLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let code = Option::<i64>::deserialize(d)?;
        ComparativeLabel::from_code(code)
            .ok_or_else(|| serde::de::Error::custom("label must be -1, 0, 1 or null"))
    }
}

/// Dense map keyed by [`AspectId`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct AspectMap<T>(pub [T; 4]);

impl<T> AspectMap<T> {
    pub fn from_fn(mut f: impl FnMut(AspectId) -> T) -> Self {
        AspectMap(AspectId::ALL.map(&mut f))
    }

    pub fn iter(&self) -> impl Iterator<Item = (AspectId, &T)> {
        AspectId::ALL.into_iter().zip(self.0.iter())
    }

    pub fn map<U>(&self, mut f: impl FnMut(AspectId, &T) -> U) -> AspectMap<U> {
        AspectMap::from_fn(|a| f(a, &self[a]))
    }
}

impl<T> Index<AspectId> for AspectMap<T> {
    type Output = T;
    fn index(&self, a: AspectId) -> &T {
        &self.0[a.index()]
    }
}

impl<T> IndexMut<AspectId> for AspectMap<T> {
    fn index_mut(&mut self, a: AspectId) -> &mut T {
        &mut self.0[a.index()]
    }
}

impl<T: Serialize> Serialize for AspectMap<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut m = s.serialize_map(Some(4))?;
        for (a, v) in self.iter() {
            m.serialize_entry(a.name(), v)?;
        }
        m.end()
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for AspectMap<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let mut m = BTreeMap::<AspectId, T>::deserialize(d)?;
        let mut out = Vec::with_capacity(4);
        for a in AspectId::ALL {
            out.push(
                m.remove(&a)
                    .ok_or_else(|| serde::de::Error::custom(format!("missing aspect `{a}`")))?,
            );
        }
        let arr: [T; 4] = out.try_into().map_err(|_| serde::de::Error::custom("aspect map"))?;
        Ok(AspectMap(arr))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Review {
    pub user_id: String,
    pub review_id: String,
    pub text: String,
    /// Generator-planted aspect ratings; absent for real data.
    pub planted_scores: Option<BTreeMap<AspectId, RatingScore>>,
    /// Gold aspect membership per sentence (in sentence-split order), when annotated.
    pub sentence_aspects: Option<Vec<Vec<AspectId>>>,
}

impl Review {
    pub fn new(user_id: impl Into<String>, review_id: impl Into<String>, text: impl Into<String>) -> Self {
        Review {
            user_id: user_id.into(),
            review_id: review_id.into(),
            text: text.into(),
            planted_scores: None,
            sentence_aspects: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReviewPair {
    pub first: Review,
    pub second: Review,
    pub gold: AspectMap<ComparativeLabel>,
}

impl ReviewPair {
    pub fn user_id(&self) -> &str {
        &self.first.user_id
    }
}

/// Where a corpus came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    File { source: PathBuf },
    Generated { seed: u64, config_digest: String },
    Split { parent: Box<Provenance>, part: String, seed: u64 },
    InMemory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub pairs: Vec<ReviewPair>,
    pub meta: Provenance,
}

impl Corpus {
    pub fn new(pairs: Vec<ReviewPair>, meta: Provenance) -> Result<Self, CorpusError> {
        if pairs.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        Ok(Corpus { pairs, meta })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}
