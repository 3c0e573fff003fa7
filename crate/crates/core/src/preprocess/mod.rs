//! Text normalization, sentence splitting, tokenization and routing of
//! sentences to aspects.

mod classifier;
mod text;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AspectId, AspectMap, Review};

pub use classifier::{
    classifier_loss_and_grad, train_aspect_classifier, train_aspect_classifier_logged, AspectClassifier,
    ClassifierConfig,
};
pub use text::{normalize, split_sentences, tokenize, Abbreviations};

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("aspect classifier for {0} needs both positive and negative sentences")]
    DegenerateLabels(AspectId),
    #[error("sentence and label counts differ ({sentences} vs {labels}) or are zero")]
    LengthMismatch { sentences: usize, labels: usize },
    #[error("invalid classifier config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    First,
    Second,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::First, Side::Second];

    /// 1 or 2, as used in serialized outputs.
    pub fn number(self) -> u8 {
        match self {
            Side::First => 1,
            Side::Second => 2,
        }
    }
}

impl Serialize for Side {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.number())
    }
}

impl<'de> Deserialize<'de> for Side {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match u8::deserialize(d)? {
            1 => Ok(Side::First),
            2 => Ok(Side::Second),
            n => Err(serde::de::Error::custom(format!("side must be 1 or 2, got {n}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub tokens: Vec<String>,
    /// (review id, sentence index within the review)
    pub origin: (String, usize),
}

/// Normalizes, splits and tokenizes one review.
pub fn preprocess_review(review: &Review, abbreviations: &Abbreviations) -> Vec<Sentence> {
    let norm = normalize(&review.text);
    split_sentences(&norm, abbreviations)
        .into_iter()
        .map(|text| {
            let tokens = tokenize(&text);
            (text, tokens)
        })
        .filter(|(_, tokens)| !tokens.is_empty())
        .enumerate()
        .map(|(i, (text, tokens))| Sentence {
            text,
            tokens,
            origin: (review.review_id.clone(), i),
        })
        .collect()
}

/// Sentences of one review routed to one aspect.
#[derive(Debug, Clone, PartialEq)]
pub struct AspectSentenceSet {
    pub aspect: AspectId,
    pub side: Side,
    pub sentences: Vec<Sentence>,
}

impl AspectSentenceSet {
    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    /// Token lists of the member sentences, in order.
    pub fn token_lists(&self) -> Vec<Vec<String>> {
        self.sentences.iter().map(|s| s.tokens.clone()).collect()
    }
}

/// Both reviews' sentence sets for every aspect, plus the sentences no aspect claimed.
#[derive(Debug, Clone, PartialEq)]
pub struct AspectPairSet {
    pub sets: AspectMap<[AspectSentenceSet; 2]>,
    pub discarded: [Vec<Sentence>; 2],
}

impl AspectPairSet {
    pub fn side(&self, aspect: AspectId, side: Side) -> &AspectSentenceSet {
        &self.sets[aspect][side as usize]
    }

    /// Routes every sentence of both reviews with `route`, which returns the
    /// aspects a sentence belongs to.
    pub fn assemble(
        first: &[Sentence],
        second: &[Sentence],
        mut route: impl FnMut(Side, usize, &Sentence) -> [bool; 4],
    ) -> Self {
        let mut sets = AspectMap::from_fn(|aspect| {
            Side::BOTH.map(|side| AspectSentenceSet {
                aspect,
                side,
                sentences: Vec::new(),
            })
        });
        let mut discarded = [Vec::new(), Vec::new()];
        for (side, sentences) in [(Side::First, first), (Side::Second, second)] {
            for (i, s) in sentences.iter().enumerate() {
                let hits = route(side, i, s);
                if !hits.iter().any(|&h| h) {
                    discarded[side as usize].push(s.clone());
                }
                for a in AspectId::ALL {
                    if hits[a.index()] {
                        sets[a][side as usize].sentences.push(s.clone());
                    }
                }
            }
        }
        AspectPairSet { sets, discarded }
    }
}

/// Routes each sentence to every aspect whose classifier fires.
pub fn build_aspect_pairs(
    first: &Review,
    second: &Review,
    classifiers: &AspectMap<AspectClassifier>,
    abbreviations: &Abbreviations,
) -> AspectPairSet {
    let s1 = preprocess_review(first, abbreviations);
    let s2 = preprocess_review(second, abbreviations);
    AspectPairSet::assemble(&s1, &s2, |_, _, s| {
        AspectId::ALL.map(|a| classifiers[a].classify(&s.tokens))
    })
}
