//! Sentence ratings (lexicon first, boosted-tree fallback), min aggregation to
//! aspect ratings, and the rating-branch classifier over score tokens.

mod gbt;
mod lexicon;
mod rating;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{RatingScore, MAX_SCORE, MIN_SCORE};
use crate::tfidf::TfIdfModel;

pub use gbt::{GbtConfig, GbtRegressor, TreeNode};
pub use lexicon::{lexicon_score, lexicon_score_tokens, Lexicon};
pub use rating::{
    bucket_token_id, bucketize, init_rating_head, rating_input, rating_logits, train_rating_head, RatingConfig, RatingHead, CLS_ID, MASK_ID,
    PAD_ID, RATING_MAX_LEN, RATING_VOCAB_SIZE, SCORE_BUCKETS, SEP_ID, UNK_ID,
};

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("rating {0} is outside [0, 5]")]
    ScoreOutOfRange(f64),
    #[error("lexicon line {line}: {message}")]
    LexiconFormat { line: usize, message: String },
    #[error("cannot aggregate an empty aspect sentence set")]
    EmptyAspectSet,
    #[error("fallback regressor needs at least one training sentence")]
    EmptyTraining,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// TF-IDF features plus boosted trees, used for sentences with no lexicon hit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FallbackModel {
    pub tfidf: TfIdfModel,
    pub gbt: GbtRegressor,
}

impl FallbackModel {
    /// Raw tree prediction clamped to [0, 5].
    pub fn predict(&self, tokens: &[String]) -> RatingScore {
        self.gbt
            .predict(&self.tfidf.transform(tokens))
            .clamp(MIN_SCORE, MAX_SCORE)
    }
}

pub fn fit_fallback<D: AsRef<[String]>>(
    sentences: &[D],
    targets: &[RatingScore],
    config: &GbtConfig,
) -> Result<(FallbackModel, Vec<f64>), ScoringError> {
    if sentences.is_empty() || sentences.len() != targets.len() {
        return Err(ScoringError::EmptyTraining);
    }
    if let Some(&bad) = targets.iter().find(|t| !(MIN_SCORE..=MAX_SCORE).contains(*t)) {
        return Err(ScoringError::ScoreOutOfRange(bad));
    }
    let tfidf = TfIdfModel::fit(sentences);
    let rows: Vec<_> = sentences.iter().map(|s| tfidf.transform(s.as_ref())).collect();
    let (gbt, history) = GbtRegressor::fit(&rows, tfidf.dim(), targets, config);
    Ok((FallbackModel { tfidf, gbt }, history))
}

/// Lexicon score when any token hits the lexicon, else the fallback prediction.
pub fn sentence_rating(tokens: &[String], lexicon: &Lexicon, fallback: &FallbackModel) -> RatingScore {
    lexicon_score_tokens(tokens, lexicon).unwrap_or_else(|| fallback.predict(tokens))
}

/// The most critical sentence decides the aspect rating.
pub fn aggregate_min(ratings: &[RatingScore]) -> Result<RatingScore, ScoringError> {
    ratings
        .iter()
        .copied()
        .reduce(f64::min)
        .ok_or(ScoringError::EmptyAspectSet)
}

/// Min over the sentence ratings of one aspect set.
pub fn aspect_rating<D: AsRef<[String]>>(
    sentences: &[D],
    lexicon: &Lexicon,
    fallback: &FallbackModel,
) -> Result<RatingScore, ScoringError> {
    let ratings: Vec<f64> = sentences
        .iter()
        .map(|s| sentence_rating(s.as_ref(), lexicon, fallback))
        .collect();
    aggregate_min(&ratings)
}
