//! Score-token classifier head: two aspect ratings rendered as
//! `[CLS] b(s1) [SEP] b(s2) [SEP]` and encoded.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ScoringError;
use crate::corpus::{ComparativeLabel, RatingScore};
use crate::nn::{train_sgd, EncoderParams, EncoderShape, LabeledSequence, LinearHead, SequenceClassifier, SgdConfig};

/// Number of score tokens; each covers a 0.1-wide slice of [0, 5].
pub const SCORE_BUCKETS: usize = 50;

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const CLS_ID: usize = 2;
pub const SEP_ID: usize = 3;
pub const MASK_ID: usize = 4;
const FIRST_BUCKET_ID: usize = 5;
pub const RATING_VOCAB_SIZE: usize = FIRST_BUCKET_ID + SCORE_BUCKETS;
pub const RATING_MAX_LEN: usize = 8;

/// Encoder plus `d x 3` affine head over score tokens.
pub type RatingHead = SequenceClassifier;

/// Bucket index in `0..50`; 5.0 falls in the top bucket.
pub fn bucketize(score: RatingScore) -> Result<usize, ScoringError> {
    if !(0.0..=5.0).contains(&score) {
        return Err(ScoringError::ScoreOutOfRange(score));
    }
    // tolerate representation error just below a bucket edge (0.3 * 10 = 2.999..)
    Ok(((score * 10.0 + 1e-9).floor() as usize).min(SCORE_BUCKETS - 1))
}

pub fn bucket_token_id(bucket: usize) -> usize {
    FIRST_BUCKET_ID + bucket
}

/// Token and segment ids for a pair of ratings.
pub fn rating_input(s1: RatingScore, s2: RatingScore) -> Result<(Vec<usize>, Vec<u8>), ScoringError> {
    let b1 = bucket_token_id(bucketize(s1)?);
    let b2 = bucket_token_id(bucketize(s2)?);
    Ok((vec![CLS_ID, b1, SEP_ID, b2, SEP_ID], vec![0, 0, 0, 1, 1]))
}

/// Random head whose score-token embeddings also carry the bucket centre on a
/// linear ramp in dimension 0, so neighbouring buckets start out close.
pub fn init_rating_head(d: usize, heads: usize, rng: &mut impl Rng) -> RatingHead {
    let shape = EncoderShape {
        vocab_size: RATING_VOCAB_SIZE,
        d,
        max_len: RATING_MAX_LEN,
        heads,
    };
    let mut encoder = EncoderParams::init(shape, rng);
    for b in 0..SCORE_BUCKETS {
        let centre = (b as f64 + 0.5) / 10.0;
        encoder.token_embeddings.row_mut(bucket_token_id(b))[0] += (centre - 2.5) / 1.25;
    }
    SequenceClassifier {
        encoder,
        head: LinearHead::init(d, rng),
    }
}

pub fn rating_logits(s1: RatingScore, s2: RatingScore, head: &RatingHead) -> Result<[f64; 3], ScoringError> {
    let (ids, segments) = rating_input(s1, s2)?;
    Ok(head.logits(&crate::nn::EncoderInput {
        ids: &ids,
        segments: &segments,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatingConfig {
    pub d: usize,
    pub heads: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for RatingConfig {
    fn default() -> Self {
        let sgd = SgdConfig::default();
        RatingConfig {
            d: 64,
            heads: 4,
            learning_rate: sgd.learning_rate,
            epochs: sgd.epochs,
            batch_size: sgd.batch_size,
            seed: 0,
        }
    }
}

/// Fits a fresh head on `(score1, score2, label)` triples; returns the
/// per-epoch mean loss. Null labels are not allowed.
pub fn train_rating_head(
    examples: &[(RatingScore, RatingScore, ComparativeLabel)],
    config: &RatingConfig,
) -> Result<(RatingHead, Vec<f64>), ScoringError> {
    if examples.is_empty() {
        return Err(ScoringError::EmptyTraining);
    }
    let data = examples
        .iter()
        .map(|&(a, b, label)| {
            let (ids, segments) = rating_input(a, b)?;
            let label = label.class_index().ok_or(ScoringError::EmptyTraining)?;
            Ok(LabeledSequence { ids, segments, label })
        })
        .collect::<Result<Vec<_>, ScoringError>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut head = init_rating_head(config.d, config.heads, &mut rng);
    let sgd = SgdConfig {
        learning_rate: config.learning_rate,
        epochs: config.epochs,
        batch_size: config.batch_size,
        seed: config.seed,
    };
    let history = train_sgd(&mut head, &data, &sgd, |m: &SequenceClassifier, ex, g| m.loss_and_grad(ex, g));
    Ok((head, history))
}
