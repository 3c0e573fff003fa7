//! The assembled model: aspect routing, sentence scoring, both classification
//! branches and fusion, plus training, persistence and the explanation adapter.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::corpus::{AspectId, AspectMap, ComparativeLabel, Corpus, CorpusError, Review, ReviewPair};
use crate::explain::{
    derive_seed, explain, mask_apply, Attribution, Coalition, ExplainConfig, ExplainError, ExplainScope, TokenRef,
    ValueFunction,
};
use crate::fusion::{softmax, ClassDistribution, FusedDistribution, FusionError, Gate, Prediction};
use crate::nn::{cross_entropy, train_sgd, EncoderInput, LinearHead, SgdConfig};
use crate::preprocess::{
    preprocess_review, train_aspect_classifier, Abbreviations, AspectClassifier, AspectPairSet, PreprocessError,
    Sentence, Side,
};
use crate::scoring::{
    aspect_rating, fit_fallback, lexicon_score_tokens, rating_input, rating_logits, train_rating_head, FallbackModel,
    Lexicon, RatingHead, ScoringError,
};
use crate::semantic::{train_branch, LabeledPair, SemanticError, SemanticModel};

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("unknown variant `{0}`")]
    UnknownVariant(String),
    #[error("review {0} has no per-sentence aspect tags (or they do not match its sentences)")]
    MissingAnnotations(String),
    #[error("no training pair has a non-null gold label with both sides present")]
    NoTrainingPairs,
    #[error("aspect {0} is gated to Null and has nothing to explain")]
    NothingToExplain(AspectId),
    #[error("semantic-only explanations need a model with a semantic branch")]
    NoSemanticBranch,
    #[error("unsupported model version {0}")]
    UnsupportedVersion(u32),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Semantic(#[from] SemanticError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Full,
    NoSemanticBranch,
    NoRatingBranch,
    /// Every sentence is routed to every aspect.
    NoAspectClassification,
    /// One linear classifier over both branch embeddings instead of the sum.
    ConcatSingleClassifier,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Full,
        Variant::NoSemanticBranch,
        Variant::NoRatingBranch,
        Variant::NoAspectClassification,
        Variant::ConcatSingleClassifier,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoSemanticBranch => "no-semantic-branch",
            Variant::NoRatingBranch => "no-rating-branch",
            Variant::NoAspectClassification => "no-aspect-classification",
            Variant::ConcatSingleClassifier => "concat-single-classifier",
        }
    }

    pub fn uses_rating(self) -> bool {
        self != Variant::NoRatingBranch
    }

    pub fn uses_semantic(self) -> bool {
        self != Variant::NoSemanticBranch
    }

    pub fn uses_classifiers(self) -> bool {
        self != Variant::NoAspectClassification
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, PipelineError> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| PipelineError::UnknownVariant(s.to_string()))
    }
}

/// Abbreviations and scoring lexicon as configured.
pub fn load_resources(cfg: &PipelineConfig) -> Result<(Abbreviations, Lexicon), PipelineError> {
    let mut abbreviations = Abbreviations::default();
    if let Some(p) = &cfg.data.abbreviations {
        abbreviations.extend_from(&fs::read_to_string(p)?);
    }
    let lexicon = match &cfg.data.lexicon {
        Some(p) => Lexicon::load(p)?,
        None => cfg.generator.scoring_lexicon()?,
    };
    Ok((abbreviations, lexicon))
}

/// Sentence token lists of both sides of one aspect.
pub type SideTokens = [Vec<Vec<String>>; 2];

fn side_tokens(set: &AspectPairSet, aspect: AspectId) -> SideTokens {
    Side::BOTH.map(|s| set.side(aspect, s).token_lists())
}

fn flatten(sentences: &[Vec<String>]) -> Vec<String> {
    sentences.concat()
}

/// One routed training instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub aspect: AspectId,
    pub sides: SideTokens,
    pub label: ComparativeLabel,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub examples: usize,
    pub fallback_sentences: usize,
    pub fallback_loss: Vec<f64>,
    pub rating_loss: Vec<f64>,
    pub semantic_loss: Vec<f64>,
    pub concat_loss: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineModel {
    pub version: u32,
    pub variant: Variant,
    pub abbreviations: Abbreviations,
    /// `None` routes every sentence to every aspect.
    pub classifiers: Option<AspectMap<AspectClassifier>>,
    pub lexicon: Lexicon,
    pub fallback: FallbackModel,
    pub rating: Option<RatingHead>,
    pub semantic: Option<SemanticModel>,
    /// Linear classifier over the concatenated rating and semantic embeddings.
    pub concat_head: Option<LinearHead>,
}

fn tagged_sentences<'a>(
    review: &'a Review,
    abbreviations: &Abbreviations,
) -> Result<Vec<(Sentence, &'a [AspectId])>, PipelineError> {
    let sentences = preprocess_review(review, abbreviations);
    let tags = review
        .sentence_aspects
        .as_ref()
        .filter(|t| t.len() == sentences.len())
        .ok_or_else(|| missing(review))?;
    Ok(sentences.into_iter().zip(tags.iter().map(Vec::as_slice)).collect())
}

fn missing(review: &Review) -> PipelineError {
    PipelineError::MissingAnnotations(review.review_id.clone())
}

fn fallback_target(review: &Review, tags: &[AspectId], tokens: &[String], lexicon: &Lexicon) -> Option<f64> {
    let planted = review.planted_scores.as_ref().and_then(|p| {
        tags.iter()
            .filter_map(|a| p.get(a).copied())
            .reduce(f64::min)
    });
    planted.or_else(|| lexicon_score_tokens(tokens, lexicon))
}

/// Aspect classifiers (unless the variant skips them) and the fallback
/// regressor; both branches are left empty.
fn fit_front(train: &Corpus, cfg: &PipelineConfig, variant: Variant) -> Result<(PipelineModel, TrainReport), PipelineError> {
    let (abbreviations, lexicon) = load_resources(cfg)?;
    let reviews: Vec<&Review> = train.pairs.iter().flat_map(|p| [&p.first, &p.second]).collect();
    let annotated = reviews
        .iter()
        .map(|r| tagged_sentences(r, &abbreviations))
        .collect::<Result<Vec<_>, _>>();
    let annotated = match annotated {
        Ok(t) => Some(t),
        Err(e) if variant.uses_classifiers() => return Err(e),
        Err(_) => None,
    };

    let classifiers = if variant.uses_classifiers() {
        let tagged = annotated.as_ref().expect("checked above");
        let sentences: Vec<Sentence> = tagged.iter().flatten().map(|(s, _)| s.clone()).collect();
        let fitted = AspectId::ALL
            .into_par_iter()
            .map(|aspect| {
                let labels: Vec<u8> = tagged
                    .iter()
                    .flatten()
                    .map(|(_, t)| t.contains(&aspect) as u8)
                    .collect();
                train_aspect_classifier(&sentences, &labels, aspect, &cfg.classifier)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let arr: [AspectClassifier; 4] = fitted.try_into().expect("four aspects");
        Some(AspectMap(arr))
    } else {
        None
    };

    let (docs, targets): (Vec<Vec<String>>, Vec<f64>) = match &annotated {
        Some(tagged) => reviews
            .iter()
            .zip(tagged)
            .flat_map(|(r, sents)| {
                let lexicon = &lexicon;
                sents.iter().filter(|(_, t)| !t.is_empty()).filter_map(move |(s, t)| {
                    fallback_target(r, t, &s.tokens, lexicon).map(|y| (s.tokens.clone(), y))
                })
            })
            .unzip(),
        None => reviews
            .iter()
            .flat_map(|r| preprocess_review(r, &abbreviations))
            .filter_map(|s| lexicon_score_tokens(&s.tokens, &lexicon).map(|y| (s.tokens, y)))
            .unzip(),
    };
    let (fallback, fallback_loss) = fit_fallback(&docs, &targets, &cfg.gbt)?;
    let model = PipelineModel {
        version: MODEL_VERSION,
        variant,
        abbreviations,
        classifiers,
        lexicon,
        fallback,
        rating: None,
        semantic: None,
        concat_head: None,
    };
    let report = TrainReport {
        fallback_sentences: docs.len(),
        fallback_loss,
        ..TrainReport::default()
    };
    Ok((model, report))
}

/// Fits every component the variant needs on the training corpus.
pub fn train_pipeline(
    train: &Corpus,
    cfg: &PipelineConfig,
    variant: Variant,
) -> Result<(PipelineModel, TrainReport), PipelineError> {
    let (mut model, mut report) = fit_front(train, cfg, variant)?;
    let examples = model.training_examples(train)?;
    report.examples = examples.len();
    let (rating, semantic) = rayon::join(
        || variant.uses_rating().then(|| model.fit_rating(&examples, cfg)).transpose(),
        || variant.uses_semantic().then(|| fit_semantic(&examples, cfg)).transpose(),
    );
    if let Some((head, loss)) = rating? {
        model.rating = Some(head);
        report.rating_loss = loss;
    }
    if let Some((sem, loss)) = semantic? {
        model.semantic = Some(sem);
        report.semantic_loss = loss;
    }
    if variant == Variant::ConcatSingleClassifier {
        report.concat_loss = model.fit_concat_head(&examples, cfg)?;
    }
    log::info!("trained {variant} on {} aspect pairs", examples.len());
    Ok((model, report))
}

fn fit_semantic(examples: &[TrainExample], cfg: &PipelineConfig) -> Result<(SemanticModel, Vec<f64>), PipelineError> {
    let pairs: Vec<LabeledPair> = examples
        .iter()
        .map(|ex| LabeledPair {
            first: flatten(&ex.sides[0]),
            second: flatten(&ex.sides[1]),
            label: ex.label,
        })
        .collect();
    Ok(train_branch(&pairs, &cfg.semantic)?)
}

impl PipelineModel {
    pub fn preprocess(&self, review: &Review) -> Vec<Sentence> {
        preprocess_review(review, &self.abbreviations)
    }

    /// Sentence sets of both reviews per aspect. With `oracle`, the gold
    /// per-sentence tags replace the classifiers.
    pub fn route(&self, pair: &ReviewPair, oracle: bool) -> Result<AspectPairSet, PipelineError> {
        let s1 = self.preprocess(&pair.first);
        let s2 = self.preprocess(&pair.second);
        if oracle {
            let tags = [&pair.first, &pair.second].map(|r| {
                tagged_sentences(r, &self.abbreviations).map(|v| v.into_iter().map(|(_, t)| t.to_vec()).collect::<Vec<_>>())
            });
            let [t1, t2] = tags;
            let tags = [t1?, t2?];
            return Ok(AspectPairSet::assemble(&s1, &s2, |side, i, _| {
                AspectId::ALL.map(|a| tags[side as usize][i].contains(&a))
            }));
        }
        Ok(AspectPairSet::assemble(&s1, &s2, |_, _, s| match &self.classifiers {
            Some(c) => AspectId::ALL.map(|a| c[a].classify(&s.tokens)),
            None => [true; 4],
        }))
    }

    /// Routed pairs whose gold label is not Null and whose sides are both present.
    pub fn training_examples(&self, train: &Corpus) -> Result<Vec<TrainExample>, PipelineError> {
        let per_pair = train
            .pairs
            .par_iter()
            .map(|pair| {
                let set = self.route(pair, false)?;
                Ok(AspectId::ALL
                    .into_iter()
                    .filter(|&a| !pair.gold[a].is_null() && crate::fusion::null_gate(&set, a) == Gate::Proceed)
                    .map(|a| TrainExample {
                        aspect: a,
                        sides: side_tokens(&set, a),
                        label: pair.gold[a],
                    })
                    .collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;
        let examples: Vec<TrainExample> = per_pair.into_iter().flatten().collect();
        if examples.is_empty() {
            return Err(PipelineError::NoTrainingPairs);
        }
        Ok(examples)
    }

    fn ratings(&self, sides: &SideTokens) -> Result<(f64, f64), PipelineError> {
        Ok((
            aspect_rating(&sides[0], &self.lexicon, &self.fallback)?,
            aspect_rating(&sides[1], &self.lexicon, &self.fallback)?,
        ))
    }

    fn fit_rating(&self, examples: &[TrainExample], cfg: &PipelineConfig) -> Result<(RatingHead, Vec<f64>), PipelineError> {
        let triples = examples
            .par_iter()
            .map(|ex| {
                let (a, b) = self.ratings(&ex.sides)?;
                Ok((a, b, ex.label))
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;
        Ok(train_rating_head(&triples, &cfg.rating)?)
    }

    fn joint_embedding(&self, sides: &SideTokens) -> Result<Option<Vec<f64>>, PipelineError> {
        let (Some(rating), Some(semantic)) = (&self.rating, &self.semantic) else {
            return Ok(None);
        };
        let (s1, s2) = self.ratings(sides)?;
        let (ids, segments) = rating_input(s1, s2)?;
        let mut z = rating.encoder.forward(&EncoderInput {
            ids: &ids,
            segments: &segments,
        });
        let (zs, _) = semantic.encode_pair(&flatten(&sides[0]), &flatten(&sides[1]))?;
        z.extend(zs);
        Ok(Some(z))
    }

    /// Trains a linear classifier over the frozen branch embeddings.
    fn fit_concat_head(&mut self, examples: &[TrainExample], cfg: &PipelineConfig) -> Result<Vec<f64>, PipelineError> {
        let feats = examples
            .par_iter()
            .map(|ex| {
                let z = self.joint_embedding(&ex.sides)?.expect("both branches trained");
                Ok((z, ex.label.class_index().expect("non-null training label")))
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;
        let dim = feats[0].0.len();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(derive_seed(cfg.semantic.seed, 1));
        let mut head = LinearHead::init(dim, &mut rng);
        let sgd = SgdConfig {
            seed: derive_seed(cfg.semantic.seed, 2),
            ..cfg.semantic.sgd()
        };
        let history = train_sgd(&mut head, &feats, &sgd, |m: &LinearHead, (z, y), g| {
            let (loss, dl) = cross_entropy(&m.logits(z), *y);
            m.backward(z, &dl, g);
            loss
        });
        self.concat_head = Some(head);
        self.variant = Variant::ConcatSingleClassifier;
        Ok(history)
    }

    /// The same model restricted to another variant, reusing fitted
    /// components. `None` when the variant needs a component this model lacks
    /// or different routing.
    pub fn restrict(&self, variant: Variant) -> Option<PipelineModel> {
        if variant.uses_classifiers() != self.classifiers.is_some() || variant == Variant::ConcatSingleClassifier {
            return (variant == self.variant).then(|| self.clone());
        }
        let mut m = self.clone();
        m.variant = variant;
        m.concat_head = None;
        if !variant.uses_rating() {
            m.rating = None;
        } else if m.rating.is_none() {
            return None;
        }
        if !variant.uses_semantic() {
            m.semantic = None;
        } else if m.semantic.is_none() {
            return None;
        }
        Some(m)
    }

    /// Adds a concat head trained on `train`, giving the concat variant.
    pub fn with_concat_head(&self, train: &Corpus, cfg: &PipelineConfig) -> Result<(PipelineModel, Vec<f64>), PipelineError> {
        let mut m = self.clone();
        let examples = m.training_examples(train)?;
        let loss = m.fit_concat_head(&examples, cfg)?;
        Ok((m, loss))
    }

    /// Rating-branch and semantic-branch distributions and the fused vector.
    /// Single-branch variants double their one distribution.
    pub fn distributions(
        &self,
        sides: &SideTokens,
    ) -> Result<(Option<ClassDistribution>, Option<ClassDistribution>, FusedDistribution), PipelineError> {
        if let Some(head) = &self.concat_head {
            let z = self.joint_embedding(sides)?.expect("concat model has both branches");
            let p = softmax(&head.logits(&z))?;
            return Ok((None, None, FusedDistribution::doubled(&p)));
        }
        let p_r = match &self.rating {
            Some(head) => {
                let (s1, s2) = self.ratings(sides)?;
                Some(softmax(&rating_logits(s1, s2, head)?)?)
            }
            None => None,
        };
        let p_s = match &self.semantic {
            Some(sem) => Some(softmax(&sem.logits(&flatten(&sides[0]), &flatten(&sides[1]))?)?),
            None => None,
        };
        let q = match (&p_r, &p_s) {
            (Some(a), Some(b)) => FusedDistribution::sum(a, b),
            (Some(p), None) | (None, Some(p)) => FusedDistribution::doubled(p),
            (None, None) => unreachable!("a model always has at least one branch"),
        };
        Ok((p_r, p_s, q))
    }

    /// Null when either side has no sentence, else the fused prediction.
    pub fn predict_sides(&self, sides: &SideTokens) -> Result<Prediction, PipelineError> {
        if sides.iter().any(Vec::is_empty) {
            return Ok(Prediction::null());
        }
        let (p_r, p_s, q) = self.distributions(sides)?;
        Ok(Prediction::from_fused(q, p_r, p_s))
    }

    pub fn predict_pair(&self, pair: &ReviewPair, oracle: bool) -> Result<AspectMap<Prediction>, PipelineError> {
        let set = self.route(pair, oracle)?;
        let preds = AspectId::ALL
            .into_iter()
            .map(|a| self.predict_sides(&side_tokens(&set, a)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(AspectMap(preds.try_into().expect("four aspects")))
    }

    pub fn predict_corpus(&self, corpus: &Corpus, oracle: bool) -> Result<Vec<AspectMap<Prediction>>, PipelineError> {
        corpus.pairs.par_iter().map(|p| self.predict_pair(p, oracle)).collect()
    }

    pub fn to_json(&self) -> Result<String, PipelineError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if version != MODEL_VERSION {
            return Err(PipelineError::UnsupportedVersion(version));
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PipelineError> {
        Ok(fs::write(path, self.to_json()?)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Value function of one (pair, aspect): masked tokens become `[MASK]` in
/// every sentence on both sides and the whole pipeline re-runs. Routing stays
/// as computed on the unmasked input.
pub struct PipelineValue<'a> {
    model: &'a PipelineModel,
    sides: SideTokens,
    scope: ExplainScope,
    refs: Vec<TokenRef>,
}

impl<'a> PipelineValue<'a> {
    pub fn new(model: &'a PipelineModel, sides: SideTokens, scope: ExplainScope) -> Result<Self, PipelineError> {
        if scope == ExplainScope::SemanticOnly && model.semantic.is_none() {
            return Err(PipelineError::NoSemanticBranch);
        }
        let refs = Side::BOTH
            .into_iter()
            .flat_map(|side| {
                flatten(&sides[side as usize])
                    .into_iter()
                    .enumerate()
                    .map(move |(pos, text)| TokenRef { side, pos, text })
            })
            .collect();
        let vf = PipelineValue {
            model,
            sides,
            scope,
            refs,
        };
        vf.try_value(&Coalition::full(vf.refs.len()))?;
        Ok(vf)
    }

    pub fn sides(&self) -> &SideTokens {
        &self.sides
    }

    /// Sentence lists with the tokens outside `coalition` masked.
    pub fn masked(&self, coalition: &Coalition) -> Result<SideTokens, PipelineError> {
        let flat: Vec<String> = self.sides.iter().flat_map(|s| flatten(s)).collect();
        let mut masked = mask_apply(&flat, coalition)?.into_iter();
        Ok(self
            .sides
            .clone()
            .map(|sents| sents.into_iter().map(|s| masked.by_ref().take(s.len()).collect()).collect()))
    }

    fn try_value(&self, coalition: &Coalition) -> Result<[f64; 3], PipelineError> {
        let sides = self.masked(coalition)?;
        let (_, p_s, q) = self.model.distributions(&sides)?;
        Ok(match self.scope {
            ExplainScope::Fused => q.0.map(|v| v / 2.0),
            ExplainScope::SemanticOnly => p_s.expect("checked at construction").0,
        })
    }
}

impl ValueFunction for PipelineValue<'_> {
    fn n_features(&self) -> usize {
        self.refs.len()
    }

    fn value(&self, coalition: &Coalition) -> [f64; 3] {
        self.try_value(coalition)
            .expect("pipeline evaluation succeeded on the full input")
    }

    fn tokens(&self) -> Vec<TokenRef> {
        self.refs.clone()
    }
}

/// Prediction and attribution of one aspect of a pair.
#[derive(Debug, Clone)]
pub struct Explanation {
    pub aspect: AspectId,
    pub prediction: Prediction,
    pub target: usize,
    pub attribution: Attribution,
}

pub fn explain_aspect(
    model: &PipelineModel,
    pair: &ReviewPair,
    aspect: AspectId,
    cfg: &ExplainConfig,
    oracle: bool,
) -> Result<Explanation, PipelineError> {
    let set = model.route(pair, oracle)?;
    let sides = side_tokens(&set, aspect);
    let prediction = model.predict_sides(&sides)?;
    let Some(target) = prediction.label.class_index() else {
        return Err(PipelineError::NothingToExplain(aspect));
    };
    let vf = PipelineValue::new(model, sides, cfg.scope.clone())?;
    let attribution = explain(&vf, cfg)?;
    Ok(Explanation {
        aspect,
        prediction,
        target,
        attribution,
    })
}

/// Token lists of both sides of `aspect` after routing.
pub fn aspect_sides(model: &PipelineModel, pair: &ReviewPair, aspect: AspectId, oracle: bool) -> Result<SideTokens, PipelineError> {
    Ok(side_tokens(&model.route(pair, oracle)?, aspect))
}
