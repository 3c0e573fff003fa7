//! Template-based synthetic corpus with planted aspect ratings.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{AspectId, AspectMap, ComparativeLabel, Corpus, CorpusError, Provenance, RatingScore, Review, ReviewPair};
use crate::preprocess::{normalize, split_sentences, Abbreviations};
use crate::scoring::Lexicon;

const DEFAULT_TEMPLATES: &str = include_str!("../../data/templates.tsv");
const DEFAULT_LEXICON: &str = include_str!("../../data/lexicon.tsv");
const SLOT: &str = "{adj}";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_pairs: usize,
    /// Planted ratings closer than this are labelled Similar.
    pub epsilon: f64,
    /// Probability that a review leaves out a given aspect.
    pub omit_prob: f64,
    /// Probability that the second review reuses the first review's rating level.
    pub similar_prob: f64,
    pub n_users: usize,
    pub max_fillers: usize,
    /// Share of each rating level's adjectives left out of the exported
    /// scoring lexicon, so that those sentences take the fallback path.
    pub oov_fraction: f64,
    /// Probability that an aspect sentence negates its adjective ("not
    /// bland"); the planted rating is then the mirrored level.
    pub negation_prob: f64,
    pub templates: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_pairs: 500,
            epsilon: 0.25,
            omit_prob: 0.15,
            similar_prob: 0.25,
            n_users: 50,
            max_fillers: 2,
            oov_fraction: 0.3,
            negation_prob: 0.2,
            templates: None,
            lexicon: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub aspect: Option<AspectId>,
    pub text: String,
}

impl Template {
    pub fn fill(&self, adjective: &str) -> String {
        self.text.replacen(SLOT, adjective, 1)
    }
}

/// Aspect sentence templates (one `{adj}` slot each) plus aspect-free fillers.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    pub aspects: AspectMap<Vec<Template>>,
    pub fillers: Vec<Template>,
}

impl TemplateSet {
    /// Parses `aspect<TAB>template` lines; the aspect column `filler` marks fillers.
    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let mut aspects: AspectMap<Vec<Template>> = AspectMap::from_fn(|_| Vec::new());
        let mut fillers = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let bad = |m: String| CorpusError::InvalidConfig(format!("template line {}: {m}", i + 1));
            let (kind, body) = line
                .split_once('\t')
                .ok_or_else(|| bad("expected aspect<TAB>template".into()))?;
            let slots = body.matches(SLOT).count();
            if kind == "filler" {
                if slots != 0 {
                    return Err(bad("filler templates take no {adj} slot".into()));
                }
                fillers.push(Template {
                    aspect: None,
                    text: body.to_string(),
                });
            } else {
                let aspect: AspectId = kind.parse().map_err(|_| bad(format!("unknown aspect `{kind}`")))?;
                if slots != 1 {
                    return Err(bad("aspect templates need exactly one {adj} slot".into()));
                }
                aspects[aspect].push(Template {
                    aspect: Some(aspect),
                    text: body.to_string(),
                });
            }
        }
        if let Some((a, _)) = aspects.iter().find(|(_, t)| t.is_empty()) {
            return Err(CorpusError::InvalidConfig(format!("no templates for aspect {a}")));
        }
        Ok(TemplateSet { aspects, fillers })
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet::parse(DEFAULT_TEMPLATES).expect("bundled templates parse")
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: &str| Err(CorpusError::InvalidConfig(m.to_string()));
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if self.n_pairs == 0 {
            return bad("n_pairs must be at least 1");
        }
        if self.n_users == 0 {
            return bad("n_users must be at least 1");
        }
        for (name, p) in [
            ("omit_prob", self.omit_prob),
            ("similar_prob", self.similar_prob),
            ("oov_fraction", self.oov_fraction),
            ("negation_prob", self.negation_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(CorpusError::InvalidConfig(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn load_templates(&self) -> Result<TemplateSet, CorpusError> {
        match &self.templates {
            Some(p) => TemplateSet::parse(&fs::read_to_string(p)?),
            None => Ok(TemplateSet::default()),
        }
    }

    /// The full adjective lexicon the generator draws from.
    pub fn load_lexicon(&self) -> Result<Lexicon, CorpusError> {
        let text = match &self.lexicon {
            Some(p) => fs::read_to_string(p)?,
            None => DEFAULT_LEXICON.to_string(),
        };
        let lex = Lexicon::parse_tsv(&text).map_err(|e| CorpusError::InvalidConfig(e.to_string()))?;
        if lex.is_empty() {
            return Err(CorpusError::InvalidConfig("adjective lexicon is empty".into()));
        }
        Ok(lex)
    }

    /// The lexicon handed to the scoring branch: the generator lexicon minus
    /// `round(oov_fraction * n)` alphabetically last words of each rating level.
    pub fn scoring_lexicon(&self) -> Result<Lexicon, CorpusError> {
        let full = self.load_lexicon()?;
        let mut out = Lexicon::new();
        for (_, words) in by_level(&full) {
            let keep = words.len() - (words.len() as f64 * self.oov_fraction).round() as usize;
            for w in &words[..keep] {
                out.insert(w, full.get(w).expect("word from lexicon"))
                    .map_err(|e| CorpusError::InvalidConfig(e.to_string()))?;
            }
        }
        Ok(out)
    }

    fn digest(&self, templates: &TemplateSet, lexicon: &Lexicon) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("config serializes"));
        for t in templates.aspects.0.iter().flatten().chain(&templates.fillers) {
            h.update(t.text.as_bytes());
            h.update([0]);
        }
        h.update(lexicon.to_tsv().as_bytes());
        format!("{:x}", h.finalize())[..16].to_string()
    }
}

/// Words grouped by score, levels ascending, words sorted within a level.
fn by_level(lexicon: &Lexicon) -> Vec<(RatingScore, Vec<String>)> {
    let mut levels: Vec<(RatingScore, Vec<String>)> = Vec::new();
    for (w, s) in lexicon.iter() {
        match levels.iter_mut().find(|(l, _)| *l == s) {
            Some((_, v)) => v.push(w.to_string()),
            None => levels.push((s, vec![w.to_string()])),
        }
    }
    levels.sort_by(|a, b| a.0.total_cmp(&b.0));
    levels
}

pub const NEGATION: &str = "not";

/// Gold label from planted ratings: Null when either side lacks a rating.
pub fn planted_label(first: Option<RatingScore>, second: Option<RatingScore>, epsilon: f64) -> ComparativeLabel {
    match (first, second) {
        (Some(a), Some(b)) if a - b > epsilon => ComparativeLabel::Better,
        (Some(a), Some(b)) if b - a > epsilon => ComparativeLabel::Worse,
        (Some(_), Some(_)) => ComparativeLabel::Similar,
        _ => ComparativeLabel::Null,
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

struct Draft {
    sentences: Vec<(String, Vec<AspectId>)>,
    planted: BTreeMap<AspectId, RatingScore>,
}

pub fn generate_synthetic(cfg: &GeneratorConfig, seed: u64) -> Result<Corpus, CorpusError> {
    cfg.validate()?;
    let templates = cfg.load_templates()?;
    let lexicon = cfg.load_lexicon()?;
    let levels = by_level(&lexicon);
    let mirror = levels[0].0 + levels[levels.len() - 1].0;
    let abbreviations = Abbreviations::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(cfg.n_pairs);

    for i in 0..cfg.n_pairs {
        let user = format!("u{:03}", rng.gen_range(0..cfg.n_users));
        let mut drafts = [Draft::new(), Draft::new()];
        for aspect in AspectId::ALL {
            let l1 = rng.gen_range(0..levels.len());
            let l2 = if levels.len() == 1 || rng.gen_bool(cfg.similar_prob) {
                l1
            } else {
                let k = rng.gen_range(0..levels.len() - 1);
                if k >= l1 {
                    k + 1
                } else {
                    k
                }
            };
            for (draft, level) in drafts.iter_mut().zip([l1, l2]) {
                if rng.gen_bool(cfg.omit_prob) {
                    continue;
                }
                let template = templates.aspects[aspect].choose(&mut rng).expect("non-empty");
                let (score, words) = &levels[level];
                let adjective = words.choose(&mut rng).expect("non-empty level");
                let (phrase, planted) = if rng.gen_bool(cfg.negation_prob) {
                    (format!("{NEGATION} {adjective}"), mirror - score)
                } else {
                    (adjective.clone(), *score)
                };
                draft.sentences.push((template.fill(&phrase), vec![aspect]));
                draft.planted.insert(aspect, planted);
            }
        }

        let mut reviews = Vec::with_capacity(2);
        for (side, mut draft) in drafts.into_iter().enumerate() {
            let n_fill = if templates.fillers.is_empty() {
                0
            } else {
                let min = usize::from(draft.sentences.is_empty());
                rng.gen_range(min..=cfg.max_fillers.max(min))
            };
            for _ in 0..n_fill {
                let f = templates.fillers.choose(&mut rng).expect("non-empty");
                draft.sentences.push((f.text.clone(), Vec::new()));
            }
            if draft.sentences.is_empty() {
                return Err(CorpusError::InvalidConfig(
                    "a review ended up with no sentences; add filler templates".into(),
                ));
            }
            draft.sentences.shuffle(&mut rng);
            let text = draft
                .sentences
                .iter()
                .map(|(s, _)| capitalize(s))
                .collect::<Vec<_>>()
                .join(" ");
            if split_sentences(&normalize(&text), &abbreviations).len() != draft.sentences.len() {
                return Err(CorpusError::InvalidConfig(format!(
                    "templates do not split back into {} sentences: {text:?}",
                    draft.sentences.len()
                )));
            }
            let mut review = Review::new(user.clone(), format!("p{i:04}{}", ['a', 'b'][side]), text);
            review.sentence_aspects = Some(draft.sentences.into_iter().map(|(_, a)| a).collect());
            review.planted_scores = Some(draft.planted);
            reviews.push(review);
        }
        let second = reviews.pop().expect("two reviews");
        let first = reviews.pop().expect("two reviews");
        let gold = AspectMap::from_fn(|a| {
            planted_label(
                first.planted_scores.as_ref().and_then(|p| p.get(&a).copied()),
                second.planted_scores.as_ref().and_then(|p| p.get(&a).copied()),
                cfg.epsilon,
            )
        });
        pairs.push(ReviewPair { first, second, gold });
    }

    Corpus::new(
        pairs,
        Provenance::Generated {
            seed,
            config_digest: cfg.digest(&templates, &lexicon),
        },
    )
}

impl Draft {
    fn new() -> Self {
        Draft {
            sentences: Vec::new(),
            planted: BTreeMap::new(),
        }
    }
}
