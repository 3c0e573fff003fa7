use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ScoringError;
use crate::corpus::RatingScore;
use crate::preprocess::{normalize, Sentence};

/// Adjective sentiment dictionary with ratings on the 0 to 5 scale.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Lexicon {
    entries: BTreeMap<String, RatingScore>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, word: &str, score: RatingScore) -> Result<(), ScoringError> {
        if !(0.0..=5.0).contains(&score) {
            return Err(ScoringError::ScoreOutOfRange(score));
        }
        self.entries.insert(normalize(word), score);
        Ok(())
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, RatingScore)>) -> Result<Self, ScoringError> {
        let mut lex = Lexicon::new();
        for (w, s) in pairs {
            lex.insert(w, s)?;
        }
        Ok(lex)
    }

    /// Parses `adjective<TAB>score` lines; blank lines and `#` comments are skipped.
    pub fn parse_tsv(text: &str) -> Result<Self, ScoringError> {
        let mut lex = Lexicon::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let bad = |msg: &str| ScoringError::LexiconFormat {
                line: i + 1,
                message: msg.to_string(),
            };
            let (word, score) = line.split_once('\t').ok_or_else(|| bad("expected adjective<TAB>score"))?;
            let score: f64 = score.trim().parse().map_err(|_| bad("score is not a number"))?;
            if !(0.0..=5.0).contains(&score) {
                return Err(bad("score outside [0, 5]"));
            }
            if word.trim().is_empty() {
                return Err(bad("empty adjective"));
            }
            lex.entries.insert(normalize(word), score);
        }
        Ok(lex)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScoringError> {
        Lexicon::parse_tsv(&fs::read_to_string(path)?)
    }

    pub fn to_tsv(&self) -> String {
        self.entries.iter().map(|(w, s)| format!("{w}\t{s}\n")).collect()
    }

    pub fn get(&self, word: &str) -> Option<RatingScore> {
        self.entries.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, RatingScore)> {
        self.entries.iter().map(|(w, &s)| (w.as_str(), s))
    }
}

/// Mean lexicon score over the tokens found in the lexicon; `None` when no
/// token is a lexicon member.
pub fn lexicon_score_tokens(tokens: &[String], lexicon: &Lexicon) -> Option<RatingScore> {
    let (sum, n) = tokens
        .iter()
        .filter_map(|t| lexicon.get(t))
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn lexicon_score(sentence: &Sentence, lexicon: &Lexicon) -> Option<RatingScore> {
    lexicon_score_tokens(&sentence.tokens, lexicon)
}
