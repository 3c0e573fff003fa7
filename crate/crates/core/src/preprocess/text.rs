use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

const DEFAULT_ABBREVIATIONS: &str = include_str!("../../data/abbreviations.txt");

/// Unicode NFC, lowercase, whitespace runs collapsed to one space, trimmed.
pub fn normalize(text: &str) -> String {
    let lowered: String = text.nfc().collect::<String>().to_lowercase();
    let composed: String = lowered.nfc().collect();
    let mut out = String::with_capacity(composed.len());
    for word in composed.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Words that end in `.` without ending a sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Abbreviations(BTreeSet<String>);

impl Default for Abbreviations {
    fn default() -> Self {
        Abbreviations::parse(DEFAULT_ABBREVIATIONS)
    }
}

impl Abbreviations {
    /// One abbreviation per line; blank lines and `#` comments ignored.
    pub fn parse(text: &str) -> Self {
        Abbreviations(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(normalize)
                .collect(),
        )
    }

    pub fn extend_from(&mut self, text: &str) {
        self.0.extend(Abbreviations::parse(text).0);
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Splits normalized text after `.`, `!` or `?` when followed by whitespace,
/// unless the word ending there is a known abbreviation.
pub fn split_sentences(text: &str, abbreviations: &Abbreviations) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if !is_terminator(c) {
            continue;
        }
        let Some(&(j, next)) = chars.peek() else { break };
        if !next.is_whitespace() {
            continue;
        }
        let end = i + c.len_utf8();
        let word_start = text[start..end]
            .rfind(char::is_whitespace)
            .map(|k| start + k + 1)
            .unwrap_or(start);
        if abbreviations.contains(&text[word_start..end]) {
            continue;
        }
        let seg = text[start..end].trim();
        if !seg.is_empty() {
            out.push(seg.to_string());
        }
        start = j;
    }
    let rest = text[start..].trim();
    if !rest.is_empty() {
        out.push(rest.to_string());
    }
    out
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation() || (!c.is_alphanumeric() && !c.is_whitespace() && !c.is_control())
}

/// Whitespace split with punctuation characters broken out as their own tokens.
pub fn tokenize(sentence: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in sentence.split_whitespace() {
        let mut cur = String::new();
        for c in word.chars() {
            if is_punct(c) {
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
                tokens.push(c.to_string());
            } else {
                cur.push(c);
            }
        }
        if !cur.is_empty() {
            tokens.push(cur);
        }
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize("Great  TASTE!"), "great taste!");
        assert_eq!(normalize(""), "");
        assert_eq!(normalize("  \t a \n b  "), "a b");
        let decomposed = "Cafe\u{0301}";
        assert_eq!(normalize(decomposed), "caf\u{e9}");
        assert_eq!(normalize("CAFE\u{0301}"), "caf\u{e9}");
    }

    #[test]
    fn split_examples() {
        let ab = Abbreviations::default();
        assert_eq!(
            split_sentences("it pours dark. smells great.", &ab),
            vec!["it pours dark.", "smells great."]
        );
        assert_eq!(split_sentences("i drink it vs. the lager.", &ab), vec!["i drink it vs. the lager."]);
        assert_eq!(split_sentences("no terminator here", &ab), vec!["no terminator here"]);
        assert_eq!(split_sentences("wow!! really? yes.", &ab), vec!["wow!!", "really?", "yes."]);
        assert_eq!(split_sentences("version 1.5 is out. ok", &ab), vec!["version 1.5 is out.", "ok"]);
        assert!(split_sentences("", &ab).is_empty());
    }

    #[test]
    fn custom_abbreviations_extend_defaults() {
        let mut ab = Abbreviations::default();
        assert_eq!(split_sentences("an abv. of nine.", &ab).len(), 2);
        ab.extend_from("abv.\n");
        assert_eq!(split_sentences("an abv. of nine.", &ab).len(), 1);
        assert!(ab.contains("vs."));
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("rich, smooth taste"), vec!["rich", ",", "smooth", "taste"]);
        assert_eq!(tokenize("good!"), vec!["good", "!"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("it's"), vec!["it", "'", "s"]);
    }

    proptest! {
        #[test]
        fn normalize_idempotent(s in "\\PC{0,40}") {
            let once = normalize(&s);
            prop_assert_eq!(normalize(&once), once.clone());
        }

        #[test]
        fn tokens_rejoin_to_text(s in "[a-z ,.!?']{0,40}") {
            let n = normalize(&s);
            let joined: String = tokenize(&n).concat();
            let squeezed: String = n.chars().filter(|c| !c.is_whitespace()).collect();
            prop_assert_eq!(joined, squeezed);
        }

        #[test]
        fn split_has_no_empty_segments_and_keeps_text(s in "[a-z .!?]{0,60}") {
            let n = normalize(&s);
            let parts = split_sentences(&n, &Abbreviations::default());
            prop_assert!(parts.iter().all(|p| !p.trim().is_empty()));
            prop_assert_eq!(parts.join(" "), n);
        }
    }
}
