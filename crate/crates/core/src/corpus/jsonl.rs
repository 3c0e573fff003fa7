use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use super::{AspectId, AspectMap, ComparativeLabel, Corpus, CorpusError, Provenance, RatingScore, Review, ReviewPair};

/// Reads a newline-delimited JSON corpus, one review pair per line.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let file = fs::File::open(path)?;
    let pairs = parse_lines(BufReader::new(file))?;
    Corpus::new(
        pairs,
        Provenance::File {
            source: path.to_path_buf(),
        },
    )
}

/// Parses JSONL text already in memory.
pub fn parse_corpus(text: &str) -> Result<Corpus, CorpusError> {
    let pairs = parse_lines(text.as_bytes())?;
    Corpus::new(pairs, Provenance::InMemory)
}

fn parse_lines(reader: impl BufRead) -> Result<Vec<ReviewPair>, CorpusError> {
    let mut pairs = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| CorpusError::ParseError {
            line: line_no,
            message: e.to_string(),
        })?;
        let pair = parse_record(&value, line_no)?;
        for r in [&pair.first, &pair.second] {
            if !seen.insert(r.review_id.clone()) {
                return Err(CorpusError::DuplicateReview {
                    id: r.review_id.clone(),
                    line: line_no,
                });
            }
        }
        pairs.push(pair);
    }
    Ok(pairs)
}

fn missing(field: &str, line: usize) -> CorpusError {
    CorpusError::MissingField {
        field: field.to_string(),
        line,
    }
}

fn str_field<'a>(obj: &'a Map<String, Value>, key: &str, path: &str, line: usize) -> Result<&'a str, CorpusError> {
    obj.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| missing(path, line))
}

fn parse_record(value: &Value, line: usize) -> Result<ReviewPair, CorpusError> {
    let obj = value.as_object().ok_or_else(|| CorpusError::ParseError {
        line,
        message: "record is not a JSON object".into(),
    })?;
    let user_id = str_field(obj, "user_id", "user_id", line)?;
    let first = parse_review(obj.get("first"), "first", user_id, line)?;
    let second = parse_review(obj.get("second"), "second", user_id, line)?;
    if first.user_id != second.user_id {
        return Err(CorpusError::UserMismatch { line });
    }

    let gold_obj = obj
        .get("gold")
        .and_then(Value::as_object)
        .ok_or_else(|| missing("gold", line))?;
    let mut gold = AspectMap([ComparativeLabel::Null; 4]);
    for a in AspectId::ALL {
        let path = format!("gold.{a}");
        let v = gold_obj.get(a.name()).ok_or_else(|| missing(&path, line))?;
        let code = match v {
            Value::Null => None,
            Value::Number(n) => Some(n.as_i64().ok_or_else(|| missing(&path, line))?),
            _ => return Err(missing(&path, line)),
        };
        gold[a] = ComparativeLabel::from_code(code).ok_or_else(|| missing(&path, line))?;
    }
    Ok(ReviewPair { first, second, gold })
}

fn parse_review(value: Option<&Value>, side: &str, pair_user: &str, line: usize) -> Result<Review, CorpusError> {
    let obj = value.and_then(Value::as_object).ok_or_else(|| missing(side, line))?;
    let review_id = str_field(obj, "review_id", &format!("{side}.review_id"), line)?;
    let text = str_field(obj, "text", &format!("{side}.text"), line)?;
    if text.trim().is_empty() {
        return Err(missing(&format!("{side}.text"), line));
    }
    let user_id = match obj.get("user_id") {
        None => pair_user,
        Some(v) => v.as_str().ok_or_else(|| missing(&format!("{side}.user_id"), line))?,
    };
    if user_id != pair_user {
        return Err(CorpusError::UserMismatch { line });
    }

    let planted_scores = match obj.get("planted") {
        None | Some(Value::Null) => None,
        Some(v) => {
            let path = format!("{side}.planted");
            let m = v.as_object().ok_or_else(|| missing(&path, line))?;
            let mut scores = BTreeMap::new();
            for (k, v) in m {
                let a: AspectId = k.parse().map_err(|_| missing(&path, line))?;
                let s = v.as_f64().ok_or_else(|| missing(&path, line))?;
                if !(0.0..=5.0).contains(&s) {
                    return Err(missing(&path, line));
                }
                scores.insert(a, s);
            }
            Some(scores)
        }
    };

    let sentence_aspects = match obj.get("sentence_aspects") {
        None | Some(Value::Null) => None,
        Some(v) => {
            let path = format!("{side}.sentence_aspects");
            let rows = v.as_array().ok_or_else(|| missing(&path, line))?;
            let mut out = Vec::with_capacity(rows.len());
            for row in rows {
                let row = row.as_array().ok_or_else(|| missing(&path, line))?;
                let mut aspects = Vec::with_capacity(row.len());
                for a in row {
                    let a = a
                        .as_str()
                        .and_then(|s| s.parse::<AspectId>().ok())
                        .ok_or_else(|| missing(&path, line))?;
                    aspects.push(a);
                }
                out.push(aspects);
            }
            Some(out)
        }
    };

    Ok(Review {
        user_id: user_id.to_string(),
        review_id: review_id.to_string(),
        text: text.to_string(),
        planted_scores,
        sentence_aspects,
    })
}

#[derive(Serialize)]
struct ReviewOut<'a> {
    review_id: &'a str,
    text: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    planted: Option<&'a BTreeMap<AspectId, RatingScore>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sentence_aspects: Option<&'a Vec<Vec<AspectId>>>,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    user_id: &'a str,
    first: ReviewOut<'a>,
    second: ReviewOut<'a>,
    gold: &'a AspectMap<ComparativeLabel>,
}

impl<'a> From<&'a Review> for ReviewOut<'a> {
    fn from(r: &'a Review) -> Self {
        ReviewOut {
            review_id: &r.review_id,
            text: &r.text,
            planted: r.planted_scores.as_ref(),
            sentence_aspects: r.sentence_aspects.as_ref(),
        }
    }
}

/// Writes pairs as JSONL to any writer.
pub fn write_corpus(corpus: &Corpus, mut w: impl Write) -> std::io::Result<()> {
    for p in &corpus.pairs {
        let rec = RecordOut {
            user_id: p.user_id(),
            first: (&p.first).into(),
            second: (&p.second).into(),
            gold: &p.gold,
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let file = fs::File::create(path)?;
    write_corpus(corpus, std::io::BufWriter::new(file))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = concat!(
        r#"{"user_id":"u1","first":{"review_id":"a","text":"Great taste."},"second":{"review_id":"b","text":"Bland taste."},"gold":{"appearance":null,"aroma":null,"palate":null,"taste":1}}"#,
        "\n",
        r#"{"user_id":"u2","first":{"review_id":"c","text":"Nice head."},"second":{"review_id":"d","text":"Nice head too."},"gold":{"appearance":0,"aroma":null,"palate":null,"taste":null}}"#,
        "\n"
    );

    #[test]
    fn loads_two_pairs_and_records_source() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.jsonl");
        fs::write(&path, TWO).unwrap();
        let c = load_corpus(&path).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.meta, Provenance::File { source: path.clone() });
        assert_eq!(c.pairs[0].gold[AspectId::Taste], ComparativeLabel::Better);
        assert_eq!(c.pairs[1].gold[AspectId::Appearance], ComparativeLabel::Similar);
        assert_eq!(c.pairs[1].second.user_id, "u2");
    }

    #[test]
    fn user_mismatch_is_reported() {
        let line = r#"{"user_id":"u1","first":{"review_id":"a","text":"x."},"second":{"review_id":"b","user_id":"u9","text":"y."},"gold":{"appearance":null,"aroma":null,"palate":null,"taste":1}}"#;
        match parse_corpus(line) {
            Err(CorpusError::UserMismatch { line: 1 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        fs::write(&path, "").unwrap();
        assert!(matches!(load_corpus(&path), Err(CorpusError::EmptyCorpus)));
    }

    #[test]
    fn missing_gold_aspect_names_field_and_line() {
        let text = format!(
            "{}\n{}",
            TWO.lines().next().unwrap(),
            r#"{"user_id":"u3","first":{"review_id":"e","text":"x."},"second":{"review_id":"f","text":"y."},"gold":{"appearance":null,"aroma":null,"taste":1}}"#
        );
        match parse_corpus(&text) {
            Err(CorpusError::MissingField { field, line }) => {
                assert_eq!(field, "gold.palate");
                assert_eq!(line, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_json_reports_line() {
        let text = format!("{}\n{{not json", TWO.lines().next().unwrap());
        assert!(matches!(parse_corpus(&text), Err(CorpusError::ParseError { line: 2, .. })));
    }

    #[test]
    fn bad_label_code_rejected() {
        let line = r#"{"user_id":"u1","first":{"review_id":"a","text":"x."},"second":{"review_id":"b","text":"y."},"gold":{"appearance":2,"aroma":null,"palate":null,"taste":1}}"#;
        assert!(matches!(parse_corpus(line), Err(CorpusError::MissingField { .. })));
    }

    #[test]
    fn duplicate_review_ids_rejected() {
        let line = r#"{"user_id":"u1","first":{"review_id":"a","text":"x."},"second":{"review_id":"a","text":"y."},"gold":{"appearance":null,"aroma":null,"palate":null,"taste":1}}"#;
        assert!(matches!(parse_corpus(line), Err(CorpusError::DuplicateReview { .. })));
    }

    #[test]
    fn save_then_load_is_field_for_field() {
        let c = parse_corpus(TWO).unwrap();
        let mut buf = Vec::new();
        write_corpus(&c, &mut buf).unwrap();
        let back = parse_corpus(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.pairs, c.pairs);
        assert_eq!(std::str::from_utf8(&buf).unwrap(), TWO);
    }
}
