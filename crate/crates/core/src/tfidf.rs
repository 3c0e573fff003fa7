//! Term-frequency / inverse-document-frequency features over token lists.
//!
//! Raw counts, smoothed idf `ln((1 + n_docs) / (1 + df)) + 1`, rows scaled to
//! unit L2 norm. Tokens outside the fitted vocabulary are ignored.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

/// Sparse feature row as `(column, value)` pairs in ascending column order.
pub type SparseRow = Vec<(usize, f64)>;

pub fn sparse_dot(row: &[(usize, f64)], dense: &[f64]) -> f64 {
    row.iter().map(|&(j, v)| v * dense[j]).sum()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "TfIdfRepr", into = "TfIdfRepr")]
pub struct TfIdfModel {
    vocabulary: Vec<String>,
    idf: Vec<f64>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct TfIdfRepr {
    vocabulary: Vec<String>,
    idf: Vec<f64>,
}

impl From<TfIdfRepr> for TfIdfModel {
    fn from(r: TfIdfRepr) -> Self {
        let index = r.vocabulary.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        TfIdfModel {
            vocabulary: r.vocabulary,
            idf: r.idf,
            index,
        }
    }
}

impl From<TfIdfModel> for TfIdfRepr {
    fn from(m: TfIdfModel) -> Self {
        TfIdfRepr {
            vocabulary: m.vocabulary,
            idf: m.idf,
        }
    }
}

impl PartialEq for TfIdfModel {
    fn eq(&self, other: &Self) -> bool {
        self.vocabulary == other.vocabulary && self.idf == other.idf
    }
}

impl TfIdfModel {
    /// Fits vocabulary (sorted, so column order is deterministic) and idf weights.
    pub fn fit<D: AsRef<[String]>>(docs: &[D]) -> Self {
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in docs {
            let unique: BTreeSet<&str> = doc.as_ref().iter().map(String::as_str).collect();
            for t in unique {
                *df.entry(t).or_default() += 1;
            }
        }
        let n = docs.len() as f64;
        let vocabulary: Vec<String> = df.keys().map(|t| t.to_string()).collect();
        let idf = df.values().map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0).collect();
        TfIdfRepr { vocabulary, idf }.into()
    }

    pub fn dim(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn column(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn transform(&self, tokens: &[String]) -> SparseRow {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for t in tokens {
            if let Some(j) = self.column(t) {
                *counts.entry(j).or_default() += 1.0;
            }
        }
        let mut row: SparseRow = counts.into_iter().map(|(j, c)| (j, c * self.idf[j])).collect();
        let norm = row.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, v) in &mut row {
                *v /= norm;
            }
        }
        row
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn idf_matches_smoothed_formula() {
        let docs = vec![toks("a b"), toks("a c"), toks("a")];
        let m = TfIdfModel::fit(&docs);
        assert_eq!(m.vocabulary(), ["a", "b", "c"]);
        let n = 3.0f64;
        assert!((m.idf()[0] - (((1.0 + n) / 4.0f64).ln() + 1.0)).abs() < 1e-15);
        assert!((m.idf()[1] - (((1.0 + n) / 2.0f64).ln() + 1.0)).abs() < 1e-15);
        assert!(m.idf().iter().all(|&v| v >= 1.0));
    }

    #[test]
    fn transform_unit_norm_and_oov_zero() {
        let docs = vec![toks("a b b"), toks("c")];
        let m = TfIdfModel::fit(&docs);
        let row = m.transform(&toks("a b b z"));
        let norm: f64 = row.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        // raw tf: b counted twice
        let (a, b) = (row[0].1, row[1].1);
        assert!((b / a - 2.0 * m.idf()[1] / m.idf()[0]).abs() < 1e-12);
        assert!(m.transform(&toks("zz [MASK]")).is_empty());
    }

    #[test]
    fn serde_roundtrip_rebuilds_index() {
        let m = TfIdfModel::fit(&[toks("x y")]);
        let back: TfIdfModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.column("y"), Some(1));
    }
}
