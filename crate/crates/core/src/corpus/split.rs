use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Corpus, CorpusError, Provenance};

/// Seeded train/dev/test partition.
///
/// Dev and test sizes are `floor(n * ratio)`; whatever remains goes to train.
/// Each part keeps the original corpus order of its pairs.
pub fn split(corpus: &Corpus, ratios: (f64, f64, f64), seed: u64) -> Result<(Corpus, Corpus, Corpus), CorpusError> {
    let (tr, dv, te) = ratios;
    let ok = [tr, dv, te].iter().all(|r| r.is_finite() && *r > 0.0) && ((tr + dv + te) - 1.0).abs() <= 1e-9;
    if !ok {
        return Err(CorpusError::BadRatios(ratios));
    }
    let n = corpus.pairs.len();
    let n_dev = (n as f64 * dv + 1e-9).floor() as usize;
    let n_test = (n as f64 * te + 1e-9).floor() as usize;
    let n_train = n - n_dev - n_test;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let part = |idx: &[usize], name: &str| {
        let mut idx = idx.to_vec();
        idx.sort_unstable();
        Corpus {
            pairs: idx.iter().map(|&i| corpus.pairs[i].clone()).collect(),
            meta: Provenance::Split {
                parent: Box::new(corpus.meta.clone()),
                part: name.to_string(),
                seed,
            },
        }
    };
    Ok((
        part(&order[..n_train], "train"),
        part(&order[n_train..n_train + n_dev], "dev"),
        part(&order[n_train + n_dev..], "test"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AspectMap, ComparativeLabel, Review, ReviewPair};
    use std::collections::HashSet;

    fn corpus(n: usize) -> Corpus {
        let pairs = (0..n)
            .map(|i| ReviewPair {
                first: Review::new("u", format!("{i}a"), "a."),
                second: Review::new("u", format!("{i}b"), "b."),
                gold: AspectMap([ComparativeLabel::Null; 4]),
            })
            .collect();
        Corpus::new(pairs, Provenance::InMemory).unwrap()
    }

    fn ids(c: &Corpus) -> Vec<String> {
        c.pairs.iter().map(|p| p.first.review_id.clone()).collect()
    }

    #[test]
    fn sizes_floor_then_remainder() {
        let (a, b, c) = split(&corpus(10), (0.8, 0.1, 0.1), 1).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (8, 1, 1));
        let (a, b, c) = split(&corpus(7), (0.5, 0.25, 0.25), 1).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (5, 1, 1));
    }

    #[test]
    fn deterministic_and_disjoint() {
        let src = corpus(50);
        let (a1, b1, c1) = split(&src, (0.7, 0.1, 0.2), 9).unwrap();
        let (a2, b2, c2) = split(&src, (0.7, 0.1, 0.2), 9).unwrap();
        assert_eq!((ids(&a1), ids(&b1), ids(&c1)), (ids(&a2), ids(&b2), ids(&c2)));
        let mut all: Vec<String> = ids(&a1).into_iter().chain(ids(&b1)).chain(ids(&c1)).collect();
        let set: HashSet<_> = all.iter().cloned().collect();
        assert_eq!(set.len(), 50);
        all.sort();
        let mut want = ids(&src);
        want.sort();
        assert_eq!(all, want);
    }

    #[test]
    fn bad_ratios() {
        assert!(matches!(split(&corpus(3), (0.5, 0.5, 0.5), 0), Err(CorpusError::BadRatios(_))));
        assert!(matches!(split(&corpus(3), (1.0, 0.0, 0.0), 0), Err(CorpusError::BadRatios(_))));
    }
}
