//! Shapley token attributions by `[MASK]` substitution: exact enumeration of
//! every coalition, and a seeded permutation-sampling estimator.

mod svg;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::AspectId;
use crate::preprocess::Side;
use crate::semantic::MASK;

pub use svg::render_svg;

#[derive(Debug, Error, PartialEq)]
pub enum ExplainError {
    #[error("coalition width {coalition} does not match {tokens} tokens")]
    WidthMismatch { coalition: usize, tokens: usize },
    #[error("{tokens} tokens exceed the exact-enumeration limit of {limit}")]
    TooManyTokens { tokens: usize, limit: usize },
    #[error("sampled Shapley needs at least one permutation")]
    ZeroPermutations,
}

/// Which token positions are kept; absent positions are masked.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Coalition {
    present: Vec<bool>,
}

impl Coalition {
    pub fn empty(width: usize) -> Self {
        Coalition {
            present: vec![false; width],
        }
    }

    pub fn full(width: usize) -> Self {
        Coalition {
            present: vec![true; width],
        }
    }

    /// Bit `i` of `bits` marks position `i` present.
    pub fn from_bits(bits: u64, width: usize) -> Self {
        Coalition {
            present: (0..width).map(|i| bits >> i & 1 == 1).collect(),
        }
    }

    pub fn from_present(present: Vec<bool>) -> Self {
        Coalition { present }
    }

    pub fn width(&self) -> usize {
        self.present.len()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.present[i]
    }

    pub fn insert(&mut self, i: usize) {
        self.present[i] = true;
    }

    pub fn size(&self) -> usize {
        self.present.iter().filter(|&&p| p).count()
    }

    pub fn present(&self) -> &[bool] {
        &self.present
    }
}

/// Replaces tokens outside the coalition with `[MASK]`.
pub fn mask_apply(tokens: &[String], coalition: &Coalition) -> Result<Vec<String>, ExplainError> {
    if tokens.len() != coalition.width() {
        return Err(ExplainError::WidthMismatch {
            coalition: coalition.width(),
            tokens: tokens.len(),
        });
    }
    Ok(tokens
        .iter()
        .zip(coalition.present())
        .map(|(t, &keep)| if keep { t.clone() } else { MASK.to_string() })
        .collect())
}

/// One explained input token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenRef {
    pub side: Side,
    pub pos: usize,
    pub text: String,
}

/// A pure function of a coalition returning a value in [0, 1] for each of
/// the three classes.
pub trait ValueFunction: Sync {
    fn n_features(&self) -> usize;

    fn value(&self, coalition: &Coalition) -> [f64; 3];

    fn tokens(&self) -> Vec<TokenRef> {
        (0..self.n_features())
            .map(|pos| TokenRef {
                side: Side::First,
                pos,
                text: format!("x{pos}"),
            })
            .collect()
    }
}

/// Wraps a closure over coalitions as a value function.
pub struct FnValue<F> {
    pub width: usize,
    pub f: F,
}

impl<F: Fn(&Coalition) -> [f64; 3] + Sync> ValueFunction for FnValue<F> {
    fn n_features(&self) -> usize {
        self.width
    }

    fn value(&self, coalition: &Coalition) -> [f64; 3] {
        (self.f)(coalition)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Exact,
    Sampled { n_perm: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    pub tokens: Vec<TokenRef>,
    pub phi: Vec<[f64; 3]>,
    pub phi0: [f64; 3],
    /// Value of the full (unmasked) input.
    pub full: [f64; 3],
    pub method: Method,
    /// Standard error of each sampled estimate; `None` in exact mode.
    pub std_err: Option<Vec<[f64; 3]>>,
}

impl Attribution {
    /// Additive surrogate `phi0 + sum of phi over present tokens`.
    pub fn surrogate(&self, coalition: &Coalition) -> [f64; 3] {
        let mut g = self.phi0;
        for (i, p) in self.phi.iter().enumerate() {
            if coalition.contains(i) {
                for c in 0..3 {
                    g[c] += p[c];
                }
            }
        }
        g
    }

    /// Largest `|phi0[c] + sum_i phi[i][c] - f_c(x)|` over classes.
    pub fn efficiency_gap(&self) -> f64 {
        let g = self.surrogate(&Coalition::full(self.phi.len()));
        (0..3).map(|c| (g[c] - self.full[c]).abs()).fold(0.0, f64::max)
    }

    pub fn report(&self, aspect: AspectId, target: usize) -> AttributionReport {
        let importance = self.phi.iter().map(row_importance);
        AttributionReport {
            aspect,
            target,
            phi0: self.phi0,
            tokens: self
                .tokens
                .iter()
                .zip(&self.phi)
                .zip(importance)
                .map(|((t, phi), importance)| TokenReport {
                    side: t.side,
                    pos: t.pos,
                    text: t.text.clone(),
                    phi: *phi,
                    importance,
                })
                .collect(),
            method: self.method.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenReport {
    pub side: Side,
    pub pos: usize,
    pub text: String,
    pub phi: [f64; 3],
    pub importance: f64,
}

/// Serialized attribution of one aspect prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    pub aspect: AspectId,
    pub target: usize,
    pub phi0: [f64; 3],
    pub tokens: Vec<TokenReport>,
    pub method: Method,
}

/// `|S|! (M - |S| - 1)! / M!` for every coalition size `|S|` in `0..M`.
fn shapley_weights(m: usize) -> Vec<f64> {
    // 1 / (M * C(M-1, s)), with the binomial built up exactly for M <= 64
    let mut w = Vec::with_capacity(m);
    let mut binom = 1.0f64;
    for s in 0..m {
        w.push(1.0 / (m as f64 * binom));
        binom = binom * (m - 1 - s) as f64 / (s + 1) as f64;
    }
    w
}

/// Exact Shapley values: every one of the `2^M` coalitions is evaluated once.
pub fn exact_shapley(vf: &dyn ValueFunction, exact_limit: usize) -> Result<Attribution, ExplainError> {
    let m = vf.n_features();
    if m > exact_limit || m > 30 {
        return Err(ExplainError::TooManyTokens {
            tokens: m,
            limit: exact_limit.min(30),
        });
    }
    let values: Vec<[f64; 3]> = (0..1u64 << m)
        .into_par_iter()
        .map(|bits| vf.value(&Coalition::from_bits(bits, m)))
        .collect();
    let w = shapley_weights(m);
    let phi: Vec<[f64; 3]> = (0..m)
        .into_par_iter()
        .map(|i| {
            let bit = 1usize << i;
            let mut acc = [0.0; 3];
            for s in 0..values.len() {
                if s & bit != 0 {
                    continue;
                }
                let wt = w[s.count_ones() as usize];
                let (with, without) = (&values[s | bit], &values[s]);
                for c in 0..3 {
                    acc[c] += wt * (with[c] - without[c]);
                }
            }
            acc
        })
        .collect();
    Ok(Attribution {
        tokens: vf.tokens(),
        phi,
        phi0: values[0],
        full: values[values.len() - 1],
        method: Method::Exact,
        std_err: None,
    })
}

/// Independent stream for work item `index` under `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the combined key
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const PERMS_PER_TASK: usize = 16;

/// Permutation-sampling estimate: the mean marginal contribution of each token
/// over `n_perm` random insertion orders.
pub fn sampled_shapley(vf: &dyn ValueFunction, n_perm: usize, seed: u64) -> Result<Attribution, ExplainError> {
    if n_perm == 0 {
        return Err(ExplainError::ZeroPermutations);
    }
    let m = vf.n_features();
    let base = vf.value(&Coalition::empty(m));
    let full = vf.value(&Coalition::full(m));
    let tasks: Vec<usize> = (0..n_perm).step_by(PERMS_PER_TASK).collect();
    let partials: Vec<(Vec<[f64; 3]>, Vec<[f64; 3]>)> = tasks
        .par_iter()
        .map(|&start| {
            let mut sum = vec![[0.0; 3]; m];
            let mut sq = vec![[0.0; 3]; m];
            let mut order: Vec<usize> = (0..m).collect();
            for p in start..(start + PERMS_PER_TASK).min(n_perm) {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, p as u64));
                order.sort_unstable();
                order.shuffle(&mut rng);
                let mut s = Coalition::empty(m);
                let mut prev = base;
                for (step, &i) in order.iter().enumerate() {
                    s.insert(i);
                    let cur = if step + 1 == m { full } else { vf.value(&s) };
                    for c in 0..3 {
                        let d = cur[c] - prev[c];
                        sum[i][c] += d;
                        sq[i][c] += d * d;
                    }
                    prev = cur;
                }
            }
            (sum, sq)
        })
        .collect();
    let mut sum = vec![[0.0; 3]; m];
    let mut sq = vec![[0.0; 3]; m];
    for (ps, pq) in &partials {
        for i in 0..m {
            for c in 0..3 {
                sum[i][c] += ps[i][c];
                sq[i][c] += pq[i][c];
            }
        }
    }
    let n = n_perm as f64;
    let phi: Vec<[f64; 3]> = sum.iter().map(|s| s.map(|v| v / n)).collect();
    let std_err = phi
        .iter()
        .zip(&sq)
        .map(|(mean, q)| {
            let mut se = [0.0; 3];
            if n_perm > 1 {
                for c in 0..3 {
                    let var = ((q[c] - n * mean[c] * mean[c]) / (n - 1.0)).max(0.0);
                    se[c] = (var / n).sqrt();
                }
            }
            se
        })
        .collect();
    Ok(Attribution {
        tokens: vf.tokens(),
        phi,
        phi0: base,
        full,
        method: Method::Sampled { n_perm, seed },
        std_err: Some(std_err),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExplainScope {
    Fused,
    SemanticOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub exact_limit: usize,
    pub n_perm: usize,
    pub seed: u64,
    pub force_sampled: bool,
    pub scope: ExplainScope,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            exact_limit: 16,
            n_perm: 200,
            seed: 0,
            force_sampled: false,
            scope: ExplainScope::Fused,
        }
    }
}

/// Exact enumeration up to `exact_limit` tokens, sampling beyond.
pub fn explain(vf: &dyn ValueFunction, config: &ExplainConfig) -> Result<Attribution, ExplainError> {
    if config.force_sampled || vf.n_features() > config.exact_limit {
        sampled_shapley(vf, config.n_perm, config.seed)
    } else {
        exact_shapley(vf, config.exact_limit)
    }
}

fn row_importance(phi: &[f64; 3]) -> f64 {
    (phi[0].abs() + phi[1].abs() + phi[2].abs()) / 3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenImportance {
    /// Index into the attribution's token list.
    pub index: usize,
    pub token: TokenRef,
    pub importance: f64,
}

/// Mean absolute Shapley value over the three classes, most important first;
/// equal scores keep input order.
pub fn token_importance(attr: &Attribution) -> Vec<TokenImportance> {
    let mut out: Vec<TokenImportance> = attr
        .tokens
        .iter()
        .zip(&attr.phi)
        .enumerate()
        .map(|(index, (token, phi))| TokenImportance {
            index,
            token: token.clone(),
            importance: row_importance(phi),
        })
        .collect();
    out.sort_by(|a, b| b.importance.total_cmp(&a.importance));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(values: [f64; 4]) -> impl Fn(&Coalition) -> [f64; 3] + Sync {
        move |c: &Coalition| {
            let k = usize::from(c.contains(0)) | usize::from(c.contains(1)) << 1;
            [values[k]; 3]
        }
    }

    #[test]
    fn masking() {
        let t: Vec<String> = vec!["rich".into(), "taste".into()];
        assert_eq!(mask_apply(&t, &Coalition::from_bits(0b10, 2)).unwrap(), vec!["[MASK]", "taste"]);
        assert_eq!(mask_apply(&t, &Coalition::empty(2)).unwrap(), vec!["[MASK]", "[MASK]"]);
        assert_eq!(mask_apply(&t, &Coalition::full(2)).unwrap(), t);
        assert!(matches!(mask_apply(&t, &Coalition::full(3)), Err(ExplainError::WidthMismatch { .. })));
    }

    #[test]
    fn two_token_hand_enumeration() {
        let vf = FnValue {
            width: 2,
            f: table([0.0, 0.4, 0.2, 1.0]),
        };
        let a = exact_shapley(&vf, 16).unwrap();
        assert!((a.phi[0][0] - 0.6).abs() < 1e-12);
        assert!((a.phi[1][0] - 0.4).abs() < 1e-12);
        assert_eq!(a.phi0, [0.0; 3]);
        assert!(a.efficiency_gap() < 1e-12);
    }

    #[test]
    fn weights_sum_over_sizes() {
        for m in 1..20 {
            let w = shapley_weights(m);
            // each size s has C(m-1, s) coalitions excluding i
            let mut binom = 1.0;
            let mut total = 0.0;
            for (s, wt) in w.iter().enumerate() {
                total += wt * binom;
                binom = binom * (m - 1 - s) as f64 / (s + 1) as f64;
            }
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn limits_and_errors() {
        let vf = FnValue {
            width: 17,
            f: |_: &Coalition| [0.0; 3],
        };
        assert!(matches!(exact_shapley(&vf, 16), Err(ExplainError::TooManyTokens { tokens: 17, .. })));
        assert_eq!(sampled_shapley(&vf, 0, 1).unwrap_err(), ExplainError::ZeroPermutations);
        let a = explain(&vf, &ExplainConfig::default()).unwrap();
        assert!(matches!(a.method, Method::Sampled { .. }));
    }

    #[test]
    fn sampled_is_seed_deterministic() {
        let vf = FnValue {
            width: 5,
            f: |c: &Coalition| {
                let k = c.size() as f64 / 5.0;
                [k * k, 1.0 - k, if c.contains(2) { 0.5 } else { 0.1 }]
            },
        };
        let a = sampled_shapley(&vf, 100, 9).unwrap();
        let b = sampled_shapley(&vf, 100, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.efficiency_gap() < 1e-12);
        assert_ne!(sampled_shapley(&vf, 100, 10).unwrap().phi, a.phi);
    }

    #[test]
    fn importance_ordering() {
        let attr = Attribution {
            tokens: (0..3)
                .map(|pos| TokenRef {
                    side: Side::Second,
                    pos,
                    text: format!("t{pos}"),
                })
                .collect(),
            phi: vec![[0.0; 3], [0.3, -0.1, 0.2], [0.2, 0.2, -0.2]],
            phi0: [0.0; 3],
            full: [0.0; 3],
            method: Method::Exact,
            std_err: None,
        };
        let imp = token_importance(&attr);
        assert!((imp[0].importance - 0.2).abs() < 1e-15);
        assert_eq!(imp.iter().map(|t| t.index).collect::<Vec<_>>(), vec![1, 2, 0]);
        let json = serde_json::to_string(&attr.report(AspectId::Taste, 2)).unwrap();
        assert!(json.starts_with(r#"{"aspect":"taste","target":2,"phi0":[0.0,0.0,0.0],"tokens":[{"side":2,"pos":0"#));
        assert!(json.ends_with(r#""method":{"kind":"exact"}}"#));
    }
}
