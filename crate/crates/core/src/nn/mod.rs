//! Small dense neural-network pieces shared by the rating and semantic branches:
//! tensors, the single-layer encoder, affine classification heads and a
//! deterministic minibatch SGD loop.

mod encoder;
mod tensor;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use encoder::{EncoderCache, EncoderInput, EncoderParams, EncoderShape};
pub use tensor::{dot, Parameters, Tensor};

/// Affine map from a `d`-vector to three class logits: `z · W + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl LinearHead {
    pub fn init(d: usize, rng: &mut impl rand::Rng) -> Self {
        LinearHead {
            weight: Tensor::normal(d, 3, 1.0 / (d as f64).sqrt(), rng),
            bias: Tensor::zeros(1, 3),
        }
    }

    pub fn zeros(d: usize) -> Self {
        LinearHead {
            weight: Tensor::zeros(d, 3),
            bias: Tensor::zeros(1, 3),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.rows
    }

    pub fn logits(&self, z: &[f64]) -> [f64; 3] {
        let mut l = self.weight.left_mul(z);
        tensor::add_assign(&mut l, &self.bias.data);
        [l[0], l[1], l[2]]
    }

    /// Accumulates head gradients and returns the gradient w.r.t. `z`.
    pub fn backward(&self, z: &[f64], d_logits: &[f64; 3], grads: &mut LinearHead) -> Vec<f64> {
        grads.weight.add_outer(z, d_logits);
        grads.bias.add_row(0, d_logits);
        self.weight.right_mul(d_logits)
    }
}

impl Parameters for LinearHead {
    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        vec![("weight", &self.weight), ("bias", &self.bias)]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        vec![("weight", &mut self.weight), ("bias", &mut self.bias)]
    }
}

/// Max-subtracted softmax over three logits.
pub fn softmax3(l: &[f64; 3]) -> [f64; 3] {
    let m = l[0].max(l[1]).max(l[2]);
    let e = l.map(|v| (v - m).exp());
    let s = e[0] + e[1] + e[2];
    e.map(|v| v / s)
}

/// Cross-entropy of `logits` against class `target`, with d loss / d logits.
pub fn cross_entropy(logits: &[f64; 3], target: usize) -> (f64, [f64; 3]) {
    let m = logits[0].max(logits[1]).max(logits[2]);
    let lse = m + logits.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    let p = softmax3(logits);
    let mut g = p;
    g[target] -= 1.0;
    (lse - logits[target], g)
}

/// Encoder followed by a three-way affine head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceClassifier {
    pub encoder: EncoderParams,
    pub head: LinearHead,
}

impl Parameters for SequenceClassifier {
    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        let mut v = self.encoder.tensors();
        v.extend(self.head.tensors().into_iter().map(|(n, t)| (head_name(n), t)));
        v
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        let mut v = self.encoder.tensors_mut();
        v.extend(self.head.tensors_mut().into_iter().map(|(n, t)| (head_name(n), t)));
        v
    }
}

fn head_name(n: &str) -> &'static str {
    match n {
        "weight" => "head_weight",
        _ => "head_bias",
    }
}

/// One training example: encoder input tokens and the gold class index.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    pub ids: Vec<usize>,
    pub segments: Vec<u8>,
    pub label: usize,
}

impl LabeledSequence {
    pub fn input(&self) -> EncoderInput<'_> {
        EncoderInput {
            ids: &self.ids,
            segments: &self.segments,
        }
    }
}

impl SequenceClassifier {
    pub fn logits(&self, input: &EncoderInput<'_>) -> [f64; 3] {
        self.head.logits(&self.encoder.forward(input))
    }

    /// Loss of one example; gradients are added into `grads`.
    pub fn loss_and_grad(&self, ex: &LabeledSequence, grads: &mut SequenceClassifier) -> f64 {
        let (z, cache) = self.encoder.forward_cached(&ex.input());
        let logits = self.head.logits(&z);
        let (loss, dl) = cross_entropy(&logits, ex.label);
        let dz = self.head.backward(&z, &dl, &mut grads.head);
        self.encoder.backward(&cache, &dz, &mut grads.encoder);
        loss
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 0.05,
            epochs: 30,
            batch_size: 16,
            seed: 0,
        }
    }
}

/// Examples per parallel work unit. Fixed so the reduction order, and hence
/// the result, does not depend on the number of worker threads.
const CHUNK: usize = 4;

/// Minibatch SGD with a seeded shuffle per epoch. Returns the mean training
/// loss of each epoch (accumulated while the epoch runs).
pub fn train_sgd<M, E, F>(model: &mut M, examples: &[E], cfg: &SgdConfig, loss_grad: F) -> Vec<f64>
where
    M: Parameters,
    E: Sync,
    F: Fn(&M, &E, &mut M) -> f64 + Sync,
{
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let bs = cfg.batch_size.max(1);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(bs) {
            let frozen: &M = model;
            let parts: Vec<(f64, M)> = batch
                .par_chunks(CHUNK)
                .map(|idx| {
                    let mut g = frozen.zeros_like();
                    let loss: f64 = idx.iter().map(|&i| loss_grad(frozen, &examples[i], &mut g)).sum();
                    (loss, g)
                })
                .collect();
            let mut grads = model.zeros_like();
            for (loss, g) in &parts {
                total += loss;
                grads.axpy(1.0, g);
            }
            model.axpy(-cfg.learning_rate / batch.len() as f64, &grads);
        }
        let mean = total / examples.len().max(1) as f64;
        log::debug!("epoch {epoch}: mean loss {mean:.5}");
        history.push(mean);
    }
    history
}

/// Worst relative error between an analytic gradient and central finite
/// differences, over every scalar parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    pub worst_tensor: String,
    pub checked: usize,
}

/// Compares `analytic` against central differences of `loss` with step `h`.
///
/// Relative error is `|a - n| / max(|a|, |n|, floor)`; the floor keeps
/// entries that are zero both ways from dividing by zero.
pub fn finite_difference_check<M: Parameters>(
    model: &M,
    analytic: &M,
    loss: impl Fn(&M) -> f64,
    h: f64,
    floor: f64,
) -> GradientCheck {
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    let mut worst_tensor = String::new();
    let mut checked = 0;
    let names: Vec<&'static str> = model.tensors().iter().map(|(n, _)| *n).collect();
    let analytic_t = analytic.tensors();
    for (ti, name) in names.iter().enumerate() {
        let len = analytic_t[ti].1.data.len();
        for j in 0..len {
            let orig = probe.tensors()[ti].1.data[j];
            probe.tensors_mut()[ti].1.data[j] = orig + h;
            let lp = loss(&probe);
            probe.tensors_mut()[ti].1.data[j] = orig - h;
            let lm = loss(&probe);
            probe.tensors_mut()[ti].1.data[j] = orig;
            let numeric = (lp - lm) / (2.0 * h);
            let a = analytic_t[ti].1.data[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            if rel > worst {
                worst = rel;
                worst_tensor = name.to_string();
            }
            checked += 1;
        }
    }
    GradientCheck {
        max_relative_error: worst,
        worst_tensor,
        checked,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_classifier(seed: u64) -> SequenceClassifier {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = EncoderShape {
            vocab_size: 6,
            d: 8,
            max_len: 8,
            heads: 2,
        };
        SequenceClassifier {
            encoder: EncoderParams::init(shape, &mut rng),
            head: LinearHead::init(8, &mut rng),
        }
    }

    fn samples() -> Vec<LabeledSequence> {
        vec![
            LabeledSequence {
                ids: vec![0, 2, 1, 3, 1],
                segments: vec![0, 0, 0, 1, 1],
                label: 2,
            },
            LabeledSequence {
                ids: vec![0, 4, 5, 1, 3, 1],
                segments: vec![0, 0, 0, 0, 1, 1],
                label: 0,
            },
        ]
    }

    #[test]
    fn softmax_and_cross_entropy() {
        let p = softmax3(&[0.0, 0.0, 0.0]);
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        let p = softmax3(&[1000.0, 0.0, 0.0]);
        assert!(p.iter().all(|v| v.is_finite()) && (p[0] - 1.0).abs() < 1e-12);
        let (loss, g) = cross_entropy(&[0.0, 0.0, 0.0], 1);
        assert!((loss - 3.0f64.ln()).abs() < 1e-12);
        assert!((g.iter().sum::<f64>()).abs() < 1e-15);
    }

    #[test]
    fn sequence_classifier_gradient_matches_finite_differences() {
        let model = tiny_classifier(5);
        let data = samples();
        let mut grads = model.zeros_like();
        for ex in &data {
            model.loss_and_grad(ex, &mut grads);
        }
        let loss = |m: &SequenceClassifier| {
            let mut scratch = m.zeros_like();
            data.iter().map(|ex| m.loss_and_grad(ex, &mut scratch)).sum::<f64>()
        };
        let check = finite_difference_check(&model, &grads, loss, 1e-5, 1e-6);
        assert!(check.max_relative_error <= 1e-4, "{check:?}");
        assert_eq!(check.checked, model.parameter_count());
    }

    #[test]
    fn sgd_is_deterministic_and_reduces_loss() {
        let data: Vec<LabeledSequence> = (0..24)
            .map(|i| LabeledSequence {
                ids: vec![0, 2 + i % 3, 1],
                segments: vec![0, 0, 0],
                label: i % 3,
            })
            .collect();
        let cfg = SgdConfig {
            learning_rate: 0.1,
            epochs: 40,
            batch_size: 8,
            seed: 1,
        };
        let run = || {
            let mut m = tiny_classifier(2);
            let h = train_sgd(&mut m, &data, &cfg, |m: &SequenceClassifier, ex, g| m.loss_and_grad(ex, g));
            (m, h)
        };
        let (m1, h1) = run();
        let (m2, h2) = run();
        assert_eq!(h1, h2);
        assert_eq!(m1, m2);
        assert!(h1.last().unwrap() < &(h1[0] * 0.5), "{h1:?}");
    }
}
