use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{PreprocessError, Sentence};
use crate::corpus::AspectId;
use crate::tfidf::{sparse_dot, SparseRow, TfIdfModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            learning_rate: 1.0,
            epochs: 300,
            l2: 1e-4,
            threshold: 0.5,
            seed: 0,
        }
    }
}

/// One-vs-rest logistic model deciding whether a sentence talks about `aspect`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectClassifier {
    pub aspect: AspectId,
    pub tfidf: TfIdfModel,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub threshold: f64,
    pub seed: u64,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Mean binary cross-entropy plus `l2/2 * |w|^2`, with its gradient in
/// `(weights, bias)`.
pub fn classifier_loss_and_grad(
    features: &[SparseRow],
    labels: &[u8],
    weights: &[f64],
    bias: f64,
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let n = features.len() as f64;
    let mut gw = vec![0.0; weights.len()];
    let mut gb = 0.0;
    let mut loss = 0.0;
    for (x, &y) in features.iter().zip(labels) {
        let z = sparse_dot(x, weights) + bias;
        // BCE with logits: softplus(z) - y z
        loss += softplus(z) - f64::from(y) * z;
        let r = sigmoid(z) - f64::from(y);
        for &(j, v) in x {
            gw[j] += r * v;
        }
        gb += r;
    }
    loss /= n;
    gb /= n;
    let mut reg = 0.0;
    for (g, w) in gw.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
        reg += w * w;
    }
    (loss + 0.5 * l2 * reg, gw, gb)
}

pub fn train_aspect_classifier(
    sentences: &[Sentence],
    labels: &[u8],
    aspect: AspectId,
    cfg: &ClassifierConfig,
) -> Result<AspectClassifier, PreprocessError> {
    train_aspect_classifier_logged(sentences, labels, aspect, cfg).map(|(c, _)| c)
}

/// Full-batch gradient descent; also returns the loss after every epoch.
pub fn train_aspect_classifier_logged(
    sentences: &[Sentence],
    labels: &[u8],
    aspect: AspectId,
    cfg: &ClassifierConfig,
) -> Result<(AspectClassifier, Vec<f64>), PreprocessError> {
    if sentences.len() != labels.len() || sentences.is_empty() {
        return Err(PreprocessError::LengthMismatch {
            sentences: sentences.len(),
            labels: labels.len(),
        });
    }
    if !(cfg.threshold > 0.0 && cfg.threshold < 1.0) {
        return Err(PreprocessError::InvalidConfig(format!("threshold {} not in (0,1)", cfg.threshold)));
    }
    if !(cfg.learning_rate > 0.0) {
        return Err(PreprocessError::InvalidConfig("learning_rate must be positive".into()));
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(PreprocessError::DegenerateLabels(aspect));
    }

    let docs: Vec<&[String]> = sentences.iter().map(|s| s.tokens.as_slice()).collect();
    let tfidf = TfIdfModel::fit(&docs);
    let features: Vec<SparseRow> = docs.iter().map(|d| tfidf.transform(d)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = Normal::new(0.0, 0.01).expect("valid normal");
    let mut weights: Vec<f64> = (0..tfidf.dim()).map(|_| init.sample(&mut rng)).collect();
    let mut bias = 0.0;
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let (_, gw, gb) = classifier_loss_and_grad(&features, labels, &weights, bias, cfg.l2);
        for (w, g) in weights.iter_mut().zip(&gw) {
            *w -= cfg.learning_rate * g;
        }
        bias -= cfg.learning_rate * gb;
        let (loss, _, _) = classifier_loss_and_grad(&features, labels, &weights, bias, cfg.l2);
        history.push(loss);
    }
    log::debug!(
        "aspect classifier {aspect}: loss {:.4} -> {:.4}",
        history.first().copied().unwrap_or(f64::NAN),
        history.last().copied().unwrap_or(f64::NAN)
    );
    Ok((
        AspectClassifier {
            aspect,
            tfidf,
            weights,
            bias,
            threshold: cfg.threshold,
            seed: cfg.seed,
        },
        history,
    ))
}

impl AspectClassifier {
    pub fn probability(&self, tokens: &[String]) -> f64 {
        let x = self.tfidf.transform(tokens);
        sigmoid(sparse_dot(&x, &self.weights) + self.bias)
    }

    /// Strictly above threshold; a tie is negative.
    pub fn classify(&self, tokens: &[String]) -> bool {
        self.probability(tokens) > self.threshold
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn sentence(text: &str) -> Sentence {
        Sentence {
            text: text.to_string(),
            tokens: crate::preprocess::tokenize(text),
            origin: ("r".into(), 0),
        }
    }

    /// Separable toy data: positives mention one of the aspect cue words.
    fn separable(n: usize, seed: u64) -> (Vec<Sentence>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cues = ["taste", "flavor", "tastes", "finish"];
        let other = ["head", "aroma", "body", "glass", "tap", "store", "color", "nose"];
        let fill = ["the", "is", "very", "quite", "a", "it", "really"];
        let adj = ["good", "bad", "bland", "nice", "great"];
        let mut s = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let pos = i % 2 == 0;
            let key = if pos { cues[rng.gen_range(0..cues.len())] } else { other[rng.gen_range(0..other.len())] };
            let text = format!(
                "{} {} {} {}",
                fill[rng.gen_range(0..fill.len())],
                key,
                fill[rng.gen_range(0..fill.len())],
                adj[rng.gen_range(0..adj.len())]
            );
            s.push(sentence(&text));
            y.push(pos as u8);
        }
        (s, y)
    }

    #[test]
    fn separable_data_held_out_accuracy() {
        let (s, y) = separable(200, 1);
        let c = train_aspect_classifier(&s, &y, AspectId::Taste, &ClassifierConfig::default()).unwrap();
        let (ts, ty) = separable(200, 2);
        let correct = ts.iter().zip(&ty).filter(|(s, &y)| c.classify(&s.tokens) == (y == 1)).count();
        assert!(correct as f64 / ts.len() as f64 >= 0.95, "accuracy {correct}/200");
    }

    #[test]
    fn loss_is_non_increasing() {
        let (s, y) = separable(120, 3);
        let (_, hist) = train_aspect_classifier_logged(&s, &y, AspectId::Taste, &ClassifierConfig::default()).unwrap();
        for w in hist.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn single_class_is_degenerate() {
        let s = vec![sentence("the taste"), sentence("flavor")];
        let r = train_aspect_classifier(&s, &[1, 1], AspectId::Taste, &ClassifierConfig::default());
        assert!(matches!(r, Err(PreprocessError::DegenerateLabels(AspectId::Taste))));
    }

    #[test]
    fn same_seed_same_weights() {
        let (s, y) = separable(60, 4);
        let cfg = ClassifierConfig { seed: 11, ..Default::default() };
        let a = train_aspect_classifier(&s, &y, AspectId::Taste, &cfg).unwrap();
        let b = train_aspect_classifier(&s, &y, AspectId::Taste, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn threshold_tie_is_negative() {
        let (s, y) = separable(20, 5);
        let mut c = train_aspect_classifier(&s, &y, AspectId::Taste, &ClassifierConfig::default()).unwrap();
        c.weights.iter_mut().for_each(|w| *w = 0.0);
        c.bias = 0.0;
        // sigmoid(0) == 0.5 == threshold
        assert_eq!(c.probability(&s[0].tokens), 0.5);
        assert!(!c.classify(&s[0].tokens));
    }
}
