//! Probability-sum fusion of the two branches and the Null gate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AspectId, ComparativeLabel};
use crate::preprocess::{AspectPairSet, Side};

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("logits must be finite, got {0:?}")]
    NonFiniteLogits([f64; 3]),
}

/// Probabilities ordered (Worse, Similar, Better).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassDistribution(pub [f64; 3]);

/// Sum of two class distributions; components in [0, 2], total 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FusedDistribution(pub [f64; 3]);

impl FusedDistribution {
    pub fn sum(a: &ClassDistribution, b: &ClassDistribution) -> Self {
        FusedDistribution([a.0[0] + b.0[0], a.0[1] + b.0[1], a.0[2] + b.0[2]])
    }

    /// A single branch standing in for both, so the scale matches the fused case.
    pub fn doubled(p: &ClassDistribution) -> Self {
        FusedDistribution(p.0.map(|v| 2.0 * v))
    }

    pub fn label(&self) -> ComparativeLabel {
        ComparativeLabel::from_class_index(argmax(&self.0))
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(v: &[f64; 3]) -> usize {
    let mut best = 0;
    for k in 1..3 {
        if v[k] > v[best] {
            best = k;
        }
    }
    best
}

pub fn softmax(logits: &[f64; 3]) -> Result<ClassDistribution, FusionError> {
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(FusionError::NonFiniteLogits(*logits));
    }
    Ok(ClassDistribution(crate::nn::softmax3(logits)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: ComparativeLabel,
    pub fused: Option<FusedDistribution>,
    /// (rating branch, semantic branch)
    pub branch_probs: Option<(Option<ClassDistribution>, Option<ClassDistribution>)>,
}

impl Prediction {
    pub fn null() -> Self {
        Prediction {
            label: ComparativeLabel::Null,
            fused: None,
            branch_probs: None,
        }
    }

    pub fn from_fused(q: FusedDistribution, p_r: Option<ClassDistribution>, p_s: Option<ClassDistribution>) -> Self {
        Prediction {
            label: q.label(),
            fused: Some(q),
            branch_probs: Some((p_r, p_s)),
        }
    }

    pub fn record(&self, aspect: AspectId) -> PredictionRecord {
        let (p_r, p_s) = self.branch_probs.unwrap_or((None, None));
        PredictionRecord {
            aspect,
            label: self.label,
            q: self.fused,
            p_r,
            p_s,
        }
    }
}

/// Serialized form of one aspect prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub aspect: AspectId,
    pub label: ComparativeLabel,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub q: Option<FusedDistribution>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_r: Option<ClassDistribution>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_s: Option<ClassDistribution>,
}

/// `q = softmax(l_r) + softmax(l_s)`, label = argmax q.
pub fn fuse_predict(l_r: &[f64; 3], l_s: &[f64; 3]) -> Result<Prediction, FusionError> {
    let p_r = softmax(l_r)?;
    let p_s = softmax(l_s)?;
    Ok(Prediction::from_fused(FusedDistribution::sum(&p_r, &p_s), Some(p_r), Some(p_s)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Proceed,
    Null,
}

pub fn null_gate(pair: &AspectPairSet, aspect: AspectId) -> Gate {
    if Side::BOTH.iter().any(|&s| pair.side(aspect, s).is_empty()) {
        Gate::Null
    } else {
        Gate::Proceed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::Sentence;
    use proptest::prelude::*;

    fn logit_of(p: [f64; 3]) -> [f64; 3] {
        p.map(f64::ln)
    }

    #[test]
    fn softmax_contract() {
        let p = softmax(&[0.0, 0.0, 0.0]).unwrap();
        assert!(p.0.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        let p = softmax(&[1000.0, 0.0, 0.0]).unwrap();
        assert!((p.0[0] - 1.0).abs() < 1e-12 && p.0[1] >= 0.0);
        assert!(matches!(softmax(&[f64::NAN, 0.0, 0.0]), Err(FusionError::NonFiniteLogits(_))));
        assert!(fuse_predict(&[0.0; 3], &[f64::INFINITY, 0.0, 0.0]).is_err());
    }

    #[test]
    fn worked_sum() {
        let pred = fuse_predict(&logit_of([0.5, 0.3, 0.2]), &logit_of([0.1, 0.6, 0.3])).unwrap();
        let q = pred.fused.unwrap().0;
        for (a, b) in q.iter().zip([0.6, 0.9, 0.5]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(pred.label, ComparativeLabel::Similar);
    }

    #[test]
    fn uniform_tie_goes_to_worse() {
        let pred = fuse_predict(&[0.0; 3], &[5.0; 3]).unwrap();
        assert_eq!(pred.label, ComparativeLabel::Worse);
        assert_eq!(argmax(&[1.0, 2.0, 2.0]), 1);
    }

    #[test]
    fn json_shape() {
        let pred = fuse_predict(&[0.0; 3], &[0.0; 3]).unwrap();
        let s = serde_json::to_string(&pred.record(AspectId::Taste)).unwrap();
        assert!(s.starts_with(r#"{"aspect":"taste","label":-1,"q":["#), "{s}");
        let s = serde_json::to_string(&Prediction::null().record(AspectId::Aroma)).unwrap();
        assert_eq!(s, r#"{"aspect":"aroma","label":null}"#);
    }

    fn sentence() -> Sentence {
        Sentence {
            text: "good .".into(),
            tokens: vec!["good".into(), ".".into()],
            origin: ("r".into(), 0),
        }
    }

    #[test]
    fn gate_rules() {
        let s = [sentence()];
        let both = AspectPairSet::assemble(&s, &s, |_, _, _| [true; 4]);
        assert_eq!(null_gate(&both, AspectId::Palate), Gate::Proceed);
        let first_empty = AspectPairSet::assemble(&[], &s, |_, _, _| [true; 4]);
        assert_eq!(null_gate(&first_empty, AspectId::Palate), Gate::Null);
        let none = AspectPairSet::assemble(&s, &s, |_, _, _| [false; 4]);
        assert_eq!(null_gate(&none, AspectId::Palate), Gate::Null);
    }

    proptest! {
        #[test]
        fn fused_sum_is_two_and_shift_invariant(
            lr in prop::array::uniform3(-50.0f64..50.0),
            ls in prop::array::uniform3(-50.0f64..50.0),
            cr in -100.0f64..100.0,
            cs in -100.0f64..100.0,
        ) {
            let a = fuse_predict(&lr, &ls).unwrap();
            let q = a.fused.unwrap().0;
            prop_assert!((q.iter().sum::<f64>() - 2.0).abs() < 1e-9);
            prop_assert!(q.iter().all(|v| (0.0..=2.0).contains(v)));
            let b = fuse_predict(&lr.map(|v| v + cr), &ls.map(|v| v + cs)).unwrap();
            prop_assert_eq!(a.label, b.label);
            let c = fuse_predict(&ls, &lr).unwrap();
            prop_assert_eq!(c.fused.unwrap().0, q);
        }
    }
}
