use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::corpus::ComparativeLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NullPolicy {
    /// Gold-Null instances are only tallied in `null_stats`; a Null
    /// prediction on a non-Null gold lands in the rejected column.
    #[default]
    ExcludeGoldNull,
    /// Null is a fourth class scored like the others.
    NullAsFourthClass,
}

impl std::str::FromStr for NullPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exclude-gold-null" => Ok(NullPolicy::ExcludeGoldNull),
            "null-as-fourth-class" => Ok(NullPolicy::NullAsFourthClass),
            _ => Err(format!("unknown null policy `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NullStats {
    pub gold_null: usize,
    pub predicted_null: usize,
    pub agreement: usize,
}

fn slot(label: ComparativeLabel) -> usize {
    label.class_index().unwrap_or(3)
}

/// Counts indexed `[gold][pred]` over Worse, Similar, Better, Null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub policy: NullPolicy,
    pub counts: [[usize; 4]; 4],
    pub null_stats: NullStats,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        match self.policy {
            NullPolicy::ExcludeGoldNull => 3,
            NullPolicy::NullAsFourthClass => 4,
        }
    }

    /// Non-Null gold instances predicted Null.
    pub fn rejected(&self) -> [usize; 3] {
        [0, 1, 2].map(|g| self.counts[g][3])
    }

    /// Instances that enter the metrics under the policy.
    pub fn evaluated(&self) -> usize {
        (0..self.n_classes()).map(|g| self.counts[g].iter().sum::<usize>()).sum()
    }

    /// (tp, fp, fn) of class `c`.
    pub fn class_counts(&self, c: usize) -> (usize, usize, usize) {
        let k = self.n_classes();
        let tp = self.counts[c][c];
        let fp = (0..k).filter(|&g| g != c).map(|g| self.counts[g][c]).sum();
        let fn_ = (0..4).filter(|&p| p != c).map(|p| self.counts[c][p]).sum();
        (tp, fp, fn_)
    }
}

pub fn confusion(
    gold: &[ComparativeLabel],
    pred: &[ComparativeLabel],
    policy: NullPolicy,
) -> Result<ConfusionMatrix, HarnessError> {
    if gold.len() != pred.len() || gold.is_empty() {
        return Err(HarnessError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let mut cm = ConfusionMatrix {
        policy,
        counts: [[0; 4]; 4],
        null_stats: NullStats::default(),
    };
    for (&g, &p) in gold.iter().zip(pred) {
        cm.null_stats.gold_null += g.is_null() as usize;
        cm.null_stats.predicted_null += p.is_null() as usize;
        cm.null_stats.agreement += (g.is_null() && p.is_null()) as usize;
        if g.is_null() && policy == NullPolicy::ExcludeGoldNull {
            continue;
        }
        cm.counts[slot(g)][slot(p)] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf { precision, recall, f1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub micro: Prf,
    pub macro_avg: Prf,
    /// Per class, `None` when the class has neither gold nor predicted instances.
    pub per_class: Vec<Option<Prf>>,
    pub evaluated: usize,
}

pub fn micro_macro(cm: &ConfusionMatrix) -> Result<Metrics, HarnessError> {
    let evaluated = cm.evaluated();
    if evaluated == 0 {
        return Err(HarnessError::EmptyEvaluation);
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    let mut per_class = Vec::new();
    for c in 0..cm.n_classes() {
        let (t, p, n) = cm.class_counts(c);
        tp += t;
        fp += p;
        fn_ += n;
        per_class.push((t + p + n > 0).then(|| Prf::from_counts(t, p, n)));
    }
    let active: Vec<&Prf> = per_class.iter().flatten().collect();
    let mean = |f: fn(&Prf) -> f64| active.iter().map(|p| f(p)).sum::<f64>() / active.len() as f64;
    Ok(Metrics {
        micro: Prf::from_counts(tp, fp, fn_),
        macro_avg: Prf {
            precision: mean(|p| p.precision),
            recall: mean(|p| p.recall),
            f1: mean(|p| p.f1),
        },
        per_class,
        evaluated,
    })
}
