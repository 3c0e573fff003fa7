//! Evaluation: confusion matrices and P/R/F1, per-aspect reports,
//! faithfulness curves and the ablation driver.

mod ablation;
pub mod cli;
mod faithfulness;
mod metrics;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::EvalConfig;
use crate::corpus::{AspectId, AspectMap, ComparativeLabel, Corpus};
use crate::fusion::Prediction;
use crate::pipeline::{PipelineError, PipelineModel};

pub use ablation::{run_ablation, run_ablation_from, write_ablation_csv, AblationReport, AblationRow};
pub use faithfulness::{
    default_ks, faithfulness_curve, faithfulness_curves, rank_adjectives, write_faithfulness_csv, FaithfulnessCurve,
    RankedInstance, Strategy,
};
pub use metrics::{confusion, micro_macro, ConfusionMatrix, Metrics, NullPolicy, NullStats, Prf};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("gold and predicted label counts differ or are zero ({gold} vs {pred})")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("no instance is evaluated under the null policy")]
    EmptyEvaluation,
    #[error("test set is empty")]
    EmptyTestSet,
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub null_policy: NullPolicy,
    pub oracle_aspects: bool,
    pub pairs: usize,
    pub overall: Metrics,
    pub confusion: ConfusionMatrix,
    /// `None` for an aspect with no evaluated instance.
    pub per_aspect: AspectMap<Option<Metrics>>,
}

/// Gold and predicted labels flattened over (pair, aspect).
fn flatten_labels(
    corpus: &Corpus,
    preds: &[AspectMap<Prediction>],
    only: Option<AspectId>,
) -> (Vec<ComparativeLabel>, Vec<ComparativeLabel>) {
    corpus
        .pairs
        .iter()
        .zip(preds)
        .flat_map(|(pair, pred)| {
            AspectId::ALL
                .into_iter()
                .filter(move |&a| only.is_none_or(|o| o == a))
                .map(move |a| (pair.gold[a], pred[a].label))
        })
        .unzip()
}

pub fn evaluate_predictions(
    corpus: &Corpus,
    preds: &[AspectMap<Prediction>],
    eval: &EvalConfig,
) -> Result<EvalReport, HarnessError> {
    if corpus.is_empty() {
        return Err(HarnessError::EmptyTestSet);
    }
    if corpus.len() != preds.len() {
        return Err(HarnessError::LengthMismatch {
            gold: corpus.len(),
            pred: preds.len(),
        });
    }
    let (gold, pred) = flatten_labels(corpus, preds, None);
    let cm = confusion(&gold, &pred, eval.null_policy)?;
    let overall = micro_macro(&cm)?;
    let per_aspect = AspectMap::from_fn(|a| {
        let (g, p) = flatten_labels(corpus, preds, Some(a));
        confusion(&g, &p, eval.null_policy).ok().and_then(|cm| micro_macro(&cm).ok())
    });
    Ok(EvalReport {
        null_policy: eval.null_policy,
        oracle_aspects: eval.oracle_aspects,
        pairs: corpus.len(),
        overall,
        confusion: cm,
        per_aspect,
    })
}

pub fn evaluate(model: &PipelineModel, corpus: &Corpus, eval: &EvalConfig) -> Result<EvalReport, HarnessError> {
    let preds = model.predict_corpus(corpus, eval.oracle_aspects)?;
    evaluate_predictions(corpus, &preds, eval)
}

/// Fixed-width table: one row per aspect plus the overall row, micro and
/// macro P/R/F1 as columns.
pub fn per_aspect_table(report: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<10} {:>7} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "aspect", "n", "micro_p", "micro_r", "micro_f1", "macro_p", "macro_r", "macro_f1"
    );
    let rows = report
        .per_aspect
        .iter()
        .map(|(a, m)| (a.name(), m.as_ref()))
        .chain([("overall", Some(&report.overall))]);
    for (name, m) in rows {
        match m {
            Some(m) => {
                let _ = writeln!(
                    s,
                    "{:<10} {:>7} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
                    name,
                    m.evaluated,
                    m.micro.precision,
                    m.micro.recall,
                    m.micro.f1,
                    m.macro_avg.precision,
                    m.macro_avg.recall,
                    m.macro_avg.f1
                );
            }
            None => {
                let _ = writeln!(s, "{name:<10} {:>7} {:>8}", 0, "-");
            }
        }
    }
    s
}
