use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{evaluate, HarnessError};
use crate::config::PipelineConfig;
use crate::corpus::Corpus;
use crate::pipeline::{train_pipeline, PipelineModel, Variant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub micro_f1: f64,
    pub macro_f1: f64,
    /// Macro-F1 of `full` minus this variant's; positive is a drop.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row(&self, variant: Variant) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }
}

/// Trains `full` and runs the ablation against it.
pub fn run_ablation(
    train: &Corpus,
    test: &Corpus,
    cfg: &PipelineConfig,
    variants: &[Variant],
) -> Result<AblationReport, HarnessError> {
    let (full, _) = train_pipeline(train, cfg, Variant::Full)?;
    run_ablation_from(&full, train, test, cfg, variants)
}

/// Evaluates each variant under the same seeds and split. Branch-removal
/// variants reuse the components of `full`, which under fixed seeds are
/// exactly what retraining them alone would produce; the other variants are
/// trained here. A `full` row always comes first.
pub fn run_ablation_from(
    full: &PipelineModel,
    train: &Corpus,
    test: &Corpus,
    cfg: &PipelineConfig,
    variants: &[Variant],
) -> Result<AblationReport, HarnessError> {
    if test.is_empty() {
        return Err(HarnessError::EmptyTestSet);
    }
    let mut order = vec![Variant::Full];
    for &v in variants {
        if !order.contains(&v) {
            order.push(v);
        }
    }
    let mut rows: Vec<AblationRow> = Vec::with_capacity(order.len());
    for v in order {
        let model = match v {
            Variant::Full => full.clone(),
            Variant::ConcatSingleClassifier => full.with_concat_head(train, cfg)?.0,
            _ => match full.restrict(v) {
                Some(m) => m,
                None => train_pipeline(train, cfg, v)?.0,
            },
        };
        let report = evaluate(&model, test, &cfg.eval)?;
        let base = rows.first().map_or(report.overall.macro_avg.f1, |r| r.macro_f1);
        log::info!("ablation {v}: macro F1 {:.4}", report.overall.macro_avg.f1);
        rows.push(AblationRow {
            variant: v,
            micro_f1: report.overall.micro.f1,
            macro_f1: report.overall.macro_avg.f1,
            delta: base - report.overall.macro_avg.f1,
        });
    }
    Ok(AblationReport { rows })
}

/// CSV with header `variant,micro_f1,macro_f1,delta`.
pub fn write_ablation_csv(report: &AblationReport, w: impl Write) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["variant", "micro_f1", "macro_f1", "delta"])?;
    for r in &report.rows {
        out.write_record([
            r.variant.name(),
            &r.micro_f1.to_string(),
            &r.macro_f1.to_string(),
            &r.delta.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
