use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate_predictions, HarnessError};
use crate::config::EvalConfig;
use crate::corpus::{AspectId, AspectMap, Corpus};
use crate::explain::{explain, token_importance, Coalition, ExplainConfig, ValueFunction};
use crate::fusion::Prediction;
use crate::pipeline::{aspect_sides, PipelineModel, PipelineValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    TopK,
    BottomK,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::TopK => "top_k",
            Strategy::BottomK => "bottom_k",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaithfulnessCurve {
    pub strategy: Strategy,
    /// (k, macro F1)
    pub points: Vec<(usize, f64)>,
}

/// One explained (pair, aspect) with its lexicon adjectives ranked by
/// importance, most important first.
pub struct RankedInstance<'a> {
    pub pair: usize,
    pub aspect: AspectId,
    pub value: PipelineValue<'a>,
    pub adjectives: Vec<usize>,
}

impl RankedInstance<'_> {
    /// The adjectives masked at `k` under `strategy`.
    pub fn removed(&self, strategy: Strategy, k: usize) -> &[usize] {
        let k = k.min(self.adjectives.len());
        match strategy {
            Strategy::TopK => &self.adjectives[..k],
            Strategy::BottomK => &self.adjectives[self.adjectives.len() - k..],
        }
    }
}

/// Explains every non-Null aspect prediction of the test set and ranks the
/// adjective tokens (scoring-lexicon members) in it.
pub fn rank_adjectives<'a>(
    model: &'a PipelineModel,
    test: &Corpus,
    explainer: &ExplainConfig,
    eval: &EvalConfig,
) -> Result<Vec<RankedInstance<'a>>, HarnessError> {
    let jobs: Vec<(usize, AspectId)> = (0..test.len())
        .flat_map(|i| AspectId::ALL.map(|a| (i, a)))
        .collect();
    let ranked = jobs
        .into_par_iter()
        .map(|(i, aspect)| {
            let sides = aspect_sides(model, &test.pairs[i], aspect, eval.oracle_aspects)?;
            if sides.iter().any(Vec::is_empty) {
                return Ok(None);
            }
            let value = PipelineValue::new(model, sides, explainer.scope.clone())?;
            let attribution = explain(&value, explainer).map_err(crate::pipeline::PipelineError::from)?;
            let adjectives = token_importance(&attribution)
                .into_iter()
                .filter(|t| model.lexicon.contains(&t.token.text))
                .map(|t| t.index)
                .collect();
            Ok(Some(RankedInstance {
                pair: i,
                aspect,
                value,
                adjectives,
            }))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(ranked.into_iter().flatten().collect())
}

/// `0..=k_max`, where `k_max` is the most adjectives in any instance.
pub fn default_ks(instances: &[RankedInstance<'_>]) -> Vec<usize> {
    let k_max = instances.iter().map(|r| r.adjectives.len()).max().unwrap_or(0);
    (0..=k_max).collect()
}

fn curve_from_ranking(
    model: &PipelineModel,
    test: &Corpus,
    instances: &[RankedInstance<'_>],
    ks: &[usize],
    strategy: Strategy,
    eval: &EvalConfig,
) -> Result<FaithfulnessCurve, HarnessError> {
    let baseline = model.predict_corpus(test, eval.oracle_aspects)?;
    let mut points = Vec::with_capacity(ks.len());
    for &k in ks {
        let masked = instances
            .par_iter()
            .map(|r| {
                let n = r.value.n_features();
                let mut keep = vec![true; n];
                for &i in r.removed(strategy, k) {
                    keep[i] = false;
                }
                let sides = r.value.masked(&Coalition::from_present(keep))?;
                Ok((r.pair, r.aspect, model.predict_sides(&sides)?))
            })
            .collect::<Result<Vec<_>, crate::pipeline::PipelineError>>()?;
        let mut preds: Vec<AspectMap<Prediction>> = baseline.clone();
        for (i, a, p) in masked {
            preds[i][a] = p;
        }
        let report = evaluate_predictions(test, &preds, eval)?;
        points.push((k, report.overall.macro_avg.f1));
    }
    Ok(FaithfulnessCurve { strategy, points })
}

/// Macro-F1 of the test set after masking the top- or bottom-ranked `k`
/// adjectives of every instance, for each `k` in `ks`.
pub fn faithfulness_curve(
    test: &Corpus,
    model: &PipelineModel,
    explainer: &ExplainConfig,
    eval: &EvalConfig,
    ks: &[usize],
    strategy: Strategy,
) -> Result<FaithfulnessCurve, HarnessError> {
    if test.is_empty() {
        return Err(HarnessError::EmptyTestSet);
    }
    let instances = rank_adjectives(model, test, explainer, eval)?;
    curve_from_ranking(model, test, &instances, ks, strategy, eval)
}

/// Both curves from one set of explanations; `ks` defaults to `0..=k_max`.
pub fn faithfulness_curves(
    test: &Corpus,
    model: &PipelineModel,
    explainer: &ExplainConfig,
    eval: &EvalConfig,
    ks: Option<&[usize]>,
) -> Result<[FaithfulnessCurve; 2], HarnessError> {
    if test.is_empty() {
        return Err(HarnessError::EmptyTestSet);
    }
    let instances = rank_adjectives(model, test, explainer, eval)?;
    let ks = ks.map(<[usize]>::to_vec).unwrap_or_else(|| default_ks(&instances));
    Ok([
        curve_from_ranking(model, test, &instances, &ks, Strategy::TopK, eval)?,
        curve_from_ranking(model, test, &instances, &ks, Strategy::BottomK, eval)?,
    ])
}

/// CSV with header `strategy,k,macro_f1`.
pub fn write_faithfulness_csv(curves: &[FaithfulnessCurve], w: impl Write) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["strategy", "k", "macro_f1"])?;
    for c in curves {
        for &(k, f1) in &c.points {
            out.write_record([c.strategy.name(), &k.to_string(), &f1.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}
