//! Masks the most and the least important lexicon adjectives and reports
//! macro-F1 after each step.
//!
//! cargo run --release --example faithfulness

use pairwise_opinion::config::PipelineConfig;
use pairwise_opinion::corpus::{generate_synthetic, split};
use pairwise_opinion::harness::faithfulness_curves;
use pairwise_opinion::pipeline::{train_pipeline, Variant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = PipelineConfig::default();
    cfg.generator.n_pairs = 150;
    let corpus = generate_synthetic(&cfg.generator, cfg.seed)?;
    let (train, _val, test) = split(&corpus, cfg.split_ratios(), cfg.split_seed())?;
    let (model, _) = train_pipeline(&train, &cfg, Variant::Full)?;

    for curve in faithfulness_curves(&test, &model, &cfg.explain, &cfg.eval, None)? {
        let points: Vec<String> = curve.points.iter().map(|(k, f)| format!("k={k}: {f:.3}")).collect();
        println!("{:?}  {}", curve.strategy, points.join("  "));
    }
    Ok(())
}
