//! Trains the full pipeline and prints held-out metrics per aspect.
//!
//! cargo run --release --example train_and_evaluate -- [n_pairs]

use pairwise_opinion::config::PipelineConfig;
use pairwise_opinion::corpus::{generate_synthetic, split};
use pairwise_opinion::harness::{evaluate, per_aspect_table};
use pairwise_opinion::pipeline::{train_pipeline, Variant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n_pairs = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(300);
    let mut cfg = PipelineConfig::default();
    cfg.generator.n_pairs = n_pairs;

    let corpus = generate_synthetic(&cfg.generator, cfg.seed)?;
    let (train, _val, test) = split(&corpus, cfg.split_ratios(), cfg.split_seed())?;
    let (model, report) = train_pipeline(&train, &cfg, Variant::Full)?;
    println!(
        "trained on {} aspect examples ({} fallback sentences)",
        report.examples, report.fallback_sentences
    );

    let eval = evaluate(&model, &test, &cfg.eval)?;
    print!("{}", per_aspect_table(&eval));
    println!("rejected by the null gate: {}", eval.confusion.rejected().iter().sum::<usize>());
    Ok(())
}
