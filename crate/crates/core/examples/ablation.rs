//! Removes one branch at a time and compares macro-F1 against the full model.
//!
//! cargo run --release --example ablation

use pairwise_opinion::config::PipelineConfig;
use pairwise_opinion::corpus::{generate_synthetic, split};
use pairwise_opinion::harness::run_ablation;
use pairwise_opinion::pipeline::Variant;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = PipelineConfig::default();
    cfg.generator.n_pairs = 300;
    let corpus = generate_synthetic(&cfg.generator, cfg.seed)?;
    let (train, _val, test) = split(&corpus, cfg.split_ratios(), cfg.split_seed())?;

    let report = run_ablation(&train, &test, &cfg, &Variant::ALL)?;
    println!("{:<26} {:>8} {:>8} {:>8}", "variant", "micro", "macro", "drop");
    for r in &report.rows {
        println!("{:<26} {:>8.4} {:>8.4} {:>+8.4}", r.variant.name(), r.micro_f1, r.macro_f1, r.delta);
    }
    Ok(())
}
