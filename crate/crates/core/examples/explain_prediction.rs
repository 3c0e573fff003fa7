//! Explains one aspect prediction with Shapley values and writes the
//! attribution as JSON and SVG.
//!
//! cargo run --release --example explain_prediction

use pairwise_opinion::config::PipelineConfig;
use pairwise_opinion::corpus::{generate_synthetic, split, AspectId};
use pairwise_opinion::explain::{render_svg, token_importance};
use pairwise_opinion::pipeline::{explain_aspect, train_pipeline, Variant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = PipelineConfig::default();
    cfg.generator.n_pairs = 200;
    let corpus = generate_synthetic(&cfg.generator, cfg.seed)?;
    let (train, _val, test) = split(&corpus, cfg.split_ratios(), cfg.split_seed())?;
    let (model, _) = train_pipeline(&train, &cfg, Variant::Full)?;

    let (pair, aspect, ex) = test
        .pairs
        .iter()
        .flat_map(|p| AspectId::ALL.map(|a| (p, a)))
        .find_map(|(p, a)| explain_aspect(&model, p, a, &cfg.explain, false).ok().map(|ex| (p, a, ex)))
        .ok_or("no explainable prediction in the test split")?;

    println!("{}\n{}", pair.first.text, pair.second.text);
    println!(
        "{}: predicted {:?}, efficiency gap {:.1e}",
        aspect.name(),
        ex.prediction.label,
        ex.attribution.efficiency_gap()
    );
    for t in token_importance(&ex.attribution).iter().take(5) {
        println!("  {:?} {:<12} {:.4}", t.token.side, t.token.text, t.importance);
    }

    let report = ex.attribution.report(aspect, ex.target);
    let dir = std::env::temp_dir();
    std::fs::write(dir.join("attribution.json"), serde_json::to_string_pretty(&report)?)?;
    std::fs::write(dir.join("attribution.svg"), render_svg(&report, ex.target))?;
    println!("wrote attribution.json and attribution.svg to {}", dir.display());
    Ok(())
}
