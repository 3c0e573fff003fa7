//! Generates a synthetic comparative corpus, splits it and writes JSONL.
//!
//! cargo run --example generate_corpus -- [n_pairs] [seed]

use pairwise_opinion::config::PipelineConfig;
use pairwise_opinion::corpus::{generate_synthetic, save_corpus, split, AspectId};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n_pairs = args.next().map(|s| s.parse()).transpose()?.unwrap_or(200);
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(42);

    let mut cfg = PipelineConfig::default().with_seed(seed);
    cfg.generator.n_pairs = n_pairs;
    let corpus = generate_synthetic(&cfg.generator, cfg.seed)?;
    let (train, val, test) = split(&corpus, cfg.split_ratios(), cfg.split_seed())?;
    println!("{} pairs: train {}, val {}, test {}", corpus.len(), train.len(), val.len(), test.len());

    let pair = &corpus.pairs[0];
    println!("first review:  {}", pair.first.text);
    println!("second review: {}", pair.second.text);
    for a in AspectId::ALL {
        println!("  {:<10} {:?}", a.name(), pair.gold[a]);
    }

    let dir = std::env::temp_dir().join("pairwise-opinion-corpus");
    std::fs::create_dir_all(&dir)?;
    for (name, part) in [("train", &train), ("val", &val), ("test", &test)] {
        save_corpus(part, dir.join(format!("{name}.jsonl")))?;
    }
    println!("wrote {}", dir.display());
    Ok(())
}
