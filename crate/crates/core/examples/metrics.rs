//! Confusion matrix and micro/macro scores under both Null policies.
//!
//! cargo run --example metrics

use pairwise_opinion::corpus::ComparativeLabel;
use pairwise_opinion::harness::{confusion, micro_macro, NullPolicy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let labels = |codes: &[Option<i64>]| -> Vec<ComparativeLabel> {
        codes.iter().map(|&c| ComparativeLabel::from_code(c).unwrap()).collect()
    };
    let gold = labels(&[Some(1), Some(1), Some(0), Some(-1), Some(0), Some(1), None, Some(-1)]);
    let pred = labels(&[Some(1), Some(0), Some(0), Some(-1), Some(1), Some(1), None, None]);

    for policy in [NullPolicy::ExcludeGoldNull, NullPolicy::NullAsFourthClass] {
        let cm = confusion(&gold, &pred, policy)?;
        let m = micro_macro(&cm)?;
        println!(
            "{policy:?}: evaluated {}, rejected {}, micro F1 {:.4}, macro F1 {:.4}",
            m.evaluated,
            cm.rejected().iter().sum::<usize>(),
            m.micro.f1,
            m.macro_avg.f1
        );
    }
    Ok(())
}
