//! Exact and sampled Shapley values on a hand-written three-player game.
//!
//! cargo run --example shapley_game

use pairwise_opinion::explain::{exact_shapley, sampled_shapley, Coalition, FnValue};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // players 0 and 1 only pay off together, player 2 adds a constant
    let game = FnValue {
        width: 3,
        f: |c: &Coalition| {
            let joint = if c.contains(0) && c.contains(1) { 1.0 } else { 0.0 };
            let solo = if c.contains(2) { 0.5 } else { 0.0 };
            [joint + solo, 0.0, 1.0 - joint]
        },
    };
    let exact = exact_shapley(&game, 16)?;
    let sampled = sampled_shapley(&game, 2000, 7)?;
    for i in 0..3 {
        println!(
            "player {i}: exact {:+.4} {:+.4} {:+.4}   sampled {:+.4} {:+.4} {:+.4}",
            exact.phi[i][0], exact.phi[i][1], exact.phi[i][2], sampled.phi[i][0], sampled.phi[i][1], sampled.phi[i][2]
        );
    }
    println!("efficiency gap {:.1e}", exact.efficiency_gap());
    Ok(())
}
