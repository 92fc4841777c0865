//! Coarse grid search for the tuned PI gains on the resistive grid.
//!
//!     cargo run --release --example tune_pi

use vsg_npc::harness::tuning::{grid_search, TuningCandidate};
use vsg_npc::harness::{ControllerKind, GridPreset, ScenarioConfig};

pub fn run_example() -> vsg_npc::Result<Vec<TuningCandidate>> {
    let base = ScenarioConfig::preset(GridPreset::Resistive, ControllerKind::TunedPi);
    let ranked = grid_search(&base)?;
    println!("{:>8} {:>8} {:>8} {:>12} {:>14}", "k_p", "k_i", "mix_p", "final err", "sum settling");
    for c in ranked.iter().take(10) {
        println!(
            "{:>8} {:>8} {:>8} {:>12.3} {:>14.3}",
            c.k_p, c.k_i, c.mix_p, c.final_error, c.total_settling
        );
    }
    println!("{} of the grid points completed without a numeric fault", ranked.len());
    Ok(ranked)
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
