//! Train a predictor, then run PI droop, tuned PI and the neural predictive
//! controller side by side on one grid and write the comparison.
//!
//!     cargo run --release --example compare_controllers -- resistive out/compare
//!
//! A third argument sets the NPC horizon in steps (default 100).

use std::path::{Path, PathBuf};

use vsg_npc::harness::pipeline::train_predictor;
use vsg_npc::harness::{
    compare, save_model, write_comparison, ComparisonReport, ControllerKind, GridPreset,
    ScenarioConfig,
};
use vsg_npc::nn::TrainOptions;
use vsg_npc::npc::FAST_HORIZON;

pub fn run_example(grid: GridPreset, horizon: usize, out: &Path) -> vsg_npc::Result<ComparisonReport> {
    let (_, outcome) = train_predictor(grid, 200.0, 1, &TrainOptions::default())?;
    println!(
        "predictor worst held-out RMSE {:.3} % of range",
        outcome.validation.worst_pct()
    );
    std::fs::create_dir_all(out).map_err(|e| vsg_npc::Error::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    let model = out.join("model.json");
    save_model(&outcome.net, &model)?;

    let configs = [
        ScenarioConfig::preset(grid, ControllerKind::PiDroop),
        ScenarioConfig::preset(grid, ControllerKind::TunedPi),
        ScenarioConfig::npc_preset(grid, &model, horizon),
    ];
    let (report, records) = compare(&configs)?;
    write_comparison(&report, &records, out)?;
    print!("{}", report.text());
    println!("plots and tables in {}", out.display());
    Ok(report)
}

fn main() {
    let mut args = std::env::args().skip(1);
    let grid = match args.next().as_deref() {
        Some("inductive") => GridPreset::Inductive,
        None | Some("resistive") => GridPreset::Resistive,
        Some(other) => {
            eprintln!("unknown grid {other:?}; use inductive or resistive");
            std::process::exit(1);
        }
    };
    let out = args.next().map_or_else(|| PathBuf::from("out/compare"), PathBuf::from);
    let horizon = args
        .next()
        .map_or(Ok(FAST_HORIZON), |h| h.parse::<usize>())
        .unwrap_or_else(|_| {
            eprintln!("horizon must be a whole number of steps");
            std::process::exit(1);
        });
    if let Err(e) = run_example(grid, horizon, &out) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
