//! Log 200 s of excited closed-loop data on a grid and fit the one-step
//! predictor. Writes `model.json` into the output directory.
//!
//!     cargo run --release --example train_predictor -- resistive out/predictor

use std::path::{Path, PathBuf};

use vsg_npc::harness::pipeline::train_predictor;
use vsg_npc::harness::{save_model, GridPreset};
use vsg_npc::nn::{EvalReport, TrainOptions};

pub fn run_example(grid: GridPreset, out: &Path) -> vsg_npc::Result<EvalReport> {
    let options = TrainOptions::default();
    let (data, outcome) = train_predictor(grid, 200.0, 1, &options)?;
    println!(
        "{} pairs logged, {} epochs, final training loss {:.3e}",
        data.len(),
        options.epochs,
        outcome.history.last().copied().unwrap_or(f64::NAN)
    );
    print!("{}", outcome.validation.table());
    std::fs::create_dir_all(out).map_err(|e| vsg_npc::Error::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    save_model(&outcome.net, &out.join("model.json"))?;
    println!("model written to {}", out.join("model.json").display());
    Ok(outcome.validation)
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
    let out = args.next().map_or_else(|| PathBuf::from("out/predictor"), PathBuf::from);
    if let Err(e) = run_example(grid, &out) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
