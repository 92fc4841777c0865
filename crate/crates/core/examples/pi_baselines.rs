//! PI droop on the inductive and resistive grids, plus the tuned PI that
//! rescues the resistive case. Artifacts go to the directory given as the
//! first argument (default `out/pi_baselines`).
//!
//!     cargo run --release --example pi_baselines -- out/pi

use std::path::PathBuf;

use vsg_npc::harness::{
    run_scenario, write_run, Channel, ControllerKind, GridPreset, RunSummary, ScenarioConfig,
};

pub fn run_example(out: &std::path::Path) -> vsg_npc::Result<Vec<RunSummary>> {
    let runs = [
        (GridPreset::Inductive, ControllerKind::PiDroop),
        (GridPreset::Resistive, ControllerKind::PiDroop),
        (GridPreset::Resistive, ControllerKind::TunedPi),
    ];
    let mut summaries = Vec::new();
    for (grid, kind) in runs {
        let config = ScenarioConfig::preset(grid, kind);
        let record = run_scenario(&config)?;
        write_run(&config, &record, &out.join(config.label()))?;
        let summary = RunSummary::from_record(&record)?;
        let last = record.rows.last().expect("run has rows");
        println!(
            "{:<22} worst overshoot {:>10.2} %  worst settling {:>9}  ISE P {:.3e}  ISE Q {:.3e}  final P {:.1} Q {:.1}",
            summary.label,
            summary.worst_overshoot_pct(),
            fmt_settling(summary.worst_settling_time()),
            summary.channel(Channel::P).ise,
            summary.channel(Channel::Q).ise,
            last.p_out,
            last.q_out,
        );
        summaries.push(summary);
    }
    println!("artifacts in {}", out.display());
    Ok(summaries)
}

fn fmt_settling(t: f64) -> String {
    if t.is_finite() {
        format!("{t:.3} s")
    } else {
        "unsettled".into()
    }
}

fn main() {
    let out = std::env::args()
        .nth(1)
        .map_or_else(|| PathBuf::from("out/pi_baselines"), PathBuf::from);
    if let Err(e) = run_example(&out) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
