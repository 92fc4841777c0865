//! Exact, inductive and linearized power flow on both grid presets.
//!
//!     cargo run --example power_flow

use vsg_npc::grid::{
    power_flow_exact, power_flow_inductive, power_flow_linearized, GridParams,
};

pub fn run_example() -> vsg_npc::Result<()> {
    for (name, grid) in [("inductive", GridParams::inductive()), ("resistive", GridParams::resistive())] {
        let v = grid.v_grid_peak;
        let e = v * 1.01;
        println!(
            "{name} grid: R = {} ohm, X = {:.3e} ohm, E = {e:.3} V",
            grid.r_eq, grid.x_eq
        );
        println!(
            "{:>8} {:>12} {:>12} {:>12} {:>12} {:>12}",
            "delta", "P exact", "Q exact", "P ind.", "Q ind.", "P lin."
        );
        for delta in [-0.05, -0.02, 0.0, 0.02, 0.05] {
            let exact = power_flow_exact(e, &grid, delta)?;
            let ind = power_flow_inductive(e, v, grid.x_eq, delta)?;
            let lin = power_flow_linearized(e, v, grid.x_eq, delta)?;
            println!(
                "{delta:>8.3} {:>12.1} {:>12.1} {:>12.1} {:>12.1} {:>12.1}",
                exact.p_total(),
                exact.q_total(),
                ind.p_total(),
                ind.q_total(),
                lin.p_total()
            );
        }
        println!();
    }
    println!("On the resistive grid P follows E and Q follows the angle: the");
    println!("inductive approximation no longer describes the coupling.");
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
