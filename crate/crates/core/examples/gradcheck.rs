//! Backpropagation against central finite differences on random 7-7-7-6 nets.
//!
//!     cargo run --release --example gradcheck

use vsg_npc::nn::gradcheck::{check_random_networks, REL_TOLERANCE};

pub fn run_example() -> vsg_npc::Result<bool> {
    let report = check_random_networks(7, 20, 5)?;
    println!(
        "{} nets x {} samples, {} parameters checked",
        report.nets, report.samples_per_net, report.parameters_checked
    );
    println!(
        "max relative error {:.3e} (net {}, sample {}, parameter {}), tolerance {REL_TOLERANCE:e}",
        report.max_relative_error, report.worst.0, report.worst.1, report.worst.2
    );
    Ok(report.passed())
}

fn main() {
    match run_example() {
        Ok(true) => {}
        Ok(false) => std::process::exit(2),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
