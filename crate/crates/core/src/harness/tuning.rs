//! Coarse grid search for the tuned PI baseline.

use serde::Serialize;

use super::config::{ControllerConfig, ScenarioConfig};
use super::metrics::{Channel, RunSummary};
use super::sim::run_scenario;
use crate::error::{Error, Result};
use crate::voltage::TunedPiParams;

pub const K_P_GRID: [f64; 4] = [0.0, 1e-4, 1e-3, 1e-2];
pub const K_I_GRID: [f64; 4] = [10.0, 100.0, 1000.0, 10000.0];
pub const MIX_P_GRID: [f64; 8] = [-10.0, -3.0, -1.0, -0.3, 0.3, 1.0, 3.0, 10.0];
/// A candidate whose final tracking error exceeds this on either channel is
/// ranked below every candidate that tracks.
pub const FINAL_ERROR_LIMIT: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TuningCandidate {
    pub k_p: f64,
    pub k_i: f64,
    pub mix_p: f64,
    pub final_error: f64,
    /// Sum of settling times over every stepped window; infinite if any is unsettled.
    pub total_settling: f64,
}

impl TuningCandidate {
    fn rank_key(&self) -> (bool, f64) {
        (!(self.final_error <= FINAL_ERROR_LIMIT), self.total_settling)
    }
}

/// Evaluates every grid point on `base` (whose controller is replaced) and
/// returns the candidates best first. Runs that fault are dropped.
pub fn grid_search(base: &ScenarioConfig) -> Result<Vec<TuningCandidate>> {
    let v_ref = base.grid.params().v_grid_peak;
    let mut out = Vec::new();
    for &k_p in &K_P_GRID {
        for &k_i in &K_I_GRID {
            for &mix_p in &MIX_P_GRID {
                let mut config = base.clone();
                config.controller = ControllerConfig::TunedPi(TunedPiParams {
                    k_p,
                    k_i,
                    mix_p,
                    v_ref,
                });
                let record = run_scenario(&config)?;
                if record.fault.is_some() {
                    continue;
                }
                let last = record.rows.last().expect("non-empty run");
                let final_error = last.p_err.abs().max(last.q_err.abs());
                if !final_error.is_finite() {
                    continue;
                }
                let summary = RunSummary::from_record(&record)?;
                let total_settling = Channel::BOTH
                    .iter()
                    .flat_map(|&c| summary.channel(c).steps.iter())
                    .filter(|m| !m.degenerate())
                    .map(|m| m.settling_rank())
                    .sum();
                out.push(TuningCandidate {
                    k_p,
                    k_i,
                    mix_p,
                    final_error,
                    total_settling,
                });
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Config("no tuned PI candidate completed the scenario".into()));
    }
    out.sort_by(|a, b| {
        let (fa, sa) = a.rank_key();
        let (fb, sb) = b.rank_key();
        fa.cmp(&fb).then(sa.total_cmp(&sb))
    });
    Ok(out)
}
