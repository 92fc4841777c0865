//! Run artifacts on disk: time series, metrics, a text report and plots.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::{ControllerConfig, ScenarioConfig};
use super::metrics::{Channel, RunSummary};
use super::plot::emit_plots;
use super::sim::RunRecord;
use crate::error::{Error, Result};

pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const REPORT_FILE: &str = "report.txt";
pub const DIAGNOSTICS_FILE: &str = "npc_diagnostics.csv";

pub fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Writes every artifact of one run into `dir`.
pub fn write_run(config: &ScenarioConfig, record: &RunRecord, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let summary = RunSummary::from_record(record)?;
    let mut files = Vec::new();

    let ts = dir.join(TIMESERIES_FILE);
    record.write_timeseries_csv(&ts)?;
    files.push(ts);

    let metrics = dir.join(METRICS_FILE);
    write_json(&summary, &metrics)?;
    files.push(metrics);

    let report = dir.join(REPORT_FILE);
    std::fs::write(&report, run_report(&summary)).map_err(|e| Error::io(&report, e))?;
    files.push(report);

    if let ControllerConfig::Npc(p) = &config.controller {
        let diag = dir.join(DIAGNOSTICS_FILE);
        record.write_decisions_csv(&diag, &p.candidate_set)?;
        files.push(diag);
    }
    if !record.rows.is_empty() {
        files.extend(emit_plots(std::slice::from_ref(record), &Channel::BOTH, dir)?);
    }
    Ok(files)
}

pub fn run_report(summary: &RunSummary) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "run: {}", summary.label);
    match &summary.fault {
        Some(f) => {
            let _ = writeln!(s, "status: aborted ({f})");
        }
        None => {
            let _ = writeln!(s, "status: completed");
        }
    }
    let _ = writeln!(s, "clamp events: {}", summary.clamp_events);
    if summary.all_divergent_events > 0 {
        let _ = writeln!(
            s,
            "warning: {} steps where every candidate diverged",
            summary.all_divergent_events
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<3} {:>8} {:>10} {:>12} {:>12} {:>14} {:>14} {:>10}",
        "ch", "t_step", "step", "overshoot%", "settling_s", "ise", "iae", "sse%"
    );
    for ch in &summary.channels {
        for m in &ch.steps {
            let settling = match (m.settling_time, m.settled) {
                (Some(t), true) => format!("{t:.3}"),
                (Some(_), false) => "unsettled".into(),
                (None, _) => "-".into(),
            };
            let _ = writeln!(
                s,
                "{:<3} {:>8.3} {:>10.1} {:>12} {:>12} {:>14.4e} {:>14.4e} {:>10}",
                ch.channel.name(),
                m.step_time,
                m.step_magnitude,
                opt(m.overshoot_pct, 3),
                settling,
                m.ise,
                m.iae,
                opt(m.steady_state_error_pct, 4),
            );
        }
    }
    let _ = writeln!(s);
    for ch in &summary.channels {
        let _ = writeln!(
            s,
            "whole-run {}: ise {:.6e} {}²·s, iae {:.6e} {}·s",
            ch.channel.name(),
            ch.ise,
            ch.channel.unit(),
            ch.iae,
            ch.channel.unit()
        );
    }
    s
}

pub(crate) fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.digits$}"))
}
