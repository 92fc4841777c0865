//! Side-by-side runs of several controllers on the same scenario.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ScenarioConfig;
use super::metrics::{Channel, RunSummary};
use super::output::{opt, write_json};
use super::plot::emit_plots;
use super::sim::{run_scenario, RunRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonEntry {
    pub summary: RunSummary,
    pub worst_overshoot_pct: f64,
    pub worst_settling_time: f64,
    pub ise_p: f64,
    pub ise_q: f64,
}

impl ComparisonEntry {
    pub fn from_summary(summary: RunSummary) -> Self {
        Self {
            worst_overshoot_pct: summary.worst_overshoot_pct(),
            worst_settling_time: summary.worst_settling_time(),
            ise_p: summary.channel(Channel::P).ise,
            ise_q: summary.channel(Channel::Q).ise,
            summary,
        }
    }
}

/// Differences of a later entry against the first one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryDelta {
    pub label: String,
    pub overshoot_pct: f64,
    pub settling_time: f64,
    pub ise_p_ratio: f64,
    pub ise_q_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub grid: String,
    pub entries: Vec<ComparisonEntry>,
    pub deltas: Vec<EntryDelta>,
}

impl ComparisonReport {
    pub fn from_records(grid: &str, records: &[RunRecord]) -> Result<Self> {
        let entries = records
            .iter()
            .map(|r| RunSummary::from_record(r).map(ComparisonEntry::from_summary))
            .collect::<Result<Vec<_>>>()?;
        let deltas = match entries.split_first() {
            Some((base, rest)) => rest
                .iter()
                .map(|e| EntryDelta {
                    label: e.summary.label.clone(),
                    overshoot_pct: e.worst_overshoot_pct - base.worst_overshoot_pct,
                    settling_time: e.worst_settling_time - base.worst_settling_time,
                    ise_p_ratio: e.ise_p / base.ise_p,
                    ise_q_ratio: e.ise_q / base.ise_q,
                })
                .collect(),
            None => Vec::new(),
        };
        Ok(Self {
            grid: grid.to_string(),
            entries,
            deltas,
        })
    }

    pub fn entry(&self, label: &str) -> Option<&ComparisonEntry> {
        self.entries.iter().find(|e| e.summary.label == label)
    }

    pub fn text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "grid: {}", self.grid);
        let _ = writeln!(
            s,
            "{:<24} {:>12} {:>12} {:>14} {:>14} {:>8}",
            "run", "overshoot%", "settling_s", "ise_P", "ise_Q", "status"
        );
        for e in &self.entries {
            let settling = if e.worst_settling_time.is_finite() {
                format!("{:.3}", e.worst_settling_time)
            } else {
                "unsettled".into()
            };
            let _ = writeln!(
                s,
                "{:<24} {:>12} {:>12} {:>14.4e} {:>14.4e} {:>8}",
                e.summary.label,
                opt(Some(e.worst_overshoot_pct).filter(|v| v.is_finite()), 3),
                settling,
                e.ise_p,
                e.ise_q,
                if e.summary.completed { "ok" } else { "fault" },
            );
        }
        if !self.deltas.is_empty() {
            let base = &self.entries[0].summary.label;
            let _ = writeln!(s, "\nagainst {base}:");
            for d in &self.deltas {
                let _ = writeln!(
                    s,
                    "{:<24} overshoot {} pts, settling {} s, ise_P x{}, ise_Q x{}",
                    d.label,
                    signed(d.overshoot_pct),
                    signed(d.settling_time),
                    ratio(d.ise_p_ratio),
                    ratio(d.ise_q_ratio)
                );
            }
        }
        s
    }
}

fn signed(v: f64) -> String {
    if v.is_finite() {
        format!("{v:+.3}")
    } else {
        "n/a".into()
    }
}

fn ratio(v: f64) -> String {
    if !v.is_finite() {
        "n/a".into()
    } else if v != 0.0 && !(1e-2..1e3).contains(&v) {
        format!("{v:.3e}")
    } else {
        format!("{v:.3}")
    }
}

/// Rejects configs that do not share grid, schedule, duration and dt.
pub fn check_comparable(configs: &[ScenarioConfig]) -> Result<()> {
    let Some(first) = configs.first() else {
        return Err(Error::Config("compare needs at least one config".into()));
    };
    for c in &configs[1..] {
        if c.grid != first.grid {
            return Err(Error::MismatchedConfigs("grid"));
        }
        if c.reference_schedule != first.reference_schedule {
            return Err(Error::MismatchedConfigs("reference_schedule"));
        }
        if c.duration != first.duration {
            return Err(Error::MismatchedConfigs("duration"));
        }
        if c.dt != first.dt {
            return Err(Error::MismatchedConfigs("dt"));
        }
    }
    Ok(())
}

/// Runs every config and builds the report.
pub fn compare(configs: &[ScenarioConfig]) -> Result<(ComparisonReport, Vec<RunRecord>)> {
    check_comparable(configs)?;
    let records = configs.iter().map(run_scenario).collect::<Result<Vec<_>>>()?;
    let report = ComparisonReport::from_records(configs[0].grid.name(), &records)?;
    Ok((report, records))
}

/// Writes `comparison.json`, `comparison.txt` and overlay plots into `dir`.
pub fn write_comparison(
    report: &ComparisonReport,
    records: &[RunRecord],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join("comparison.json");
    write_json(report, &json)?;
    let txt = dir.join("comparison.txt");
    std::fs::write(&txt, report.text()).map_err(|e| Error::io(&txt, e))?;
    let mut files = vec![json, txt];
    files.extend(emit_plots(records, &Channel::BOTH, dir)?);
    Ok(files)
}
