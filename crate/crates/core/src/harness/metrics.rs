//! Step-response metrics on recorded runs.

use serde::{Deserialize, Serialize};

use super::sim::{RunRecord, RunRow};
use crate::error::{Error, Result};

/// Settling band as a fraction of the step magnitude.
pub const SETTLING_BAND: f64 = 0.02;
/// Trailing fraction of a window averaged for the steady-state error.
pub const STEADY_STATE_TAIL: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    P,
    Q,
}

impl Channel {
    pub const BOTH: [Channel; 2] = [Channel::P, Channel::Q];

    pub fn name(self) -> &'static str {
        match self {
            Channel::P => "P",
            Channel::Q => "Q",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Channel::P => "W",
            Channel::Q => "var",
        }
    }

    pub fn output(self, row: &RunRow) -> f64 {
        match self {
            Channel::P => row.p_out,
            Channel::Q => row.q_out,
        }
    }

    pub fn reference(self, row: &RunRow) -> f64 {
        match self {
            Channel::P => row.p_set,
            Channel::Q => row.q_set,
        }
    }

    pub fn error(self, row: &RunRow) -> f64 {
        match self {
            Channel::P => row.p_err,
            Channel::Q => row.q_err,
        }
    }
}

impl std::str::FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p" | "P" => Ok(Channel::P),
            "q" | "Q" => Ok(Channel::Q),
            _ => Err(Error::Config(format!("unknown channel {s:?}"))),
        }
    }
}

/// Rows `[start, end)` following one reference change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepWindow {
    pub start: usize,
    pub end: usize,
    pub step_time: f64,
    pub initial_ref: f64,
    pub final_ref: f64,
}

impl StepWindow {
    pub fn magnitude(&self) -> f64 {
        self.final_ref - self.initial_ref
    }
}

/// Windows for every reference change in the record, on either channel.
///
/// Each window runs until the next change on any channel so that it holds a
/// single step; a change on the other channel appears as a zero-magnitude step.
pub fn step_windows(rows: &[RunRow], channel: Channel) -> Vec<StepWindow> {
    let changes: Vec<usize> = (1..rows.len())
        .filter(|&k| rows[k].p_set != rows[k - 1].p_set || rows[k].q_set != rows[k - 1].q_set)
        .collect();
    changes
        .iter()
        .enumerate()
        .map(|(i, &start)| StepWindow {
            start,
            end: changes.get(i + 1).copied().unwrap_or(rows.len()),
            step_time: rows[start].time,
            initial_ref: channel.reference(&rows[start - 1]),
            final_ref: channel.reference(&rows[start]),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub channel: Channel,
    pub step_time: f64,
    pub step_magnitude: f64,
    /// `None` for a zero-magnitude step.
    pub overshoot_pct: Option<f64>,
    /// Capped at the window length when the response never settles.
    pub settling_time: Option<f64>,
    pub settled: bool,
    pub ise: f64,
    pub iae: f64,
    pub steady_state_error_pct: Option<f64>,
}

impl Metrics {
    pub fn degenerate(&self) -> bool {
        self.overshoot_pct.is_none()
    }

    /// Settling time for ranking, infinite when unsettled.
    pub fn settling_rank(&self) -> f64 {
        match (self.settling_time, self.settled) {
            (Some(t), true) => t,
            _ => f64::INFINITY,
        }
    }
}

pub fn compute_metrics(record: &RunRecord, channel: Channel, window: &StepWindow) -> Result<Metrics> {
    compute_window(&record.rows, record.dt, channel, window)
}

pub fn compute_window(
    rows: &[RunRow],
    dt: f64,
    channel: Channel,
    window: &StepWindow,
) -> Result<Metrics> {
    if window.start >= window.end || window.end > rows.len() {
        return Err(Error::InvalidParams(format!(
            "window [{}, {}) outside record of {} rows",
            window.start,
            window.end,
            rows.len()
        )));
    }
    let span = &rows[window.start..window.end];
    let errors = span.iter().map(|r| window.final_ref - channel.output(r));
    let (ise, iae) = errors.fold((0.0, 0.0), |(s, a), e| (s + e * e * dt, a + e.abs() * dt));

    let magnitude = window.magnitude();
    let mut m = Metrics {
        channel,
        step_time: window.step_time,
        step_magnitude: magnitude,
        overshoot_pct: None,
        settling_time: None,
        settled: true,
        ise,
        iae,
        steady_state_error_pct: None,
    };
    if magnitude == 0.0 {
        return Ok(m);
    }

    let dir = magnitude.signum();
    let excursion = span
        .iter()
        .map(|r| dir * (channel.output(r) - window.final_ref))
        .fold(0.0, f64::max);
    m.overshoot_pct = Some(excursion / magnitude.abs() * 100.0);

    let band = SETTLING_BAND * magnitude.abs();
    let last_out = span
        .iter()
        .rposition(|r| (channel.output(r) - window.final_ref).abs() > band);
    let window_len = span.len() as f64 * dt;
    m.settling_time = Some(match last_out {
        None => 0.0,
        Some(i) if i + 1 == span.len() => {
            m.settled = false;
            window_len
        }
        Some(i) => span[i + 1].time - window.step_time,
    });

    let tail = ((span.len() as f64 * STEADY_STATE_TAIL).ceil() as usize).max(1);
    let mean_err = span[span.len() - tail..]
        .iter()
        .map(|r| window.final_ref - channel.output(r))
        .sum::<f64>()
        / tail as f64;
    m.steady_state_error_pct = Some(mean_err.abs() / magnitude.abs() * 100.0);
    Ok(m)
}

/// Whole-run integral of the squared error on one channel.
pub fn run_ise(record: &RunRecord, channel: Channel) -> f64 {
    record
        .rows
        .iter()
        .map(|r| channel.error(r).powi(2) * record.dt)
        .sum()
}

pub fn run_iae(record: &RunRecord, channel: Channel) -> f64 {
    record
        .rows
        .iter()
        .map(|r| channel.error(r).abs() * record.dt)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSummary {
    pub channel: Channel,
    pub steps: Vec<Metrics>,
    pub ise: f64,
    pub iae: f64,
}

/// All step metrics of a run plus whole-run aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub completed: bool,
    pub fault: Option<String>,
    pub clamp_events: u64,
    pub all_divergent_events: u64,
    pub channels: Vec<ChannelSummary>,
}

impl RunSummary {
    pub fn from_record(record: &RunRecord) -> Result<Self> {
        let channels = Channel::BOTH
            .iter()
            .map(|&ch| {
                let steps = step_windows(&record.rows, ch)
                    .iter()
                    .map(|w| compute_metrics(record, ch, w))
                    .collect::<Result<Vec<_>>>()?;
                Ok(ChannelSummary {
                    channel: ch,
                    steps,
                    ise: run_ise(record, ch),
                    iae: run_iae(record, ch),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            label: record.label.clone(),
            completed: record.fault.is_none(),
            fault: record.fault.clone(),
            clamp_events: record.clamp_events,
            all_divergent_events: record.all_divergent_events,
            channels,
        })
    }

    pub fn channel(&self, ch: Channel) -> &ChannelSummary {
        self.channels
            .iter()
            .find(|c| c.channel == ch)
            .expect("summary holds both channels")
    }

    fn stepped(&self) -> impl Iterator<Item = &Metrics> {
        self.channels
            .iter()
            .flat_map(|c| c.steps.iter())
            .filter(|m| !m.degenerate())
    }

    /// Largest overshoot over every non-degenerate step; infinite for a faulted run.
    pub fn worst_overshoot_pct(&self) -> f64 {
        if !self.completed {
            return f64::INFINITY;
        }
        self.stepped()
            .filter_map(|m| m.overshoot_pct)
            .fold(0.0, f64::max)
    }

    /// Longest settling time over every non-degenerate step; infinite if any step never settles.
    pub fn worst_settling_time(&self) -> f64 {
        if !self.completed {
            return f64::INFINITY;
        }
        self.stepped().map(Metrics::settling_rank).fold(0.0, f64::max)
    }
}
