//! Scenario configuration, closed-loop simulation, metrics and reports.

pub mod compare;
pub mod config;
pub mod metrics;
pub mod output;
pub mod pipeline;
pub mod plot;
pub mod sim;
pub mod tuning;

pub use compare::{compare, write_comparison, ComparisonReport};
pub use config::{
    ControllerConfig, ControllerKind, GridChoice, GridPreset, ScenarioConfig, SchedulePoint,
    CONTROL_PERIOD, HEADLINE_DURATION, HEADLINE_SCHEDULE,
};
pub use metrics::{compute_metrics, step_windows, Channel, Metrics, RunSummary, StepWindow};
pub use output::write_run;
pub use plot::emit_plots;
pub use sim::{
    load_model, run_scenario, run_scenario_with_model, save_model, RunRecord, RunRow, Simulator,
};
