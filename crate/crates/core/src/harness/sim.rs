//! Closed-loop stepping of plant, voltage controller and swing equation.
//!
//! Each control period runs in a fixed order:
//! 1. read the references in force,
//! 2. measure P and Q from the plant at the current `(E, δ)`,
//! 3. let the voltage controller pick the next `E` from that measurement,
//! 4. advance the swing equation with the measured power.
//!
//! The new `E` takes effect at the next measurement, a one-sample delay.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ControllerConfig, ScenarioConfig};
use crate::error::{Error, Result};
use crate::grid::{power_flow_exact, GridParams};
use crate::nn::{Mlp, PlantOutputVec};
use crate::npc::{NpcController, NpcDecision};
use crate::voltage::{
    pi_droop_step, tuned_pi_step, PiDroopParams, PiDroopState, PowerErrors, TunedPiParams,
    TunedPiState, VoltageLimits,
};
use crate::vsg::{swing_step, VsgParams, VsgState};

/// Loads a trained predictor from its JSON file.
pub fn load_model(path: &Path) -> Result<Mlp> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let net: Mlp = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    net.validate()?;
    Ok(net)
}

pub fn save_model(net: &Mlp, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(net).expect("network serializes");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

enum VoltageController {
    PiDroop(PiDroopParams, PiDroopState),
    TunedPi(TunedPiParams, TunedPiState),
    Npc(Box<NpcController>),
}

impl VoltageController {
    fn clamp_events(&self) -> u64 {
        match self {
            VoltageController::PiDroop(_, s) => s.clamp_events,
            VoltageController::TunedPi(_, s) => s.clamp_events,
            VoltageController::Npc(_) => 0,
        }
    }
}

/// Step-by-step closed loop. [`run_scenario`] drives it for a whole run; the
/// dataset collector drives it directly to inject excitation.
pub struct Simulator {
    config: ScenarioConfig,
    grid: GridParams,
    vsg: VsgParams,
    limits: VoltageLimits,
    controller: VoltageController,
    state: VsgState,
    e_cmd: f64,
    next_e: Option<f64>,
    step: usize,
    last: Option<Measurement>,
}

#[derive(Debug, Clone, Copy)]
struct Measurement {
    p_set: f64,
    q_set: f64,
    p_out: f64,
}

impl Simulator {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        let net = match (&config.controller, &config.model_path) {
            (ControllerConfig::Npc(_), Some(path)) => Some(load_model(path)?),
            _ => None,
        };
        Self::with_model(config, net)
    }

    /// Like [`Simulator::new`] but with an in-memory predictor for the NPC.
    pub fn with_model(config: &ScenarioConfig, net: Option<Mlp>) -> Result<Self> {
        let mut check = config.clone();
        if check.model_path.is_none() && net.is_some() {
            check.model_path = Some("<in-memory>".into());
        }
        check.validate()?;
        let grid = config.grid.params();
        let v_ref = grid.v_grid_peak;
        let (controller, e_init) = match &config.controller {
            ControllerConfig::PiDroop(p) => (
                VoltageController::PiDroop(*p, PiDroopState::new(p)),
                p.e_init,
            ),
            ControllerConfig::TunedPi(p) => {
                (VoltageController::TunedPi(*p, TunedPiState::default()), p.v_ref)
            }
            ControllerConfig::Npc(p) => {
                let net = net.ok_or_else(|| Error::Config("npc controller requires a model".into()))?;
                let ctl = NpcController::new(net, p.clone(), v_ref, v_ref)?.with_decision_log();
                (VoltageController::Npc(Box::new(ctl)), v_ref)
            }
        };
        Ok(Self {
            config: config.clone(),
            grid,
            vsg: config.vsg,
            limits: VoltageLimits::around(v_ref),
            controller,
            state: VsgState::synchronized(config.vsg.omega_ref),
            e_cmd: e_init,
            next_e: None,
            step: 0,
            last: None,
        })
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.config.dt
    }

    pub fn state(&self) -> &VsgState {
        &self.state
    }

    pub fn e_cmd(&self) -> f64 {
        self.e_cmd
    }

    /// References in force at the last measurement.
    pub fn references(&self) -> (f64, f64) {
        match self.last {
            Some(m) => (m.p_set, m.q_set),
            None => self.config.references_at(self.time()),
        }
    }

    /// Measures the plant at the current step.
    pub fn observe(&mut self) -> Result<PlantOutputVec> {
        let t = self.time();
        let refs = self.config.references_at(t);
        let s = power_flow_exact(self.e_cmd, &self.grid, self.state.delta)?;
        let y = PlantOutputVec::measured(
            s.p_total(),
            s.q_total(),
            refs,
            self.state.freq_error(&self.vsg),
            self.state.delta,
        );
        if !y.is_finite() {
            return Err(Error::numeric(t, "plant output is not finite"));
        }
        self.last = Some(Measurement {
            p_set: refs.0,
            q_set: refs.1,
            p_out: y.p_out,
        });
        Ok(y)
    }

    /// Runs the voltage controller on measurement `y` and stages its command.
    pub fn control(&mut self, y: &PlantOutputVec) -> Result<f64> {
        self.control_with_offset(y, 0.0)
    }

    /// As [`Simulator::control`], adding `offset` volts to the command before clamping.
    pub fn control_with_offset(&mut self, y: &PlantOutputVec, offset: f64) -> Result<f64> {
        let dt = self.config.dt;
        let time = self.time();
        let (p_set, q_set) = self.references();
        let e = match &mut self.controller {
            VoltageController::PiDroop(p, s) => {
                let (e, next) = pi_droop_step(s, q_set, y.q_out, self.e_cmd, p, dt)?;
                *s = next;
                e
            }
            VoltageController::TunedPi(p, s) => {
                let errors = PowerErrors {
                    p_set,
                    p_out: y.p_out,
                    q_set,
                    q_out: y.q_out,
                };
                let (e, next) = tuned_pi_step(s, errors, p, dt)?;
                *s = next;
                e
            }
            VoltageController::Npc(ctl) => ctl.step(time, y, (p_set, q_set))?,
        };
        let e = if offset != 0.0 {
            self.limits.clamp(e + offset)
        } else {
            e
        };
        self.next_e = Some(e);
        Ok(e)
    }

    /// Advances the swing equation and applies the staged command.
    pub fn advance(&mut self) -> Result<()> {
        let m = self
            .last
            .take()
            .ok_or_else(|| Error::InvalidParams("advance called before observe".into()))?;
        let t = self.time();
        self.state = swing_step(
            &self.state,
            m.p_set,
            m.p_out,
            &self.vsg,
            self.grid.omega_nominal,
            self.config.dt,
        )
        .map_err(|e| match e {
            Error::NumericFault { reason, .. } => Error::numeric(t, reason),
            other => other,
        })?;
        if let Some(e) = self.next_e.take() {
            self.e_cmd = e;
        }
        self.step += 1;
        Ok(())
    }

    fn clamp_events(&self) -> u64 {
        self.controller.clamp_events()
    }

    fn take_decisions(&mut self) -> (Vec<NpcDecision>, u64) {
        match &mut self.controller {
            VoltageController::Npc(ctl) => (ctl.take_decisions(), ctl.all_divergent_events),
            _ => (Vec::new(), 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub time: f64,
    pub e_cmd: f64,
    pub omega_i: f64,
    pub delta: f64,
    pub p_out: f64,
    pub q_out: f64,
    pub p_set: f64,
    pub q_set: f64,
    pub p_err: f64,
    pub q_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub label: String,
    pub dt: f64,
    pub rows: Vec<RunRow>,
    pub decisions: Vec<NpcDecision>,
    pub clamp_events: u64,
    pub all_divergent_events: u64,
    /// Set when the run stopped early on a numeric fault.
    pub fault: Option<String>,
}

impl RunRecord {
    pub const HEADER: [&'static str; 10] = [
        "time", "e_cmd", "omega_i", "delta", "p_out", "q_out", "p_set", "q_set", "p_err", "q_err",
    ];

    pub fn write_timeseries_csv(&self, path: &Path) -> Result<()> {
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(Self::HEADER).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(
                [
                    r.time, r.e_cmd, r.omega_i, r.delta, r.p_out, r.q_out, r.p_set, r.q_set,
                    r.p_err, r.q_err,
                ]
                .iter()
                .map(f64::to_string),
            )
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_timeseries_csv(path: &Path) -> Result<Vec<RunRow>> {
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
        r.deserialize().map(|row| row.map_err(csv_err)).collect()
    }

    /// Per-step candidate costs of an NPC run.
    pub fn write_decisions_csv(&self, path: &Path, candidates: &[f64]) -> Result<()> {
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        let mut header = vec!["time".to_string()];
        header.extend(candidates.iter().map(|c| format!("cost_{c}")));
        header.push("chosen".into());
        w.write_record(&header).map_err(csv_err)?;
        for d in &self.decisions {
            let mut rec = vec![d.time.to_string()];
            rec.extend(d.costs.iter().map(f64::to_string));
            rec.push(d.chosen.to_string());
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Runs a scenario to completion.
///
/// A numeric fault ends the run; the rows recorded so far are kept and the
/// fault is noted in [`RunRecord::fault`].
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunRecord> {
    let sim = Simulator::new(config)?;
    drive(sim, config)
}

/// [`run_scenario`] with an in-memory predictor for NPC configs.
pub fn run_scenario_with_model(config: &ScenarioConfig, net: Option<Mlp>) -> Result<RunRecord> {
    let sim = Simulator::with_model(config, net)?;
    drive(sim, config)
}

fn drive(mut sim: Simulator, config: &ScenarioConfig) -> Result<RunRecord> {
    let steps = config.steps();
    let mut rows = Vec::with_capacity(steps + 1);
    let mut fault = None;
    for k in 0..=steps {
        let result = (|| {
            let y = sim.observe()?;
            let st = *sim.state();
            let (p_set, q_set) = sim.references();
            rows.push(RunRow {
                time: sim.time(),
                e_cmd: sim.e_cmd(),
                omega_i: st.omega_i,
                delta: st.delta,
                p_out: y.p_out,
                q_out: y.q_out,
                p_set,
                q_set,
                p_err: y.p_err,
                q_err: y.q_err,
            });
            if k < steps {
                sim.control(&y)?;
                sim.advance()?;
            }
            Ok::<_, Error>(())
        })();
        match result {
            Ok(()) => {}
            Err(e @ Error::NumericFault { .. }) => {
                fault = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let clamp_events = sim.clamp_events();
    let (decisions, all_divergent_events) = sim.take_decisions();
    Ok(RunRecord {
        label: config.label(),
        dt: config.dt,
        rows,
        decisions,
        clamp_events,
        all_divergent_events,
        fault,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{ControllerKind, GridPreset, SchedulePoint};

    #[test]
    fn zero_duration_records_initial_row() {
        let mut c = ScenarioConfig::preset(GridPreset::Inductive, ControllerKind::PiDroop);
        c.duration = 0.0;
        let r = run_scenario(&c).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.rows[0].time, 0.0);
        assert_eq!(r.rows[0].p_out, 0.0);
        assert_eq!(r.rows[0].q_out, 0.0);
    }

    #[test]
    fn row_count_and_time_grid() {
        let mut c = ScenarioConfig::preset(GridPreset::Inductive, ControllerKind::PiDroop);
        c.duration = 0.5;
        let r = run_scenario(&c).unwrap();
        assert_eq!(r.rows.len(), 501);
        for w in r.rows.windows(2) {
            assert!(w[1].time > w[0].time);
            assert!((w[1].time - w[0].time - 1e-3).abs() < 1e-12);
        }
    }

    #[test]
    fn logged_errors_are_exact_and_references_follow_schedule() {
        let mut c = ScenarioConfig::preset(GridPreset::Inductive, ControllerKind::PiDroop);
        c.duration = 16.0;
        let r = run_scenario(&c).unwrap();
        for row in &r.rows {
            assert_eq!(row.p_err, row.p_set - row.p_out);
            assert_eq!(row.q_err, row.q_set - row.q_out);
        }
        let changes: Vec<usize> = r
            .rows
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0].p_set != w[1].p_set || w[0].q_set != w[1].q_set)
            .map(|(i, _)| i + 1)
            .collect();
        assert_eq!(changes, vec![1000, 8000, 15000]);
    }

    #[test]
    fn inductive_pi_tracks_active_power_step() {
        let mut c = ScenarioConfig::preset(GridPreset::Inductive, ControllerKind::PiDroop);
        c.reference_schedule = vec![
            SchedulePoint::new(0.0, 0.0, 0.0),
            SchedulePoint::new(1.0, 2000.0, 0.0),
        ];
        c.duration = 11.0;
        let r = run_scenario(&c).unwrap();
        let last = r.rows.last().unwrap();
        assert!((last.p_out - 2000.0).abs() < 10.0, "{}", last.p_out);
        assert!((last.omega_i - c.vsg.omega_ref).abs() < 1e-3);
    }

    #[test]
    fn explicit_angle_update_loses_stability() {
        let mut c = ScenarioConfig::preset(GridPreset::Inductive, ControllerKind::PiDroop);
        c.vsg.angle_update = crate::vsg::AngleUpdate::Explicit;
        c.duration = 8.0;
        let r = run_scenario(&c).unwrap();
        let late = r.rows.iter().filter(|row| row.time > 6.0);
        let worst = late.map(|row| (row.p_out - row.p_set).abs()).fold(0.0, f64::max);
        assert!(worst > 2000.0, "{worst}");
    }

    #[test]
    fn npc_without_model_file_is_a_config_error() {
        let mut c = ScenarioConfig::preset(GridPreset::Inductive, ControllerKind::Npc);
        assert!(matches!(run_scenario(&c), Err(Error::Config(_))));
        c.model_path = Some("/nonexistent/model.json".into());
        assert!(matches!(run_scenario(&c), Err(Error::Io { .. })));
    }
}
