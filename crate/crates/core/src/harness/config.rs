//! Scenario configuration, mirrored one-to-one by the JSON config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridParams;
use crate::nn::dataset::{CollectionOptions, INDUCTIVE_DITHER, RESISTIVE_DITHER};
use crate::npc::NpcParams;
use crate::voltage::{PiDroopParams, TunedPiParams};
use crate::vsg::VsgParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridPreset {
    Inductive,
    Resistive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridChoice {
    Inductive,
    Resistive,
    Custom(GridParams),
}

impl GridChoice {
    pub fn params(&self) -> GridParams {
        match self {
            GridChoice::Inductive => GridParams::inductive(),
            GridChoice::Resistive => GridParams::resistive(),
            GridChoice::Custom(p) => *p,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GridChoice::Inductive => "inductive",
            GridChoice::Resistive => "resistive",
            GridChoice::Custom(_) => "custom",
        }
    }
}

impl From<GridPreset> for GridChoice {
    fn from(p: GridPreset) -> Self {
        match p {
            GridPreset::Inductive => GridChoice::Inductive,
            GridPreset::Resistive => GridChoice::Resistive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    PiDroop,
    TunedPi,
    Npc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerConfig {
    PiDroop(PiDroopParams),
    TunedPi(TunedPiParams),
    Npc(NpcParams),
}

impl ControllerConfig {
    pub fn kind(&self) -> ControllerKind {
        match self {
            ControllerConfig::PiDroop(_) => ControllerKind::PiDroop,
            ControllerConfig::TunedPi(_) => ControllerKind::TunedPi,
            ControllerConfig::Npc(_) => ControllerKind::Npc,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ControllerConfig::PiDroop(_) => "pi_droop",
            ControllerConfig::TunedPi(_) => "tuned_pi",
            ControllerConfig::Npc(_) => "npc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulePoint {
    pub time: f64,
    pub p_set: f64,
    pub q_set: f64,
}

impl SchedulePoint {
    pub const fn new(time: f64, p_set: f64, q_set: f64) -> Self {
        Self { time, p_set, q_set }
    }
}

/// P 0→2 kW at 1 s, 2→4 kW at 8 s, then Q 0→1 kvar at 15 s.
pub const HEADLINE_SCHEDULE: [SchedulePoint; 4] = [
    SchedulePoint::new(0.0, 0.0, 0.0),
    SchedulePoint::new(1.0, 2000.0, 0.0),
    SchedulePoint::new(8.0, 4000.0, 0.0),
    SchedulePoint::new(15.0, 4000.0, 1000.0),
];
pub const HEADLINE_DURATION: f64 = 25.0;
pub const CONTROL_PERIOD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub grid: GridChoice,
    pub controller: ControllerConfig,
    pub vsg: VsgParams,
    pub reference_schedule: Vec<SchedulePoint>,
    pub duration: f64,
    pub dt: f64,
    pub seed: u64,
    #[serde(default)]
    pub model_path: Option<PathBuf>,
    /// Excitation used by dataset collection.
    #[serde(default)]
    pub collection: Option<CollectionOptions>,
}

impl ScenarioConfig {
    /// Table I system with the headline reference schedule.
    pub fn preset(grid: GridPreset, controller: ControllerKind) -> Self {
        let grid_choice = GridChoice::from(grid);
        let v_ref = grid_choice.params().v_grid_peak;
        let controller = match controller {
            ControllerKind::PiDroop => ControllerConfig::PiDroop(PiDroopParams::with_reference(v_ref)),
            ControllerKind::TunedPi => {
                ControllerConfig::TunedPi(TunedPiParams::resistive_defaults(v_ref))
            }
            ControllerKind::Npc => ControllerConfig::Npc(NpcParams::default()),
        };
        let name = format!("{}-{}", grid_choice.name(), controller.label());
        Self {
            name,
            grid: grid_choice,
            controller,
            vsg: VsgParams::table_defaults(),
            reference_schedule: HEADLINE_SCHEDULE.to_vec(),
            duration: HEADLINE_DURATION,
            dt: CONTROL_PERIOD,
            seed: 1,
            model_path: None,
            collection: None,
        }
    }

    /// Baseline loop and excitation used to log predictor training data.
    ///
    /// Plain PI droop loses synchronism on the resistive grid, so data there
    /// is logged under the tuned PI.
    pub fn collection_preset(grid: GridPreset) -> Self {
        let (kind, dither) = match grid {
            GridPreset::Inductive => (ControllerKind::PiDroop, INDUCTIVE_DITHER),
            GridPreset::Resistive => (ControllerKind::TunedPi, RESISTIVE_DITHER),
        };
        let mut config = Self::preset(grid, kind);
        config.name = format!("{}-collect", config.grid.name());
        config.collection = Some(CollectionOptions::with_dither(dither));
        config
    }

    /// NPC on `grid` using the predictor stored at `model_path`.
    pub fn npc_preset(grid: GridPreset, model_path: impl Into<PathBuf>, horizon_steps: usize) -> Self {
        let mut config = Self::preset(grid, ControllerKind::Npc);
        config.controller = ControllerConfig::Npc(NpcParams::with_horizon(horizon_steps));
        config.model_path = Some(model_path.into());
        config
    }

    pub fn label(&self) -> String {
        if self.name.is_empty() {
            format!("{}-{}", self.grid.name(), self.controller.label())
        } else {
            self.name.clone()
        }
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.params().validate().map_err(to_config)?;
        self.vsg.validate().map_err(to_config)?;
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config("dt must be positive".into()));
        }
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return Err(Error::Config("duration must be non-negative".into()));
        }
        let sched = &self.reference_schedule;
        if sched.is_empty() || sched[0].time != 0.0 {
            return Err(Error::Config("reference schedule must start at t = 0".into()));
        }
        if sched.windows(2).any(|w| !(w[1].time > w[0].time)) {
            return Err(Error::Config("schedule times must be strictly increasing".into()));
        }
        if sched
            .iter()
            .any(|s| !s.p_set.is_finite() || !s.q_set.is_finite())
        {
            return Err(Error::Config("schedule references must be finite".into()));
        }
        match &self.controller {
            ControllerConfig::PiDroop(p) => p.validate().map_err(to_config)?,
            ControllerConfig::TunedPi(p) => p.validate().map_err(to_config)?,
            ControllerConfig::Npc(p) => {
                p.validate().map_err(to_config)?;
                if (p.dt - self.dt).abs() > 1e-15 {
                    return Err(Error::Config(format!(
                        "npc dt {} differs from scenario dt {}",
                        p.dt, self.dt
                    )));
                }
                if self.model_path.is_none() {
                    return Err(Error::Config("npc controller requires model_path".into()));
                }
            }
        }
        if let Some(c) = &self.collection {
            c.validate()?;
        }
        Ok(())
    }

    /// References in force at time `t`.
    pub fn references_at(&self, t: f64) -> (f64, f64) {
        // Half-step slack so a step scheduled at k·dt lands on sample k.
        let slack = 0.5 * self.dt;
        let idx = self
            .reference_schedule
            .partition_point(|s| s.time <= t + slack)
            .saturating_sub(1);
        let s = &self.reference_schedule[idx];
        (s.p_set, s.q_set)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: Self = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        // Model paths are relative to the config file.
        if let (Some(model), Some(dir)) = (config.model_path.as_mut(), path.parent()) {
            if model.is_relative() {
                *model = dir.join(&*model);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

fn to_config(e: Error) -> Error {
    match e {
        Error::InvalidParams(msg) => Error::Config(msg),
        other => other,
    }
}
