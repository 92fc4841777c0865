//! Neural-network predictive voltage controller.
//!
//! Every control period the controller tries each voltage increment of a
//! fixed candidate set, holds the incremented command over the prediction
//! horizon while the trained predictor rolls the plant forward, and applies
//! the increment with the lowest tracking cost
//!
//! `J = Σ_i [(P_set − P̂_i)² + (Q_set − Q̂_i)²] / S² + γ·Δu²`
//!
//! where `S` is the rated power. References are held constant over the horizon.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Mlp, PlantOutputVec, INPUT_DIM, OUTPUT_DIM};
use crate::voltage::VoltageLimits;

/// Voltage increments tried each control period.
pub const DEFAULT_CANDIDATES: [f64; 9] = [-5.0, -1.0, -0.2, -0.04, 0.0, 0.04, 0.2, 1.0, 5.0];
/// One second at the 1 ms control period.
pub const DEFAULT_HORIZON: usize = 1000;
/// Shortened horizon for quick runs.
pub const FAST_HORIZON: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NpcParams {
    pub horizon_steps: usize,
    pub dt: f64,
    pub gamma: f64,
    pub candidate_set: Vec<f64>,
    /// Power normalizing the tracking cost (rated power).
    pub power_scale: f64,
    /// A rollout diverges when a channel exceeds this multiple of its
    /// largest training magnitude.
    pub divergence_factor: f64,
}

impl Default for NpcParams {
    fn default() -> Self {
        Self {
            horizon_steps: DEFAULT_HORIZON,
            dt: 1e-3,
            gamma: 0.0,
            candidate_set: DEFAULT_CANDIDATES.to_vec(),
            power_scale: crate::vsg::RATED_POWER,
            divergence_factor: 10.0,
        }
    }
}

impl NpcParams {
    pub fn with_horizon(horizon_steps: usize) -> Self {
        Self {
            horizon_steps,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon_steps == 0 {
            return Err(Error::InvalidParams("horizon must be at least one step".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParams("dt must be positive".into()));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidParams("gamma must be finite and non-negative".into()));
        }
        if self.candidate_set.is_empty() || !self.candidate_set.contains(&0.0) {
            return Err(Error::InvalidParams(
                "candidate set must be non-empty and contain 0".into(),
            ));
        }
        if self.candidate_set.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParams("candidates must be finite".into()));
        }
        if !(self.power_scale > 0.0) || !(self.divergence_factor > 0.0) {
            return Err(Error::InvalidParams(
                "power scale and divergence factor must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult {
    pub candidate: f64,
    /// Infinite when the rollout diverged.
    pub cost: f64,
    pub trajectory: Option<Vec<PlantOutputVec>>,
}

impl RolloutResult {
    pub fn diverged(&self) -> bool {
        !self.cost.is_finite()
    }
}

/// Largest admissible magnitude per channel before a rollout counts as diverged.
fn divergence_limits(net: &Mlp, params: &NpcParams) -> Result<[f64; OUTPUT_DIM]> {
    let training = net.training.as_ref().ok_or_else(|| {
        Error::InvalidParams("predictive control needs a trained network".into())
    })?;
    if training.output_bounds.len() != OUTPUT_DIM {
        return Err(Error::InvalidParams("network metadata lacks output bounds".into()));
    }
    Ok(std::array::from_fn(|c| {
        params.divergence_factor * training.output_bounds[c]
    }))
}

/// Predicted horizon cost of applying `e_current + delta_u` and holding it.
pub fn rollout_cost(
    net: &Mlp,
    y0: &PlantOutputVec,
    e_current: f64,
    delta_u: f64,
    refs: (f64, f64),
    params: &NpcParams,
    keep_trajectory: bool,
) -> Result<RolloutResult> {
    if !y0.is_finite() {
        return Err(Error::InvalidParams("initial plant output is not finite".into()));
    }
    let limits = divergence_limits(net, params)?;
    let mut scratch = net.scratch();
    Ok(rollout_with(
        net,
        &mut scratch,
        &limits,
        y0,
        e_current + delta_u,
        delta_u,
        refs,
        params,
        keep_trajectory,
    ))
}

#[allow(clippy::too_many_arguments)]
fn rollout_with(
    net: &Mlp,
    scratch: &mut crate::nn::mlp::Scratch,
    limits: &[f64; OUTPUT_DIM],
    y0: &PlantOutputVec,
    e: f64,
    delta_u: f64,
    (p_set, q_set): (f64, f64),
    params: &NpcParams,
    keep_trajectory: bool,
) -> RolloutResult {
    let scale_sq = params.power_scale * params.power_scale;
    let mut x = [0.0; INPUT_DIM];
    x[..OUTPUT_DIM].copy_from_slice(&y0.to_array());
    x[OUTPUT_DIM] = e;
    let mut tracking = 0.0;
    let mut trajectory = keep_trajectory.then(|| Vec::with_capacity(params.horizon_steps));
    let diverged = |candidate| RolloutResult {
        candidate,
        cost: f64::INFINITY,
        trajectory: None,
    };
    for _ in 0..params.horizon_steps {
        x[2] = p_set - x[0];
        x[3] = q_set - x[1];
        let y = match net.forward_with(&x, scratch) {
            Ok(y) => y,
            Err(_) => return diverged(delta_u),
        };
        if y.iter().zip(limits).any(|(v, lim)| v.abs() > *lim) {
            return diverged(delta_u);
        }
        let dp = p_set - y[0];
        let dq = q_set - y[1];
        tracking += dp * dp + dq * dq;
        x[..OUTPUT_DIM].copy_from_slice(y);
        if let Some(t) = trajectory.as_mut() {
            t.push(PlantOutputVec::from_slice(y));
        }
    }
    RolloutResult {
        candidate: delta_u,
        cost: tracking / scale_sq + params.gamma * delta_u * delta_u,
        trajectory,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub delta_u: f64,
    pub index: usize,
    pub results: Vec<RolloutResult>,
    pub all_divergent: bool,
}

/// Index of the minimal cost; ties go to the smallest `|Δu|`, then the
/// earliest candidate.
pub fn argmin_candidate(costs: &[f64], candidates: &[f64]) -> Option<usize> {
    (0..costs.len())
        .filter(|&i| costs[i].is_finite())
        .min_by(|&a, &b| {
            costs[a]
                .total_cmp(&costs[b])
                .then(candidates[a].abs().total_cmp(&candidates[b].abs()))
                .then(a.cmp(&b))
        })
}

/// Evaluates every candidate increment and picks the cheapest.
///
/// When every rollout diverges the selection falls back to `Δu = 0` and sets
/// `all_divergent`.
pub fn select_control(
    net: &Mlp,
    y0: &PlantOutputVec,
    e_current: f64,
    refs: (f64, f64),
    params: &NpcParams,
) -> Result<Selection> {
    params.validate()?;
    if !y0.is_finite() {
        return Err(Error::InvalidParams("initial plant output is not finite".into()));
    }
    let limits = divergence_limits(net, params)?;
    let mut scratch = net.scratch();
    let results: Vec<RolloutResult> = params
        .candidate_set
        .iter()
        .map(|&du| {
            rollout_with(net, &mut scratch, &limits, y0, e_current + du, du, refs, params, false)
        })
        .collect();
    let costs: Vec<f64> = results.iter().map(|r| r.cost).collect();
    Ok(match argmin_candidate(&costs, &params.candidate_set) {
        Some(index) => Selection {
            delta_u: params.candidate_set[index],
            index,
            results,
            all_divergent: false,
        },
        None => Selection {
            delta_u: 0.0,
            index: params
                .candidate_set
                .iter()
                .position(|&c| c == 0.0)
                .expect("validated candidate set contains 0"),
            results,
            all_divergent: true,
        },
    })
}

/// One logged control decision.
#[derive(Debug, Clone, PartialEq)]
pub struct NpcDecision {
    pub time: f64,
    pub costs: Vec<f64>,
    pub chosen: f64,
}

/// Receding-horizon controller state.
#[derive(Debug, Clone)]
pub struct NpcController {
    net: Mlp,
    params: NpcParams,
    limits: VoltageLimits,
    e_cmd: f64,
    /// Control periods in which every candidate diverged.
    pub all_divergent_events: u64,
    log: Option<Vec<NpcDecision>>,
}

impl NpcController {
    pub fn new(net: Mlp, params: NpcParams, v_ref: f64, e_init: f64) -> Result<Self> {
        params.validate()?;
        net.validate()?;
        divergence_limits(&net, &params)?;
        if net.input_dim() != INPUT_DIM || net.output_dim() != OUTPUT_DIM {
            return Err(Error::InvalidParams("predictor has the wrong input/output width".into()));
        }
        Ok(Self {
            net,
            params,
            limits: VoltageLimits::around(v_ref),
            e_cmd: e_init,
            all_divergent_events: 0,
            log: None,
        })
    }

    /// Keeps every decision for later inspection.
    pub fn with_decision_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn e_cmd(&self) -> f64 {
        self.e_cmd
    }

    pub fn params(&self) -> &NpcParams {
        &self.params
    }

    pub fn decisions(&self) -> Option<&[NpcDecision]> {
        self.log.as_deref()
    }

    pub fn take_decisions(&mut self) -> Vec<NpcDecision> {
        self.log.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Chooses the next voltage command from the current measurement.
    pub fn step(&mut self, time: f64, y: &PlantOutputVec, refs: (f64, f64)) -> Result<f64> {
        let selection = select_control(&self.net, y, self.e_cmd, refs, &self.params)?;
        if selection.all_divergent {
            self.all_divergent_events += 1;
        }
        self.e_cmd = self.limits.clamp(self.e_cmd + selection.delta_u);
        if let Some(log) = self.log.as_mut() {
            log.push(NpcDecision {
                time,
                costs: selection.results.iter().map(|r| r.cost).collect(),
                chosen: selection.delta_u,
            });
        }
        Ok(self.e_cmd)
    }
}
