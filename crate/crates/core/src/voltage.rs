//! Baseline voltage-magnitude controllers.
//!
//! [`pi_droop_step`] is the integral reactive-power law with a voltage droop,
//! `E = (1/K_i)·∫ΔQ dt − D_v·ΔV`. [`tuned_pi_step`] runs a PI on a blend of
//! the reactive and active power errors, for lines where the magnitude also
//! moves active power. Both clamp the command to `[0.5, 1.5]·v_ref` and stop
//! integrating while clamped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CLAMP_LOW: f64 = 0.5;
pub const CLAMP_HIGH: f64 = 1.5;

/// Admissible range of the voltage command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoltageLimits {
    pub min: f64,
    pub max: f64,
}

impl VoltageLimits {
    pub fn around(v_ref: f64) -> Self {
        Self {
            min: CLAMP_LOW * v_ref,
            max: CLAMP_HIGH * v_ref,
        }
    }

    pub fn contains(&self, e: f64) -> bool {
        e >= self.min && e <= self.max
    }

    pub fn clamp(&self, e: f64) -> f64 {
        e.clamp(self.min, self.max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiDroopParams {
    pub k_i: f64,
    #[serde(default)]
    pub d_v: f64,
    pub v_ref: f64,
    pub e_init: f64,
}

impl PiDroopParams {
    /// Default gain: closes the inductive reactive loop in about half a second.
    pub const DEFAULT_K_I: f64 = 400.0;

    pub fn with_reference(v_ref: f64) -> Self {
        Self {
            k_i: Self::DEFAULT_K_I,
            d_v: 0.0,
            v_ref,
            e_init: v_ref,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_i > 0.0) || !self.k_i.is_finite() {
            return Err(Error::InvalidParams("k_i must be positive".into()));
        }
        if !(self.d_v >= 0.0) || !self.d_v.is_finite() {
            return Err(Error::InvalidParams("d_v must be non-negative".into()));
        }
        if !(self.v_ref > 0.0) || !self.e_init.is_finite() {
            return Err(Error::InvalidParams("v_ref must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiDroopState {
    pub integrator: f64,
    pub clamp_events: u64,
}

impl PiDroopState {
    pub fn new(params: &PiDroopParams) -> Self {
        Self {
            integrator: params.e_init,
            clamp_events: 0,
        }
    }
}

pub fn pi_droop_step(
    state: &PiDroopState,
    q_set: f64,
    q_out: f64,
    v_meas: f64,
    params: &PiDroopParams,
    dt: f64,
) -> Result<(f64, PiDroopState)> {
    check_dt(dt)?;
    let limits = VoltageLimits::around(params.v_ref);
    let droop = params.d_v * (params.v_ref - v_meas);
    let integrator = state.integrator + (q_set - q_out) * dt / params.k_i;
    let raw = integrator - droop;
    if limits.contains(raw) {
        return Ok((
            raw,
            PiDroopState {
                integrator,
                clamp_events: state.clamp_events,
            },
        ));
    }
    let held = state.integrator - droop;
    Ok((
        limits.clamp(held),
        PiDroopState {
            integrator: state.integrator,
            clamp_events: state.clamp_events + 1,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TunedPiParams {
    pub k_p: f64,
    pub k_i: f64,
    pub mix_p: f64,
    pub v_ref: f64,
}

impl TunedPiParams {
    /// Best triple of the coarse resistive-line gain search
    /// (see [`crate::harness::tuning`]).
    pub const RESISTIVE_K_P: f64 = 0.0;
    pub const RESISTIVE_K_I: f64 = 10.0;
    pub const RESISTIVE_MIX_P: f64 = 10.0;

    pub fn resistive_defaults(v_ref: f64) -> Self {
        Self {
            k_p: Self::RESISTIVE_K_P,
            k_i: Self::RESISTIVE_K_I,
            mix_p: Self::RESISTIVE_MIX_P,
            v_ref,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_i > 0.0) || !self.k_i.is_finite() {
            return Err(Error::InvalidParams("k_i must be positive".into()));
        }
        if !self.mix_p.is_finite() || !self.k_p.is_finite() {
            return Err(Error::InvalidParams("k_p and mix_p must be finite".into()));
        }
        if !(self.v_ref > 0.0) {
            return Err(Error::InvalidParams("v_ref must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TunedPiState {
    /// `(1/k_i)·∫ε dt`, added on top of `v_ref`.
    pub integrator: f64,
    pub clamp_events: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerErrors {
    pub p_set: f64,
    pub p_out: f64,
    pub q_set: f64,
    pub q_out: f64,
}

pub fn tuned_pi_step(
    state: &TunedPiState,
    errors: PowerErrors,
    params: &TunedPiParams,
    dt: f64,
) -> Result<(f64, TunedPiState)> {
    check_dt(dt)?;
    let limits = VoltageLimits::around(params.v_ref);
    let combined =
        (errors.q_set - errors.q_out) + params.mix_p * (errors.p_set - errors.p_out);
    let proportional = params.k_p * combined;
    let integrator = state.integrator + combined * dt / params.k_i;
    let raw = params.v_ref + proportional + integrator;
    if limits.contains(raw) {
        return Ok((
            raw,
            TunedPiState {
                integrator,
                clamp_events: state.clamp_events,
            },
        ));
    }
    let held = params.v_ref + proportional + state.integrator;
    Ok((
        limits.clamp(held),
        TunedPiState {
            integrator: state.integrator,
            clamp_events: state.clamp_events + 1,
        },
    ))
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("time step must be positive, got {dt}")))
    }
}
