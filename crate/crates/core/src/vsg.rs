//! Active-power / frequency loop of the virtual synchronous generator.
//!
//! The swing equation is integrated in power form,
//! `P_set − P_out = J·ω·dω/dt + D_p·(ω − ω_ref)`, at the control period.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const INERTIA: f64 = 0.1;
pub const RATED_POWER: f64 = 5000.0;
/// Frequency deviation (fraction of nominal) at which damping absorbs rated power.
pub const FREQUENCY_DROOP: f64 = 0.04;

/// How the rotor angle picks up the new angular velocity within one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleUpdate {
    /// Angle advanced with the velocity of the current step (symplectic Euler).
    #[default]
    SemiImplicit,
    /// Angle advanced with the velocity from before the update (forward Euler).
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VsgParams {
    pub j_inertia: f64,
    pub d_p: f64,
    pub omega_ref: f64,
    pub p_rated: f64,
    #[serde(default)]
    pub angle_update: AngleUpdate,
}

impl VsgParams {
    /// Damping sized so that `droop · ω_ref` of frequency error absorbs `p_rated`.
    pub fn droop_damping(p_rated: f64, droop: f64, omega_ref: f64) -> f64 {
        p_rated / (droop * omega_ref)
    }

    pub fn table_defaults() -> Self {
        let omega_ref = 2.0 * PI * crate::grid::GRID_FREQUENCY_HZ;
        Self {
            j_inertia: INERTIA,
            d_p: Self::droop_damping(RATED_POWER, FREQUENCY_DROOP, omega_ref),
            omega_ref,
            p_rated: RATED_POWER,
            angle_update: AngleUpdate::SemiImplicit,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.j_inertia > 0.0) || !self.j_inertia.is_finite() {
            return Err(Error::InvalidParams("inertia must be positive".into()));
        }
        if !(self.d_p >= 0.0) || !self.d_p.is_finite() {
            return Err(Error::InvalidParams("damping must be non-negative".into()));
        }
        if !(self.omega_ref > 0.0) || !self.omega_ref.is_finite() {
            return Err(Error::InvalidParams(
                "reference angular velocity must be positive".into(),
            ));
        }
        if !(self.p_rated > 0.0) {
            return Err(Error::InvalidParams("rated power must be positive".into()));
        }
        Ok(())
    }

    /// Power absorbed by the damping term at angular velocity `omega`.
    pub fn damping_power(&self, omega: f64) -> f64 {
        self.d_p * (omega - self.omega_ref)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VsgState {
    pub omega_i: f64,
    /// Unwrapped rotor angle.
    pub theta: f64,
    /// Angle of the inverter phasor relative to the grid phasor.
    pub delta: f64,
}

impl VsgState {
    /// Synchronized with the grid at zero power angle.
    pub fn synchronized(omega_ref: f64) -> Self {
        Self {
            omega_i: omega_ref,
            theta: 0.0,
            delta: 0.0,
        }
    }

    pub fn freq_error(&self, params: &VsgParams) -> f64 {
        self.omega_i - params.omega_ref
    }
}

/// Rate of change of the virtual angular velocity.
pub fn omega_derivative(state: &VsgState, p_set: f64, p_out: f64, params: &VsgParams) -> f64 {
    (p_set - p_out - params.damping_power(state.omega_i)) / (params.j_inertia * state.omega_i)
}

/// Advances the swing equation by one control period.
///
/// `omega_grid` is the angular velocity of the grid phasor the power angle is
/// measured against. Returns a numeric fault when the updated angular
/// velocity is no longer positive, which means the loop has diverged.
pub fn swing_step(
    state: &VsgState,
    p_set: f64,
    p_out: f64,
    params: &VsgParams,
    omega_grid: f64,
    dt: f64,
) -> Result<VsgState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParams(format!("time step must be positive, got {dt}")));
    }
    if !(state.omega_i > 0.0) {
        return Err(Error::numeric(
            f64::NAN,
            format!("angular velocity {} is not positive", state.omega_i),
        ));
    }
    let omega_dot = omega_derivative(state, p_set, p_out, params);
    let omega_next = state.omega_i + omega_dot * dt;
    if !(omega_next > 0.0) || !omega_next.is_finite() {
        return Err(Error::numeric(
            f64::NAN,
            format!("angular velocity diverged to {omega_next}"),
        ));
    }
    let omega_for_angle = match params.angle_update {
        AngleUpdate::SemiImplicit => omega_next,
        AngleUpdate::Explicit => state.omega_i,
    };
    Ok(VsgState {
        omega_i: omega_next,
        theta: state.theta + omega_for_angle * dt,
        delta: state.delta + (omega_for_angle - omega_grid) * dt,
    })
}
