//! Averaged phasor model of the inverter, series line impedance and stiff grid.
//!
//! The inverter is an ideal voltage source `E∠δ` behind `Z = R + jX`, feeding an
//! infinite bus `V∠0`. All voltages are per-phase peak values, which is why each
//! power expression carries a factor of one half.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Table I line voltage, interpreted as line-to-line RMS.
pub const LINE_VOLTAGE_RMS: f64 = 110.0;
pub const GRID_FREQUENCY_HZ: f64 = 60.0;
pub const FILTER_INDUCTANCE: f64 = 1e-6;

/// Per-phase peak voltage of a balanced three-phase system from its line-to-line RMS value.
pub fn phase_peak_from_line_rms(v_line_rms: f64) -> f64 {
    v_line_rms * 2f64.sqrt() / 3f64.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    pub v_grid_peak: f64,
    pub omega_nominal: f64,
    pub r_eq: f64,
    pub x_eq: f64,
}

impl GridParams {
    pub fn new(v_grid_peak: f64, omega_nominal: f64, r_eq: f64, x_eq: f64) -> Result<Self> {
        let params = Self {
            v_grid_peak,
            omega_nominal,
            r_eq,
            x_eq,
        };
        params.validate()?;
        Ok(params)
    }

    /// Grid with the filter inductance folded into the line reactance.
    pub fn from_line(
        v_grid_peak: f64,
        frequency_hz: f64,
        filter_inductance: f64,
        line_inductance: f64,
        line_resistance: f64,
    ) -> Result<Self> {
        let omega = 2.0 * PI * frequency_hz;
        Self::new(
            v_grid_peak,
            omega,
            line_resistance,
            omega * (filter_inductance + line_inductance),
        )
    }

    /// Mostly inductive connection: 0.1 mH line, 10 mΩ.
    pub fn inductive() -> Self {
        Self::from_line(
            phase_peak_from_line_rms(LINE_VOLTAGE_RMS),
            GRID_FREQUENCY_HZ,
            FILTER_INDUCTANCE,
            1e-4,
            1e-2,
        )
        .expect("preset is valid")
    }

    /// Mostly resistive connection: 1 µH line, 0.5 Ω.
    pub fn resistive() -> Self {
        Self::from_line(
            phase_peak_from_line_rms(LINE_VOLTAGE_RMS),
            GRID_FREQUENCY_HZ,
            FILTER_INDUCTANCE,
            1e-6,
            5e-1,
        )
        .expect("preset is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.v_grid_peak, self.omega_nominal, self.r_eq, self.x_eq]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidParams("grid parameters must be finite".into()));
        }
        if self.r_eq < 0.0 || self.x_eq < 0.0 {
            return Err(Error::InvalidParams(format!(
                "line resistance and reactance must be non-negative (r = {}, x = {})",
                self.r_eq, self.x_eq
            )));
        }
        if self.r_eq + self.x_eq <= 0.0 {
            return Err(Error::InvalidParams("impedance magnitude is zero".into()));
        }
        if self.v_grid_peak <= 0.0 || self.omega_nominal <= 0.0 {
            return Err(Error::InvalidParams(
                "grid voltage and frequency must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn impedance_sq(&self) -> f64 {
        self.r_eq * self.r_eq + self.x_eq * self.x_eq
    }

    pub fn impedance(&self) -> f64 {
        self.impedance_sq().sqrt()
    }
}

/// Per-phase active and reactive power delivered to the grid.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhasePowers {
    pub p_phase: f64,
    pub q_phase: f64,
}

impl PhasePowers {
    pub fn p_total(&self) -> f64 {
        3.0 * self.p_phase
    }

    pub fn q_total(&self) -> f64 {
        3.0 * self.q_phase
    }
}

/// Full power-flow solution for arbitrary `R` and `X`.
pub fn power_flow_exact(e: f64, params: &GridParams, delta: f64) -> Result<PhasePowers> {
    let z_sq = params.impedance_sq();
    if !(z_sq > 0.0) {
        return Err(Error::InvalidParams("impedance magnitude is zero".into()));
    }
    let v = params.v_grid_peak;
    let (sin_d, cos_d) = delta.sin_cos();
    // In-phase and quadrature parts of E·conj(E − V∠-δ).
    let direct = e * e - e * v * cos_d;
    let quad = e * v * sin_d;
    Ok(PhasePowers {
        p_phase: 0.5 * (direct * params.r_eq + quad * params.x_eq) / z_sq,
        q_phase: 0.5 * (direct * params.x_eq - quad * params.r_eq) / z_sq,
    })
}

/// Power flow across a purely inductive line (`R = 0`).
pub fn power_flow_inductive(e: f64, v: f64, x: f64, delta: f64) -> Result<PhasePowers> {
    check_reactance(x)?;
    let (sin_d, cos_d) = delta.sin_cos();
    Ok(PhasePowers {
        p_phase: e * v * sin_d / (2.0 * x),
        q_phase: e * (e - v * cos_d) / (2.0 * x),
    })
}

/// Small-angle form of [`power_flow_inductive`]: `sin δ ≈ δ`, `cos δ ≈ 1`.
pub fn power_flow_linearized(e: f64, v: f64, x: f64, delta: f64) -> Result<PhasePowers> {
    check_reactance(x)?;
    Ok(PhasePowers {
        p_phase: e * v * delta / (2.0 * x),
        q_phase: e * (e - v) / (2.0 * x),
    })
}

fn check_reactance(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!(
            "line reactance must be positive, got {x}"
        )))
    }
}
