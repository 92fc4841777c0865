//! Central finite-difference check of [`mlp_backprop`].
//!
//! The numerical gradient is built from forward passes only, so it does not
//! share any code with the analytic backward pass it checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::mlp::{mlp_backprop, mlp_loss, Mlp, OutputMode, DEFAULT_LAYER_DIMS};
use crate::error::Result;

pub const FD_STEP: f64 = 1e-6;
pub const REL_TOLERANCE: f64 = 1e-4;
/// Gradient magnitude below which the relative error is measured against
/// this floor instead; central differences at `FD_STEP` carry about 1e-10 of
/// rounding noise.
pub const MAGNITUDE_FLOOR: f64 = 1e-5;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(MAGNITUDE_FLOOR)
}

/// Central-difference gradient of the single-sample loss.
pub fn numerical_gradient(net: &Mlp, input: &[f64], target: &[f64], step: f64) -> Vec<f64> {
    let base = net.flat_params();
    let mut probe = net.clone();
    let mut params = base.clone();
    (0..base.len())
        .map(|i| {
            params[i] = base[i] + step;
            probe.set_flat_params(&params);
            let plus = mlp_loss(&probe, [(input, target)]);
            params[i] = base[i] - step;
            probe.set_flat_params(&params);
            let minus = mlp_loss(&probe, [(input, target)]);
            params[i] = base[i];
            (plus - minus) / (2.0 * step)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub nets: usize,
    pub samples_per_net: usize,
    pub parameters_checked: usize,
    pub max_relative_error: f64,
    /// `(net, sample, parameter)` of the worst component.
    pub worst: (usize, usize, usize),
    pub failures: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Checks random networks, with random normalization statistics, on random samples.
pub fn check_random_networks(seed: u64, nets: usize, samples: usize) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport {
        nets,
        samples_per_net: samples,
        parameters_checked: 0,
        max_relative_error: 0.0,
        worst: (0, 0, 0),
        failures: 0,
    };
    for n in 0..nets {
        let mode = if n % 2 == 0 {
            OutputMode::Residual
        } else {
            OutputMode::Absolute
        };
        let mut net = Mlp::random(&DEFAULT_LAYER_DIMS, mode, &mut rng)?;
        for c in 0..net.input_dim() {
            net.input_norm.mean[c] = rng.gen_range(-100.0..100.0);
            net.input_norm.std[c] = rng.gen_range(0.1..50.0);
        }
        for c in 0..net.output_dim() {
            net.output_norm.mean[c] = rng.gen_range(-10.0..10.0);
            net.output_norm.std[c] = rng.gen_range(0.1..20.0);
        }
        for s in 0..samples {
            let input: Vec<f64> = (0..net.input_dim())
                .map(|c| net.input_norm.mean[c] + net.input_norm.std[c] * rng.gen_range(-2.0..2.0))
                .collect();
            // Residual nets normalize target − input, so draw the residual.
            let target: Vec<f64> = (0..net.output_dim())
                .map(|c| {
                    let base = match mode {
                        OutputMode::Residual => input[c],
                        OutputMode::Absolute => 0.0,
                    };
                    base + net.output_norm.mean[c] + net.output_norm.std[c] * rng.gen_range(-2.0..2.0)
                })
                .collect();
            let (grads, _) = mlp_backprop(&net, [(&input[..], &target[..])])?;
            let numeric = numerical_gradient(&net, &input, &target, FD_STEP);
            for (p, (a, nmr)) in grads.flat().iter().zip(&numeric).enumerate() {
                let err = relative_error(*a, *nmr);
                report.parameters_checked += 1;
                if err > REL_TOLERANCE {
                    report.failures += 1;
                }
                if err > report.max_relative_error {
                    report.max_relative_error = err;
                    report.worst = (n, s, p);
                }
            }
        }
    }
    Ok(report)
}
