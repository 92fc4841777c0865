//! One-step plant predictor: network, training data and offline training.

pub mod dataset;
pub mod gradcheck;
pub mod mlp;
pub mod train;

use serde::{Deserialize, Serialize};

pub use dataset::{collect_dataset, CollectionOptions, Dataset, DatasetMeta, Sample};
pub use mlp::{mlp_backprop, ChannelNorm, Gradients, Mlp, OutputMode, TrainingMetadata};
pub use train::{evaluate, fit, train_batch, EvalReport, Optimizer, TrainOptions, TrainOutcome};

/// Width of the predictor input: six plant outputs and the voltage command.
pub const INPUT_DIM: usize = 7;
/// Width of the predictor output.
pub const OUTPUT_DIM: usize = 6;

pub const OUTPUT_CHANNELS: [&str; OUTPUT_DIM] =
    ["p_out", "q_out", "p_err", "q_err", "freq_err", "delta"];

/// Measured (or predicted) plant outputs at one control step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlantOutputVec {
    pub p_out: f64,
    pub q_out: f64,
    /// `p_set − p_out`
    pub p_err: f64,
    /// `q_set − q_out`
    pub q_err: f64,
    /// `ω_i − ω_ref`
    pub freq_err: f64,
    pub delta: f64,
}

impl PlantOutputVec {
    pub fn measured(p_out: f64, q_out: f64, refs: (f64, f64), freq_err: f64, delta: f64) -> Self {
        Self {
            p_out,
            q_out,
            p_err: refs.0 - p_out,
            q_err: refs.1 - q_out,
            freq_err,
            delta,
        }
    }

    pub fn to_array(&self) -> [f64; OUTPUT_DIM] {
        [
            self.p_out,
            self.q_out,
            self.p_err,
            self.q_err,
            self.freq_err,
            self.delta,
        ]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            p_out: v[0],
            q_out: v[1],
            p_err: v[2],
            q_err: v[3],
            freq_err: v[4],
            delta: v[5],
        }
    }

    /// Network input for this output and a voltage command.
    pub fn with_command(&self, e_cmd: f64) -> [f64; INPUT_DIM] {
        let y = self.to_array();
        [y[0], y[1], y[2], y[3], y[4], y[5], e_cmd]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}
