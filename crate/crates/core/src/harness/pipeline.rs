//! Collect-then-train helper shared by the examples and the acceptance suite.

use super::config::{GridPreset, ScenarioConfig};
use crate::error::Result;
use crate::nn::{collect_dataset, fit, Dataset, TrainOptions, TrainOutcome};

/// Logs `duration` seconds under the grid's collection preset and fits a predictor.
pub fn train_predictor(
    grid: GridPreset,
    duration: f64,
    seed: u64,
    options: &TrainOptions,
) -> Result<(Dataset, TrainOutcome)> {
    let config = ScenarioConfig::collection_preset(grid);
    let collection = config.collection.unwrap_or_default();
    let data = collect_dataset(&config, &collection, duration, seed)?;
    let outcome = fit(&data, options)?;
    Ok((data, outcome))
}
