//! Offline batch training of the predictor.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Sample};
use super::mlp::{mlp_backprop, mlp_loss, ChannelNorm, Gradients, Mlp, OutputMode, TrainingMetadata};
use super::{OUTPUT_CHANNELS, OUTPUT_DIM};
use crate::error::{Error, Result};

pub const MIN_TRAINING_ROWS: usize = 1000;
/// Training stops with an error once the loss grows past this multiple of its
/// starting value.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Optimizer {
    /// Gradient descent, with heavy-ball momentum when `momentum > 0`.
    Sgd { momentum: f64 },
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Rows per update; `None` trains on the full batch.
    pub batch_size: Option<usize>,
    pub optimizer: Optimizer,
    pub validation_fraction: f64,
    pub layer_dims: Vec<usize>,
    pub output_mode: OutputMode,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 1e-3,
            seed: 1,
            batch_size: Some(256),
            optimizer: Optimizer::adam(),
            validation_fraction: 0.1,
            layer_dims: super::mlp::DEFAULT_LAYER_DIMS.to_vec(),
            output_mode: OutputMode::Residual,
        }
    }
}

impl TrainOptions {
    /// Full-batch plain gradient descent.
    pub fn full_batch_gd(epochs: usize, learning_rate: f64, seed: u64) -> Self {
        Self {
            epochs,
            learning_rate,
            seed,
            batch_size: None,
            optimizer: Optimizer::Sgd { momentum: 0.0 },
            ..Self::default()
        }
    }
}

struct OptimizerState {
    first: Vec<f64>,
    second: Vec<f64>,
    steps: u64,
}

impl OptimizerState {
    fn new(n: usize) -> Self {
        Self {
            first: vec![0.0; n],
            second: vec![0.0; n],
            steps: 0,
        }
    }

    fn apply(&mut self, net: &mut Mlp, grads: &Gradients, optimizer: Optimizer, lr: f64) {
        self.steps += 1;
        let g = grads.flat();
        match optimizer {
            Optimizer::Sgd { momentum } => {
                let mut i = 0;
                let velocity = &mut self.first;
                net.for_each_param_mut(|p| {
                    velocity[i] = momentum * velocity[i] - lr * g[i];
                    *p += velocity[i];
                    i += 1;
                });
            }
            Optimizer::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                let t = self.steps as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                let (m, v) = (&mut self.first, &mut self.second);
                let mut i = 0;
                net.for_each_param_mut(|p| {
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                    *p -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + epsilon);
                    i += 1;
                });
            }
        }
    }
}

/// Trains `net` on `rows` and returns it with the per-epoch training loss.
///
/// The loss after each epoch is measured over all of `rows`. Mini-batches are
/// drawn from a shuffle seeded by `options.seed`.
pub fn train_batch(mut net: Mlp, rows: &[Sample], options: &TrainOptions) -> Result<(Mlp, Vec<f64>)> {
    if options.epochs == 0 {
        return Ok((net, Vec::new()));
    }
    if rows.len() < MIN_TRAINING_ROWS {
        return Err(Error::InvalidParams(format!(
            "training needs at least {MIN_TRAINING_ROWS} rows, got {}",
            rows.len()
        )));
    }
    if !(options.learning_rate > 0.0) {
        return Err(Error::InvalidParams("learning rate must be positive".into()));
    }
    let batch = options.batch_size.unwrap_or(rows.len()).clamp(1, rows.len());
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut state = OptimizerState::new(net.parameter_count());
    let initial = mlp_loss(&net, rows.iter().map(Sample::pair));
    let limit = DIVERGENCE_FACTOR * initial.max(f64::MIN_POSITIVE);
    let mut history = Vec::with_capacity(options.epochs);
    for epoch in 0..options.epochs {
        if batch < rows.len() {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            let (grads, _) = mlp_backprop(&net, chunk.iter().map(|&i| rows[i].pair()))?;
            state.apply(&mut net, &grads, options.optimizer, options.learning_rate);
        }
        let loss = mlp_loss(&net, rows.iter().map(Sample::pair));
        if !loss.is_finite() || loss > limit {
            return Err(Error::TrainingDiverged { epoch, loss, limit });
        }
        history.push(loss);
    }
    Ok((net, history))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub net: Mlp,
    pub history: Vec<f64>,
    pub validation: EvalReport,
}

/// Builds a network whose normalization is fitted to the training split,
/// trains it, and scores it on the held-out tail.
pub fn fit(data: &Dataset, options: &TrainOptions) -> Result<TrainOutcome> {
    let (train_rows, val_rows) = data.split(options.validation_fraction);
    if train_rows.is_empty() {
        return Err(Error::InvalidParams("dataset is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut net = Mlp::random(&options.layer_dims, options.output_mode, &mut rng)?;
    if net.input_dim() != super::INPUT_DIM || net.output_dim() != OUTPUT_DIM {
        return Err(Error::InvalidParams(format!(
            "predictor dims must start at {} and end at {}",
            super::INPUT_DIM,
            OUTPUT_DIM
        )));
    }
    net.input_norm = ChannelNorm::fit(net.input_dim(), train_rows.iter().map(|s| &s.input[..]));
    net.output_norm = match options.output_mode {
        OutputMode::Absolute => {
            ChannelNorm::fit(OUTPUT_DIM, train_rows.iter().map(|s| &s.target[..]))
        }
        OutputMode::Residual => {
            let deltas: Vec<[f64; OUTPUT_DIM]> = train_rows
                .iter()
                .map(|s| std::array::from_fn(|c| s.target[c] - s.input[c]))
                .collect();
            ChannelNorm::fit(OUTPUT_DIM, deltas.iter().map(|d| &d[..]))
        }
    };

    let (mut net, history) = train_batch(net, train_rows, options)?;
    let validation = evaluate(&net, if val_rows.is_empty() { train_rows } else { val_rows })?;
    let mut output_bounds = vec![0.0f64; OUTPUT_DIM];
    for s in train_rows {
        for (b, t) in output_bounds.iter_mut().zip(&s.target) {
            *b = b.max(t.abs());
        }
    }
    net.training = Some(TrainingMetadata {
        seed: options.seed,
        epochs: options.epochs,
        learning_rate: options.learning_rate,
        final_train_loss: history.last().copied().unwrap_or(f64::NAN),
        final_validation_loss: mlp_loss(&net, val_rows.iter().map(Sample::pair)),
        train_rows: train_rows.len(),
        validation_rows: val_rows.len(),
        scenario: data.meta.scenario.clone(),
        dt: data.meta.dt,
        output_bounds,
    });
    Ok(TrainOutcome {
        net,
        history,
        validation,
    })
}

/// One-step prediction error per output channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: usize,
    pub rmse: Vec<f64>,
    /// `max − min` of each target channel over the evaluated rows.
    pub range: Vec<f64>,
    /// RMSE as a percentage of the channel range.
    pub rmse_pct_of_range: Vec<f64>,
}

impl EvalReport {
    pub fn worst_pct(&self) -> f64 {
        self.rmse_pct_of_range.iter().copied().fold(0.0, f64::max)
    }

    pub fn table(&self) -> String {
        let mut out = format!("{:<10} {:>14} {:>14} {:>10}\n", "channel", "rmse", "range", "% range");
        for c in 0..OUTPUT_DIM {
            out += &format!(
                "{:<10} {:>14.6e} {:>14.6e} {:>10.4}\n",
                OUTPUT_CHANNELS[c], self.rmse[c], self.range[c], self.rmse_pct_of_range[c]
            );
        }
        out
    }
}

pub fn evaluate(net: &Mlp, rows: &[Sample]) -> Result<EvalReport> {
    if rows.is_empty() {
        return Err(Error::InvalidParams("nothing to evaluate".into()));
    }
    let mut scratch = net.scratch();
    let mut sq = [0.0; OUTPUT_DIM];
    let mut lo = [f64::INFINITY; OUTPUT_DIM];
    let mut hi = [f64::NEG_INFINITY; OUTPUT_DIM];
    for s in rows {
        let y = net.forward_with(&s.input, &mut scratch)?;
        for c in 0..OUTPUT_DIM {
            let e = y[c] - s.target[c];
            sq[c] += e * e;
            lo[c] = lo[c].min(s.target[c]);
            hi[c] = hi[c].max(s.target[c]);
        }
    }
    let n = rows.len() as f64;
    let rmse: Vec<f64> = sq.iter().map(|s| (s / n).sqrt()).collect();
    let range: Vec<f64> = (0..OUTPUT_DIM).map(|c| hi[c] - lo[c]).collect();
    let rmse_pct_of_range = rmse
        .iter()
        .zip(&range)
        .map(|(e, r)| if *r > 0.0 { 100.0 * e / r } else if *e == 0.0 { 0.0 } else { f64::INFINITY })
        .collect();
    Ok(EvalReport {
        rows: rows.len(),
        rmse,
        range,
        rmse_pct_of_range,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::dataset::DatasetMeta;
    use rand::Rng;

    /// Targets are an affine function of the inputs.
    fn linear_dataset(rows: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut data = Dataset::new(DatasetMeta::default());
        for _ in 0..rows {
            let input: [f64; 7] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let target = std::array::from_fn(|c| {
                0.3 * input[c] - 0.2 * input[6] + 0.1 * input[(c + 1) % 7] + 0.05 * c as f64
            });
            data.samples.push(Sample {
                episode: 0,
                input,
                target,
            });
        }
        data
    }

    #[test]
    fn zero_epochs_is_a_no_op() {
        let data = linear_dataset(10);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::random(&[7, 7, 7, 6], OutputMode::Absolute, &mut rng).unwrap();
        let opts = TrainOptions {
            epochs: 0,
            ..TrainOptions::default()
        };
        let (out, history) = train_batch(net.clone(), &data.samples, &opts).unwrap();
        assert_eq!(out, net);
        assert!(history.is_empty());
    }

    #[test]
    fn rejects_small_datasets_and_bad_rates() {
        let data = linear_dataset(999);
        let net = Mlp::zeros(&[7, 6], OutputMode::Absolute).unwrap();
        assert!(train_batch(net.clone(), &data.samples, &TrainOptions::default()).is_err());
        let data = linear_dataset(1200);
        let opts = TrainOptions {
            learning_rate: 0.0,
            ..TrainOptions::default()
        };
        assert!(train_batch(net, &data.samples, &opts).is_err());
    }

    #[test]
    fn linear_target_is_learned_by_a_linear_net() {
        let data = linear_dataset(1200);
        let opts = TrainOptions {
            layer_dims: vec![7, 6],
            output_mode: OutputMode::Absolute,
            ..TrainOptions::full_batch_gd(400, 0.5, 3)
        };
        let outcome = fit(&data, &opts).unwrap();
        assert!(*outcome.history.last().unwrap() < 1e-10, "{:?}", outcome.history.last());
    }

    #[test]
    fn small_rate_full_batch_loss_is_monotone() {
        let data = linear_dataset(1200);
        let opts = TrainOptions::full_batch_gd(50, 0.05, 5);
        let outcome = fit(&data, &opts).unwrap();
        for w in outcome.history.windows(2) {
            assert!(w[1] <= w[0], "{w:?}");
        }
    }

    #[test]
    fn huge_rate_reports_divergence() {
        let data = linear_dataset(1200);
        let opts = TrainOptions {
            layer_dims: vec![7, 6],
            output_mode: OutputMode::Absolute,
            ..TrainOptions::full_batch_gd(200, 1e3, 5)
        };
        assert!(matches!(fit(&data, &opts), Err(Error::TrainingDiverged { .. })));
    }

    #[test]
    fn training_is_deterministic() {
        let data = linear_dataset(1500);
        let opts = TrainOptions {
            epochs: 3,
            ..TrainOptions::default()
        };
        let a = fit(&data, &opts).unwrap();
        let b = fit(&data, &opts).unwrap();
        assert_eq!(a.net, b.net);
        assert_eq!(a.history, b.history);
    }
}
