//! Fully connected feed-forward predictor with tanh hidden layers and a linear
//! output layer. Inputs and outputs are z-scored with statistics stored in the
//! network itself, and all training happens in that normalized space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hidden layer sizes of the default predictor: two layers of seven nodes.
pub const DEFAULT_LAYER_DIMS: [usize; 4] = [7, 7, 7, 6];
pub const FORMAT_VERSION: u32 = 1;

/// Per-channel affine normalization `z = (x − mean) / std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelNorm {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ChannelNorm {
    pub fn identity(width: usize) -> Self {
        Self {
            mean: vec![0.0; width],
            std: vec![1.0; width],
        }
    }

    /// Mean and population standard deviation of each column. Constant
    /// columns get a unit std so they normalize to zero.
    pub fn fit<'a, I>(width: usize, rows: I) -> Self
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut count = 0usize;
        let mut mean = vec![0.0; width];
        let mut m2 = vec![0.0; width];
        for row in rows {
            count += 1;
            for c in 0..width {
                // Welford update.
                let d = row[c] - mean[c];
                mean[c] += d / count as f64;
                m2[c] += d * (row[c] - mean[c]);
            }
        }
        let std = m2
            .iter()
            .map(|&s| {
                let sd = if count > 0 { (s / count as f64).sqrt() } else { 0.0 };
                if sd.is_finite() && sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn normalize_into(&self, x: &[f64], out: &mut [f64]) {
        for c in 0..self.mean.len() {
            out[c] = (x[c] - self.mean[c]) / self.std[c];
        }
    }

    pub fn denormalize_into(&self, z: &[f64], out: &mut [f64]) {
        for c in 0..self.mean.len() {
            out[c] = z[c] * self.std[c] + self.mean[c];
        }
    }

    fn validate(&self, width: usize, what: &str) -> Result<()> {
        if self.mean.len() != width || self.std.len() != width {
            return Err(Error::InvalidParams(format!(
                "{what} normalization has {} channels, expected {width}",
                self.mean.len()
            )));
        }
        if self.mean.iter().any(|m| !m.is_finite())
            || self.std.iter().any(|s| !(*s > 0.0) || !s.is_finite())
        {
            return Err(Error::InvalidParams(format!(
                "{what} normalization must be finite with positive std"
            )));
        }
        Ok(())
    }
}

/// What the denormalized network output represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    /// The output is the next plant output itself.
    Absolute,
    /// The output is the change from the current plant output, which occupies
    /// the leading input channels.
    #[default]
    Residual,
}

/// Dense layer, `y = W·x + b` with `W` stored row-major (`outputs × inputs`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    #[inline]
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, out_o) in out.iter_mut().enumerate().take(self.outputs) {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let mut acc = self.biases[o];
            for (w, xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            *out_o = acc;
        }
    }
}

/// Provenance recorded when a network is trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub final_train_loss: f64,
    pub final_validation_loss: f64,
    pub train_rows: usize,
    pub validation_rows: usize,
    #[serde(default)]
    pub scenario: String,
    #[serde(default)]
    pub dt: f64,
    /// Largest absolute value seen per output channel in the training targets.
    pub output_bounds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mlp {
    pub format_version: u32,
    pub layer_dims: Vec<usize>,
    pub layers: Vec<Layer>,
    pub input_norm: ChannelNorm,
    pub output_norm: ChannelNorm,
    #[serde(default)]
    pub output_mode: OutputMode,
    #[serde(default)]
    pub training: Option<TrainingMetadata>,
}

/// Reusable activations buffer so hot loops do not allocate.
#[derive(Debug, Clone)]
pub struct Scratch {
    /// Post-activation values per layer; index 0 is the normalized input.
    acts: Vec<Vec<f64>>,
    out: Vec<f64>,
}

impl Mlp {
    /// Network with every weight and bias zero and identity normalization.
    pub fn zeros(layer_dims: &[usize], output_mode: OutputMode) -> Result<Self> {
        check_dims(layer_dims, output_mode)?;
        let layers = layer_dims
            .windows(2)
            .map(|w| Layer::zeros(w[0], w[1]))
            .collect();
        Ok(Self {
            format_version: FORMAT_VERSION,
            layer_dims: layer_dims.to_vec(),
            layers,
            input_norm: ChannelNorm::identity(layer_dims[0]),
            output_norm: ChannelNorm::identity(*layer_dims.last().unwrap()),
            output_mode,
            training: None,
        })
    }

    /// Uniform initialization in `±1/√fan_in` for weights and biases.
    pub fn random<R: rand::Rng>(
        layer_dims: &[usize],
        output_mode: OutputMode,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(layer_dims, output_mode)?;
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for w in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                *w = rng.gen_range(-bound..=bound);
            }
        }
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn is_trained(&self) -> bool {
        self.training.is_some()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    pub fn scratch(&self) -> Scratch {
        Scratch {
            acts: self.layer_dims.iter().map(|&d| vec![0.0; d]).collect(),
            out: vec![0.0; self.output_dim()],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::InvalidParams(format!(
                "unsupported network format version {}",
                self.format_version
            )));
        }
        check_dims(&self.layer_dims, self.output_mode)?;
        if self.layers.len() + 1 != self.layer_dims.len() {
            return Err(Error::InvalidParams("layer count does not match dims".into()));
        }
        for (layer, dims) in self.layers.iter().zip(self.layer_dims.windows(2)) {
            if layer.inputs != dims[0]
                || layer.outputs != dims[1]
                || layer.weights.len() != dims[0] * dims[1]
                || layer.biases.len() != dims[1]
            {
                return Err(Error::InvalidParams(format!(
                    "layer shape does not match dims {dims:?}"
                )));
            }
            if layer
                .weights
                .iter()
                .chain(&layer.biases)
                .any(|v| !v.is_finite())
            {
                return Err(Error::InvalidParams("network has non-finite parameters".into()));
            }
        }
        self.input_norm.validate(self.input_dim(), "input")?;
        self.output_norm.validate(self.output_dim(), "output")?;
        Ok(())
    }

    /// Raw network output in normalized output space, leaving hidden
    /// activations in `scratch` for backpropagation.
    pub(crate) fn forward_normalized<'s>(&self, input: &[f64], scratch: &'s mut Scratch) -> &'s [f64] {
        self.input_norm.normalize_into(input, &mut scratch.acts[0]);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (before, after) = scratch.acts.split_at_mut(l + 1);
            let x = &before[l];
            let y = &mut after[0];
            layer.apply(x, y);
            if l < last {
                for v in y.iter_mut() {
                    *v = v.tanh();
                }
            }
        }
        &scratch.acts[self.layers.len()]
    }

    /// Prediction in physical units, written into `scratch` and returned.
    pub fn forward_with<'s>(&self, input: &[f64], scratch: &'s mut Scratch) -> Result<&'s [f64]> {
        self.forward_normalized(input, scratch);
        let n = self.layers.len();
        let (acts, out) = (&scratch.acts[n], &mut scratch.out);
        self.output_norm.denormalize_into(acts, out);
        if self.output_mode == OutputMode::Residual {
            for (o, x) in out.iter_mut().zip(input) {
                *o += x;
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteOutput);
        }
        Ok(&scratch.out)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::InvalidParams(format!(
                "expected {} inputs, got {}",
                self.input_dim(),
                input.len()
            )));
        }
        let mut scratch = self.scratch();
        self.forward_with(input, &mut scratch).map(<[f64]>::to_vec)
    }

    /// Normalized training target for a sample.
    pub(crate) fn normalized_target(&self, input: &[f64], target: &[f64], out: &mut [f64]) {
        match self.output_mode {
            OutputMode::Absolute => self.output_norm.normalize_into(target, out),
            OutputMode::Residual => {
                for c in 0..out.len() {
                    out[c] = (target[c] - input[c] - self.output_norm.mean[c]) / self.output_norm.std[c];
                }
            }
        }
    }

    /// Visits every trainable parameter in a fixed order: per layer, weights
    /// row-major, then biases.
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for layer in &mut self.layers {
            layer.weights.iter_mut().for_each(&mut f);
            layer.biases.iter_mut().for_each(&mut f);
        }
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    pub fn set_flat_params(&mut self, params: &[f64]) {
        let mut it = params.iter();
        self.for_each_param_mut(|p| *p = *it.next().expect("parameter vector too short"));
    }
}

fn check_dims(dims: &[usize], mode: OutputMode) -> Result<()> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::InvalidParams(format!("invalid layer dims {dims:?}")));
    }
    if mode == OutputMode::Residual && dims[dims.len() - 1] > dims[0] {
        return Err(Error::InvalidParams(
            "residual output needs at least as many inputs as outputs".into(),
        ));
    }
    Ok(())
}

/// Gradient of the loss with the same layout as the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Layer::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    fn scale(&mut self, k: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.biases.iter_mut()).for_each(|g| *g *= k);
        }
    }
}

/// Mean squared error in normalized output space and its exact gradient.
///
/// The loss averages over samples and output channels:
/// `L = 1/(N·m) Σ_n Σ_c (ŷ_nc − t_nc)²`.
pub fn mlp_backprop<'a, I>(net: &Mlp, batch: I) -> Result<(Gradients, f64)>
where
    I: IntoIterator<Item = (&'a [f64], &'a [f64])>,
{
    let mut grads = Gradients::zeros_like(net);
    let mut scratch = net.scratch();
    let mut target = vec![0.0; net.output_dim()];
    let mut deltas: Vec<Vec<f64>> = net.layer_dims[1..].iter().map(|&d| vec![0.0; d]).collect();
    let mut loss = 0.0;
    let mut count = 0usize;
    for (input, raw_target) in batch {
        count += 1;
        net.forward_normalized(input, &mut scratch);
        net.normalized_target(input, raw_target, &mut target);
        loss += accumulate_sample(net, &scratch, &target, &mut deltas, &mut grads);
    }
    if count == 0 {
        return Err(Error::InvalidParams("empty batch".into()));
    }
    let denom = (count * net.output_dim()) as f64;
    grads.scale(1.0 / denom);
    Ok((grads, loss / denom))
}

/// Adds one sample's unscaled gradient (`∂Σ_c (ŷ_c − t_c)²`) and returns its
/// summed squared error.
fn accumulate_sample(
    net: &Mlp,
    scratch: &Scratch,
    target: &[f64],
    deltas: &mut [Vec<f64>],
    grads: &mut Gradients,
) -> f64 {
    let n_layers = net.layers.len();
    let output = &scratch.acts[n_layers];
    let mut sq = 0.0;
    for c in 0..output.len() {
        let e = output[c] - target[c];
        sq += e * e;
        deltas[n_layers - 1][c] = 2.0 * e;
    }
    for l in (0..n_layers).rev() {
        let layer = &net.layers[l];
        let x = &scratch.acts[l];
        let (lower, upper) = deltas.split_at_mut(l);
        let delta = &upper[0];
        let g = &mut grads.layers[l];
        for o in 0..layer.outputs {
            let d = delta[o];
            g.biases[o] += d;
            let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
            for (gw, xi) in row.iter_mut().zip(x) {
                *gw += d * xi;
            }
        }
        if l > 0 {
            // Propagate through W and the tanh of the layer below.
            let below = &mut lower[l - 1];
            for i in 0..layer.inputs {
                let mut acc = 0.0;
                for o in 0..layer.outputs {
                    acc += layer.weights[o * layer.inputs + i] * delta[o];
                }
                let a = x[i];
                below[i] = acc * (1.0 - a * a);
            }
        }
    }
    sq
}

/// Loss only, without gradients.
pub fn mlp_loss<'a, I>(net: &Mlp, batch: I) -> f64
where
    I: IntoIterator<Item = (&'a [f64], &'a [f64])>,
{
    let mut scratch = net.scratch();
    let mut target = vec![0.0; net.output_dim()];
    let mut loss = 0.0;
    let mut count = 0usize;
    for (input, raw_target) in batch {
        count += 1;
        let out = net.forward_normalized(input, &mut scratch);
        net.normalized_target(input, raw_target, &mut target);
        loss += out
            .iter()
            .zip(&target)
            .map(|(y, t)| (y - t) * (y - t))
            .sum::<f64>();
    }
    loss / (count.max(1) * net.output_dim()) as f64
}
