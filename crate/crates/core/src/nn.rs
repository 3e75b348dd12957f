//! A small feed-forward regressor from leading eigenvalues to `h(G)`,
//! trained with ADAM on mean-squared error.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{deviation, mean, parse_reals, std_dev, Sample};
use crate::seed::Seed;

pub const DEFAULT_HIDDEN: [usize; 4] = [64, 64, 32, 16];
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;
pub const MIN_DATASET: usize = 50;

const FORMAT_HEADER: &str = "cheeger-mlp v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn tag(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::Parse(format!("unknown activation {other:?}"))),
        }
    }

    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    #[inline]
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Affine layer `y = W x + b`, `W` stored row-major as `outputs × inputs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn apply(&self, x: &[f64], y: &mut Vec<f64>) {
        y.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let dot: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
            y.push(dot + self.biases[o]);
        }
    }
}

/// Per-feature affine input normalisation `(x − mean) / scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(m: usize) -> Self {
        Standardizer {
            mean: vec![0.0; m],
            scale: vec![1.0; m],
        }
    }

    /// Mean and population standard deviation of each feature; constant
    /// features keep scale 1.
    pub fn fit(samples: &[Sample]) -> Self {
        let m = samples.first().map_or(0, |s| s.features.len());
        let mut out = Standardizer::identity(m);
        for j in 0..m {
            let col: Vec<f64> = samples.iter().map(|s| s.features[j]).collect();
            out.mean[j] = mean(&col);
            let sd = std_dev(&col);
            out.scale[j] = if sd > 0.0 && sd.is_finite() { sd } else { 1.0 };
        }
        out
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            x.iter()
                .zip(self.mean.iter().zip(&self.scale))
                .map(|(v, (m, s))| (v - m) / s),
        );
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    dims: Vec<usize>,
    layers: Vec<Dense>,
    hidden: Activation,
    output: Activation,
    standardizer: Standardizer,
}

/// Gradient with the same shape as the model's layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub layers: Vec<Dense>,
}

impl Gradient {
    fn zeros_like(model: &MlpModel) -> Self {
        Gradient {
            layers: model
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 || dims.contains(&0) || dims.last() != Some(&1) {
        return Err(Error::InvalidDims(dims.to_vec()));
    }
    Ok(())
}

/// Weights uniform on `±√(3/fan_in)` (standard deviation `1/√fan_in`),
/// biases zero.
pub fn mlp_init(dims: &[usize], seed: Seed) -> Result<MlpModel> {
    init_with(dims, &mut seed.rng())
}

fn init_with<R: Rng>(dims: &[usize], rng: &mut R) -> Result<MlpModel> {
    check_dims(dims)?;
    let layers = dims
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (3.0 / fan_in as f64).sqrt();
            let mut layer = Dense::zeros(fan_in, fan_out);
            for w in &mut layer.weights {
                *w = rng.gen_range(-limit..limit);
            }
            layer
        })
        .collect();
    Ok(MlpModel {
        dims: dims.to_vec(),
        layers,
        hidden: Activation::Relu,
        output: Activation::Identity,
        standardizer: Standardizer::identity(dims[0]),
    })
}

impl MlpModel {
    /// A model with every weight and bias zero.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        Ok(MlpModel {
            dims: dims.to_vec(),
            layers: dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
            hidden: Activation::Relu,
            output: Activation::Identity,
            standardizer: Standardizer::identity(dims[0]),
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_arity(&self) -> usize {
        self.dims[0]
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn set_standardizer(&mut self, s: Standardizer) -> Result<()> {
        if s.mean.len() != self.input_arity() || s.scale.len() != self.input_arity() {
            return Err(Error::ArityMismatch {
                expected: self.input_arity(),
                found: s.mean.len(),
            });
        }
        self.standardizer = s;
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    pub fn parameters(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output
        } else {
            self.hidden
        }
    }

    fn check_arity(&self, found: usize) -> Result<()> {
        if found != self.input_arity() {
            return Err(Error::ArityMismatch {
                expected: self.input_arity(),
                found,
            });
        }
        Ok(())
    }

    fn check_finite(&self) -> Result<()> {
        for (i, l) in self.layers.iter().enumerate() {
            if !l.weights.iter().chain(&l.biases).all(|x| x.is_finite()) {
                return Err(Error::NonFiniteParameter { layer: i });
            }
        }
        Ok(())
    }

    /// Forward pass without validation.
    fn eval(&self, inputs: &[f64], a: &mut Vec<f64>, b: &mut Vec<f64>) -> f64 {
        self.standardizer.apply(inputs, a);
        for (i, layer) in self.layers.iter().enumerate() {
            layer.apply(a, b);
            let act = self.activation(i);
            for v in b.iter_mut() {
                *v = act.apply(*v);
            }
            std::mem::swap(a, b);
        }
        a[0]
    }

    pub fn predict(&self, inputs: &[f64]) -> Result<f64> {
        mlp_forward(self, inputs)
    }

    pub fn predict_many(&self, samples: &[Sample]) -> Result<Vec<f64>> {
        self.check_finite()?;
        let (mut a, mut b) = (Vec::new(), Vec::new());
        samples
            .iter()
            .map(|s| {
                self.check_arity(s.features.len())?;
                Ok(self.eval(&s.features, &mut a, &mut b))
            })
            .collect()
    }

    /// Versioned plain-text serialization with full-precision reals.
    pub fn to_text(&self) -> String {
        let reals = |xs: &[f64]| {
            xs.iter()
                .map(|x| format!("{x:.16e}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut out = String::new();
        let _ = writeln!(out, "{FORMAT_HEADER}");
        let dims: Vec<String> = self.dims.iter().map(ToString::to_string).collect();
        let _ = writeln!(out, "dims {}", dims.join(" "));
        let _ = writeln!(
            out,
            "activations {} {}",
            self.hidden.tag(),
            self.output.tag()
        );
        let _ = writeln!(out, "input_mean {}", reals(&self.standardizer.mean));
        let _ = writeln!(out, "input_scale {}", reals(&self.standardizer.scale));
        for (i, l) in self.layers.iter().enumerate() {
            let _ = writeln!(out, "layer {i} weights {}", reals(&l.weights));
            let _ = writeln!(out, "layer {i} biases {}", reals(&l.biases));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some(FORMAT_HEADER) {
            return Err(Error::Parse(format!("missing `{FORMAT_HEADER}` header")));
        }
        let mut field = |name: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing `{name}` line")))?;
            line.strip_prefix(name)
                .map(|rest| rest.trim().to_string())
                .ok_or_else(|| Error::Parse(format!("expected `{name}`, got {line:?}")))
        };
        let dims = field("dims")?
            .split_whitespace()
            .map(|d| d.parse::<usize>().map_err(|e| Error::Parse(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let mut model = MlpModel::zeros(&dims)?;
        let acts = field("activations")?;
        let mut acts = acts.split_whitespace();
        model.hidden = Activation::from_tag(acts.next().unwrap_or(""))?;
        model.output = Activation::from_tag(acts.next().unwrap_or(""))?;
        let standardizer = Standardizer {
            mean: parse_reals(&field("input_mean")?)?,
            scale: parse_reals(&field("input_scale")?)?,
        };
        model.set_standardizer(standardizer)?;
        for i in 0..model.layers.len() {
            let w = parse_reals(&field(&format!("layer {i} weights"))?)?;
            let b = parse_reals(&field(&format!("layer {i} biases"))?)?;
            let layer = &mut model.layers[i];
            if w.len() != layer.weights.len() || b.len() != layer.biases.len() {
                return Err(Error::Parse(format!(
                    "layer {i} has the wrong parameter count"
                )));
            }
            layer.weights = w;
            layer.biases = b;
        }
        Ok(model)
    }
}

/// Affine-then-rectifier chain with an identity output unit.
pub fn mlp_forward(model: &MlpModel, inputs: &[f64]) -> Result<f64> {
    model.check_arity(inputs.len())?;
    model.check_finite()?;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    Ok(model.eval(inputs, &mut a, &mut b))
}

/// Mean-squared error over `batch` and its exact gradient by backpropagation.
pub fn mlp_grad(model: &MlpModel, batch: &[Sample]) -> Result<(f64, Gradient)> {
    if batch.is_empty() {
        return Err(Error::InsufficientData("empty batch".into()));
    }
    for s in batch {
        model.check_arity(s.features.len())?;
    }
    let mut grad = Gradient::zeros_like(model);
    let mut scratch = Backprop::new(model);
    let mut loss = 0.0;
    let scale = 1.0 / batch.len() as f64;
    for s in batch {
        loss += scratch.accumulate(model, s, scale, &mut grad);
    }
    Ok((loss * scale, grad))
}

/// Central finite-difference estimate of the gradient `mlp_grad` computes,
/// one parameter at a time.
pub fn numeric_gradient(model: &MlpModel, batch: &[Sample], step: f64) -> Result<Gradient> {
    if batch.is_empty() {
        return Err(Error::InsufficientData("empty batch".into()));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidParameters(format!(
            "step {step} must be positive"
        )));
    }
    for s in batch {
        model.check_arity(s.features.len())?;
    }
    fn slot(m: &mut MlpModel, layer: usize, idx: usize, bias: bool) -> &mut f64 {
        let l = &mut m.layers[layer];
        if bias {
            &mut l.biases[idx]
        } else {
            &mut l.weights[idx]
        }
    }
    let mut probe = model.clone();
    let mut grad = Gradient::zeros_like(model);
    for (li, layer) in grad.layers.iter_mut().enumerate() {
        let coords = (0..layer.weights.len())
            .map(|i| (i, false))
            .chain((0..layer.biases.len()).map(|i| (i, true)));
        for (i, bias) in coords {
            let orig = *slot(&mut probe, li, i, bias);
            *slot(&mut probe, li, i, bias) = orig + step;
            let up = mse(&probe, batch);
            *slot(&mut probe, li, i, bias) = orig - step;
            let down = mse(&probe, batch);
            *slot(&mut probe, li, i, bias) = orig;
            let d = (up - down) / (2.0 * step);
            if bias {
                layer.biases[i] = d;
            } else {
                layer.weights[i] = d;
            }
        }
    }
    Ok(grad)
}

/// Rounding error of a central difference with `step` on a loss of size
/// `loss`: each evaluation carries a few ulps of error, divided by `2·step`.
pub fn difference_noise(loss: f64, step: f64) -> f64 {
    4.0 * f64::EPSILON * loss.abs().max(1.0) / step
}

/// Largest coordinate-wise relative difference between two gradients, with
/// magnitudes below `floor` treated as `floor`.
pub fn gradient_discrepancy(a: &Gradient, b: &Gradient, floor: f64) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Reusable buffers for one forward/backward pass.
struct Backprop {
    /// Post-activation values per layer, index 0 the standardized input.
    acts: Vec<Vec<f64>>,
    /// Pre-activation values per layer.
    pres: Vec<Vec<f64>>,
    delta: Vec<f64>,
    next_delta: Vec<f64>,
}

impl Backprop {
    fn new(model: &MlpModel) -> Self {
        Backprop {
            acts: model.dims.iter().map(|&d| Vec::with_capacity(d)).collect(),
            pres: model.dims[1..]
                .iter()
                .map(|&d| Vec::with_capacity(d))
                .collect(),
            delta: Vec::new(),
            next_delta: Vec::new(),
        }
    }

    /// Adds `scale · ∂(out − target)²/∂θ` into `grad`; returns the squared error.
    fn accumulate(&mut self, model: &MlpModel, s: &Sample, scale: f64, grad: &mut Gradient) -> f64 {
        let (first, rest) = self.acts.split_first_mut().unwrap();
        model.standardizer.apply(&s.features, first);
        for (i, layer) in model.layers.iter().enumerate() {
            let input = if i == 0 { &*first } else { &rest[i - 1] };
            layer.apply(input, &mut self.pres[i]);
            let act = model.activation(i);
            let out = &mut rest[i];
            out.clear();
            out.extend(self.pres[i].iter().map(|&p| act.apply(p)));
        }
        let output = self.acts[model.layers.len()][0];
        let err = output - s.target;

        self.delta.clear();
        self.delta.push(2.0 * err * scale);
        for i in (0..model.layers.len()).rev() {
            let layer = &model.layers[i];
            let act = model.activation(i);
            for (d, &p) in self.delta.iter_mut().zip(&self.pres[i]) {
                *d *= act.derivative(p);
            }
            let input = &self.acts[i];
            let g = &mut grad.layers[i];
            for o in 0..layer.outputs {
                let d = self.delta[o];
                g.biases[o] += d;
                if d != 0.0 {
                    let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (gw, x) in row.iter_mut().zip(input) {
                        *gw += d * x;
                    }
                }
            }
            if i > 0 {
                self.next_delta.clear();
                self.next_delta.resize(layer.inputs, 0.0);
                for o in 0..layer.outputs {
                    let d = self.delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (nd, w) in self.next_delta.iter_mut().zip(row) {
                        *nd += d * w;
                    }
                }
                std::mem::swap(&mut self.delta, &mut self.next_delta);
            }
        }
        err * err
    }
}

struct Adam {
    learning_rate: f64,
    step: i32,
    m: Gradient,
    v: Gradient,
}

impl Adam {
    fn new(model: &MlpModel, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            step: 0,
            m: Gradient::zeros_like(model),
            v: Gradient::zeros_like(model),
        }
    }

    fn update(&mut self, model: &mut MlpModel, grad: &Gradient) {
        self.step += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.step);
        let c2 = 1.0 - ADAM_BETA2.powi(self.step);
        let lr = self.learning_rate;
        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..p.len() {
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
            }
        };
        for (((layer, g), m), v) in model
            .layers
            .iter_mut()
            .zip(&grad.layers)
            .zip(&mut self.m.layers)
            .zip(&mut self.v.layers)
        {
            update(
                &mut layer.weights,
                &g.weights,
                &mut m.weights,
                &mut v.weights,
            );
            update(&mut layer.biases, &g.biases, &mut m.biases, &mut v.biases);
        }
    }
}

/// Named training schedules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Exactly 50 epochs, no early stopping.
    Moderate,
    /// Up to 500 epochs, stopping once validation loss stalls for 20 epochs.
    Full,
}

impl Regime {
    pub fn config(self, seed: Seed) -> TrainConfig {
        match self {
            Regime::Moderate => TrainConfig::moderate(seed),
            Regime::Full => TrainConfig::full(seed),
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "moderate" => Ok(Regime::Moderate),
            "full" => Ok(Regime::Full),
            other => Err(Error::Parse(format!("unknown regime {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Fraction of the dataset used for training; the rest validates.
    pub split_fraction: f64,
    pub seed: Seed,
    /// Stop after this many epochs without a new best validation loss and
    /// restore the best parameters. `None` trains for exactly `epochs`.
    pub early_stop_patience: Option<usize>,
}

impl TrainConfig {
    pub fn full(seed: Seed) -> Self {
        TrainConfig {
            hidden: DEFAULT_HIDDEN.to_vec(),
            epochs: 500,
            batch_size: 128,
            learning_rate: 1e-3,
            split_fraction: 0.4,
            seed,
            early_stop_patience: Some(20),
        }
    }

    pub fn moderate(seed: Seed) -> Self {
        TrainConfig {
            epochs: 50,
            early_stop_patience: None,
            ..TrainConfig::full(seed)
        }
    }

    pub fn dims(&self, inputs: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 2);
        dims.push(inputs);
        dims.extend_from_slice(&self.hidden);
        dims.push(1);
        dims
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    /// Epoch whose parameters were kept (1-based).
    pub best_epoch: usize,
    pub final_train_loss: f64,
    pub final_val_loss: f64,
    /// Mean training-batch loss seen during each epoch.
    pub epoch_train_loss: Vec<f64>,
    /// Validation MSE after each epoch.
    pub epoch_val_loss: Vec<f64>,
    pub train_count: usize,
    pub val_count: usize,
    pub mean_dev_train: f64,
    pub std_dev_train: f64,
    pub mean_dev_val: f64,
    pub std_dev_val: f64,
}

impl TrainReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Shuffles indices `0..len` with `seed` and splits off the first
/// `⌊fraction·len⌋` for training.
pub fn split_indices(len: usize, fraction: f64, seed: Seed) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..len).collect();
    idx.shuffle(&mut seed.rng());
    let cut = ((fraction * len as f64).floor() as usize).min(len);
    let val = idx.split_off(cut);
    (idx, val)
}

/// Splits `dataset` per `config.split_fraction` and trains on the first part.
pub fn train(dataset: &[Sample], config: &TrainConfig) -> Result<(MlpModel, TrainReport)> {
    if dataset.len() < MIN_DATASET {
        return Err(Error::InsufficientData(format!(
            "{} records; training needs at least {MIN_DATASET}",
            dataset.len()
        )));
    }
    let (train_idx, val_idx) = split_indices(dataset.len(), config.split_fraction, config.seed);
    let pick = |idx: &[usize]| idx.iter().map(|&i| dataset[i].clone()).collect::<Vec<_>>();
    train_split(&pick(&train_idx), &pick(&val_idx), config)
}

/// Trains on `train_set`, using `val_set` for early stopping and the report.
pub fn train_split(
    train_set: &[Sample],
    val_set: &[Sample],
    config: &TrainConfig,
) -> Result<(MlpModel, TrainReport)> {
    if train_set.is_empty() {
        return Err(Error::EmptySplit("training"));
    }
    if val_set.is_empty() {
        return Err(Error::EmptySplit("validation"));
    }
    let m = train_set[0].features.len();
    if let Some(bad) = train_set
        .iter()
        .chain(val_set)
        .find(|s| s.features.len() != m)
    {
        return Err(Error::ArityMismatch {
            expected: m,
            found: bad.features.len(),
        });
    }
    if config.batch_size == 0 || config.epochs == 0 || !(config.learning_rate > 0.0) {
        return Err(Error::InvalidParameters(
            "epochs, batch size and learning rate must be positive".into(),
        ));
    }

    // Substream 0 drives the split, 1 the initial weights, 2 the batch order.
    let mut model = init_with(&config.dims(m), &mut config.seed.substream(1))?;
    model.set_standardizer(Standardizer::fit(train_set))?;
    let mut adam = Adam::new(&model, config.learning_rate);
    let mut rng = config.seed.substream(2);
    let mut scratch = Backprop::new(&model);
    let mut grad = Gradient::zeros_like(&model);

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut epoch_train_loss = Vec::new();
    let mut epoch_val_loss = Vec::new();
    let mut best = (f64::INFINITY, 0usize, model.clone());
    let mut stale = 0;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut sum_sq = 0.0;
        for chunk in order.chunks(config.batch_size) {
            for l in &mut grad.layers {
                l.weights.fill(0.0);
                l.biases.fill(0.0);
            }
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                sum_sq += scratch.accumulate(&model, &train_set[i], scale, &mut grad);
            }
            adam.update(&mut model, &grad);
        }
        let train_loss = sum_sq / train_set.len() as f64;
        let val_loss = mse(&model, val_set);
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        epoch_train_loss.push(train_loss);
        epoch_val_loss.push(val_loss);

        if let Some(patience) = config.early_stop_patience {
            if val_loss < best.0 {
                best = (val_loss, epoch, model.clone());
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    break;
                }
            }
        } else {
            best.1 = epoch;
        }
    }
    if config.early_stop_patience.is_some() {
        model = best.2;
    }

    let report = evaluate(
        &model,
        train_set,
        val_set,
        epoch_train_loss,
        epoch_val_loss,
        best.1,
    )?;
    Ok((model, report))
}

fn mse(model: &MlpModel, samples: &[Sample]) -> f64 {
    let (mut a, mut b) = (Vec::new(), Vec::new());
    samples
        .iter()
        .map(|s| {
            let e = model.eval(&s.features, &mut a, &mut b) - s.target;
            e * e
        })
        .sum::<f64>()
        / samples.len() as f64
}

/// Relative deviations `|ŷ − h| / h` of `model` over `samples`.
pub fn deviations(model: &MlpModel, samples: &[Sample]) -> Result<Vec<f64>> {
    let preds = model.predict_many(samples)?;
    preds
        .iter()
        .zip(samples)
        .map(|(p, s)| deviation(*p, s.target))
        .collect()
}

fn evaluate(
    model: &MlpModel,
    train_set: &[Sample],
    val_set: &[Sample],
    epoch_train_loss: Vec<f64>,
    epoch_val_loss: Vec<f64>,
    best_epoch: usize,
) -> Result<TrainReport> {
    let dev_train = deviations(model, train_set)?;
    let dev_val = deviations(model, val_set)?;
    Ok(TrainReport {
        epochs_run: epoch_train_loss.len(),
        best_epoch,
        final_train_loss: mse(model, train_set),
        final_val_loss: mse(model, val_set),
        epoch_train_loss,
        epoch_val_loss,
        train_count: train_set.len(),
        val_count: val_set.len(),
        mean_dev_train: mean(&dev_train),
        std_dev_train: std_dev(&dev_train),
        mean_dev_val: mean(&dev_val),
        std_dev_val: std_dev(&dev_val),
    })
}

/// Index of the candidate with the lowest finite validation deviation; ties
/// go to the earliest.
pub fn model_select(candidates: &[(MlpModel, TrainReport)]) -> Result<usize> {
    candidates
        .iter()
        .enumerate()
        .filter(|(_, (_, r))| r.mean_dev_val.is_finite())
        .min_by(|(i, (_, a)), (j, (_, b))| a.mean_dev_val.total_cmp(&b.mean_dev_val).then(i.cmp(j)))
        .map(|(i, _)| i)
        .ok_or(Error::EmptyList)
}
