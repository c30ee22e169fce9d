// SPDX-License-Identifier: Apache-2.0

//! Dense regressor from node embeddings to failure rates.
//!
//! Layer widths `d_emb → 64 → 32 → 16 → 1`, ReLU on hidden layers and a
//! logistic output, trained by minibatch momentum SGD on mean squared error.

mod io;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{logistic, Matrix};

pub use io::{read_dataset_csv, write_dataset_csv, ModelFile, MODEL_FORMAT_VERSION};

/// Hidden widths between the embedding input and the scalar output.
pub const HIDDEN_WIDTHS: [usize; 3] = [64, 32, 16];

// The logistic rounds to exactly 0 or 1 in f64 for large |logit|; keep
// predictions strictly inside the unit interval.
const OUTPUT_MIN: f64 = f64::MIN_POSITIVE;
const OUTPUT_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Debug, Error)]
pub enum DnnError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("dataset needs at least two rows, got {0}")]
    TooFewRows(usize),
    #[error("split puts every row in one fold ({train} train of {total})")]
    DegenerateSplit { train: usize, total: usize },
    #[error("train fold is empty")]
    EmptyTrainFold,
    #[error("target {value} of {ff} is outside [0, 1]")]
    TargetOutOfRange { ff: String, value: f64 },
    #[error("non-finite loss in epoch {epoch}")]
    NonFinite { epoch: usize },
    #[error("model file: {0}")]
    Format(String),
    #[error("model JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `out × in`.
    pub w: Matrix,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Dense>,
}

impl MlpParams {
    /// He-initialized weights, zero biases, for the given layer widths
    /// (input first, output last).
    pub fn init<R: Rng>(widths: &[usize], rng: &mut R) -> Self {
        MlpParams {
            layers: widths
                .windows(2)
                .map(|w| Dense {
                    w: Matrix::he(w[1], w[0], rng),
                    b: vec![0.0; w[1]],
                })
                .collect(),
        }
    }

    /// The standard `d_emb → 64 → 32 → 16 → 1` network.
    pub fn standard<R: Rng>(d_emb: usize, rng: &mut R) -> Self {
        let mut widths = vec![d_emb];
        widths.extend(HIDDEN_WIDTHS);
        widths.push(1);
        Self::init(&widths, rng)
    }

    pub fn zeros_like(&self) -> Self {
        MlpParams {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    w: Matrix::zeros(l.w.rows, l.w.cols),
                    b: vec![0.0; l.b.len()],
                })
                .collect(),
        }
    }

    pub fn d_in(&self) -> usize {
        self.layers.first().map_or(0, |l| l.w.cols)
    }

    /// Layer widths, input first.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.d_in()];
        w.extend(self.layers.iter().map(|l| l.w.rows));
        w
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [&l.w.data[..], &l.b[..]])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.w.data[..], &mut l.b[..]])
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn validate(&self) -> Result<(), DnnError> {
        if self.layers.is_empty() {
            return Err(DnnError::DimensionMismatch("no layers".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.w.data.len() != l.w.rows * l.w.cols || l.b.len() != l.w.rows {
                return Err(DnnError::DimensionMismatch(format!("layer {i} is inconsistent")));
            }
            if i > 0 && l.w.cols != self.layers[i - 1].w.rows {
                return Err(DnnError::DimensionMismatch(format!(
                    "layer {i} reads {} values, layer {} emits {}",
                    l.w.cols,
                    i - 1,
                    self.layers[i - 1].w.rows
                )));
            }
        }
        if self.layers.last().unwrap().w.rows != 1 {
            return Err(DnnError::DimensionMismatch("output layer must have width 1".into()));
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<(), DnnError> {
        if x.len() != self.d_in() {
            return Err(DnnError::DimensionMismatch(format!(
                "input has {} values, network expects {}",
                x.len(),
                self.d_in()
            )));
        }
        Ok(())
    }

    /// Smallest `|pre-activation|` over the hidden ReLUs for inputs `xs`.
    pub fn kink_margin(&self, xs: &[&[f64]]) -> f64 {
        let last = self.layers.len() - 1;
        xs.iter()
            .map(|x| {
                let (pre, _) = trace(self, x);
                pre[..last]
                    .iter()
                    .flatten()
                    .fold(f64::INFINITY, |m, v| m.min(v.abs()))
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Pre-activations and activations of every layer (`acts[0]` is the input).
fn trace(p: &MlpParams, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let last = p.layers.len() - 1;
    let mut pre = Vec::with_capacity(p.layers.len());
    let mut acts = vec![x.to_vec()];
    for (i, l) in p.layers.iter().enumerate() {
        let mut z = vec![0.0; l.w.rows];
        l.w.matvec(acts.last().unwrap(), &mut z);
        for (zi, bi) in z.iter_mut().zip(&l.b) {
            *zi += bi;
        }
        let a = if i == last {
            z.iter().map(|&v| logistic(v).clamp(OUTPUT_MIN, OUTPUT_MAX)).collect()
        } else {
            z.iter().map(|&v| v.max(0.0)).collect()
        };
        pre.push(z);
        acts.push(a);
    }
    (pre, acts)
}

/// Predicted failure rate for one embedding, in `(0, 1)`.
pub fn forward(p: &MlpParams, x: &[f64]) -> Result<f64, DnnError> {
    p.validate()?;
    p.check_input(x)?;
    Ok(trace(p, x).1.last().unwrap()[0])
}

/// Accumulate `dy · ∂ŷ/∂θ` into `grad`.
fn backward(p: &MlpParams, pre: &[Vec<f64>], acts: &[Vec<f64>], dy: f64, grad: &mut MlpParams) {
    let last = p.layers.len() - 1;
    let y = acts[last + 1][0];
    let mut delta = vec![dy * y * (1.0 - y)];
    for i in (0..=last).rev() {
        let g = &mut grad.layers[i];
        g.w.add_outer(&delta, &acts[i]);
        for (b, d) in g.b.iter_mut().zip(&delta) {
            *b += d;
        }
        if i == 0 {
            break;
        }
        let mut prev = vec![0.0; p.layers[i].w.cols];
        p.layers[i].w.matvec_t_add(&delta, &mut prev);
        for (d, z) in prev.iter_mut().zip(&pre[i - 1]) {
            if *z <= 0.0 {
                *d = 0.0;
            }
        }
        delta = prev;
    }
}

/// Mean squared error over `(xs, ys)` and its gradient.
pub fn mse_loss_and_gradient(
    p: &MlpParams,
    xs: &[&[f64]],
    ys: &[f64],
) -> Result<(f64, MlpParams), DnnError> {
    p.validate()?;
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(DnnError::DimensionMismatch(format!(
            "{} inputs for {} targets",
            xs.len(),
            ys.len()
        )));
    }
    let scale = 1.0 / xs.len() as f64;
    let mut grad = p.zeros_like();
    let mut loss = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        p.check_input(x)?;
        let (pre, acts) = trace(p, x);
        let err = acts.last().unwrap()[0] - y;
        loss += err * err * scale;
        backward(p, &pre, &acts, 2.0 * err * scale, &mut grad);
    }
    Ok((loss, grad))
}

pub fn mse(p: &MlpParams, xs: &[&[f64]], ys: &[f64]) -> Result<f64, DnnError> {
    p.validate()?;
    let mut total = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        p.check_input(x)?;
        let e = trace(p, x).1.last().unwrap()[0] - y;
        total += e * e;
    }
    Ok(total / xs.len().max(1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fold {
    Train,
    Test,
}

impl Fold {
    pub fn name(self) -> &'static str {
        match self {
            Fold::Train => "train",
            Fold::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub ff_name: String,
    pub embedding: Vec<f64>,
    pub target: f64,
    pub fold: Fold,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub rows: Vec<Sample>,
}

impl Dataset {
    pub fn validate(&self) -> Result<(), DnnError> {
        let d = self.rows.first().map_or(0, |r| r.embedding.len());
        for r in &self.rows {
            if !(0.0..=1.0).contains(&r.target) {
                return Err(DnnError::TargetOutOfRange {
                    ff: r.ff_name.clone(),
                    value: r.target,
                });
            }
            if r.embedding.len() != d {
                return Err(DnnError::DimensionMismatch(format!(
                    "row {} has {} embedding values, expected {d}",
                    r.ff_name,
                    r.embedding.len()
                )));
            }
        }
        Ok(())
    }

    pub fn train_rows(&self) -> impl Iterator<Item = (usize, &Sample)> {
        self.rows.iter().enumerate().filter(|(_, r)| r.fold == Fold::Train)
    }
}

/// Mark `⌈frac · N⌉` rows as train by a seeded shuffle, the rest as test.
pub fn split_dataset(mut d: Dataset, frac: f64, seed: u64) -> Result<Dataset, DnnError> {
    let n = d.rows.len();
    if n < 2 {
        return Err(DnnError::TooFewRows(n));
    }
    if !(frac > 0.0 && frac < 1.0) {
        return Err(DnnError::Config(format!("train_fraction {frac} not in (0, 1)")));
    }
    let train = ((frac * n as f64).ceil() as usize).min(n);
    if train == n {
        return Err(DnnError::DegenerateSplit { train, total: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    for r in &mut d.rows {
        r.fold = Fold::Test;
    }
    for &i in &order[..train] {
        d.rows[i].fold = Fold::Train;
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub train_fraction: f64,
    /// Shift and scale every embedding column to zero mean and unit variance
    /// over the training fold before the first layer.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            momentum: 0.9,
            epochs: 200,
            batch_size: 8,
            seed: 0,
            train_fraction: 0.4,
            standardize: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), DnnError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(DnnError::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(DnnError::Config("momentum must be in [0, 1)".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(DnnError::Config("train_fraction must be in (0, 1)".into()));
        }
        if self.batch_size == 0 {
            return Err(DnnError::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-column affine map `(x - mean) / scale` applied to inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputScaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl InputScaler {
    pub fn identity(dim: usize) -> Self {
        InputScaler {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Column means and population standard deviations of `xs`. Constant
    /// columns keep scale 1.
    pub fn fit(xs: &[&[f64]]) -> Self {
        let dim = xs.first().map_or(0, |x| x.len());
        let n = xs.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for x in xs {
            for (m, v) in mean.iter_mut().zip(x.iter()) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; dim];
        for x in xs {
            for ((s, v), m) in var.iter_mut().zip(x.iter()).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 })
            .collect();
        InputScaler { mean, scale }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.mean.iter().chain(&self.scale).all(|v| v.is_finite()) && self.scale.iter().all(|&s| s > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: MlpParams,
    pub scaler: InputScaler,
    /// `loss_history[0]` is the train MSE before the first update,
    /// `loss_history[e]` the train MSE after epoch `e`.
    pub loss_history: Vec<f64>,
}

pub fn train(d: &Dataset, cfg: &TrainConfig) -> Result<TrainedModel, DnnError> {
    train_with_hook(d, cfg, |_| {})
}

/// [`train`], calling `hook(row)` every time dataset row `row` contributes
/// to a gradient.
pub fn train_with_hook(
    d: &Dataset,
    cfg: &TrainConfig,
    mut hook: impl FnMut(usize),
) -> Result<TrainedModel, DnnError> {
    cfg.validate()?;
    d.validate()?;
    let train_idx: Vec<usize> = d.train_rows().map(|(i, _)| i).collect();
    if train_idx.is_empty() {
        return Err(DnnError::EmptyTrainFold);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d_emb = d.rows[train_idx[0]].embedding.len();
    let mut params = MlpParams::standard(d_emb, &mut rng);
    let raw: Vec<&[f64]> = train_idx.iter().map(|&i| &d.rows[i].embedding[..]).collect();
    let scaler = if cfg.standardize {
        InputScaler::fit(&raw)
    } else {
        InputScaler::identity(d_emb)
    };
    // Scaled inputs indexed like the dataset; test rows stay empty.
    let mut inputs: Vec<Vec<f64>> = vec![Vec::new(); d.rows.len()];
    for &i in &train_idx {
        inputs[i] = scaler.apply(&d.rows[i].embedding);
    }
    let all_x: Vec<&[f64]> = train_idx.iter().map(|&i| &inputs[i][..]).collect();
    let all_y: Vec<f64> = train_idx.iter().map(|&i| d.rows[i].target).collect();

    let mut velocity = params.zeros_like();
    let mut history = vec![mse(&params, &all_x, &all_y)?];
    if !history[0].is_finite() {
        return Err(DnnError::NonFinite { epoch: 0 });
    }
    let mut order = train_idx.clone();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| &inputs[i][..]).collect();
            let ys: Vec<f64> = batch.iter().map(|&i| d.rows[i].target).collect();
            batch.iter().for_each(|&i| hook(i));
            let (_, grad) = mse_loss_and_gradient(&params, &xs, &ys)?;
            for ((p, v), g) in params
                .tensors_mut()
                .into_iter()
                .zip(velocity.tensors_mut())
                .zip(grad.tensors())
            {
                for ((pi, vi), gi) in p.iter_mut().zip(v.iter_mut()).zip(g) {
                    *vi = cfg.momentum * *vi - cfg.learning_rate * gi;
                    *pi += *vi;
                }
            }
        }
        let loss = mse(&params, &all_x, &all_y)?;
        if !loss.is_finite() || !params.is_finite() {
            return Err(DnnError::NonFinite { epoch });
        }
        history.push(loss);
    }
    Ok(TrainedModel {
        params,
        scaler,
        loss_history: history,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub ff_name: String,
    pub fold: Fold,
    pub target: f64,
    pub predicted: f64,
}

/// Predictions for every row of both folds, in dataset order.
pub fn predict(m: &TrainedModel, d: &Dataset) -> Result<Vec<Prediction>, DnnError> {
    let p = &m.params;
    p.validate()?;
    if m.scaler.dim() != p.d_in() {
        return Err(DnnError::DimensionMismatch(format!(
            "scaler has {} columns, network expects {}",
            m.scaler.dim(),
            p.d_in()
        )));
    }
    d.rows
        .iter()
        .map(|r| {
            p.check_input(&r.embedding)?;
            let x = m.scaler.apply(&r.embedding);
            Ok(Prediction {
                ff_name: r.ff_name.clone(),
                fold: r.fold,
                target: r.target,
                predicted: trace(p, &x).1.last().unwrap()[0],
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(n: usize) -> Dataset {
        Dataset {
            rows: (0..n)
                .map(|i| Sample {
                    ff_name: format!("f{i}"),
                    embedding: vec![i as f64 / n as f64, 1.0],
                    target: 0.5,
                    fold: Fold::Test,
                })
                .collect(),
        }
    }

    #[test]
    fn zero_network_predicts_half() {
        let p = MlpParams::standard(4, &mut ChaCha8Rng::seed_from_u64(0)).zeros_like();
        assert_eq!(forward(&p, &[1.0, -2.0, 3.0, 0.5]).unwrap(), 0.5);
    }

    #[test]
    fn standard_network_has_four_weight_layers() {
        let p = MlpParams::standard(64, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(p.widths(), vec![64, 64, 32, 16, 1]);
        assert!(forward(&p, &[0.0; 3]).is_err());
    }

    #[test]
    fn split_sizes() {
        let d = split_dataset(rows(10), 0.4, 1).unwrap();
        assert_eq!(d.train_rows().count(), 4);
        let d = split_dataset(rows(2), 0.4, 1).unwrap();
        assert_eq!(d.train_rows().count(), 1);
        assert_eq!(split_dataset(rows(10), 0.4, 9).unwrap(), split_dataset(rows(10), 0.4, 9).unwrap());
        assert!(matches!(split_dataset(rows(1), 0.4, 1), Err(DnnError::TooFewRows(1))));
        assert!(matches!(
            split_dataset(rows(2), 0.9, 1),
            Err(DnnError::DegenerateSplit { .. })
        ));
    }

    #[test]
    fn constant_target_is_learned() {
        let d = split_dataset(rows(20), 0.5, 3).unwrap();
        let m = train(&d, &TrainConfig::default()).unwrap();
        assert!(*m.loss_history.last().unwrap() < 1e-4);
        assert_eq!(m.loss_history.len(), 201);
    }

    #[test]
    fn empty_train_fold_is_rejected() {
        assert!(matches!(
            train(&rows(3), &TrainConfig::default()),
            Err(DnnError::EmptyTrainFold)
        ));
    }

    #[test]
    fn scaler_uses_train_fold_only() {
        let xs: [&[f64]; 3] = [&[1.0, 5.0], &[3.0, 5.0], &[5.0, 5.0]];
        let s = InputScaler::fit(&xs);
        assert_eq!(s.mean, vec![3.0, 5.0]);
        assert_eq!(s.scale[1], 1.0);
        assert!((s.apply(&[5.0, 5.0])[0] - 1.224744871391589).abs() < 1e-12);

        let d = split_dataset(rows(20), 0.5, 3).unwrap();
        let m = train(&d, &TrainConfig::default()).unwrap();
        let train_x: Vec<&[f64]> = d.train_rows().map(|(_, r)| &r.embedding[..]).collect();
        assert_eq!(m.scaler, InputScaler::fit(&train_x));
        let plain = train(
            &d,
            &TrainConfig {
                standardize: false,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        assert_eq!(plain.scaler, InputScaler::identity(2));
    }
}
