//! Feedforward classifier from requirement features to cluster index.
//!
//! A plain multilayer perceptron with softmax output trained on categorical
//! cross-entropy by mini-batch Adam. Everything is sequential and seeded, so
//! a training run is bit-reproducible.

use crate::clustering::{ClusterModel, FeatureNormalizer};
use crate::cost::{BeamRequirement, FEATURE_COUNT};
use crate::engine::PatternEngine;
use crate::error::{domain, Error, Result};
use crate::synthesis::steering_phases;
use crate::weights::WeightMatrix;
use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Probabilities are clipped to `[PROB_EPSILON, 1]` before the log.
pub const PROB_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => libm::tanh(x),
        }
    }

    /// Derivative expressed through the activation output `y`.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// Multilayer perceptron. `weights[l]` is row-major `out x in`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MlpModel {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub normalizer: FeatureNormalizer,
    pub class_count: usize,
    pub seed: u64,
}

impl MlpModel {
    /// Weights drawn from `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`, zero
    /// biases.
    pub fn init(layer_sizes: &[usize], activation: Activation, normalizer: FeatureNormalizer, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(layer_sizes, activation, normalizer)?;
        model.seed = seed;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (l, w) in model.weights.iter_mut().enumerate() {
            let bound = libm::sqrt(6.0 / layer_sizes[l] as f64);
            w.iter_mut().for_each(|x| *x = rng.gen_range(-bound..bound));
        }
        Ok(model)
    }

    pub fn zeros(layer_sizes: &[usize], activation: Activation, normalizer: FeatureNormalizer) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(domain!("need at least an input and an output layer, all non-empty: {:?}", layer_sizes));
        }
        if layer_sizes[0] != FEATURE_COUNT {
            return Err(domain!("input layer must have {FEATURE_COUNT} units, got {}", layer_sizes[0]));
        }
        let weights = layer_sizes.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect();
        let biases = layer_sizes[1..].iter().map(|&n| vec![0.0; n]).collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            activation,
            weights,
            biases,
            normalizer,
            class_count: *layer_sizes.last().unwrap(),
            seed: 0,
        })
    }

    /// Checks that every array matches the declared layer sizes.
    pub fn validate(&self) -> Result<()> {
        let n = self.layer_sizes.len();
        if n < 2 || self.weights.len() != n - 1 || self.biases.len() != n - 1 {
            return Err(domain!("layer arrays do not match {} layer sizes", n));
        }
        for l in 0..n - 1 {
            let (i, o) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            if self.weights[l].len() != i * o || self.biases[l].len() != o {
                return Err(domain!("layer {l} should be {o}x{i}"));
            }
        }
        if self.class_count != self.layer_sizes[n - 1] || self.layer_sizes[0] != FEATURE_COUNT {
            return Err(domain!("input must be {FEATURE_COUNT} wide and output must equal the class count"));
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Activations of every layer; the last entry holds the raw logits.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let depth = self.weights.len();
        let mut acts = Vec::with_capacity(depth + 1);
        acts.push(x.to_vec());
        for l in 0..depth {
            let (i, o) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let prev = &acts[l];
            let w = &self.weights[l];
            let mut z = self.biases[l].clone();
            for (r, zr) in z.iter_mut().enumerate() {
                let row = &w[r * i..(r + 1) * i];
                *zr += row.iter().zip(prev).map(|(a, b)| a * b).sum::<f64>();
            }
            if l + 1 < depth {
                z.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            debug_assert_eq!(z.len(), o);
            acts.push(z);
        }
        acts
    }

    /// Output logits for an already-normalized input.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.layer_sizes[0] {
            return Err(domain!("input has {} features, expected {}", x.len(), self.layer_sizes[0]));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(domain!("input must be finite"));
        }
        Ok(self.activations(x).pop().unwrap())
    }

    /// Class probabilities for an already-normalized input.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(x)?))
    }

    /// Normalizes raw requirement features, then runs [`Self::forward`].
    pub fn predict(&self, requirement: &BeamRequirement) -> Result<Vec<f64>> {
        self.forward(&self.normalizer.transform(&requirement.to_features()))
    }
}

/// Softmax with the maximum logit subtracted first.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| libm::exp(z - m)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Index of the largest entry, first one on ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// Normalized inputs with class labels (the one-hot rows are implied by the
/// label indices).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBatch {
    pub inputs: Vec<[f64; FEATURE_COUNT]>,
    pub labels: Vec<usize>,
    pub class_count: usize,
}

impl TrainingBatch {
    pub fn new(inputs: Vec<[f64; FEATURE_COUNT]>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(domain!("{} inputs but {} labels", inputs.len(), labels.len()));
        }
        if let Some(l) = labels.iter().find(|&&l| l >= class_count) {
            return Err(domain!("label {l} out of range for {class_count} classes"));
        }
        if inputs.iter().flatten().any(|v| !v.is_finite()) {
            return Err(domain!("inputs must be finite"));
        }
        Ok(Self { inputs, labels, class_count })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn one_hot(&self, i: usize) -> Vec<f64> {
        let mut y = vec![0.0; self.class_count];
        y[self.labels[i]] = 1.0;
        y
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            inputs: idx.iter().map(|&i| self.inputs[i]).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loss {
    /// Summed over samples.
    pub sum: f64,
    /// Per-sample mean.
    pub mean: f64,
}

/// Categorical cross-entropy between probability rows and one-hot rows.
pub fn cross_entropy(predictions: &[Vec<f64>], labels: &[Vec<f64>]) -> Result<Loss> {
    if predictions.len() != labels.len() {
        return Err(domain!("{} prediction rows but {} label rows", predictions.len(), labels.len()));
    }
    let mut sum = 0.0;
    for (p, y) in predictions.iter().zip(labels) {
        if p.len() != y.len() {
            return Err(domain!("prediction width {} does not match label width {}", p.len(), y.len()));
        }
        for (pi, yi) in p.iter().zip(y) {
            if *yi != 0.0 {
                sum -= yi * libm::log(pi.clamp(PROB_EPSILON, 1.0));
            }
        }
    }
    let n = predictions.len().max(1) as f64;
    Ok(Loss { sum, mean: sum / n })
}

/// Gradients with the same layout as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(model: &MlpModel) -> Self {
        Self {
            weights: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }
}

/// Gradients of the mean cross-entropy over `batch`, and the loss itself.
pub fn backward(model: &MlpModel, batch: &TrainingBatch) -> Result<(Gradients, Loss)> {
    backward_indices(model, batch, &(0..batch.len()).collect::<Vec<_>>())
}

fn backward_indices(model: &MlpModel, batch: &TrainingBatch, idx: &[usize]) -> Result<(Gradients, Loss)> {
    if batch.class_count != model.class_count {
        return Err(domain!("batch has {} classes, model has {}", batch.class_count, model.class_count));
    }
    let mut grads = Gradients::zeros_like(model);
    let depth = model.weights.len();
    let mut loss_sum = 0.0;
    for &s in idx {
        let acts = model.activations(&batch.inputs[s]);
        let p = softmax(&acts[depth]);
        let y = batch.labels[s];
        loss_sum -= libm::log(p[y].clamp(PROB_EPSILON, 1.0));
        // dL/dz at the output: p - y.
        let mut delta = p;
        delta[y] -= 1.0;
        for l in (0..depth).rev() {
            let i = model.layer_sizes[l];
            let prev = &acts[l];
            let gw = &mut grads.weights[l];
            for (r, d) in delta.iter().enumerate() {
                grads.biases[l][r] += d;
                for (g, a) in gw[r * i..(r + 1) * i].iter_mut().zip(prev) {
                    *g += d * a;
                }
            }
            if l > 0 {
                let w = &model.weights[l];
                let mut next = vec![0.0; i];
                for (r, d) in delta.iter().enumerate() {
                    for (n, wv) in next.iter_mut().zip(&w[r * i..(r + 1) * i]) {
                        *n += d * wv;
                    }
                }
                for (n, a) in next.iter_mut().zip(prev) {
                    *n *= model.activation.derivative_from_output(*a);
                }
                delta = next;
            }
        }
    }
    let n = idx.len().max(1) as f64;
    for g in grads.weights.iter_mut().chain(grads.biases.iter_mut()) {
        g.iter_mut().for_each(|v| *v /= n);
    }
    Ok((grads, Loss { sum: loss_sum, mean: loss_sum / n }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop after this many epochs without a validation-loss improvement.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 64,
            epochs: 200,
            patience: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    pub curves: Vec<EpochStats>,
    /// Epoch (1-based) whose weights were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
    /// `confusion[true][predicted]` on the validation set.
    pub confusion: Vec<Vec<usize>>,
    /// One-vs-rest ROC per class on the validation set.
    pub roc: Vec<Vec<RocPoint>>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Invalid(#[from] Error),
    #[error("training diverged in epoch {epoch}")]
    Diverged { epoch: usize, checkpoint: Box<MlpModel> },
}

/// Mean loss and accuracy of `model` on `batch`.
pub fn evaluate(model: &MlpModel, batch: &TrainingBatch) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (x, &y) in batch.inputs.iter().zip(&batch.labels) {
        let p = model.forward(x)?;
        loss -= libm::log(p[y].clamp(PROB_EPSILON, 1.0));
        if argmax(&p) == y {
            correct += 1;
        }
    }
    let n = batch.len().max(1) as f64;
    Ok((loss / n, correct as f64 / n))
}

pub fn confusion_matrix(model: &MlpModel, batch: &TrainingBatch) -> Result<Vec<Vec<usize>>> {
    let k = model.class_count;
    let mut m = vec![vec![0usize; k]; k];
    for (x, &y) in batch.inputs.iter().zip(&batch.labels) {
        m[y][argmax(&model.forward(x)?)] += 1;
    }
    Ok(m)
}

/// One-vs-rest ROC per class: thresholds are the distinct scores in
/// decreasing order, starting from `+inf` at (0, 0).
pub fn roc_curves(model: &MlpModel, batch: &TrainingBatch) -> Result<Vec<Vec<RocPoint>>> {
    let probs: Vec<Vec<f64>> = batch.inputs.iter().map(|x| model.forward(x)).collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(model.class_count);
    for c in 0..model.class_count {
        let mut scored: Vec<(f64, bool)> = probs.iter().zip(&batch.labels).map(|(p, &y)| (p[c], y == c)).collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let pos = scored.iter().filter(|s| s.1).count() as f64;
        let neg = scored.len() as f64 - pos;
        let rate = |n: usize, d: f64| if d > 0.0 { n as f64 / d } else { 0.0 };
        let mut curve = vec![RocPoint { threshold: f64::INFINITY, tpr: 0.0, fpr: 0.0 }];
        let (mut tp, mut fp) = (0usize, 0usize);
        let mut i = 0;
        while i < scored.len() {
            let t = scored[i].0;
            while i < scored.len() && scored[i].0 == t {
                if scored[i].1 {
                    tp += 1;
                } else {
                    fp += 1;
                }
                i += 1;
            }
            curve.push(RocPoint { threshold: t, tpr: rate(tp, pos), fpr: rate(fp, neg) });
        }
        out.push(curve);
    }
    Ok(out)
}

/// Area under a ROC curve by the trapezoidal rule.
pub fn roc_auc(curve: &[RocPoint]) -> f64 {
    curve.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum()
}

/// Per-class recall from a confusion matrix (0 for classes with no support).
pub fn per_class_recall(confusion: &[Vec<usize>]) -> Vec<f64> {
    confusion
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let n: usize = row.iter().sum();
            if n == 0 {
                0.0
            } else {
                row[i] as f64 / n as f64
            }
        })
        .collect()
}

struct Adam {
    m: Gradients,
    v: Gradients,
    t: i32,
}

impl Adam {
    fn step(&mut self, model: &mut MlpModel, g: &Gradients, cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(cfg.beta1, self.t as f64);
        let c2 = 1.0 - libm::pow(cfg.beta2, self.t as f64);
        let layers = model.weights.iter_mut().zip(&g.weights).zip(self.m.weights.iter_mut().zip(self.v.weights.iter_mut()));
        let biases = model.biases.iter_mut().zip(&g.biases).zip(self.m.biases.iter_mut().zip(self.v.biases.iter_mut()));
        for ((p, g), (m, v)) in layers.chain(biases) {
            for j in 0..p.len() {
                m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
                v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
                p[j] -= cfg.learning_rate * (m[j] / c1) / (libm::sqrt(v[j] / c2) + cfg.epsilon);
            }
        }
    }
}

/// Mini-batch Adam from `model`. Keeps the weights with the lowest
/// validation loss.
pub fn train(
    mut model: MlpModel,
    train_set: &TrainingBatch,
    val_set: &TrainingBatch,
    cfg: &TrainConfig,
) -> core::result::Result<(MlpModel, TrainingReport), TrainError> {
    model.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(domain!("training and validation sets must be non-empty").into());
    }
    if train_set.class_count != model.class_count || val_set.class_count != model.class_count {
        return Err(domain!("class count mismatch between model and data").into());
    }
    if cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(domain!("batch size and learning rate must be positive").into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam { m: Gradients::zeros_like(&model), v: Gradients::zeros_like(&model), t: 0 };
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut curves = Vec::new();
    let mut best = (f64::INFINITY, model.clone(), 0usize);
    let mut stale = 0;
    let mut stopped_early = false;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let (g, loss) = backward_indices(&model, train_set, chunk)?;
            if !loss.mean.is_finite() {
                return Err(TrainError::Diverged { epoch, checkpoint: Box::new(best.1) });
            }
            adam.step(&mut model, &g, cfg);
        }
        let (train_loss, train_acc) = evaluate(&model, train_set)?;
        let (val_loss, val_acc) = evaluate(&model, val_set)?;
        if !(train_loss.is_finite() && val_loss.is_finite()) {
            return Err(TrainError::Diverged { epoch, checkpoint: Box::new(best.1) });
        }
        curves.push(EpochStats { epoch, train_loss, val_loss, train_acc, val_acc });
        if val_loss < best.0 {
            best = (val_loss, model.clone(), epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }
    let model = best.1;
    let confusion = confusion_matrix(&model, val_set)?;
    let roc = roc_curves(&model, val_set)?;
    Ok((model, TrainingReport { curves, best_epoch: best.2, stopped_early, confusion, roc }))
}

/// Splits sample indices per class so each class contributes
/// `round(val_fraction * n_c)` samples to validation (at least one when the
/// class has two or more samples). Order within each part is ascending.
pub fn stratified_split(labels: &[usize], class_count: usize, val_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(domain!("validation fraction must be in [0, 1), got {val_fraction}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx = Vec::new();
    let mut val_idx = Vec::new();
    for c in 0..class_count {
        let mut members: Vec<usize> = labels.iter().enumerate().filter(|(_, &l)| l == c).map(|(i, _)| i).collect();
        members.shuffle(&mut rng);
        let mut n_val = libm::round(val_fraction * members.len() as f64) as usize;
        if val_fraction > 0.0 && n_val == 0 && members.len() >= 2 {
            n_val = 1;
        }
        val_idx.extend_from_slice(&members[..n_val]);
        train_idx.extend_from_slice(&members[n_val..]);
    }
    train_idx.sort_unstable();
    val_idx.sort_unstable();
    Ok((train_idx, val_idx))
}

/// Outcome of [`select_matrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub cluster: usize,
    pub weights: WeightMatrix,
    pub probabilities: Vec<f64>,
}

/// Picks the most probable cluster for `requirement` and returns its
/// representative re-steered to the requirement pointing. Amplitudes, mask
/// and drive power are left as they are.
pub fn select_matrix(
    engine: &PatternEngine,
    model: &MlpModel,
    clusters: &ClusterModel,
    representatives: &[WeightMatrix],
    requirement: &BeamRequirement,
) -> Result<Selection> {
    if model.normalizer != clusters.normalizer {
        return Err(Error::Config("classifier and cluster model use different normalizers".into()));
    }
    if model.class_count != clusters.k || representatives.len() != clusters.k {
        return Err(Error::Config(alloc::format!(
            "classifier has {} classes, cluster model {} clusters, {} representatives",
            model.class_count,
            clusters.k,
            representatives.len()
        )));
    }
    let probabilities = model.predict(requirement)?;
    let cluster = argmax(&probabilities);
    let weights = resteer(engine, &representatives[cluster], requirement)?;
    Ok(Selection { cluster, weights, probabilities })
}

/// `weights` with its phases replaced by the steering phases toward the
/// requirement pointing on its active elements.
pub fn resteer(engine: &PatternEngine, weights: &WeightMatrix, requirement: &BeamRequirement) -> Result<WeightMatrix> {
    let geometry = engine.geometry();
    let mut phases = steering_phases(geometry, requirement.pointing(), geometry.subarray_grid())?;
    for (p, &a) in phases.iter_mut().zip(weights.active()) {
        if !a {
            *p = 0.0;
        }
    }
    let mut out = weights.clone();
    out.set_phases(&phases)?;
    Ok(out)
}

/// Rescales the drive power so the EIRP toward the requirement pointing
/// equals the requested value. Shape and phases are unchanged.
pub fn trim_eirp(engine: &PatternEngine, weights: &WeightMatrix, requirement: &BeamRequirement) -> Result<WeightMatrix> {
    let current = engine.eirp(weights, requirement.pointing())?;
    let scale = libm::pow(10.0, (requirement.eirp_dbw - current) / 10.0);
    let mut out = weights.clone();
    out.set_per_element_power(weights.per_element_power() * scale)?;
    Ok(out)
}
