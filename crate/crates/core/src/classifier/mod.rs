//! Multinomial softmax regression trained with Adam on categorical
//! cross-entropy.
//!
//! One weight row per class; prediction is the argmax of the softmax output,
//! which is how the four "one unit per class" scorers are combined.

mod adam;
mod model_file;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::shuffle_with;
use crate::store::FeatureMatrix;

pub use adam::{adam_step, AdamState};
pub use model_file::{model_from_bytes, model_to_bytes, read_model, write_model, MODEL_MAGIC, MODEL_VERSION};

/// Probability floor inside the logarithm of the loss.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("feature dimension mismatch: model expects {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("class list mismatch between model/stores: {0:?} vs {1:?}")]
    ClassMismatch(Vec<String>, Vec<String>),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("empty batch")]
    EmptyBatch,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: String| Err(ClassifierError::InvalidConfig(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be > 0", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad(format!("betas ({}, {}) must be in [0, 1)", self.beta1, self.beta2));
        }
        if self.epsilon <= 0.0 || self.epsilon.is_nan() {
            return bad(format!("epsilon {} must be > 0", self.epsilon));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        Ok(())
    }
}

/// Weights (`K x D`, row-major) and biases of a softmax-regression model.
///
/// Parameters are held as `f64` during training; the model file stores them
/// as `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    classes: Vec<String>,
    feature_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ClassifierModel {
    pub fn zeros(classes: Vec<String>, feature_dim: usize) -> Self {
        let k = classes.len();
        Self {
            classes,
            feature_dim,
            weights: vec![0.0; k * feature_dim],
            bias: vec![0.0; k],
        }
    }

    pub fn from_parts(
        classes: Vec<String>,
        feature_dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self, ClassifierError> {
        let k = classes.len();
        if weights.len() != k * feature_dim || bias.len() != k {
            return Err(ClassifierError::DimMismatch {
                expected: k * feature_dim + k,
                got: weights.len() + bias.len(),
            });
        }
        Ok(Self {
            classes,
            feature_dim,
            weights,
            bias,
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn weight_row(&self, k: usize) -> &[f64] {
        &self.weights[k * self.feature_dim..(k + 1) * self.feature_dim]
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }

    /// `W x + b`.
    pub fn logits(&self, x: &[f32]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.feature_dim);
        (0..self.num_classes())
            .map(|k| {
                let row = self.weight_row(k);
                self.bias[k] + row.iter().zip(x).map(|(w, &xi)| w * xi as f64).sum::<f64>()
            })
            .collect()
    }

    pub fn probabilities(&self, x: &[f32]) -> Vec<f64> {
        softmax(&self.logits(x))
    }

    fn check_dim(&self, dim: usize) -> Result<(), ClassifierError> {
        if dim != self.feature_dim {
            return Err(ClassifierError::DimMismatch {
                expected: self.feature_dim,
                got: dim,
            });
        }
        Ok(())
    }
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-ln(max(p[label], 1e-12))`.
pub fn cross_entropy(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(PROB_FLOOR).ln()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Mean-over-batch gradient of the cross-entropy loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    /// `K x D`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// `dW = (1/B) sum_i (p_i - y_i) x_i^T`, `db = (1/B) sum_i (p_i - y_i)`.
///
/// Rows are accumulated in batch order.
pub fn gradient(model: &ClassifierModel, xs: &[&[f32]], labels: &[usize]) -> Result<Gradient, ClassifierError> {
    if xs.is_empty() {
        return Err(ClassifierError::EmptyBatch);
    }
    assert_eq!(xs.len(), labels.len(), "features/labels length mismatch");
    let (k, d) = (model.num_classes(), model.feature_dim);
    let mut grad = Gradient {
        weights: vec![0.0; k * d],
        bias: vec![0.0; k],
    };
    for (x, &label) in xs.iter().zip(labels) {
        model.check_dim(x.len())?;
        if label >= k {
            return Err(ClassifierError::LabelOutOfRange { label, classes: k });
        }
        let mut delta = model.probabilities(x);
        delta[label] -= 1.0;
        for (c, &dc) in delta.iter().enumerate() {
            grad.bias[c] += dc;
            let row = &mut grad.weights[c * d..(c + 1) * d];
            for (g, &xi) in row.iter_mut().zip(x.iter()) {
                *g += dc * xi as f64;
            }
        }
    }
    let scale = 1.0 / xs.len() as f64;
    grad.weights
        .iter_mut()
        .chain(grad.bias.iter_mut())
        .for_each(|g| *g *= scale);
    Ok(grad)
}

/// Mean cross-entropy over a batch.
pub fn mean_loss(model: &ClassifierModel, xs: &[&[f32]], labels: &[usize]) -> f64 {
    let total: f64 = xs
        .iter()
        .zip(labels)
        .map(|(x, &l)| cross_entropy(&model.probabilities(x), l))
        .sum();
    total / xs.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: usize,
    pub probabilities: Vec<f64>,
}

pub fn predict(model: &ClassifierModel, features: &FeatureMatrix) -> Result<Vec<Prediction>, ClassifierError> {
    model.check_dim(features.dim())?;
    Ok(features
        .rows()
        .par_iter()
        .map(|row| {
            let probabilities = model.probabilities(&row.values);
            Prediction {
                class: argmax(&probabilities),
                probabilities,
            }
        })
        .collect())
}

/// Accuracy and mean loss of a model over a whole matrix.
pub fn evaluate(model: &ClassifierModel, data: &FeatureMatrix) -> Result<(f64, f64), ClassifierError> {
    let preds = predict(model, data)?;
    let n = preds.len() as f64;
    let mut correct = 0usize;
    let mut loss = 0.0;
    for (p, row) in preds.iter().zip(data.rows()) {
        if p.class == row.label {
            correct += 1;
        }
        loss += cross_entropy(&p.probabilities, row.label);
    }
    Ok((correct as f64 / n, loss / n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_accuracy: f64,
    pub train_loss: f64,
    pub val_accuracy: Option<f64>,
    pub val_loss: Option<f64>,
}

/// Per-epoch metrics recorded at the end of each epoch on the full sets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochMetrics>,
}

impl TrainHistory {
    pub const CSV_HEADER: &'static str = "epoch,train_acc,train_loss,val_acc,val_loss";

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// CSV with header `epoch,train_acc,train_loss,val_acc,val_loss`;
    /// validation columns are left empty when there was no validation set.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for e in &self.epochs {
            out += &format!(
                "{},{},{},{},{}\n",
                e.epoch,
                e.train_accuracy,
                e.train_loss,
                opt(e.val_accuracy),
                opt(e.val_loss)
            );
        }
        out
    }
}

/// Trains from zero-initialized weights.
///
/// Each epoch shuffles the training rows with a ChaCha8 stream seeded from
/// `cfg.shuffle_seed`, walks mini-batches of `cfg.batch_size` (the last one
/// may be short) and applies one Adam step per batch.
pub fn train(
    train: &FeatureMatrix,
    val: &FeatureMatrix,
    cfg: &TrainConfig,
) -> Result<(ClassifierModel, TrainHistory), ClassifierError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    if !val.is_empty() {
        if val.dim() != train.dim() {
            return Err(ClassifierError::DimMismatch {
                expected: train.dim(),
                got: val.dim(),
            });
        }
        if val.classes() != train.classes() {
            return Err(ClassifierError::ClassMismatch(
                train.classes().to_vec(),
                val.classes().to_vec(),
            ));
        }
    }

    let mut model = ClassifierModel::zeros(train.classes().to_vec(), train.dim());
    let mut w_state = AdamState::new(model.weights.len());
    let mut b_state = AdamState::new(model.bias.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = TrainHistory::default();

    for epoch in 1..=cfg.epochs {
        shuffle_with(&mut order, &mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let xs: Vec<&[f32]> = batch.iter().map(|&i| train.rows()[i].values.as_slice()).collect();
            let ys: Vec<usize> = batch.iter().map(|&i| train.rows()[i].label).collect();
            let g = gradient(&model, &xs, &ys)?;
            adam_step(&mut model.weights, &g.weights, &mut w_state, cfg);
            adam_step(&mut model.bias, &g.bias, &mut b_state, cfg);
        }
        let (train_accuracy, train_loss) = evaluate(&model, train)?;
        let (val_accuracy, val_loss) = if val.is_empty() {
            (None, None)
        } else {
            let (a, l) = evaluate(&model, val)?;
            (Some(a), Some(l))
        };
        log::debug!("epoch {epoch}: train acc {train_accuracy:.4} loss {train_loss:.4}");
        history.epochs.push(EpochMetrics {
            epoch,
            train_accuracy,
            train_loss,
            val_accuracy,
            val_loss,
        });
    }
    Ok((model, history))
}
