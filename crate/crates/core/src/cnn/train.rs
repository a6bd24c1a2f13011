//! Adam, the epoch loop and classification metrics.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{cross_entropy, CnnError, Model};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            validation_fraction: 0.1,
        }
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    m: Model<T>,
    v: Model<T>,
    t: i32,
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
}

impl<T: Real> Adam<T> {
    pub fn new(model: &Model<T>, cfg: &TrainConfig) -> Self {
        Adam {
            m: Model::zeros(model.arch),
            v: Model::zeros(model.arch),
            t: 0,
            lr: T::of(cfg.learning_rate),
            beta1: T::of(cfg.beta1),
            beta2: T::of(cfg.beta2),
            eps: T::of(cfg.epsilon),
        }
    }

    pub fn step(&mut self, model: &mut Model<T>, grad: &Model<T>) {
        self.t += 1;
        let one = T::one();
        let c1 = one - self.beta1.powi(self.t);
        let c2 = one - self.beta2.powi(self.t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let params = model.params_mut();
        let ms = self.m.params_mut();
        let vs = self.v.params_mut();
        for (((p, g), m), v) in params.into_iter().zip(grad.params()).zip(ms).zip(vs) {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (one - b1) * gi;
                v[i] = b2 * v[i] + (one - b2) * gi * gi;
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] -= lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

/// Borrowed examples with labels.
#[derive(Debug, Clone, Copy)]
pub struct TrainSet<'a, T> {
    pub inputs: &'a [&'a [T]],
    pub labels: &'a [usize],
}

impl<T> TrainSet<'_, T> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean of the per-batch losses seen during the epoch.
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

/// Argmax class; ties go to the lower class.
pub fn predict<T: Real>(model: &Model<T>, x: &[T]) -> Result<usize, CnnError> {
    let p = model.forward(x)?.probs;
    Ok(argmax(&p))
}

pub(crate) fn argmax<T: Real>(p: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

fn loss_and_acc<T: Real>(model: &Model<T>, set: &TrainSet<T>) -> Result<(f64, f64), CnnError> {
    if set.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (x, &y) in set.inputs.iter().zip(set.labels) {
        let act = model.forward(x)?;
        loss += cross_entropy(&act.logits, y).as_f64();
        correct += usize::from(argmax(&act.probs) == y);
    }
    let n = set.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Mini-batch Adam training. Batch order is reshuffled every epoch from a
/// generator seeded with `cfg.seed`; the last batch may be short.
pub fn train<T: Real>(
    model: &mut Model<T>,
    train_set: &TrainSet<T>,
    val_set: &TrainSet<T>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<Vec<EpochStats>, CnnError> {
    if train_set.is_empty() {
        return Err(CnnError::EmptyBatch);
    }
    if train_set.inputs.len() != train_set.labels.len() {
        return Err(CnnError::BatchMismatch {
            inputs: train_set.inputs.len(),
            labels: train_set.labels.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(model, cfg);
    let mut grad = Model::zeros(model.arch);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let bs = cfg.batch_size.max(1);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct, mut batches) = (0.0, 0usize, 0usize);
        for chunk in order.chunks(bs) {
            let xs: Vec<&[T]> = chunk.iter().map(|&i| train_set.inputs[i]).collect();
            let ys: Vec<usize> = chunk.iter().map(|&i| train_set.labels[i]).collect();
            let (loss, hits) = model.accumulate_counting(&xs, &ys, &mut grad)?;
            correct += hits;
            loss_sum += loss.as_f64();
            batches += 1;
            adam.step(model, &grad);
        }
        let (val_loss, val_acc) = loss_and_acc(model, val_set)?;
        let stats = EpochStats {
            epoch,
            train_loss: loss_sum / batches as f64,
            train_acc: correct as f64 / train_set.len() as f64,
            val_loss,
            val_acc,
        };
        on_epoch(&stats);
        history.push(stats);
    }
    Ok(history)
}

/// Binary metrics with class 1 (Trojan-inserted) as positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl EvalMetrics {
    pub fn from_confusion(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        EvalMetrics {
            accuracy: ratio(tp + tn, tp + fp + tn + fn_),
            precision,
            recall,
            f1,
            tp,
            fp,
            tn,
            fn_,
        }
    }

    pub fn from_predictions(pred: &[usize], truth: &[usize]) -> Self {
        let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
        for (&p, &t) in pred.iter().zip(truth) {
            match (p == 1, t == 1) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fn_ += 1,
            }
        }
        Self::from_confusion(tp, fp, tn, fn_)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn evaluate<T: Real>(model: &Model<T>, set: &TrainSet<T>) -> Result<EvalMetrics, CnnError> {
    if set.is_empty() {
        return Err(CnnError::EmptyBatch);
    }
    let pred = set
        .inputs
        .iter()
        .map(|x| predict(model, x))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvalMetrics::from_predictions(&pred, set.labels))
}
