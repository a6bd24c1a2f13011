//! TrojanNet: conv 3x3 -> ReLU -> maxpool 2x2 -> dense -> ReLU -> dense ->
//! softmax, with hand-written backpropagation.
//!
//! Tensors are channel-last. Conv weights are `[kh][kw][in][out]`, dense
//! weights `[in][out]`, flattening is height, width, channel.

mod checkpoint;
mod gradcheck;
mod train;

pub use checkpoint::{checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, save_checkpoint, CheckpointError};
pub use gradcheck::{gradient_check, GradCheck};
pub use train::{evaluate, predict, train, Adam, EpochStats, EvalMetrics, TrainConfig, TrainSet};

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CnnError {
    #[error("input has {got} values, expected {expected}")]
    InputShape { expected: usize, got: usize },
    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },
    #[error("batch sizes differ: {inputs} inputs, {labels} labels")]
    BatchMismatch { inputs: usize, labels: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite input value")]
    NonFinite,
}

/// Layer sizes. `kernel` is the square conv kernel side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arch {
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub filters: usize,
    pub kernel: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Arch {
    pub const fn trojannet() -> Self {
        Arch {
            in_h: 32,
            in_w: 32,
            in_c: 2,
            filters: 32,
            kernel: 3,
            hidden: 64,
            classes: 2,
        }
    }

    pub fn conv_h(&self) -> usize {
        self.in_h + 1 - self.kernel
    }

    pub fn conv_w(&self) -> usize {
        self.in_w + 1 - self.kernel
    }

    pub fn pool_h(&self) -> usize {
        self.conv_h() / 2
    }

    pub fn pool_w(&self) -> usize {
        self.conv_w() / 2
    }

    pub fn input_len(&self) -> usize {
        self.in_h * self.in_w * self.in_c
    }

    pub fn flat_len(&self) -> usize {
        self.pool_h() * self.pool_w() * self.filters
    }

    pub fn dims(&self) -> [usize; 7] {
        [
            self.in_h,
            self.in_w,
            self.in_c,
            self.filters,
            self.kernel,
            self.hidden,
            self.classes,
        ]
    }

    pub fn from_dims(d: &[usize]) -> Option<Self> {
        let &[in_h, in_w, in_c, filters, kernel, hidden, classes] = d else {
            return None;
        };
        let a = Arch {
            in_h,
            in_w,
            in_c,
            filters,
            kernel,
            hidden,
            classes,
        };
        (kernel >= 1 && in_h > kernel && in_w > kernel && a.flat_len() > 0 && hidden > 0 && classes > 0)
            .then_some(a)
    }

    pub fn param_count(&self) -> usize {
        self.kernel * self.kernel * self.in_c * self.filters
            + self.filters
            + self.flat_len() * self.hidden
            + self.hidden
            + self.hidden * self.classes
            + self.classes
    }
}

/// Weights of one network. Also used as the gradient and Adam-moment
/// container, since those share its shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub arch: Arch,
    pub conv_w: Vec<T>,
    pub conv_b: Vec<T>,
    pub dense1_w: Vec<T>,
    pub dense1_b: Vec<T>,
    pub dense2_w: Vec<T>,
    pub dense2_b: Vec<T>,
}

/// Intermediate activations of one forward pass.
#[derive(Debug, Clone)]
pub struct Activations<T> {
    /// Conv output after ReLU.
    pub conv: Vec<T>,
    pub pool: Vec<T>,
    /// Index into `conv` of each pooled maximum.
    pub pool_arg: Vec<usize>,
    /// Hidden layer after ReLU.
    pub hidden: Vec<T>,
    pub logits: Vec<T>,
    pub probs: Vec<T>,
}

fn glorot<T: Real>(rng: &mut ChaCha8Rng, n: usize, fan_in: usize, fan_out: usize) -> Vec<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit);
    (0..n).map(|_| T::of(dist.sample(rng))).collect()
}

impl<T: Real> Model<T> {
    pub fn zeros(arch: Arch) -> Self {
        let k2 = arch.kernel * arch.kernel;
        Model {
            arch,
            conv_w: vec![T::zero(); k2 * arch.in_c * arch.filters],
            conv_b: vec![T::zero(); arch.filters],
            dense1_w: vec![T::zero(); arch.flat_len() * arch.hidden],
            dense1_b: vec![T::zero(); arch.hidden],
            dense2_w: vec![T::zero(); arch.hidden * arch.classes],
            dense2_b: vec![T::zero(); arch.classes],
        }
    }

    /// Glorot-uniform weights, zero biases. Draw order: conv, dense1, dense2.
    pub fn init(arch: Arch, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k2 = arch.kernel * arch.kernel;
        let mut m = Model::zeros(arch);
        m.conv_w = glorot(&mut rng, m.conv_w.len(), k2 * arch.in_c, k2 * arch.filters);
        m.dense1_w = glorot(&mut rng, m.dense1_w.len(), arch.flat_len(), arch.hidden);
        m.dense2_w = glorot(&mut rng, m.dense2_w.len(), arch.hidden, arch.classes);
        m
    }

    pub fn params(&self) -> [&[T]; 6] {
        [
            &self.conv_w,
            &self.conv_b,
            &self.dense1_w,
            &self.dense1_b,
            &self.dense2_w,
            &self.dense2_b,
        ]
    }

    pub fn params_mut(&mut self) -> [&mut Vec<T>; 6] {
        [
            &mut self.conv_w,
            &mut self.conv_b,
            &mut self.dense1_w,
            &mut self.dense1_b,
            &mut self.dense2_w,
            &mut self.dense2_b,
        ]
    }

    /// Converted copy, e.g. an `f64` twin of an `f32` model.
    pub fn cast<U: Real>(&self) -> Model<U> {
        let c = |v: &[T]| v.iter().map(|x| U::of(x.as_f64())).collect();
        Model {
            arch: self.arch,
            conv_w: c(&self.conv_w),
            conv_b: c(&self.conv_b),
            dense1_w: c(&self.dense1_w),
            dense1_b: c(&self.dense1_b),
            dense2_w: c(&self.dense2_w),
            dense2_b: c(&self.dense2_b),
        }
    }

    fn check_input(&self, x: &[T]) -> Result<(), CnnError> {
        if x.len() != self.arch.input_len() {
            return Err(CnnError::InputShape {
                expected: self.arch.input_len(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(CnnError::NonFinite);
        }
        Ok(())
    }

    /// Forward pass for one example.
    pub fn forward(&self, x: &[T]) -> Result<Activations<T>, CnnError> {
        self.check_input(x)?;
        Ok(self.forward_unchecked(x))
    }

    fn forward_unchecked(&self, x: &[T]) -> Activations<T> {
        let a = self.arch;
        let (ch, cw, f, k, ic) = (a.conv_h(), a.conv_w(), a.filters, a.kernel, a.in_c);

        let mut conv = vec![T::zero(); ch * cw * f];
        for y in 0..ch {
            for xx in 0..cw {
                let out = &mut conv[(y * cw + xx) * f..(y * cw + xx + 1) * f];
                out.copy_from_slice(&self.conv_b);
                for dy in 0..k {
                    for dx in 0..k {
                        let src = ((y + dy) * a.in_w + xx + dx) * ic;
                        for c in 0..ic {
                            let v = x[src + c];
                            if v == T::zero() {
                                continue;
                            }
                            let w = &self.conv_w[((dy * k + dx) * ic + c) * f..][..f];
                            for (o, &wv) in out.iter_mut().zip(w) {
                                *o += v * wv;
                            }
                        }
                    }
                }
                for o in out.iter_mut() {
                    *o = o.max(T::zero());
                }
            }
        }

        let (ph, pw) = (a.pool_h(), a.pool_w());
        let mut pool = vec![T::zero(); ph * pw * f];
        let mut pool_arg = vec![0usize; ph * pw * f];
        for py in 0..ph {
            for px in 0..pw {
                for ff in 0..f {
                    let mut best = (T::neg_infinity(), 0usize);
                    for dy in 0..2 {
                        for dx in 0..2 {
                            let idx = ((2 * py + dy) * cw + 2 * px + dx) * f + ff;
                            if conv[idx] > best.0 {
                                best = (conv[idx], idx);
                            }
                        }
                    }
                    let o = (py * pw + px) * f + ff;
                    pool[o] = best.0;
                    pool_arg[o] = best.1;
                }
            }
        }

        let hdim = a.hidden;
        let mut hidden = self.dense1_b.clone();
        for (i, &v) in pool.iter().enumerate() {
            if v == T::zero() {
                continue;
            }
            for (h, &w) in hidden.iter_mut().zip(&self.dense1_w[i * hdim..(i + 1) * hdim]) {
                *h += v * w;
            }
        }
        for h in hidden.iter_mut() {
            *h = h.max(T::zero());
        }

        let nc = a.classes;
        let mut logits = self.dense2_b.clone();
        for (j, &v) in hidden.iter().enumerate() {
            if v == T::zero() {
                continue;
            }
            for (l, &w) in logits.iter_mut().zip(&self.dense2_w[j * nc..(j + 1) * nc]) {
                *l += v * w;
            }
        }
        let probs = softmax(&logits);
        Activations {
            conv,
            pool,
            pool_arg,
            hidden,
            logits,
            probs,
        }
    }

    /// Class probabilities for each example.
    pub fn predict_proba(&self, batch: &[&[T]]) -> Result<Vec<Vec<T>>, CnnError> {
        batch.iter().map(|x| Ok(self.forward(x)?.probs)).collect()
    }

    /// Mean cross-entropy over the batch and its gradient. Per-example
    /// gradients are summed in batch order.
    pub fn loss_and_grad(&self, batch: &[&[T]], labels: &[usize]) -> Result<(T, Model<T>), CnnError> {
        let mut grad = Model::zeros(self.arch);
        let loss = self.accumulate_grad(batch, labels, &mut grad)?;
        Ok((loss, grad))
    }

    /// Like [`Model::loss_and_grad`] but into a caller-owned buffer, which is
    /// overwritten.
    pub fn accumulate_grad(&self, batch: &[&[T]], labels: &[usize], grad: &mut Model<T>) -> Result<T, CnnError> {
        Ok(self.accumulate_counting(batch, labels, grad)?.0)
    }

    /// Loss plus the number of examples whose argmax matched the label
    /// before the update.
    pub(crate) fn accumulate_counting(
        &self,
        batch: &[&[T]],
        labels: &[usize],
        grad: &mut Model<T>,
    ) -> Result<(T, usize), CnnError> {
        if batch.is_empty() {
            return Err(CnnError::EmptyBatch);
        }
        if batch.len() != labels.len() {
            return Err(CnnError::BatchMismatch {
                inputs: batch.len(),
                labels: labels.len(),
            });
        }
        for (x, &y) in batch.iter().zip(labels) {
            self.check_input(x)?;
            if y >= self.arch.classes {
                return Err(CnnError::Label {
                    label: y,
                    classes: self.arch.classes,
                });
            }
        }
        for p in grad.params_mut() {
            p.iter_mut().for_each(|v| *v = T::zero());
        }
        let scale = T::one() / T::of(batch.len() as f64);
        let mut loss = T::zero();
        let mut correct = 0;
        for (x, &y) in batch.iter().zip(labels) {
            let act = self.forward_unchecked(x);
            loss += cross_entropy(&act.logits, y);
            correct += usize::from(train::argmax(&act.probs) == y);
            self.backward(x, &act, y, scale, grad);
        }
        Ok((loss * scale, correct))
    }

    fn backward(&self, x: &[T], act: &Activations<T>, label: usize, scale: T, g: &mut Model<T>) {
        let a = self.arch;
        let (nc, hdim, f, k, ic) = (a.classes, a.hidden, a.filters, a.kernel, a.in_c);

        let dlogits: Vec<T> = act
            .probs
            .iter()
            .enumerate()
            .map(|(c, &p)| (p - if c == label { T::one() } else { T::zero() }) * scale)
            .collect();

        let mut dhidden = vec![T::zero(); hdim];
        for j in 0..hdim {
            let h = act.hidden[j];
            let row = j * nc;
            let mut acc = T::zero();
            for c in 0..nc {
                g.dense2_w[row + c] += h * dlogits[c];
                acc += self.dense2_w[row + c] * dlogits[c];
            }
            if h > T::zero() {
                dhidden[j] = acc;
            }
        }
        for c in 0..nc {
            g.dense2_b[c] += dlogits[c];
        }

        for j in 0..hdim {
            g.dense1_b[j] += dhidden[j];
        }
        let cw = a.conv_w();
        for (i, &v) in act.pool.iter().enumerate() {
            if v <= T::zero() {
                continue;
            }
            let w = &self.dense1_w[i * hdim..(i + 1) * hdim];
            let gw = &mut g.dense1_w[i * hdim..(i + 1) * hdim];
            let mut dv = T::zero();
            for j in 0..hdim {
                gw[j] += v * dhidden[j];
                dv += w[j] * dhidden[j];
            }
            if dv == T::zero() {
                continue;
            }
            let ci = act.pool_arg[i];
            let ff = ci % f;
            let pos = ci / f;
            let (y, xx) = (pos / cw, pos % cw);
            g.conv_b[ff] += dv;
            for dy in 0..k {
                for dx in 0..k {
                    let src = ((y + dy) * a.in_w + xx + dx) * ic;
                    for c in 0..ic {
                        let xv = x[src + c];
                        if xv != T::zero() {
                            g.conv_w[((dy * k + dx) * ic + c) * f + ff] += xv * dv;
                        }
                    }
                }
            }
        }
    }
}

/// Numerically stable softmax.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = logits.iter().map(|&l| (l - m).exp()).collect();
    let s: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `-log softmax(logits)[label]` via log-sum-exp.
pub fn cross_entropy<T: Real>(logits: &[T], label: usize) -> T {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = m + logits.iter().map(|&l| (l - m).exp()).sum::<T>().ln();
    lse - logits[label]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Arch {
        Arch {
            in_h: 8,
            in_w: 8,
            in_c: 2,
            filters: 4,
            kernel: 3,
            hidden: 8,
            classes: 2,
        }
    }

    #[test]
    fn trojannet_shapes() {
        let a = Arch::trojannet();
        assert_eq!((a.conv_h(), a.conv_w()), (30, 30));
        assert_eq!((a.pool_h(), a.pool_w()), (15, 15));
        assert_eq!(a.flat_len(), 7200);
        assert_eq!(a.param_count(), 3 * 3 * 2 * 32 + 32 + 7200 * 64 + 64 + 64 * 2 + 2);
        assert_eq!(Arch::from_dims(&a.dims()), Some(a));
        assert_eq!(Arch::from_dims(&[1, 2, 3]), None);
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = Model::<f32>::zeros(Arch::trojannet());
        let act = m.forward(&vec![0.0; 2048]).unwrap();
        assert_eq!(act.probs, vec![0.5, 0.5]);
        let (loss, _) = m.loss_and_grad(&[&vec![0.0; 2048]], &[1]).unwrap();
        assert!((loss - std::f32::consts::LN_2).abs() < 1e-7);
    }

    #[test]
    fn rejects_bad_shapes() {
        let m = Model::<f32>::zeros(small());
        assert!(matches!(m.forward(&[0.0; 3]), Err(CnnError::InputShape { .. })));
        let x = vec![0.0f32; 128];
        assert!(matches!(m.loss_and_grad(&[&x], &[2]), Err(CnnError::Label { .. })));
        assert!(matches!(m.loss_and_grad(&[&x], &[0, 1]), Err(CnnError::BatchMismatch { .. })));
        assert!(matches!(m.loss_and_grad(&[], &[]), Err(CnnError::EmptyBatch)));
    }

    /// One 2x2 filter on a 4x4 single-channel input, worked by hand.
    #[test]
    fn hand_computed_tiny_network() {
        let arch = Arch {
            in_h: 4,
            in_w: 4,
            in_c: 1,
            filters: 1,
            kernel: 2,
            hidden: 1,
            classes: 2,
        };
        let mut m = Model::<f64>::zeros(arch);
        // [[1, 0], [0, -1]] picks x[y][x] - x[y+1][x+1].
        m.conv_w = vec![1.0, 0.0, 0.0, -1.0];
        m.conv_b = vec![0.5];
        let x: Vec<f64> = (0..16).map(|i| [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0, 5.0, 8.0, 9.0, 7.0, 9.0, 3.0][i]).collect();
        // conv (3x3): x[y][x] - x[y+1][x+1] + 0.5
        //   3-9, 1-2, 4-6  ->  -5.5, -0.5, -1.5
        //   5-3, 9-5, 2-8  ->   2.5,  4.5, -5.5
        //   5-7, 3-9, 5-3  ->  -1.5, -5.5,  2.5
        let act = {
            m.dense1_w = vec![1.0];
            m.dense2_w = vec![2.0, -1.0];
            m.forward(&x).unwrap()
        };
        assert_eq!(act.conv, vec![0.0, 0.0, 0.0, 2.5, 4.5, 0.0, 0.0, 0.0, 2.5]);
        // pool over the top-left 2x2 window only.
        assert_eq!(act.pool, vec![4.5]);
        assert_eq!(act.pool_arg, vec![4]);
        assert_eq!(act.hidden, vec![4.5]);
        assert_eq!(act.logits, vec![9.0, -4.5]);
        let p1 = 1.0 / (1.0 + (13.5f64).exp());
        assert!((act.probs[1] - p1).abs() < 1e-15);
    }

    #[test]
    fn pool_ties_pick_first() {
        let arch = Arch {
            in_h: 3,
            in_w: 3,
            in_c: 1,
            filters: 1,
            kernel: 1,
            hidden: 1,
            classes: 2,
        };
        let mut m = Model::<f64>::zeros(arch);
        m.conv_w = vec![1.0];
        let act = m.forward(&[2.0, 2.0, 0.0, 2.0, 2.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(act.pool_arg, vec![0]);
    }

    #[test]
    fn softmax_rows_normalise() {
        let m = Model::<f32>::init(Arch::trojannet(), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = Uniform::new(-1.0f32, 1.0);
        for _ in 0..5 {
            let x: Vec<f32> = (0..2048).map(|_| d.sample(&mut rng)).collect();
            let p = m.forward(&x).unwrap().probs;
            assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
            assert!((p.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        }
        assert_eq!(softmax(&[1000.0f64, 0.0]), vec![1.0, 0.0]);
        assert!(cross_entropy(&[1000.0f64, 0.0], 0).abs() < 1e-12);
        assert!((cross_entropy(&[0.0f64, 0.0], 1) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = Model::<f32>::init(Arch::trojannet(), 5);
        assert_eq!(a, Model::<f32>::init(Arch::trojannet(), 5));
        assert_ne!(a, Model::<f32>::init(Arch::trojannet(), 6));
        let conv_lim = (6.0f32 / (18.0 + 288.0)).sqrt();
        assert!(a.conv_w.iter().all(|w| w.abs() <= conv_lim));
        let d1_lim = (6.0f32 / (7200.0 + 64.0)).sqrt();
        assert!(a.dense1_w.iter().all(|w| w.abs() <= d1_lim));
        assert!(a.conv_b.iter().chain(&a.dense1_b).chain(&a.dense2_b).all(|&b| b == 0.0));
    }
}
