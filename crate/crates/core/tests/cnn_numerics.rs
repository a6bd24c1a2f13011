use proptest::prelude::*;
use qtrojan_core::cnn::{cross_entropy, gradient_check, softmax, train, Arch, Model, TrainConfig, TrainSet};
use qtrojan_core::dataset::{build_dataset, enumerate_graphs, DatasetConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SMALL: Arch = Arch {
    in_h: 8,
    in_w: 8,
    in_c: 2,
    filters: 4,
    kernel: 3,
    hidden: 8,
    classes: 2,
};

fn random_input(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

#[test]
fn gradients_match_finite_differences() {
    for seed in 0..5 {
        let m = Model::<f64>::init(SMALL, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        for label in 0..2 {
            let x = random_input(&mut rng, SMALL.input_len());
            let r = gradient_check(&m, &x, label, 1e-3).unwrap();
            assert_eq!(r.checked + r.kinks, SMALL.param_count());
            assert!(r.kinks * 10 <= SMALL.param_count(), "seed {seed}: {} kinks", r.kinks);
            assert!(r.max_rel_err < 1e-4, "seed {seed} label {label}: {r:?}");
        }
    }
}

#[test]
fn batch_gradient_is_mean_of_example_gradients() {
    let m = Model::<f64>::init(SMALL, 11);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let xs: Vec<Vec<f64>> = (0..4).map(|_| random_input(&mut rng, SMALL.input_len())).collect();
    let labels = [0, 1, 1, 0];
    let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
    let (loss, grad) = m.loss_and_grad(&refs, &labels).unwrap();
    let mut mean_loss = 0.0;
    let mut mean = Model::<f64>::zeros(SMALL);
    for (x, &y) in refs.iter().zip(&labels) {
        let (l, g) = m.loss_and_grad(&[x], &[y]).unwrap();
        mean_loss += l / 4.0;
        for (acc, gi) in mean.params_mut().into_iter().zip(g.params()) {
            for (a, v) in acc.iter_mut().zip(gi) {
                *a += v / 4.0;
            }
        }
    }
    assert!((loss - mean_loss).abs() < 1e-12);
    for (a, b) in grad.params().iter().zip(mean.params()) {
        for (u, v) in a.iter().zip(b) {
            assert!((u - v).abs() < 1e-12);
        }
    }
}

#[test]
fn overfits_twenty_examples() {
    let graphs: Vec<_> = enumerate_graphs().into_iter().take(10).collect();
    let mut cfg = DatasetConfig::named("ideal-front-x-1", 0).unwrap();
    cfg.budget = 200;
    let ds = build_dataset(&cfg, &graphs, None).unwrap();
    assert_eq!(ds.examples.len(), 20);
    let inputs: Vec<&[f32]> = ds.examples.iter().map(|e| e.features.data()).collect();
    let labels: Vec<usize> = ds.examples.iter().map(|e| e.label.index()).collect();
    let set = TrainSet {
        inputs: &inputs,
        labels: &labels,
    };
    let empty = TrainSet::<f32> { inputs: &[], labels: &[] };
    let mut m = Model::<f32>::init(Arch::trojannet(), 0);
    let cfg = TrainConfig {
        epochs: 200,
        ..TrainConfig::default()
    };
    let hist = train(&mut m, &set, &empty, &cfg, |_| {}).unwrap();
    let last = hist.last().unwrap();
    assert_eq!(last.train_acc, 1.0, "{last:?}");
    for w in hist[150..].windows(2) {
        assert!(w[1].train_loss <= w[0].train_loss + 1e-3, "{:?} -> {:?}", w[0], w[1]);
    }
    let correct = inputs
        .iter()
        .zip(&labels)
        .filter(|(x, &y)| qtrojan_core::cnn::predict(&m, x).unwrap() == y)
        .count();
    assert_eq!(correct, 20);
}

#[test]
fn init_is_seeded_and_bounded() {
    let a = Model::<f32>::init(Arch::trojannet(), 5);
    assert_eq!(a, Model::<f32>::init(Arch::trojannet(), 5));
    assert_ne!(a, Model::<f32>::init(Arch::trojannet(), 6));
    let limit = (6.0f32 / (18.0 + 288.0)).sqrt();
    assert!(a.conv_w.iter().all(|w| w.abs() <= limit));
    assert!(a.conv_b.iter().chain(&a.dense1_b).chain(&a.dense2_b).all(|&b| b == 0.0));
}

proptest! {
    #[test]
    fn softmax_rows_sum_to_one(logits in prop::collection::vec(-80.0f32..80.0, 2..10)) {
        let p = softmax(&logits);
        let s: f32 = p.iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-6);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn cross_entropy_is_neg_log_softmax(logits in prop::collection::vec(-20.0f64..20.0, 2..6), pick in 0usize..6) {
        let label = pick % logits.len();
        let p = softmax(&logits);
        prop_assert!((cross_entropy(&logits, label) + p[label].ln()).abs() < 1e-9);
    }
}
