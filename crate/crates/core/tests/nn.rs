use acav::nn::conv::ConvGeometry;
use acav::nn::train::GradientAccumulator;
use acav::nn::{
    load_checkpoint, save_checkpoint, train, Checkpoint, LayerSpec, Model, TrainConfig,
    TrainingMetadata,
};
use acav::selftest::{
    conv_oracle_case, gradient_check, naive_conv2d, neuron, neuron_consistency, toy_model,
};
use acav::{AcavError, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_input(shape: &[usize], seed: u64) -> Tensor<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-2.0f32..2.0)).collect()).unwrap()
}

fn small_classifier(seed: u64) -> Model<f32> {
    Model::classifier(1, 16, 16, seed).unwrap()
}

#[test]
fn probabilities_sum_to_one() {
    let m = small_classifier(3);
    for s in 0..20 {
        let p = m.forward(&random_input(&[1, 16, 16], s)).unwrap();
        let sum: f64 = p.data().iter().map(|&v| v as f64).sum();
        assert!((sum - 1.0).abs() < 1e-6, "{sum}");
    }
}

#[test]
fn zero_parameters_give_even_odds() {
    let mut m = small_classifier(1);
    for layer in m.layers_mut() {
        for p in &mut layer.params {
            p.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }
    let p = m.forward(&random_input(&[1, 16, 16], 9)).unwrap();
    assert_eq!(p.data(), &[0.5, 0.5]);
}

// One conv layer and one dense layer on an 8x8 input, checked neuron by
// neuron against the scalar evaluation.
#[test]
fn conv_dense_toy_matches_per_neuron_evaluation() {
    let conv = LayerSpec::Conv2d { in_channels: 1, out_channels: 2, kernel_height: 3, kernel_width: 3, padding: 1 };
    let specs = vec![conv, LayerSpec::Relu, LayerSpec::Flatten, LayerSpec::dense(128, 2), LayerSpec::Softmax];
    for seed in 0..5 {
        let m: Model<f64> = Model::new(vec![1, 8, 8], specs.clone(), seed).unwrap();
        let x = random_input(&[1, 8, 8], seed + 100).cast::<f64>();
        let err = neuron_consistency(&m, &x).unwrap();
        assert!(err < 1e-12, "seed {seed}: {err}");
    }
}

#[test]
fn neuron_helper_is_affine_then_activation() {
    let z = neuron(&[1.0, -2.0], &[3.0, 1.0], 0.5, |z| z);
    assert_eq!(z, 1.5);
    assert_eq!(neuron(&[1.0], &[-3.0], 0.0, |z: f64| z.max(0.0)), 0.0);
}

#[test]
fn penultimate_probe_is_64_wide_and_final_probe_is_output() {
    let m = Model::classifier(3, 64, 64, 2).unwrap();
    let x = random_input(&[3, 64, 64], 4);
    let (_, v) = m.forward_probed(&x, m.penultimate_index()).unwrap();
    assert_eq!(v.len(), 64);
    let last = m.layers().len() - 1;
    let (out, v) = m.forward_probed(&x, last).unwrap();
    assert_eq!(v.values, out.as_f64_vec());
    let (_, again) = m.forward_probed(&x, last).unwrap();
    assert_eq!(v, again);
}

#[test]
fn gradients_match_finite_differences_on_toy_models() {
    let mut checked = 0;
    for seed in 0..25 {
        let (m, x, t) = toy_model(seed).unwrap();
        assert!(m.parameter_count() <= 500);
        let g = gradient_check(&m, &x, t, 1e-4, 1e-3).unwrap();
        assert_eq!(g.failures, 0, "seed {seed}: max rel err {}", g.max_relative_error);
        checked += g.checked;
    }
    assert!(checked > 1000);
}

#[test]
fn classifier_gradients_match_finite_differences() {
    let m: Model<f64> = Model::<f32>::classifier(1, 16, 16, 5).unwrap().cast();
    let x = random_input(&[1, 16, 16], 6).cast::<f64>();
    let g = gradient_check(&m, &x, 1, 1e-4, 1e-3).unwrap();
    assert_eq!(g.failures, 0, "max rel err {}", g.max_relative_error);
}

#[test]
fn no_learning_signal_means_zero_output_bias_gradient() {
    let m: Model<f64> = Model::<f32>::classifier(1, 16, 16, 8).unwrap().cast();
    let x = random_input(&[1, 16, 16], 2).cast::<f64>();
    let p = m.forward(&x).unwrap().as_f64_vec();
    let (_, grads) = m.backward_soft(&x, &p).unwrap();
    let out_dense = m.layers().len() - 2;
    assert!(matches!(m.layers()[out_dense].spec, LayerSpec::Dense { .. }));
    for &b in grads[out_dense][1].data() {
        assert!(b.abs() < 1e-15, "{b}");
    }
}

#[test]
fn duplicated_batch_gradient_equals_single_sample() {
    let m: Model<f64> = Model::<f32>::classifier(1, 16, 16, 4).unwrap().cast();
    let x = random_input(&[1, 16, 16], 3).cast::<f64>();
    let (_, single) = m.backward(&x, 0).unwrap();
    let mut acc = GradientAccumulator::zeros_like(&m);
    acc.add(&single);
    acc.add(&single);
    let batch = acc.mean(&m, 2);
    for (a, b) in single.iter().flatten().zip(batch.iter().flatten()) {
        for (u, v) in a.data().iter().zip(b.data()) {
            assert!((u - v).abs() <= 1e-15 * u.abs().max(1.0));
        }
    }
}

fn blobs(n: usize, seed: u64) -> (Vec<Tensor<f32>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..n {
        let label = i % 2;
        let c = if label == 0 { -1.5 } else { 1.5 };
        let p = vec![c + rng.gen_range(-1.0f32..1.0), c + rng.gen_range(-1.0f32..1.0)];
        xs.push(Tensor::new(vec![2], p).unwrap());
        ys.push(label);
    }
    (xs, ys)
}

fn mlp(seed: u64) -> Model<f32> {
    let specs = vec![
        LayerSpec::dense(2, 8),
        LayerSpec::Relu,
        LayerSpec::dense(8, 2),
        LayerSpec::Softmax,
    ];
    Model::new(vec![2], specs, seed).unwrap()
}

#[test]
fn separable_blobs_are_learned() {
    let (xs, ys) = blobs(200, 1);
    let cfg = TrainConfig { learning_rate: 0.1, epochs: 20, batch_size: 10, master_seed: 7 };
    let out = train(mlp(1), &xs, &ys, &cfg).unwrap();
    let correct = xs
        .iter()
        .zip(&ys)
        .filter(|(x, &y)| {
            let p = out.model.forward(x).unwrap();
            (p.data()[1] > p.data()[0]) as usize == y
        })
        .count();
    assert!(correct as f64 / xs.len() as f64 >= 0.95, "{correct}/200");
    assert_eq!(out.history.len(), 20);
}

#[test]
fn zero_epochs_returns_model_unchanged() {
    let (xs, ys) = blobs(20, 2);
    let cfg = TrainConfig { learning_rate: 0.1, epochs: 0, batch_size: 4, master_seed: 1 };
    let m = mlp(3);
    let out = train(m.clone(), &xs, &ys, &cfg).unwrap();
    assert_eq!(out.model, m);
    assert!(out.history.is_empty());
}

#[test]
fn training_is_bit_reproducible() {
    let (xs, ys) = blobs(64, 5);
    let cfg = TrainConfig { learning_rate: 0.05, epochs: 5, batch_size: 8, master_seed: 11 };
    let a = train(mlp(4), &xs, &ys, &cfg).unwrap();
    let b = train(mlp(4), &xs, &ys, &cfg).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.history, b.history);
}

#[test]
fn invalid_train_configs_are_rejected() {
    let (xs, ys) = blobs(10, 5);
    for cfg in [
        TrainConfig { learning_rate: 0.0, epochs: 1, batch_size: 2, master_seed: 0 },
        TrainConfig { learning_rate: 0.1, epochs: 1, batch_size: 11, master_seed: 0 },
    ] {
        assert!(matches!(train(mlp(0), &xs, &ys, &cfg), Err(AcavError::TrainConfig(_))));
    }
}

#[test]
fn checkpoint_file_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.acav");
    let m = Model::classifier(3, 64, 64, 12).unwrap();
    let meta = TrainingMetadata { seed: 12, epochs: 3, final_loss: Some(0.25), config_hash: Some([7; 32]) };
    let ck = Checkpoint::new(m.clone(), meta).unwrap();
    assert_eq!(ck.penultimate_width, 64);
    save_checkpoint(&ck, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back, ck);
    for s in 0..10 {
        let x = random_input(&[3, 64, 64], s);
        let a = m.forward(&x).unwrap();
        let b = back.model.forward(&x).unwrap();
        assert!(a.data().iter().zip(b.data()).all(|(u, v)| u.to_bits() == v.to_bits()));
    }
}

#[test]
fn checkpoint_with_wrong_magic_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.acav");
    let ck = Checkpoint::new(small_classifier(0), TrainingMetadata::default()).unwrap();
    let mut bytes = ck.to_bytes();
    bytes[..4].copy_from_slice(b"NOPE");
    std::fs::write(&path, bytes).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(AcavError::Format(_))));
}

#[test]
fn conv_oracle_is_bit_exact_on_100_cases() {
    let bad: Vec<u64> = (0..100).filter(|&s| !conv_oracle_case(s)).collect();
    assert!(bad.is_empty(), "mismatching seeds {bad:?}");
}

#[test]
fn naive_conv_identity_kernel() {
    let g = ConvGeometry { in_channels: 1, out_channels: 1, in_height: 3, in_width: 3, kernel_height: 3, kernel_width: 3, padding: 1 };
    let input: Vec<f64> = (0..9).map(|v| v as f64).collect();
    let mut w = vec![0.0; 9];
    w[4] = 1.0;
    assert_eq!(naive_conv2d(&g, &input, &w, &[0.0]), input);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv_oracle_holds_for_any_seed(seed in any::<u64>()) {
        prop_assert!(conv_oracle_case(seed));
    }

    #[test]
    fn softmax_output_is_a_distribution(seed in 0u64..1000) {
        let m = mlp(seed);
        let p = m.forward(&random_input(&[2], seed ^ 0xabc)).unwrap();
        prop_assert!(p.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        let sum: f64 = p.data().iter().map(|&v| v as f64).sum();
        prop_assert!((sum - 1.0).abs() < 1e-6);
    }
}
