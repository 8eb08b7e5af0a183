use ndarray::Array2;
use rand::Rng;

use swarm_symreg::datasets::{EdgeSample, NodeSample};
use swarm_symreg::rng::stream;
use swarm_symreg::surrogate::{
    adam_step, sample_surrogate, train_edge_model, train_node_model, AdamState, Gradients, Mlp, SampleConfig, TrainConfig,
};
use swarm_symreg::swarmsim::Behavior;

/// Largest relative gap between backprop and central differences over every parameter.
fn worst_gradient_error(net: &Mlp, x: &[f64], y: &[f64]) -> f64 {
    let (_, g) = net.backward(x, y).unwrap();
    let h = 1e-5;
    let loss = |n: &Mlp| n.backward(x, y).unwrap().0;
    let mut worst = 0.0f64;
    let mut check = |analytic: f64, plus: f64, minus: f64| {
        let numeric = (plus - minus) / (2.0 * h);
        let scale = analytic.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic - numeric).abs() / scale);
    };
    for l in 0..net.weights.len() {
        for idx in 0..net.weights[l].len() {
            let (r, c) = (idx / net.weights[l].ncols(), idx % net.weights[l].ncols());
            let (mut p, mut m) = (net.clone(), net.clone());
            p.weights[l][[r, c]] += h;
            m.weights[l][[r, c]] -= h;
            check(g.weights[l][[r, c]], loss(&p), loss(&m));
        }
        for i in 0..net.biases[l].len() {
            let (mut p, mut m) = (net.clone(), net.clone());
            p.biases[l][i] += h;
            m.biases[l][i] -= h;
            check(g.biases[l][i], loss(&p), loss(&m));
        }
    }
    worst
}

#[test]
fn gradients_match_central_differences() {
    for seed in 0..20 {
        let mut rng = stream(seed, &[]);
        let net = Mlp::new_random(&[5, 3, 2], &mut rng).unwrap();
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let err = worst_gradient_error(&net, &x, &y);
        assert!(err < 1e-4, "seed {seed}: relative error {err}");
    }
}

#[test]
fn batch_gradient_is_mean_of_sample_gradients() {
    let mut rng = stream(5, &[]);
    let net = Mlp::new_random(&[3, 4, 2], &mut rng).unwrap();
    let x = Array2::from_shape_fn((4, 3), |_| rng.random_range(-1.0..1.0));
    let y = Array2::from_shape_fn((4, 2), |_| rng.random_range(-1.0..1.0));
    let (_, batch) = net.loss_and_grad(x.view(), y.view());
    let mut acc = Gradients::zeros_like(&net);
    for i in 0..4 {
        let (_, g) = net.backward(x.row(i).as_slice().unwrap(), y.row(i).as_slice().unwrap()).unwrap();
        for l in 0..acc.weights.len() {
            acc.weights[l] = &acc.weights[l] + &(&g.weights[l] / 4.0);
            acc.biases[l] = &acc.biases[l] + &(&g.biases[l] / 4.0);
        }
    }
    for l in 0..acc.weights.len() {
        assert!((&acc.weights[l] - &batch.weights[l]).iter().all(|d| d.abs() < 1e-12));
    }
}

#[test]
fn adam_zero_gradient_leaves_parameters() {
    let net0 = Mlp::new_random(&[2, 3, 1], &mut stream(1, &[])).unwrap();
    let mut net = net0.clone();
    let mut st = AdamState::new(&net, 1e-3);
    let zero = Gradients::zeros_like(&net);
    adam_step(&mut net, &zero, &mut st);
    assert_eq!(net, net0);
    assert_eq!(st.t, 1);
}

fn linear_samples(n: usize) -> Vec<EdgeSample> {
    let mut rng = stream(11, &[]);
    (0..n)
        .map(|_| {
            let x: f64 = rng.random_range(-1.0..1.0);
            EdgeSample { features: vec![x], edge_attr: None, target: [3.0 * x + 1.0, 0.0] }
        })
        .collect()
}

#[test]
fn learns_a_linear_map() {
    let samples = linear_samples(2000);
    let cfg = TrainConfig { hidden: vec![16, 16], epochs: 100, batch_size: 32, rng_seed: 4, ..TrainConfig::default() };
    let rep = train_edge_model(Behavior::Hex, &samples, &["x".into()], vec![], &cfg).unwrap();
    let last = rep.trace.iter().find(|e| e.epoch == rep.best_epoch).unwrap();
    assert!(last.val_loss < 1e-3, "validation MSE {}", last.val_loss);
    assert!(last.train_loss <= rep.trace[0].train_loss);
    let p = rep.model.predict(&[0.5], None).unwrap();
    assert!((p[0] - 2.5).abs() < 0.1 && p[1].abs() < 0.1, "{p:?}");
}

#[test]
fn training_is_deterministic() {
    let samples = linear_samples(600);
    let cfg = TrainConfig { hidden: vec![8], epochs: 5, rng_seed: 9, ..TrainConfig::default() };
    let a = train_edge_model(Behavior::Hex, &samples, &["x".into()], vec![], &cfg).unwrap();
    let b = train_edge_model(Behavior::Hex, &samples, &["x".into()], vec![], &cfg).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.model, b.model);
    let c = train_edge_model(Behavior::Hex, &samples, &["x".into()], vec![], &TrainConfig { rng_seed: 10, ..cfg }).unwrap();
    assert_ne!(a.trace, c.trace);
}

#[test]
fn divergence_is_reported() {
    let mut samples = linear_samples(300);
    for s in &mut samples {
        s.target[0] *= 1e200;
    }
    let cfg = TrainConfig { hidden: vec![8], epochs: 3, learning_rate: 1e3, ..TrainConfig::default() };
    let err = train_edge_model(Behavior::Hex, &samples, &["x".into()], vec![], &cfg).unwrap_err();
    assert!(err.to_string().contains("diverged"), "{err}");
}

#[test]
fn node_training_fits_mean_of_messages() {
    // message = 2 * feature, node target = mean of messages
    let mut rng = stream(3, &[]);
    let samples: Vec<NodeSample> = (0..600)
        .map(|_| {
            let k = rng.random_range(1..5);
            let edges: Vec<Vec<f64>> = (0..k).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
            let mean = edges.iter().map(|e| 2.0 * e[0]).sum::<f64>() / k as f64;
            let mean_y = edges.iter().map(|e| -e[1]).sum::<f64>() / k as f64;
            NodeSample { edges, target: [mean, mean_y] }
        })
        .collect();
    let cfg = TrainConfig { hidden: vec![16], epochs: 80, batch_size: 32, rng_seed: 1, ..TrainConfig::default() };
    let rep = train_node_model(Behavior::Boids, &samples, &["a".into(), "b".into()], vec![], &cfg).unwrap();
    let p = rep.model.predict(&[0.5, 0.5], None).unwrap();
    assert!((p[0] - 1.0).abs() < 0.15 && (p[1] + 0.5).abs() < 0.15, "{p:?}");
}

#[test]
fn surrogate_sampling_shapes() {
    let samples: Vec<EdgeSample> = (0..200)
        .map(|k| {
            let r = 0.07 + 0.33 * k as f64 / 199.0;
            EdgeSample { features: vec![r, 0.0, r, 1.0 / r], edge_attr: Some(1 + (k % 2) as u8), target: [r, 0.0] }
        })
        .collect();
    let names: Vec<String> = ["dx", "dy", "norm_dx", "inv_norm_dx"].iter().map(|s| s.to_string()).collect();
    let mut cfg = TrainConfig { hidden: vec![4], epochs: 1, ..TrainConfig::default() };
    cfg.validation_fraction = 0.0;
    let mut samples = samples;
    samples[0].features[1] = 0.1; // dy must not be constant
    let rep = train_edge_model(Behavior::Square, &samples, &names, vec![], &cfg).unwrap();
    let d = sample_surrogate(&rep.model, &SampleConfig::for_behavior(Behavior::Square, 10_000), &mut stream(2, &[])).unwrap();
    assert_eq!(d.n_rows(), 10_000);
    assert_eq!(d.feature(1).iter().filter(|&&a| a == 1.0).count(), 5000);
    let again = sample_surrogate(&rep.model, &SampleConfig::for_behavior(Behavior::Square, 10_000), &mut stream(2, &[])).unwrap();
    assert_eq!(d, again);
    let hex = SampleConfig::for_behavior(Behavior::Hex, 4500);
    assert_eq!((hex.r_min, hex.r_max), (0.07, 0.4));
}
