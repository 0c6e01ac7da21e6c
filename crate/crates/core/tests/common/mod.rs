//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use ndarray::{s, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sharpecast::hpo::{Config, DimKind, Dimension, SearchSpace, Value};
use sharpecast::neural::{train_with, Activation, CellKind, Mode, Network, Topology, TrainConfig};
use sharpecast::preprocess::WindowedDataset;

const EPS: f64 = 1e-5;
pub const TOL: f64 = 1e-4;
/// Denominator floor so that parameters with (near-)zero gradient are judged
/// on absolute error.
const FLOOR: f64 = 1e-6;

pub fn topology(cell: CellKind, layers: usize, bn: bool, bn_first: bool, dropout: f64, act: Activation) -> Topology {
    Topology {
        n_series: 3,
        input_len: 5,
        horizon: 2,
        cell,
        n_layers: layers,
        units: 4,
        activation: act,
        use_batchnorm: bn,
        bn_before_dropout: bn_first,
        dropout_input: dropout,
        dropout_hidden: dropout,
    }
}

/// Max relative error over all parameters.
pub fn max_rel_error(t: Topology, seed: u64, psi: f64) -> (f64, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::new(t.clone(), &mut rng).unwrap();
    // Move off the initial point so biases and batch-norm scales carry gradient structure.
    for p in net.params.iter_mut() {
        *p += rng.random_range(-0.3..0.3);
    }
    let b = 3;
    let x = Array3::from_shape_simple_fn((b, t.input_len, t.n_series), || rng.random_range(-1.0..1.0));
    let y = Array2::from_shape_simple_fn((b, t.n_outputs()), || rng.random_range(-1.0..1.0));
    let masks = net.draw_masks(b, &mut rng);
    let cache = net.forward(x.view(), Mode::Train(&masks)).unwrap();
    let (_, grad) = net.backward(&cache, y.view(), psi).unwrap();
    let mut worst = (0.0, String::new());
    for i in 0..net.n_params() {
        let orig = net.params[i];
        net.params[i] = orig + EPS;
        let lp = net.loss(&net.forward(x.view(), Mode::Train(&masks)).unwrap(), y.view(), psi);
        net.params[i] = orig - EPS;
        let lm = net.loss(&net.forward(x.view(), Mode::Train(&masks)).unwrap(), y.view(), psi);
        net.params[i] = orig;
        let numeric = (lp - lm) / (2.0 * EPS);
        let rel = (grad[i] - numeric).abs() / grad[i].abs().max(numeric.abs()).max(FLOOR);
        if rel > worst.0 {
            let block = net.layout.blocks.iter().find(|bl| bl.range().contains(&i)).unwrap();
            worst = (rel, format!("{} [{}]: analytic {} numeric {}", block.name, i - block.offset, grad[i], numeric));
        }
    }
    worst
}

pub fn check(cell: CellKind, layers: usize, bn: bool, bn_first: bool, dropout: f64, act: Activation) {
    let (err, at) = max_rel_error(topology(cell, layers, bn, bn_first, dropout, act), 100 + layers as u64, 0.01);
    assert!(err < TOL, "{cell} depth {layers} bn={bn} dropout={dropout}: {err:e} at {at}");
}

pub fn memorization_rmse() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (n_series, input_len, horizon) = (3, 8, 6);
    let ds = WindowedDataset {
        inputs: Array3::from_shape_simple_fn((4, input_len, n_series), || rng.random_range(-1.0..1.0)),
        targets: Array2::from_shape_simple_fn((4, horizon * n_series), || rng.random_range(-1.0..1.0)),
        input_len,
        horizon,
    };
    let topology = Topology {
        n_series,
        input_len,
        horizon,
        cell: CellKind::Lstm,
        n_layers: 1,
        units: 32,
        activation: Activation::Tanh,
        use_batchnorm: false,
        bn_before_dropout: false,
        dropout_input: 0.0,
        dropout_hidden: 0.0,
    };
    // One full batch per epoch: 2000 epochs are 2000 Adam steps.
    let cfg = TrainConfig { learning_rate: 0.01, batch_size: 4, epochs: 2000, weight_decay: 0.0 };
    let (model, history) = train_with(&ds, topology, cfg, 7).unwrap();
    assert_eq!(history.loss.len(), 2000);
    let mut sse = 0.0;
    for i in 0..4 {
        let f = model.predict(ds.inputs.slice(s![i, .., ..])).unwrap();
        let target = ds.targets.row(i).to_owned().into_shape_with_order((horizon, n_series)).unwrap();
        sse += (&f - &target).mapv(|e| e * e).sum();
    }
    (sse / (4 * horizon * n_series) as f64).sqrt()
}

pub fn line() -> SearchSpace {
    SearchSpace { dims: vec![Dimension { name: "x".into(), kind: DimKind::Uniform { lo: 0.0, hi: 1.0 }, condition: None }] }
}

pub fn x_of(c: &Config) -> f64 {
    match c[0] {
        Some(Value::Real(x)) => x,
        _ => panic!("real dimension"),
    }
}

pub fn quadratic(c: &Config, _: u64) -> Result<f64, String> {
    Ok((x_of(c) - 0.3).powi(2))
}
