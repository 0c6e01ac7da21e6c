use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, AdamState};
use super::network::{Mode, Network};
use super::{HyperParams, NeuralError, Topology, TrainConfig};
use crate::preprocess::WindowedDataset;

/// Per-epoch training record.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    /// Mean over batches of RMSE plus the L2 penalty.
    pub loss: Vec<f64>,
    pub seconds: Vec<f64>,
    /// Mean over batches of the gradient's Euclidean norm.
    pub grad_norm: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub network: Network,
    pub config: TrainConfig,
    pub hyper_params: Option<HyperParams>,
    pub seed: u64,
}

impl TrainedModel {
    pub fn predict(&self, last_window: ArrayView2<f64>) -> Result<Array2<f64>, NeuralError> {
        predict(&self.network, last_window)
    }
}

/// Trains with validated hyper-parameters.
pub fn train(ds: &WindowedDataset, hp: &HyperParams, seed: u64) -> Result<(TrainedModel, TrainHistory), NeuralError> {
    hp.validate()?;
    let topology = hp.topology(ds.n_series(), ds.input_len, ds.horizon);
    let (mut model, history) = train_with(ds, topology, hp.train_config(), seed)?;
    model.hyper_params = Some(hp.clone());
    Ok((model, history))
}

/// Splits a shuffled order into batches; with batch norm a trailing batch of
/// one sample is folded into the previous batch.
fn batches(order: &[usize], size: usize, batchnorm: bool) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size.max(1)).collect();
    if batchnorm && out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        out.pop();
        let start = order.len() - 1 - out.last().expect("nonempty").len();
        *out.last_mut().expect("nonempty") = &order[start..];
    }
    out
}

/// Trains any topology; `cfg` is not range-checked, so it also serves
/// experiments outside the tuning space. Deterministic given `seed`.
pub fn train_with(
    ds: &WindowedDataset,
    topology: Topology,
    cfg: TrainConfig,
    seed: u64,
) -> Result<(TrainedModel, TrainHistory), NeuralError> {
    let n = ds.n_samples();
    if n == 0 {
        return Err(NeuralError::EmptyDataset);
    }
    if topology.n_series != ds.n_series() || topology.input_len != ds.input_len || topology.horizon != ds.horizon {
        return Err(NeuralError::Shape {
            expected: format!("N={}, L={}, H={}", topology.n_series, topology.input_len, topology.horizon),
            found: format!("N={}, L={}, H={}", ds.n_series(), ds.input_len, ds.horizon),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bn = topology.use_batchnorm;
    let mut net = Network::new(topology, &mut rng)?;
    let mut adam = AdamState::new(net.n_params());
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let (mut loss_sum, mut norm_sum, mut count) = (0.0, 0.0, 0usize);
        for (bi, idx) in batches(&order, cfg.batch_size, bn).into_iter().enumerate() {
            let x = ds.inputs.select(Axis(0), idx);
            let y = ds.targets.select(Axis(0), idx);
            let masks = net.draw_masks(idx.len(), &mut rng);
            let cache = net.forward(x.view(), Mode::Train(&masks))?;
            let (loss, grad) = net.backward(&cache, y.view(), cfg.weight_decay)?;
            if !loss.is_finite() {
                return Err(NeuralError::NonFiniteLoss { epoch: epoch + 1, batch: bi + 1 });
            }
            net.update_running_stats(&cache);
            adam_step(&mut net.params, &grad, &mut adam, cfg.learning_rate, Some(&net.layout))?;
            loss_sum += loss;
            norm_sum += grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            count += 1;
        }
        history.loss.push(loss_sum / count as f64);
        history.grad_norm.push(norm_sum / count as f64);
        history.seconds.push(started.elapsed().as_secs_f64());
    }
    Ok((TrainedModel { network: net, config: cfg, hyper_params: None, seed }, history))
}

/// Forecast from one input window `L x N`; returns `H x N` in the
/// transformed scale.
pub fn predict(net: &Network, last_window: ArrayView2<f64>) -> Result<Array2<f64>, NeuralError> {
    let t = &net.topology;
    if last_window.shape() != [t.input_len, t.n_series] {
        return Err(NeuralError::Shape {
            expected: format!("[{}, {}]", t.input_len, t.n_series),
            found: format!("{:?}", last_window.shape()),
        });
    }
    let x = last_window.insert_axis(Axis(0));
    let out = net.predict_batch(x)?;
    Ok(out.row(0).to_owned().into_shape_with_order((t.horizon, t.n_series)).expect("head width is N * H"))
}
