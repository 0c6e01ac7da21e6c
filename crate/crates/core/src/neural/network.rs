//! Stacked recurrent network with analytic gradients.
//!
//! Sequences are stored time-major as `(L * B) x width` matrices, row
//! `t * B + b`. Intermediate layers hand their whole output sequence to the
//! next layer through batch norm and dropout; the last layer passes only its
//! final hidden state to the dense head.

use ndarray::{linalg::general_mat_mul, s, Array1, Array2, ArrayView2, ArrayView3, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cell::{gru_step, lstm_step};
use super::params::{LayerBlocks, Layout};
use super::{Activation, CellKind, NeuralError, Topology};

pub const BN_EPS: f64 = 1e-3;
/// Weight of the old running statistic in each update.
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub topology: Topology,
    pub layout: Layout,
    pub params: Vec<f64>,
    /// One entry per layer when batch norm is enabled.
    pub bn_running: Vec<BnStats>,
    layers: Vec<LayerBlocks>,
    head: [usize; 4],
}

/// Dropout masks for one batch, already scaled by `1 / (1 - rate)`.
#[derive(Debug, Clone)]
pub struct Masks {
    pub input: Option<Array2<f64>>,
    pub hidden: Vec<Option<Array2<f64>>>,
}

#[derive(Debug, Clone, Copy)]
pub enum Mode<'a> {
    Train(&'a Masks),
    Infer,
}

#[derive(Debug, Clone)]
enum PostOp {
    Bn { xhat: Array2<f64>, inv_std: Array1<f64>, mean: Array1<f64>, var: Array1<f64> },
    Dropout { mask: Array2<f64> },
}

#[derive(Debug, Clone)]
struct LayerCache {
    input: Array2<f64>,
    gates: Array2<f64>,
    c: Option<Array2<f64>>,
    rh: Option<Array2<f64>>,
    h: Array2<f64>,
    post: Vec<PostOp>,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    batch: usize,
    layers: Vec<LayerCache>,
    head_in: Array2<f64>,
    dense_pre: Array2<f64>,
    dense_act: Array2<f64>,
    /// `B x (N * H)`, horizon-major.
    pub output: Array2<f64>,
}

/// RMSE plus `psi * sum(w^2)`.
pub fn loss(outputs: ArrayView2<f64>, targets: ArrayView2<f64>, weights: &[f64], psi: f64) -> f64 {
    rmse(outputs, targets) + psi * weights.iter().map(|w| w * w).sum::<f64>()
}

fn rmse(outputs: ArrayView2<f64>, targets: ArrayView2<f64>) -> f64 {
    let n = outputs.len() as f64;
    let sse: f64 = Zip::from(&outputs).and(&targets).fold(0.0, |acc, o, t| acc + (o - t) * (o - t));
    (sse / n).sqrt()
}

fn mask(rate: f64, shape: (usize, usize), rng: &mut impl Rng) -> Option<Array2<f64>> {
    (rate > 0.0).then(|| {
        let keep = 1.0 / (1.0 - rate);
        Array2::from_shape_simple_fn(shape, || if rng.random::<f64>() < rate { 0.0 } else { keep })
    })
}

fn rows(full: &Array2<f64>, t: usize, batch: usize) -> ArrayView2<'_, f64> {
    full.slice(s![t * batch..(t + 1) * batch, ..])
}

impl Network {
    /// Kernels uniform in `+-1/sqrt(fan_in)`, biases and shifts zero, scales one.
    pub fn new(topology: Topology, rng: &mut impl Rng) -> Result<Self, NeuralError> {
        topology.validate()?;
        let (layout, layers, head) = Layout::for_topology(&topology);
        let mut params = vec![0.0; layout.len];
        for b in &layout.blocks {
            if b.decay {
                let bound = 1.0 / (b.rows as f64).sqrt();
                for w in &mut params[b.range()] {
                    *w = rng.random_range(-bound..bound);
                }
            } else if b.name.ends_with("bn_gamma") {
                params[b.range()].fill(1.0);
            }
        }
        let bn_running = if topology.use_batchnorm {
            vec![BnStats { mean: vec![0.0; topology.units], var: vec![1.0; topology.units] }; topology.n_layers]
        } else {
            vec![]
        };
        Ok(Network { topology, layout, params, bn_running, layers, head })
    }

    pub fn from_parts(topology: Topology, params: Vec<f64>, bn_running: Vec<BnStats>) -> Result<Self, NeuralError> {
        topology.validate()?;
        let (layout, layers, head) = Layout::for_topology(&topology);
        if params.len() != layout.len {
            return Err(NeuralError::Shape { expected: format!("{} parameters", layout.len), found: params.len().to_string() });
        }
        let expected_bn = if topology.use_batchnorm { topology.n_layers } else { 0 };
        if bn_running.len() != expected_bn
            || bn_running.iter().any(|s| s.mean.len() != topology.units || s.var.len() != topology.units)
        {
            return Err(NeuralError::Shape {
                expected: format!("{expected_bn} batch-norm stat sets of width {}", topology.units),
                found: format!("{} sets", bn_running.len()),
            });
        }
        Ok(Network { topology, layout, params, bn_running, layers, head })
    }

    pub fn n_params(&self) -> usize {
        self.layout.len
    }

    /// L2 penalty base `sum(w^2)` over kernels.
    pub fn penalty(&self) -> f64 {
        self.layout.penalty(&self.params)
    }

    pub fn draw_masks(&self, batch: usize, rng: &mut impl Rng) -> Masks {
        let t = &self.topology;
        let seq = t.input_len * batch;
        let input = mask(t.dropout_input, (seq, t.n_series), rng);
        let hidden = (0..t.n_layers)
            .map(|l| {
                let r = if l + 1 == t.n_layers { batch } else { seq };
                mask(t.dropout_hidden, (r, t.units), rng)
            })
            .collect();
        Masks { input, hidden }
    }

    fn check_input(&self, x: &ArrayView3<f64>) -> Result<usize, NeuralError> {
        let t = &self.topology;
        let sh = x.shape();
        if sh[0] == 0 || sh[1] != t.input_len || sh[2] != t.n_series {
            return Err(NeuralError::Shape {
                expected: format!("(B >= 1, {}, {})", t.input_len, t.n_series),
                found: format!("{sh:?}"),
            });
        }
        Ok(sh[0])
    }

    pub fn forward(&self, x: ArrayView3<f64>, mode: Mode<'_>) -> Result<Cache, NeuralError> {
        let batch = self.check_input(&x)?;
        let t = &self.topology;
        if matches!(mode, Mode::Train(_)) && t.use_batchnorm && batch < 2 {
            return Err(NeuralError::DegenerateBatch);
        }
        let l_in = t.input_len;
        let mut seq = Array2::zeros((l_in * batch, t.n_series));
        for b in 0..batch {
            for step in 0..l_in {
                seq.row_mut(step * batch + b).assign(&x.slice(s![b, step, ..]));
            }
        }
        if let Mode::Train(Masks { input: Some(m), .. }) = mode {
            seq *= m;
        }
        let mut caches = Vec::with_capacity(t.n_layers);
        let mut input = seq;
        let mut head_in = None;
        for l in 0..t.n_layers {
            let (gates, c, rh, h) = self.recur(l, &input, batch);
            let last = l + 1 == t.n_layers;
            let out = if last { h.slice(s![(l_in - 1) * batch.., ..]).to_owned() } else { h.clone() };
            let (out, post) = self.post(l, out, mode);
            caches.push(LayerCache { input, gates, c, rh, h, post });
            if last {
                head_in = Some(out);
                input = Array2::zeros((0, 0));
            } else {
                input = out;
            }
        }
        let head_in = head_in.expect("at least one layer");
        let [dw, db, ow, ob] = self.head;
        let mut dense_pre = head_in.dot(&self.layout.view(&self.params, dw));
        dense_pre += &self.layout.view(&self.params, db);
        let dense_act = match t.activation {
            Activation::Tanh => dense_pre.mapv(f64::tanh),
            Activation::Relu => dense_pre.mapv(|v| v.max(0.0)),
        };
        let mut output = dense_act.dot(&self.layout.view(&self.params, ow));
        output += &self.layout.view(&self.params, ob);
        Ok(Cache { batch, layers: caches, head_in, dense_pre, dense_act, output })
    }

    /// Runs layer `l` over the whole sequence.
    #[allow(clippy::type_complexity)]
    fn recur(
        &self,
        l: usize,
        input: &Array2<f64>,
        batch: usize,
    ) -> (Array2<f64>, Option<Array2<f64>>, Option<Array2<f64>>, Array2<f64>) {
        let t = &self.topology;
        let (u, l_in) = (t.units, t.input_len);
        let lb = &self.layers[l];
        let w_h = self.layout.view(&self.params, lb.w_h);
        let mut xw = input.dot(&self.layout.view(&self.params, lb.w_x));
        xw += &self.layout.view(&self.params, lb.b);
        let mut h_all = Array2::zeros((l_in * batch, u));
        let zeros = Array2::zeros((batch, u));
        match t.cell {
            CellKind::Lstm => {
                let mut c_all = Array2::zeros((l_in * batch, u));
                for step in 0..l_in {
                    let (hp, cp) = if step == 0 {
                        (zeros.view(), zeros.view())
                    } else {
                        (rows(&h_all, step - 1, batch), rows(&c_all, step - 1, batch))
                    };
                    let st = lstm_step(rows(&xw, step, batch).to_owned(), hp, cp, w_h);
                    xw.slice_mut(s![step * batch..(step + 1) * batch, ..]).assign(&st.gates);
                    c_all.slice_mut(s![step * batch..(step + 1) * batch, ..]).assign(&st.c);
                    h_all.slice_mut(s![step * batch..(step + 1) * batch, ..]).assign(&st.h);
                }
                (xw, Some(c_all), None, h_all)
            }
            CellKind::Gru => {
                let mut rh_all = Array2::zeros((l_in * batch, u));
                for step in 0..l_in {
                    let hp = if step == 0 { zeros.view() } else { rows(&h_all, step - 1, batch) };
                    let st = gru_step(rows(&xw, step, batch).to_owned(), hp, w_h);
                    xw.slice_mut(s![step * batch..(step + 1) * batch, ..]).assign(&st.gates);
                    rh_all.slice_mut(s![step * batch..(step + 1) * batch, ..]).assign(&st.rh);
                    h_all.slice_mut(s![step * batch..(step + 1) * batch, ..]).assign(&st.h);
                }
                (xw, None, Some(rh_all), h_all)
            }
        }
    }

    /// Batch norm and dropout after layer `l`, in the configured order.
    fn post(&self, l: usize, mut x: Array2<f64>, mode: Mode<'_>) -> (Array2<f64>, Vec<PostOp>) {
        let t = &self.topology;
        let mut ops = vec![];
        let order: &[bool] = match (t.use_batchnorm, t.bn_before_dropout) {
            (false, _) => &[false],
            (true, true) => &[true, false],
            (true, false) => &[false, true],
        };
        for &is_bn in order {
            if is_bn {
                let (gamma_b, beta_b) = self.layers[l].bn.expect("batch-norm blocks");
                let gamma = self.layout.view(&self.params, gamma_b);
                let beta = self.layout.view(&self.params, beta_b);
                match mode {
                    Mode::Train(_) => {
                        let m = x.nrows() as f64;
                        let mean = x.sum_axis(Axis(0)) / m;
                        let centered = &x - &mean;
                        let var = centered.mapv(|v| v * v).sum_axis(Axis(0)) / m;
                        let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
                        let xhat = centered * &inv_std;
                        x = &xhat * &gamma + beta;
                        ops.push(PostOp::Bn { xhat, inv_std, mean, var });
                    }
                    Mode::Infer => {
                        let st = &self.bn_running[l];
                        let mean = Array1::from(st.mean.clone());
                        let inv_std = Array1::from_iter(st.var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()));
                        x = (&x - &mean) * &inv_std * gamma + beta;
                    }
                }
            } else if let Mode::Train(masks) = mode {
                if let Some(m) = &masks.hidden[l] {
                    x *= m;
                    ops.push(PostOp::Dropout { mask: m.clone() });
                }
            }
        }
        (x, ops)
    }

    /// Folds the batch statistics of a training forward pass into the running averages.
    pub fn update_running_stats(&mut self, cache: &Cache) {
        for (l, lc) in cache.layers.iter().enumerate() {
            for op in &lc.post {
                if let PostOp::Bn { mean, var, .. } = op {
                    let st = &mut self.bn_running[l];
                    for j in 0..mean.len() {
                        st.mean[j] = BN_MOMENTUM * st.mean[j] + (1.0 - BN_MOMENTUM) * mean[j];
                        st.var[j] = BN_MOMENTUM * st.var[j] + (1.0 - BN_MOMENTUM) * var[j];
                    }
                }
            }
        }
    }

    /// Loss of a cached forward pass against `targets`.
    pub fn loss(&self, cache: &Cache, targets: ArrayView2<f64>, weight_decay: f64) -> f64 {
        rmse(cache.output.view(), targets) + weight_decay * self.penalty()
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn backward(
        &self,
        cache: &Cache,
        targets: ArrayView2<f64>,
        weight_decay: f64,
    ) -> Result<(f64, Vec<f64>), NeuralError> {
        if targets.shape() != cache.output.shape() {
            return Err(NeuralError::Shape {
                expected: format!("{:?}", cache.output.shape()),
                found: format!("{:?}", targets.shape()),
            });
        }
        let t = &self.topology;
        let batch = cache.batch;
        let mut grad = vec![0.0; self.layout.len];
        let err = rmse(cache.output.view(), targets);
        let loss = err + weight_decay * self.penalty();
        // At zero error the RMSE kink has subgradient 0.
        let d_out = if err > 0.0 {
            (&cache.output - &targets) / (cache.output.len() as f64 * err)
        } else {
            Array2::zeros(cache.output.raw_dim())
        };
        let [dw, db, ow, ob] = self.head;
        self.put(&mut grad, ow, cache.dense_act.t().dot(&d_out));
        self.put(&mut grad, ob, d_out.sum_axis(Axis(0)).insert_axis(Axis(0)));
        let d_act = d_out.dot(&self.layout.view(&self.params, ow).t());
        let d_pre = match t.activation {
            Activation::Tanh => d_act * cache.dense_act.mapv(|a| 1.0 - a * a),
            Activation::Relu => d_act * cache.dense_pre.mapv(|p| if p > 0.0 { 1.0 } else { 0.0 }),
        };
        self.put(&mut grad, dw, cache.head_in.t().dot(&d_pre));
        self.put(&mut grad, db, d_pre.sum_axis(Axis(0)).insert_axis(Axis(0)));
        let d_final = d_pre.dot(&self.layout.view(&self.params, dw).t());

        let last = t.n_layers - 1;
        let d_final = self.post_backward(last, d_final, &cache.layers[last].post, &mut grad);
        let mut d_h = Array2::zeros((t.input_len * batch, t.units));
        d_h.slice_mut(s![(t.input_len - 1) * batch.., ..]).assign(&d_final);
        for l in (0..t.n_layers).rev() {
            let d_in = self.recur_backward(l, &cache.layers[l], d_h, batch, &mut grad, l > 0);
            if l > 0 {
                d_h = self.post_backward(l - 1, d_in.expect("requested"), &cache.layers[l - 1].post, &mut grad);
            } else {
                break;
            }
        }
        if weight_decay != 0.0 {
            for b in self.layout.blocks.iter().filter(|b| b.decay) {
                for i in b.range() {
                    grad[i] += 2.0 * weight_decay * self.params[i];
                }
            }
        }
        Ok((loss, grad))
    }

    fn put(&self, grad: &mut [f64], block: usize, g: Array2<f64>) {
        let mut v = self.layout.view_mut(grad, block);
        v += &g;
    }

    fn post_backward(&self, l: usize, mut d: Array2<f64>, ops: &[PostOp], grad: &mut [f64]) -> Array2<f64> {
        for op in ops.iter().rev() {
            match op {
                PostOp::Dropout { mask } => d *= mask,
                PostOp::Bn { xhat, inv_std, .. } => {
                    let (gamma_b, beta_b) = self.layers[l].bn.expect("batch-norm blocks");
                    let gamma = self.layout.view(&self.params, gamma_b).row(0).to_owned();
                    self.put(grad, gamma_b, (&d * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)));
                    self.put(grad, beta_b, d.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    let m = d.nrows() as f64;
                    let dxhat = &d * &gamma;
                    let s1 = dxhat.sum_axis(Axis(0));
                    let s2 = (&dxhat * xhat).sum_axis(Axis(0));
                    d = (dxhat * m - &s1 - xhat * &s2) * &(inv_std / m);
                }
            }
        }
        d
    }

    /// BPTT through layer `l`; returns the gradient with respect to its input sequence if asked.
    fn recur_backward(
        &self,
        l: usize,
        lc: &LayerCache,
        d_h: Array2<f64>,
        batch: usize,
        grad: &mut [f64],
        want_input: bool,
    ) -> Option<Array2<f64>> {
        let t = &self.topology;
        let (u, l_in) = (t.units, t.input_len);
        let lb = &self.layers[l];
        let w_h = self.layout.view(&self.params, lb.w_h);
        let g = t.cell.n_gates();
        let mut dxw = Array2::<f64>::zeros((l_in * batch, g * u));
        let mut dw_h = Array2::<f64>::zeros((u, g * u));
        let mut dh_next = Array2::<f64>::zeros((batch, u));
        let zeros = Array2::<f64>::zeros((batch, u));
        match t.cell {
            CellKind::Lstm => {
                let c_all = lc.c.as_ref().expect("lstm cache");
                let mut dc_next = Array2::<f64>::zeros((batch, u));
                for step in (0..l_in).rev() {
                    let gates = rows(&lc.gates, step, batch);
                    let c = rows(c_all, step, batch);
                    let (hp, cp) =
                        if step == 0 { (zeros.view(), zeros.view()) } else { (rows(&lc.h, step - 1, batch), rows(c_all, step - 1, batch)) };
                    let dh = &rows(&d_h, step, batch) + &dh_next;
                    {
                        let mut da = dxw.slice_mut(s![step * batch..(step + 1) * batch, ..]);
                        for b in 0..batch {
                            for j in 0..u {
                                let (i, f, o, gg) = (gates[[b, j]], gates[[b, u + j]], gates[[b, 2 * u + j]], gates[[b, 3 * u + j]]);
                                let tc = c[[b, j]].tanh();
                                let dhv = dh[[b, j]];
                                let dc = dc_next[[b, j]] + dhv * o * (1.0 - tc * tc);
                                da[[b, j]] = dc * gg * i * (1.0 - i);
                                da[[b, u + j]] = dc * cp[[b, j]] * f * (1.0 - f);
                                da[[b, 2 * u + j]] = dhv * tc * o * (1.0 - o);
                                da[[b, 3 * u + j]] = dc * i * (1.0 - gg * gg);
                                dc_next[[b, j]] = dc * f;
                            }
                        }
                    }
                    let da = rows(&dxw, step, batch);
                    general_mat_mul(1.0, &hp.t(), &da, 1.0, &mut dw_h);
                    dh_next = da.dot(&w_h.t());
                }
            }
            CellKind::Gru => {
                let rh_all = lc.rh.as_ref().expect("gru cache");
                let w_zr = w_h.slice(s![.., ..2 * u]);
                let w_n = w_h.slice(s![.., 2 * u..]);
                for step in (0..l_in).rev() {
                    let gates = rows(&lc.gates, step, batch);
                    let hp = if step == 0 { zeros.view() } else { rows(&lc.h, step - 1, batch) };
                    let dh = &rows(&d_h, step, batch) + &dh_next;
                    let mut dhp = Array2::<f64>::zeros((batch, u));
                    let mut dan = Array2::<f64>::zeros((batch, u));
                    {
                        let mut da = dxw.slice_mut(s![step * batch..(step + 1) * batch, ..]);
                        for b in 0..batch {
                            for j in 0..u {
                                let (z, n) = (gates[[b, j]], gates[[b, 2 * u + j]]);
                                let dhv = dh[[b, j]];
                                da[[b, j]] = dhv * (hp[[b, j]] - n) * z * (1.0 - z);
                                let v = dhv * (1.0 - z) * (1.0 - n * n);
                                da[[b, 2 * u + j]] = v;
                                dan[[b, j]] = v;
                                dhp[[b, j]] = dhv * z;
                            }
                        }
                    }
                    let d_rh = dan.dot(&w_n.t());
                    general_mat_mul(1.0, &rows(rh_all, step, batch).t(), &dan, 1.0, &mut dw_h.slice_mut(s![.., 2 * u..]));
                    {
                        let mut da = dxw.slice_mut(s![step * batch..(step + 1) * batch, ..]);
                        for b in 0..batch {
                            for j in 0..u {
                                let r = gates[[b, u + j]];
                                da[[b, u + j]] = d_rh[[b, j]] * hp[[b, j]] * r * (1.0 - r);
                                dhp[[b, j]] += d_rh[[b, j]] * r;
                            }
                        }
                    }
                    let da_zr = dxw.slice(s![step * batch..(step + 1) * batch, ..2 * u]);
                    general_mat_mul(1.0, &hp.t(), &da_zr, 1.0, &mut dw_h.slice_mut(s![.., ..2 * u]));
                    general_mat_mul(1.0, &da_zr, &w_zr.t(), 1.0, &mut dhp);
                    dh_next = dhp;
                }
            }
        }
        self.put(grad, lb.w_h, dw_h);
        self.put(grad, lb.w_x, lc.input.t().dot(&dxw));
        self.put(grad, lb.b, dxw.sum_axis(Axis(0)).insert_axis(Axis(0)));
        want_input.then(|| dxw.dot(&self.layout.view(&self.params, lb.w_x).t()))
    }

    /// Inference-mode outputs, `B x (N * H)`.
    pub fn predict_batch(&self, x: ArrayView3<f64>) -> Result<Array2<f64>, NeuralError> {
        Ok(self.forward(x, Mode::Infer)?.output)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array3};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn topo(cell: CellKind, layers: usize, bn: bool, dropout: f64) -> Topology {
        Topology {
            n_series: 3,
            input_len: 5,
            horizon: 2,
            cell,
            n_layers: layers,
            units: 4,
            activation: Activation::Tanh,
            use_batchnorm: bn,
            bn_before_dropout: true,
            dropout_input: dropout,
            dropout_hidden: dropout,
        }
    }

    fn batch(rng: &mut ChaCha8Rng, b: usize, t: &Topology) -> (Array3<f64>, Array2<f64>) {
        let x = Array3::from_shape_simple_fn((b, t.input_len, t.n_series), || rng.random_range(-1.0..1.0));
        let y = Array2::from_shape_simple_fn((b, t.n_outputs()), || rng.random_range(-1.0..1.0));
        (x, y)
    }

    #[test]
    fn loss_hand_cases() {
        let o = array![[1.0, 2.0]];
        assert_eq!(loss(o.view(), o.view(), &[], 0.0), 0.0);
        assert_eq!(loss(array![[3.0]].view(), array![[1.0]].view(), &[], 0.0), 2.0);
        assert!((loss(o.view(), o.view(), &[1.0, 2.0], 0.01) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn zero_error_gradient_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = topo(CellKind::Lstm, 1, false, 0.0);
        let net = Network::new(t.clone(), &mut rng).unwrap();
        let (x, _) = batch(&mut rng, 3, &t);
        let cache = net.forward(x.view(), Mode::Infer).unwrap();
        let (l, g) = net.backward(&cache, cache.output.view(), 0.0).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn decay_gradient_is_two_psi_w() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = topo(CellKind::Gru, 2, false, 0.0);
        let net = Network::new(t.clone(), &mut rng).unwrap();
        let (x, _) = batch(&mut rng, 3, &t);
        let cache = net.forward(x.view(), Mode::Infer).unwrap();
        let psi = 0.03;
        let (_, g) = net.backward(&cache, cache.output.view(), psi).unwrap();
        for b in &net.layout.blocks {
            for i in b.range() {
                let expected = if b.decay { 2.0 * psi * net.params[i] } else { 0.0 };
                assert_eq!(g[i], expected, "{}", b.name);
            }
        }
    }

    #[test]
    fn no_stochastic_layers_train_equals_infer() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for cell in [CellKind::Lstm, CellKind::Gru] {
            let t = topo(cell, 2, false, 0.0);
            let net = Network::new(t.clone(), &mut rng).unwrap();
            let (x, _) = batch(&mut rng, 4, &t);
            let masks = net.draw_masks(4, &mut rng);
            let a = net.forward(x.view(), Mode::Train(&masks)).unwrap().output;
            let b = net.forward(x.view(), Mode::Infer).unwrap().output;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn single_sample_batch_norm_training_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = topo(CellKind::Lstm, 1, true, 0.0);
        let net = Network::new(t.clone(), &mut rng).unwrap();
        let (x, _) = batch(&mut rng, 1, &t);
        let masks = net.draw_masks(1, &mut rng);
        assert!(matches!(net.forward(x.view(), Mode::Train(&masks)), Err(NeuralError::DegenerateBatch)));
        assert!(net.forward(x.view(), Mode::Infer).is_ok());
    }

    #[test]
    fn inverted_dropout_preserves_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for rate in [0.1, 0.3, 0.5] {
            let m = mask(rate, (1000, 100), &mut rng).unwrap();
            let activation = 0.37;
            let mean = m.iter().map(|k| k * activation).sum::<f64>() / m.len() as f64;
            assert!((mean - activation).abs() / activation < 0.01, "rate {rate}: {mean}");
        }
    }

    #[test]
    fn wrong_window_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = topo(CellKind::Gru, 1, false, 0.0);
        let net = Network::new(t, &mut rng).unwrap();
        let x = Array3::zeros((2, 4, 3));
        assert!(matches!(net.predict_batch(x.view()), Err(NeuralError::Shape { .. })));
    }

    #[test]
    fn init_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let t = topo(CellKind::Lstm, 2, true, 0.0);
        let net = Network::new(t, &mut rng).unwrap();
        for b in &net.layout.blocks {
            let v = &net.params[b.range()];
            if b.decay {
                let bound = 1.0 / (b.rows as f64).sqrt();
                assert!(v.iter().all(|w| w.abs() <= bound));
                assert!(v.iter().any(|w| *w != 0.0));
            } else if b.name.ends_with("bn_gamma") {
                assert!(v.iter().all(|w| *w == 1.0));
            } else {
                assert!(v.iter().all(|w| *w == 0.0));
            }
        }
    }
}
