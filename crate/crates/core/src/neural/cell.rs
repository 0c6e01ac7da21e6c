//! Single-timestep recurrences on a batch of row vectors.
//!
//! Gate weights are fused column-wise: LSTM columns are `[i, f, o, c~]`,
//! GRU columns `[z, r, h~]`, each block `units` wide.

use ndarray::{linalg::general_mat_mul, s, Array1, Array2, ArrayView2, Zip};

use super::NeuralError;

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Fused gate parameters: `w_x` is `in_dim x (gates * units)`, `w_h` is
/// `units x (gates * units)`, `b` has `gates * units` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    pub w_x: Array2<f64>,
    pub w_h: Array2<f64>,
    pub b: Array1<f64>,
}

impl GateParams {
    pub fn zeros(in_dim: usize, units: usize, gates: usize) -> Self {
        GateParams {
            w_x: Array2::zeros((in_dim, gates * units)),
            w_h: Array2::zeros((units, gates * units)),
            b: Array1::zeros(gates * units),
        }
    }

    fn check(&self, x: &ArrayView2<f64>, h: &ArrayView2<f64>, gates: usize) -> Result<usize, NeuralError> {
        let units = self.w_h.nrows();
        let ok = self.w_h.ncols() == gates * units
            && self.w_x.ncols() == gates * units
            && self.b.len() == gates * units
            && self.w_x.nrows() == x.ncols()
            && h.ncols() == units
            && h.nrows() == x.nrows();
        if ok {
            Ok(units)
        } else {
            Err(NeuralError::Shape {
                expected: format!("x: B x {}, h: B x {units}, {gates} gate blocks", self.w_x.nrows()),
                found: format!("x: {:?}, h: {:?}, w_h: {:?}", x.shape(), h.shape(), self.w_h.shape()),
            })
        }
    }

    fn input_projection(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.w_x) + &self.b
    }
}

/// Vanilla recurrence `h = tanh(h_prev W_h + x W_x + b)`.
pub fn rnn_cell(x: ArrayView2<f64>, h_prev: ArrayView2<f64>, p: &GateParams) -> Result<Array2<f64>, NeuralError> {
    p.check(&x, &h_prev, 1)?;
    let mut pre = p.input_projection(&x);
    general_mat_mul(1.0, &h_prev, &p.w_h, 1.0, &mut pre);
    pre.mapv_inplace(f64::tanh);
    Ok(pre)
}

/// One LSTM step; returns `(h, c)`.
pub fn lstm_cell(
    x: ArrayView2<f64>,
    h_prev: ArrayView2<f64>,
    c_prev: ArrayView2<f64>,
    p: &GateParams,
) -> Result<(Array2<f64>, Array2<f64>), NeuralError> {
    p.check(&x, &h_prev, 4)?;
    if c_prev.shape() != h_prev.shape() {
        return Err(NeuralError::Shape { expected: format!("{:?}", h_prev.shape()), found: format!("{:?}", c_prev.shape()) });
    }
    let step = lstm_step(p.input_projection(&x), h_prev, c_prev, p.w_h.view());
    Ok((step.h, step.c))
}

/// One GRU step.
pub fn gru_cell(x: ArrayView2<f64>, h_prev: ArrayView2<f64>, p: &GateParams) -> Result<Array2<f64>, NeuralError> {
    p.check(&x, &h_prev, 3)?;
    Ok(gru_step(p.input_projection(&x), h_prev, p.w_h.view()).h)
}

pub(crate) struct LstmStep {
    /// Activated gates `[i, f, o, c~]`.
    pub gates: Array2<f64>,
    pub c: Array2<f64>,
    pub h: Array2<f64>,
}

/// `pre` is the input projection plus bias, `B x 4U`.
pub(crate) fn lstm_step(
    mut pre: Array2<f64>,
    h_prev: ArrayView2<f64>,
    c_prev: ArrayView2<f64>,
    w_h: ArrayView2<f64>,
) -> LstmStep {
    let u = w_h.nrows();
    general_mat_mul(1.0, &h_prev, &w_h, 1.0, &mut pre);
    pre.slice_mut(s![.., ..3 * u]).mapv_inplace(sigmoid);
    pre.slice_mut(s![.., 3 * u..]).mapv_inplace(f64::tanh);
    let mut c = Array2::zeros(c_prev.raw_dim());
    Zip::from(&mut c)
        .and(&c_prev)
        .and(pre.slice(s![.., ..u]))
        .and(pre.slice(s![.., u..2 * u]))
        .and(pre.slice(s![.., 3 * u..]))
        .for_each(|c, &cp, &i, &f, &g| *c = f * cp + i * g);
    let mut h = Array2::zeros(c_prev.raw_dim());
    Zip::from(&mut h).and(&c).and(pre.slice(s![.., 2 * u..3 * u])).for_each(|h, &c, &o| *h = o * c.tanh());
    LstmStep { gates: pre, c, h }
}

pub(crate) struct GruStep {
    /// Activated gates `[z, r, h~]`.
    pub gates: Array2<f64>,
    /// `r * h_prev`
    pub rh: Array2<f64>,
    pub h: Array2<f64>,
}

/// `pre` is the input projection plus bias, `B x 3U`.
pub(crate) fn gru_step(mut pre: Array2<f64>, h_prev: ArrayView2<f64>, w_h: ArrayView2<f64>) -> GruStep {
    let u = w_h.nrows();
    {
        let mut zr = pre.slice_mut(s![.., ..2 * u]);
        general_mat_mul(1.0, &h_prev, &w_h.slice(s![.., ..2 * u]), 1.0, &mut zr);
        zr.mapv_inplace(sigmoid);
    }
    let mut rh = Array2::zeros(h_prev.raw_dim());
    Zip::from(&mut rh).and(pre.slice(s![.., u..2 * u])).and(&h_prev).for_each(|rh, &r, &h| *rh = r * h);
    {
        let mut n = pre.slice_mut(s![.., 2 * u..]);
        general_mat_mul(1.0, &rh, &w_h.slice(s![.., 2 * u..]), 1.0, &mut n);
        n.mapv_inplace(f64::tanh);
    }
    let mut h = Array2::zeros(h_prev.raw_dim());
    Zip::from(&mut h)
        .and(pre.slice(s![.., ..u]))
        .and(pre.slice(s![.., 2 * u..]))
        .and(&h_prev)
        .for_each(|h, &z, &n, &hp| *h = (1.0 - z) * n + z * hp);
    GruStep { gates: pre, rh, h }
}
