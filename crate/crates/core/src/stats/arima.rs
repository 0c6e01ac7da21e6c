//! Non-seasonal ARIMA(p, d, q) with a mean term, fitted by conditional sum of
//! squares and selected by AICc over a small order grid.

use super::{aicc, check, fit_naive, FittedStatModel, StatKind, StatsError};
use crate::optim::nelder_mead;

pub const MAX_P: usize = 3;
pub const MAX_D: usize = 1;
pub const MAX_Q: usize = 3;
const MAX_ITER: usize = 2000;
/// Reflection coefficients at or beyond this magnitude count as a unit root.
const ROOT_MARGIN: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ArimaFit {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub mean: f64,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub sse: f64,
    pub aicc: f64,
}

pub fn difference(y: &[f64], d: usize) -> Vec<f64> {
    let mut w = y.to_vec();
    for _ in 0..d {
        w = w.windows(2).map(|v| v[1] - v[0]).collect();
    }
    w
}

/// CSS residuals: the first `p` are conditioned on and set to zero.
pub fn css_residuals(w: &[f64], mean: f64, ar: &[f64], ma: &[f64]) -> Vec<f64> {
    let p = ar.len();
    let mut eps = vec![0.0; w.len()];
    for t in p..w.len() {
        let mut pred = 0.0;
        for (i, phi) in ar.iter().enumerate() {
            pred += phi * (w[t - 1 - i] - mean);
        }
        for (j, theta) in ma.iter().enumerate() {
            if t > j {
                pred += theta * eps[t - 1 - j];
            }
        }
        eps[t] = (w[t] - mean) - pred;
    }
    eps
}

/// Squared residuals summed from `MAX_P` on, so every order is scored on the
/// same observations.
fn css(w: &[f64], mean: f64, ar: &[f64], ma: &[f64]) -> f64 {
    css_residuals(w, mean, ar, ma)[MAX_P..].iter().map(|e| e * e).sum()
}

/// True when `1 - c_1 z - ... - c_k z^k` has all roots outside the unit circle,
/// checked through the step-down (reverse Levinson) recursion.
pub fn is_stationary(coefs: &[f64]) -> bool {
    let mut a = coefs.to_vec();
    while let Some(&k) = a.last() {
        if !k.is_finite() || k.abs() >= ROOT_MARGIN {
            return false;
        }
        let m = a.len();
        let denom = 1.0 - k * k;
        a = (0..m - 1).map(|j| (a[j] + k * a[m - 2 - j]) / denom).collect();
    }
    true
}

/// MA polynomial `1 + t_1 z + ...` is invertible.
pub fn is_invertible(ma: &[f64]) -> bool {
    let neg: Vec<f64> = ma.iter().map(|t| -t).collect();
    is_stationary(&neg)
}

/// CSS fit of one order; `None` if rejected.
pub fn fit_order(y: &[f64], p: usize, d: usize, q: usize) -> Option<ArimaFit> {
    let w = difference(y, d);
    let n_eff = w.len().checked_sub(MAX_P)?;
    let k = p + q + 2;
    if n_eff <= k + 1 {
        return None;
    }
    let mean0 = w.iter().sum::<f64>() / w.len() as f64;
    let sd = (w.iter().map(|x| (x - mean0).powi(2)).sum::<f64>() / w.len() as f64).sqrt();
    if sd <= 1e-10 * (1.0 + mean0.abs()) {
        return None;
    }
    let dim = 1 + p + q;
    let mut start = vec![0.0; dim];
    start[0] = mean0;
    let mut step = vec![0.1; dim];
    step[0] = 0.1 * sd;
    let objective = |x: &[f64]| {
        let v = css(&w, x[0], &x[1..1 + p], &x[1 + p..]);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let res = nelder_mead(objective, &start, &step, MAX_ITER, 1e-10);
    let (mean, ar, ma) = (res.x[0], res.x[1..1 + p].to_vec(), res.x[1 + p..].to_vec());
    if !res.value.is_finite() || !is_stationary(&ar) || !is_invertible(&ma) {
        return None;
    }
    if res.value <= 1e-20 * sd * sd * n_eff as f64 {
        return None;
    }
    Some(ArimaFit { p, d, q, mean, ar, ma, sse: res.value, aicc: aicc(res.value, n_eff, k) })
}

impl ArimaFit {
    pub fn forecast(&self, y: &[f64], horizon: usize) -> Vec<f64> {
        let w = difference(y, self.d);
        let mut eps = css_residuals(&w, self.mean, &self.ar, &self.ma);
        let mut ext = w.clone();
        for _ in 0..horizon {
            let t = ext.len();
            let mut pred = self.mean;
            for (i, phi) in self.ar.iter().enumerate() {
                pred += phi * (ext[t - 1 - i] - self.mean);
            }
            for (j, theta) in self.ma.iter().enumerate() {
                pred += theta * eps[t - 1 - j];
            }
            ext.push(pred);
            eps.push(0.0);
        }
        let mut out = ext[w.len()..].to_vec();
        if self.d == 1 {
            let mut level = *y.last().expect("nonempty");
            for v in out.iter_mut() {
                level += *v;
                *v = level;
            }
        }
        out
    }
}

/// Best AICc fit over the order grid, or `None` if every candidate is rejected.
pub fn select(y: &[f64]) -> Option<ArimaFit> {
    let mut best: Option<ArimaFit> = None;
    for d in 0..=MAX_D {
        for p in 0..=MAX_P {
            for q in 0..=MAX_Q {
                if let Some(f) = fit_order(y, p, d, q) {
                    if best.as_ref().is_none_or(|b| f.aicc < b.aicc) {
                        best = Some(f);
                    }
                }
            }
        }
    }
    best
}

pub fn fit(train: &[f64], horizon: usize) -> Result<(FittedStatModel, Vec<f64>), StatsError> {
    check(StatKind::Arima, train)?;
    match select(train) {
        Some(f) => {
            let mut params = vec![f.mean];
            params.extend(&f.ar);
            params.extend(&f.ma);
            let forecast = f.forecast(train, horizon);
            let model =
                FittedStatModel { kind: StatKind::Arima, params, orders: vec![f.p, f.d, f.q], sse: f.sse, aicc: f.aicc };
            Ok((model, forecast))
        }
        None => {
            log::warn!("every ARIMA candidate was rejected; using the naive forecast");
            let (mut model, forecast) = fit_naive(train, horizon)?;
            model.kind = StatKind::Arima;
            model.orders = vec![0, 1, 0];
            Ok((model, forecast))
        }
    }
}

pub fn arima_forecast(train: &[f64], horizon: usize) -> Result<Vec<f64>, StatsError> {
    fit(train, horizon).map(|(_, f)| f)
}
