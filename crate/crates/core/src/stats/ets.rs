//! Additive-error exponential smoothing without seasonality: ANN, AAN and
//! AAdN, fitted by in-sample SSE and selected by AICc.

use super::{aicc, check, FittedStatModel, StatKind, StatsError, ALPHA_MAX, ALPHA_MIN};
use crate::optim::nelder_mead;

pub const PHI_MIN: f64 = 0.8;
pub const PHI_MAX: f64 = 0.98;
pub const MAX_ITER: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    None,
    Additive,
    Damped,
}

impl Trend {
    pub const ALL: [Trend; 3] = [Trend::None, Trend::Additive, Trend::Damped];

    fn code(self) -> usize {
        match self {
            Trend::None => 0,
            Trend::Additive => 1,
            Trend::Damped => 2,
        }
    }

    /// Smoothing/damping parameters plus initial states.
    fn n_params(self) -> usize {
        match self {
            Trend::None => 2,
            Trend::Additive => 4,
            Trend::Damped => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtsParams {
    pub alpha: f64,
    pub beta: f64,
    pub phi: f64,
    pub level0: f64,
    pub trend0: f64,
}

fn unpack(trend: Trend, p: &[f64]) -> EtsParams {
    match trend {
        Trend::None => EtsParams { alpha: p[0], beta: 0.0, phi: 0.0, level0: p[1], trend0: 0.0 },
        Trend::Additive => EtsParams { alpha: p[0], beta: p[1], phi: 1.0, level0: p[2], trend0: p[3] },
        Trend::Damped => EtsParams { alpha: p[0], beta: p[1], phi: p[2], level0: p[3], trend0: p[4] },
    }
}

fn feasible(trend: Trend, p: &EtsParams) -> bool {
    let unit = |x: f64| (ALPHA_MIN..=ALPHA_MAX).contains(&x);
    unit(p.alpha)
        && match trend {
            Trend::None => true,
            Trend::Additive => unit(p.beta),
            Trend::Damped => unit(p.beta) && (PHI_MIN..=PHI_MAX).contains(&p.phi),
        }
}

/// Runs the state recursion, returning the one-step SSE and the final `(level, trend)`.
///
/// `level0`/`trend0` are the states before the first observation.
pub fn filter(y: &[f64], trend: Trend, p: &EtsParams) -> (f64, f64, f64) {
    let (mut l, mut b) = (p.level0, p.trend0);
    let phi = if trend == Trend::Damped { p.phi } else { 1.0 };
    let mut sse = 0.0;
    for &x in y {
        let damped = match trend {
            Trend::None => 0.0,
            _ => phi * b,
        };
        let e = x - (l + damped);
        sse += e * e;
        l = l + damped + p.alpha * e;
        if trend != Trend::None {
            b = damped + p.beta * e;
        }
    }
    (sse, l, b)
}

pub fn forecast_from(trend: Trend, phi: f64, level: f64, slope: f64, horizon: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(horizon);
    let mut cum = 0.0;
    let mut pow = 1.0;
    for h in 1..=horizon {
        match trend {
            Trend::None => {}
            Trend::Additive => cum = h as f64,
            Trend::Damped => {
                pow *= phi;
                cum += pow;
            }
        }
        out.push(level + cum * slope);
    }
    out
}

#[derive(Debug, Clone)]
pub struct EtsFit {
    pub trend: Trend,
    pub params: EtsParams,
    pub sse: f64,
    pub aicc: f64,
    pub converged: bool,
}

impl EtsFit {
    pub fn forecast(&self, y: &[f64], horizon: usize) -> Vec<f64> {
        let (_, l, b) = filter(y, self.trend, &self.params);
        forecast_from(self.trend, self.params.phi, l, b, horizon)
    }
}

pub fn fit_variant(y: &[f64], trend: Trend) -> EtsFit {
    let sd = {
        let m = y.iter().sum::<f64>() / y.len() as f64;
        (y.iter().map(|x| (x - m).powi(2)).sum::<f64>() / y.len() as f64).sqrt()
    };
    let scale = sd.max(1e-3);
    let init_slope = (y[y.len().min(4) - 1] - y[0]) / (y.len().min(4) - 1) as f64;
    let (start, step): (Vec<f64>, Vec<f64>) = match trend {
        Trend::None => (vec![0.3, y[0]], vec![0.1, 0.2 * scale]),
        Trend::Additive => (vec![0.3, 0.05, y[0], init_slope], vec![0.1, 0.03, 0.2 * scale, 0.05 * scale]),
        Trend::Damped => (
            vec![0.3, 0.05, 0.9, y[0], init_slope],
            vec![0.1, 0.03, 0.03, 0.2 * scale, 0.05 * scale],
        ),
    };
    let objective = |p: &[f64]| {
        let params = unpack(trend, p);
        if !feasible(trend, &params) {
            return f64::INFINITY;
        }
        let sse = filter(y, trend, &params).0;
        if sse.is_finite() {
            sse
        } else {
            f64::INFINITY
        }
    };
    let res = nelder_mead(objective, &start, &step, MAX_ITER, 1e-10);
    let params = unpack(trend, &res.x);
    let k = trend.n_params() + 1;
    EtsFit { trend, params, sse: res.value, aicc: aicc(res.value, y.len(), k), converged: res.converged }
}

/// ANN with the best `alpha` from the grid 0.1..=0.9 and `level0 = y_1`.
pub fn grid_fallback(y: &[f64]) -> EtsFit {
    let best = (1..=9)
        .map(|i| {
            let p = EtsParams { alpha: i as f64 / 10.0, beta: 0.0, phi: 0.0, level0: y[0], trend0: 0.0 };
            (p, filter(y, Trend::None, &p).0)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("grid nonempty");
    EtsFit { trend: Trend::None, params: best.0, sse: best.1, aicc: aicc(best.1, y.len(), 3), converged: true }
}

/// Fits every variant and keeps the lowest AICc among converged fits
/// (ties go to the simpler model).
pub fn select(y: &[f64]) -> EtsFit {
    let fits: Vec<EtsFit> = Trend::ALL.iter().map(|&t| fit_variant(y, t)).filter(|f| f.converged).collect();
    let mut best: Option<EtsFit> = None;
    for f in fits {
        if best.as_ref().is_none_or(|b| f.aicc < b.aicc) {
            best = Some(f);
        }
    }
    best.unwrap_or_else(|| {
        log::warn!("ETS optimizer did not converge in {MAX_ITER} iterations; falling back to grid ANN");
        grid_fallback(y)
    })
}

pub fn fit(train: &[f64], horizon: usize) -> Result<(FittedStatModel, Vec<f64>), StatsError> {
    check(StatKind::Ets, train)?;
    let f = select(train);
    let forecast = f.forecast(train, horizon);
    let p = f.params;
    let params = match f.trend {
        Trend::None => vec![p.alpha, p.level0],
        Trend::Additive => vec![p.alpha, p.beta, p.level0, p.trend0],
        Trend::Damped => vec![p.alpha, p.beta, p.phi, p.level0, p.trend0],
    };
    let model = FittedStatModel { kind: StatKind::Ets, params, orders: vec![f.trend.code()], sse: f.sse, aicc: f.aicc };
    Ok((model, forecast))
}

pub fn ets_forecast(train: &[f64], horizon: usize) -> Result<Vec<f64>, StatsError> {
    fit(train, horizon).map(|(_, f)| f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn hand_recursion() {
        // l_0 = x_1, so the first update leaves the level at x_1.
        let y = [1.0, 2.0, 3.0];
        let p = EtsParams { alpha: 0.3, beta: 0.0, phi: 0.0, level0: 1.0, trend0: 0.0 };
        let (_, level, _) = filter(&y, Trend::None, &p);
        assert!((level - 1.81).abs() < 1e-12);
        assert_eq!(forecast_from(Trend::None, 0.0, level, 0.0, 3), vec![level; 3]);
    }

    #[test]
    fn constant_series_selects_ann() {
        let y = [0.7; 30];
        let (m, f) = fit(&y, 5).unwrap();
        assert_eq!(m.orders, vec![0]);
        for v in f {
            assert!((v - 0.7).abs() < 1e-9);
        }
    }

    #[test]
    fn trending_series_selects_trend() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let y: Vec<f64> = (0..60).map(|t| 0.1 * t as f64 + noise.sample(&mut rng)).collect();
        let ann = fit_variant(&y, Trend::None);
        let best = select(&y);
        assert_ne!(best.trend, Trend::None);
        assert!(best.aicc < ann.aicc);
        let next = 0.1 * 60.0;
        let err_best = (best.forecast(&y, 1)[0] - next).abs();
        let err_ann = (ann.forecast(&y, 1)[0] - next).abs();
        assert!(err_best < err_ann, "{err_best} vs {err_ann}");
    }

    #[test]
    fn params_within_bounds() {
        let y: Vec<f64> = (0..50).map(|t| (t as f64 * 0.9).sin() + 0.02 * t as f64).collect();
        for t in Trend::ALL {
            let f = fit_variant(&y, t);
            assert!(feasible(t, &f.params));
            assert!(f.aicc.is_finite());
        }
    }

    #[test]
    fn grid_fallback_is_ann() {
        let y: Vec<f64> = (0..20).map(|t| (t % 3) as f64).collect();
        let f = grid_fallback(&y);
        assert_eq!(f.trend, Trend::None);
        assert!([1, 2, 3, 4, 5, 6, 7, 8, 9].iter().any(|i| (f.params.alpha - *i as f64 / 10.0).abs() < 1e-12));
    }
}
