//! Univariate statistical baselines. Each fits one (transformed) series and
//! returns an `H`-step forecast; all of them are deterministic.

use serde::{Deserialize, Serialize};

pub mod arima;
pub mod ets;
pub mod theta;

pub use arima::arima_forecast;
pub use ets::ets_forecast;
pub use theta::theta_forecast;

pub const ALPHA_MIN: f64 = 1e-4;
pub const ALPHA_MAX: f64 = 0.9999;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("{kind} needs at least {needed} observations, got {found}")]
    TooShort { kind: StatKind, needed: usize, found: usize },
    #[error("non-finite value in train series")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatKind {
    Naive,
    Theta,
    Ets,
    Arima,
}

impl StatKind {
    pub const ALL: [StatKind; 4] = [StatKind::Naive, StatKind::Theta, StatKind::Ets, StatKind::Arima];

    pub fn name(self) -> &'static str {
        match self {
            StatKind::Naive => "naive",
            StatKind::Theta => "theta",
            StatKind::Ets => "ets",
            StatKind::Arima => "arima",
        }
    }

    pub fn min_len(self) -> usize {
        match self {
            StatKind::Naive => 1,
            StatKind::Theta => 4,
            StatKind::Ets => 10,
            StatKind::Arima => 20,
        }
    }
}

impl std::fmt::Display for StatKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Summary of one fitted baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedStatModel {
    pub kind: StatKind,
    /// Model-specific: theta `[alpha, slope, level]`; ETS smoothing, damping and
    /// initial states; ARIMA `[mean, ar.., ma..]`.
    pub params: Vec<f64>,
    /// ARIMA `[p, d, q]`; ETS `[trend]` with 0 = none, 1 = additive, 2 = damped.
    pub orders: Vec<usize>,
    /// In-sample sum of squared one-step errors.
    pub sse: f64,
    pub aicc: f64,
}

pub(crate) fn check(kind: StatKind, train: &[f64]) -> Result<(), StatsError> {
    if train.len() < kind.min_len() {
        return Err(StatsError::TooShort { kind, needed: kind.min_len(), found: train.len() });
    }
    if train.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

/// Gaussian AICc from a residual sum of squares over `n` residuals with `k` parameters.
pub fn aicc(sse: f64, n: usize, k: usize) -> f64 {
    let nf = n as f64;
    let sigma2 = (sse / nf).max(1e-300);
    let loglik = -0.5 * nf * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    let kf = k as f64;
    -2.0 * loglik + 2.0 * kf * nf / (nf - kf - 1.0)
}

pub fn naive_forecast(train: &[f64], horizon: usize) -> Result<Vec<f64>, StatsError> {
    check(StatKind::Naive, train)?;
    Ok(vec![*train.last().expect("checked"); horizon])
}

pub fn fit_naive(train: &[f64], horizon: usize) -> Result<(FittedStatModel, Vec<f64>), StatsError> {
    let f = naive_forecast(train, horizon)?;
    let sse: f64 = train.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    let n = train.len().saturating_sub(1).max(1);
    let model = FittedStatModel { kind: StatKind::Naive, params: vec![], orders: vec![], sse, aicc: aicc(sse, n, 1) };
    Ok((model, f))
}

/// Fits `kind` to `train` and forecasts `horizon` steps.
pub fn fit_forecast(kind: StatKind, train: &[f64], horizon: usize) -> Result<(FittedStatModel, Vec<f64>), StatsError> {
    match kind {
        StatKind::Naive => fit_naive(train, horizon),
        StatKind::Theta => theta::fit(train, horizon),
        StatKind::Ets => ets::fit(train, horizon),
        StatKind::Arima => arima::fit(train, horizon),
    }
}

/// `fund_id,split,kind,orders,params,aicc`
pub fn write_summaries<W: std::io::Write>(mut w: W, rows: &[(String, usize, FittedStatModel)]) -> std::io::Result<()> {
    writeln!(w, "fund_id,split,kind,orders,params,aicc")?;
    for (fund, split, m) in rows {
        let orders: Vec<String> = m.orders.iter().map(|o| o.to_string()).collect();
        let params: Vec<String> = m.params.iter().map(|p| crate::format::fmt_sig(*p, 10)).collect();
        writeln!(
            w,
            "{fund},{split},{},{},{},{}",
            m.kind,
            orders.join(";"),
            params.join(";"),
            crate::format::fmt_sig(m.aicc, 10)
        )?;
    }
    Ok(())
}
