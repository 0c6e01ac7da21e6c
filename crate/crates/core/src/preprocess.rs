//! Stationarity preprocessing (offset, log, conditional first difference),
//! its exact inverse, and sliding supervised windows.

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::data::SharpePanel;

/// 5% critical value of the level-stationarity KPSS test.
pub const KPSS_CRITICAL_5PCT: f64 = 0.463;
/// Validation values are floored here before taking logs; the offset only
/// guarantees positivity on the train portion.
pub const LOG_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PreprocessError {
    #[error("train panel is empty")]
    Empty,
    #[error("non-finite value in series {fund_id} at column {col}")]
    NonFinite { fund_id: String, col: usize },
    #[error("KPSS needs at least 12 observations, got {0}")]
    TooShortForKpss(usize),
    #[error("series {0} is flagged as differenced but has no anchor")]
    MissingAnchor(String),
    #[error("expected {expected} series, got {found}")]
    SeriesMismatch { expected: usize, found: usize },
    #[error("need at least {required} timesteps for horizon {horizon}, got {found}")]
    TooFewTimesteps { required: usize, horizon: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesState {
    pub fund_id: String,
    pub diff: bool,
    /// Last train value on the log scale, kept only for differenced series.
    pub anchor: Option<f64>,
    pub kpss: f64,
}

/// Everything needed to invert the forward transform of one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessState {
    pub offset: f64,
    pub per_series: Vec<SeriesState>,
}

impl PreprocessState {
    pub fn any_differenced(&self) -> bool {
        self.per_series.iter().any(|s| s.diff)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("state serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

/// Level-stationarity KPSS statistic with a Bartlett long-run variance and
/// lag `floor(4 (T/100)^0.25)`. Returns `(statistic, stationary)`.
pub fn kpss_stationary(series: &[f64]) -> Result<(f64, bool), PreprocessError> {
    let t = series.len();
    if t < 12 {
        return Err(PreprocessError::TooShortForKpss(t));
    }
    let n = t as f64;
    let mean = series.iter().sum::<f64>() / n;
    let resid: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let gamma0 = resid.iter().map(|e| e * e).sum::<f64>() / n;
    if gamma0 <= 1e-24 * (1.0 + mean * mean) {
        return Ok((0.0, true));
    }
    let lags = (4.0 * (n / 100.0).powf(0.25)).floor() as usize;
    let mut lrv = gamma0;
    for l in 1..=lags.min(t - 1) {
        let gamma: f64 = resid[l..].iter().zip(&resid[..t - l]).map(|(a, b)| a * b).sum::<f64>() / n;
        lrv += 2.0 * (1.0 - l as f64 / (lags as f64 + 1.0)) * gamma;
    }
    let mut partial = 0.0;
    let mut eta = 0.0;
    for e in &resid {
        partial += e;
        eta += partial * partial;
    }
    let stat = eta / (n * n) / lrv;
    Ok((stat, stat < KPSS_CRITICAL_5PCT))
}

/// Offset, log and conditionally difference every series of a train panel.
///
/// When any series is differenced the first timestep is dropped from every
/// series, so the returned panel stays rectangular and starts one month later.
pub fn fit_transform(train: &SharpePanel) -> Result<(SharpePanel, PreprocessState), PreprocessError> {
    if train.is_empty() || train.n_series() == 0 {
        return Err(PreprocessError::Empty);
    }
    let mut min = f64::INFINITY;
    for (id, row) in train.fund_ids.iter().zip(&train.values) {
        for (col, &x) in row.iter().enumerate() {
            if !x.is_finite() {
                return Err(PreprocessError::NonFinite { fund_id: id.clone(), col });
            }
            min = min.min(x);
        }
    }
    let offset = (1.0 - min).max(0.0);
    let logs: Vec<Vec<f64>> = train.values.iter().map(|r| r.iter().map(|x| (x + offset).ln()).collect()).collect();
    let per_series = train
        .fund_ids
        .iter()
        .zip(&logs)
        .map(|(id, row)| {
            let (kpss, stationary) = kpss_stationary(row)?;
            Ok(SeriesState {
                fund_id: id.clone(),
                diff: !stationary,
                anchor: (!stationary).then(|| *row.last().expect("nonempty")),
                kpss,
            })
        })
        .collect::<Result<Vec<_>, PreprocessError>>()?;
    let state = PreprocessState { offset, per_series };
    let trimmed = state.any_differenced();
    let values = logs
        .iter()
        .zip(&state.per_series)
        .map(|(row, s)| {
            if s.diff {
                row.windows(2).map(|w| w[1] - w[0]).collect()
            } else if trimmed {
                row[1..].to_vec()
            } else {
                row.clone()
            }
        })
        .collect();
    let start = if trimmed { train.start.succ() } else { train.start };
    Ok((SharpePanel { fund_ids: train.fund_ids.clone(), start, values }, state))
}

/// Applies a fitted transform to observations that follow the train block
/// (e.g. a validation block). Differenced series start from their anchor.
pub fn transform_following(block: &[Vec<f64>], state: &PreprocessState) -> Result<Vec<Vec<f64>>, PreprocessError> {
    check_len(block.len(), state)?;
    block
        .iter()
        .zip(&state.per_series)
        .map(|(row, s)| {
            let logs: Vec<f64> = row.iter().map(|x| (x + state.offset).max(LOG_FLOOR).ln()).collect();
            if s.diff {
                let mut prev = s.anchor.ok_or_else(|| PreprocessError::MissingAnchor(s.fund_id.clone()))?;
                Ok(logs
                    .into_iter()
                    .map(|l| {
                        let d = l - prev;
                        prev = l;
                        d
                    })
                    .collect())
            } else {
                Ok(logs)
            }
        })
        .collect()
}

fn check_len(found: usize, state: &PreprocessState) -> Result<(), PreprocessError> {
    if found != state.per_series.len() {
        return Err(PreprocessError::SeriesMismatch { expected: state.per_series.len(), found });
    }
    Ok(())
}

/// Maps per-series forecasts of the steps after the train block back to the
/// original scale: cumulative sum from the anchor (differenced series only),
/// then `exp`, then subtract the offset.
pub fn inverse_transform(forecasts: &[Vec<f64>], state: &PreprocessState) -> Result<Vec<Vec<f64>>, PreprocessError> {
    check_len(forecasts.len(), state)?;
    forecasts
        .iter()
        .zip(&state.per_series)
        .map(|(row, s)| {
            let logs: Vec<f64> = if s.diff {
                let mut level = s.anchor.ok_or_else(|| PreprocessError::MissingAnchor(s.fund_id.clone()))?;
                row.iter()
                    .map(|d| {
                        level += d;
                        level
                    })
                    .collect()
            } else {
                row.clone()
            };
            Ok(logs.into_iter().map(|l| l.exp() - state.offset).collect())
        })
        .collect()
}

/// Reconstructs the original-scale train values covered by a transformed
/// panel. Differenced series are rebuilt backwards from their anchor, so they
/// also recover the observation preceding the first difference.
pub fn inverse_panel(transformed: &SharpePanel, state: &PreprocessState) -> Result<Vec<Vec<f64>>, PreprocessError> {
    check_len(transformed.n_series(), state)?;
    transformed
        .values
        .iter()
        .zip(&state.per_series)
        .map(|(row, s)| {
            let logs: Vec<f64> = if s.diff {
                let anchor = s.anchor.ok_or_else(|| PreprocessError::MissingAnchor(s.fund_id.clone()))?;
                let mut out = vec![0.0; row.len() + 1];
                out[row.len()] = anchor;
                for k in (0..row.len()).rev() {
                    out[k] = out[k + 1] - row[k];
                }
                out
            } else {
                row.clone()
            };
            Ok(logs.into_iter().map(|l| l.exp() - state.offset).collect())
        })
        .collect()
}

/// Supervised samples for multi-output, multi-step forecasting.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    /// `(samples, input_len, series)`
    pub inputs: Array3<f64>,
    /// `(samples, horizon * series)`, horizon-major: index `h * series + n`.
    pub targets: Array2<f64>,
    pub input_len: usize,
    pub horizon: usize,
}

impl WindowedDataset {
    pub fn n_samples(&self) -> usize {
        self.inputs.shape()[0]
    }

    pub fn n_series(&self) -> usize {
        self.inputs.shape()[2]
    }

    /// Subset of samples, in the given order.
    pub fn select(&self, idx: &[usize]) -> WindowedDataset {
        WindowedDataset {
            inputs: self.inputs.select(ndarray::Axis(0), idx),
            targets: self.targets.select(ndarray::Axis(0), idx),
            input_len: self.input_len,
            horizon: self.horizon,
        }
    }
}

pub fn input_len_for(horizon: usize) -> usize {
    horizon + 2
}

/// Sliding windows of length `H + 2` mapped to the next `H` steps, shifted by one.
pub fn build_windows(panel: &SharpePanel, horizon: usize) -> Result<WindowedDataset, PreprocessError> {
    let input_len = input_len_for(horizon);
    let t = panel.len();
    let required = input_len + horizon;
    if horizon == 0 || t < required {
        return Err(PreprocessError::TooFewTimesteps { required, horizon, found: t });
    }
    let n = panel.n_series();
    let samples = t - required + 1;
    let inputs = Array3::from_shape_fn((samples, input_len, n), |(s, k, j)| panel.values[j][s + k]);
    let targets = Array2::from_shape_fn((samples, horizon * n), |(s, idx)| {
        let (h, j) = (idx / n, idx % n);
        panel.values[j][s + input_len + h]
    });
    Ok(WindowedDataset { inputs, targets, input_len, horizon })
}

/// The final `H + 2` columns, shaped `(input_len, series)`, used to forecast
/// the steps after the panel.
pub fn last_window(panel: &SharpePanel, horizon: usize) -> Result<Array2<f64>, PreprocessError> {
    let input_len = input_len_for(horizon);
    let t = panel.len();
    if t < input_len {
        return Err(PreprocessError::TooFewTimesteps { required: input_len, horizon, found: t });
    }
    Ok(Array2::from_shape_fn((input_len, panel.n_series()), |(k, j)| panel.values[j][t - input_len + k]))
}
