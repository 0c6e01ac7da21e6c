//! Forecasting risk-adjusted fund performance.
//!
//! The crate turns monthly fund returns into rolling Sharpe-ratio panels and
//! forecasts them with recurrent networks (LSTM/GRU trained from scratch and
//! tuned with a tree-structured Parzen estimator) and statistical baselines
//! (Naive, Theta, ETS, ARIMA). Models are evaluated on equal-length
//! rolling-origin validation blocks with MASE, RMSE, MAE, SMDAPE and MAAPE,
//! and combined with simple, global and local inverse-MASE ensembles.

pub mod cv;
pub mod data;
pub mod ensemble;
pub mod format;
pub mod hpo;
pub mod metrics;
pub mod month;
pub mod neural;
pub mod pipeline;
mod optim;
pub mod preprocess;
pub mod seed;
pub mod stats;
pub mod synth;

pub use cv::{plan_splits, split_view, CvPlan};
pub use data::{compute_sharpe_panel, ReturnSeries, RiskFreeSeries, SharpePanel};
pub use metrics::{MetricReport, MetricValues};
pub use month::MonthStamp;
pub use preprocess::{PreprocessState, WindowedDataset};
