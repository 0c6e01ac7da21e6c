//! Python bindings: panels, CV plans, metrics, preprocessing, statistical
//! forecasts, ensemble weights, TPE and full runs.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sharpecast::data::{self, RiskFreeConversion};
use sharpecast::hpo::{self, DimKind, Dimension, SearchSpace, TpeState, Value};
use sharpecast::metrics::{self, MetricValues};
use sharpecast::month::MonthStamp;
use sharpecast::pipeline::{self, Algorithm, ErrorKind, PipelineError};
use sharpecast::stats::{self, StatKind};
use sharpecast::synth::{generate, Regime, SynthSpec};
use sharpecast::{cv, ensemble, preprocess};

create_exception!(_sharpecast, ConfigError, PyValueError);
create_exception!(_sharpecast, DataError, PyValueError);
create_exception!(_sharpecast, NumericError, PyArithmeticError);

fn config_err(e: impl std::fmt::Display) -> PyErr {
    ConfigError::new_err(e.to_string())
}

fn data_err(e: impl std::fmt::Display) -> PyErr {
    DataError::new_err(e.to_string())
}

fn numeric_err(e: impl std::fmt::Display) -> PyErr {
    NumericError::new_err(e.to_string())
}

fn pipeline_err(e: PipelineError) -> PyErr {
    match e.kind {
        ErrorKind::Config => config_err(e),
        ErrorKind::Data => data_err(e),
        ErrorKind::Numeric => numeric_err(e),
    }
}

fn month(s: &str) -> PyResult<MonthStamp> {
    s.parse().map_err(config_err)
}

fn conversion(s: &str) -> PyResult<RiskFreeConversion> {
    match s {
        "simple" => Ok(RiskFreeConversion::Simple),
        "compound" => Ok(RiskFreeConversion::Compound),
        _ => Err(config_err(format!("unknown conversion `{s}` (simple, compound)"))),
    }
}

/// Funds by months of annualized Sharpe ratios.
#[pyclass(name = "SharpePanel", module = "sharpecast", from_py_object)]
#[derive(Clone)]
struct PySharpePanel(data::SharpePanel);

#[pymethods]
impl PySharpePanel {
    #[new]
    fn new(fund_ids: Vec<String>, start: &str, values: Vec<Vec<f64>>) -> PyResult<Self> {
        data::SharpePanel::new(fund_ids, month(start)?, values).map(Self).map_err(data_err)
    }

    /// Parses `date,fund_id,sharpe` text.
    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        data::read_sharpe(text.as_bytes()).map(Self).map_err(data_err)
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        let file = std::fs::File::open(&path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
        data::read_sharpe(file).map(Self).map_err(data_err)
    }

    fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        data::write_sharpe(&mut buf, &self.0).expect("write to vec");
        String::from_utf8(buf).expect("ascii")
    }

    #[getter]
    fn fund_ids(&self) -> Vec<String> {
        self.0.fund_ids.clone()
    }

    #[getter]
    fn start(&self) -> String {
        self.0.start.to_string()
    }

    #[getter]
    fn values(&self) -> Vec<Vec<f64>> {
        self.0.values.clone()
    }

    #[getter]
    fn n_series(&self) -> usize {
        self.0.n_series()
    }

    fn month(&self, col: usize) -> String {
        self.0.month(col).to_string()
    }

    /// Columns `start..end`.
    fn slice(&self, start: usize, end: usize) -> PyResult<Self> {
        if start >= end || end > self.0.len() {
            return Err(config_err(format!("bad column range {start}..{end} for length {}", self.0.len())));
        }
        Ok(Self(self.0.slice(start..end)))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("SharpePanel({} series x {} months from {})", self.0.n_series(), self.0.len(), self.0.start)
    }
}

/// Fitted offset, log and differencing choices of one train panel.
#[pyclass(name = "PreprocessState", module = "sharpecast", from_py_object)]
#[derive(Clone)]
struct PyPreprocessState(preprocess::PreprocessState);

#[pymethods]
impl PyPreprocessState {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        preprocess::PreprocessState::from_json(text).map(Self).map_err(data_err)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[getter]
    fn offset(&self) -> f64 {
        self.0.offset
    }

    /// Per series: whether it was differenced.
    #[getter]
    fn differenced(&self) -> Vec<bool> {
        self.0.per_series.iter().map(|s| s.diff).collect()
    }

    #[getter]
    fn kpss(&self) -> Vec<f64> {
        self.0.per_series.iter().map(|s| s.kpss).collect()
    }
}

/// Configuration of a full run. Build from JSON or set fields directly.
#[pyclass(name = "RunConfig", module = "sharpecast", from_py_object)]
#[derive(Clone)]
struct PyRunConfig(pipeline::RunConfig);

#[pymethods]
impl PyRunConfig {
    #[new]
    #[pyo3(signature = (seed, out_dir, *, returns=None, risk_free=None, sharpe=None, horizons=None, algorithms=None, hpo_iterations=None, splits=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        seed: u64,
        out_dir: PathBuf,
        returns: Option<PathBuf>,
        risk_free: Option<PathBuf>,
        sharpe: Option<PathBuf>,
        horizons: Option<Vec<usize>>,
        algorithms: Option<Vec<String>>,
        hpo_iterations: Option<usize>,
        splits: Option<usize>,
    ) -> PyResult<Self> {
        let mut c = pipeline::RunConfig::new(seed, out_dir);
        c.returns = returns;
        c.risk_free = risk_free;
        c.sharpe = sharpe;
        if let Some(h) = horizons {
            c.horizons = h;
        }
        if let Some(a) = algorithms {
            c.algorithms = parse_algorithms(&a)?;
        }
        if let Some(n) = hpo_iterations {
            c.hpo_iterations = n;
        }
        if let Some(p) = splits {
            c.splits = p;
        }
        Ok(Self(c))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        pipeline::RunConfig::from_json(text).map(Self).map_err(pipeline_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        pipeline::RunConfig::load(&path).map(Self).map_err(pipeline_err)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    fn validate(&self) -> PyResult<()> {
        self.0.validate().map_err(pipeline_err)
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed
    }

    #[getter]
    fn out_dir(&self) -> PathBuf {
        self.0.out_dir.clone()
    }

    #[getter]
    fn horizons(&self) -> Vec<usize> {
        self.0.horizons.clone()
    }

    #[setter]
    fn set_horizons(&mut self, h: Vec<usize>) {
        self.0.horizons = h;
    }

    #[getter]
    fn algorithms(&self) -> Vec<String> {
        self.0.algorithms.iter().map(|a| a.name().to_string()).collect()
    }

    #[setter]
    fn set_algorithms(&mut self, a: Vec<String>) -> PyResult<()> {
        self.0.algorithms = parse_algorithms(&a)?;
        Ok(())
    }

    #[getter]
    fn hpo_iterations(&self) -> usize {
        self.0.hpo_iterations
    }

    #[setter]
    fn set_hpo_iterations(&mut self, n: usize) {
        self.0.hpo_iterations = n;
    }

    fn __repr__(&self) -> String {
        format!("RunConfig(seed={}, out_dir={:?}, horizons={:?})", self.0.seed, self.0.out_dir, self.0.horizons)
    }
}

fn parse_algorithms(names: &[String]) -> PyResult<Vec<Algorithm>> {
    names.iter().map(|n| n.parse::<Algorithm>().map_err(config_err)).collect()
}

/// Writes `returns.csv` and `risk_free.csv` under `out_dir`; returns their paths.
#[pyfunction]
#[pyo3(signature = (out_dir, n_funds=20, n_months=240, seed=0, regime="ar1", cross_corr=0.4))]
fn synth(
    out_dir: PathBuf,
    n_funds: usize,
    n_months: usize,
    seed: u64,
    regime: &str,
    cross_corr: f64,
) -> PyResult<(PathBuf, PathBuf)> {
    let regime: Regime = regime.parse().map_err(config_err)?;
    let spec = SynthSpec { n_funds, n_months, seed, regime, cross_corr };
    let (series, rf) = generate(&spec).map_err(config_err)?;
    std::fs::create_dir_all(&out_dir).map_err(data_err)?;
    let (rp, fp) = (out_dir.join("returns.csv"), out_dir.join("risk_free.csv"));
    let io = |p: &PathBuf, e: std::io::Error| data_err(format!("{}: {e}", p.display()));
    data::write_returns(std::fs::File::create(&rp).map_err(|e| io(&rp, e))?, &series).map_err(|e| io(&rp, e))?;
    data::write_risk_free(std::fs::File::create(&fp).map_err(|e| io(&fp, e))?, &rf).map_err(|e| io(&fp, e))?;
    Ok((rp, fp))
}

/// Reads returns and risk-free files, aligns them and computes rolling Sharpe ratios.
#[pyfunction]
#[pyo3(signature = (returns, risk_free, window=12, min_months=120, conversion="simple"))]
fn sharpe_panel(
    returns: PathBuf,
    risk_free: PathBuf,
    window: usize,
    min_months: usize,
    conversion: &str,
) -> PyResult<PySharpePanel> {
    let conv = self::conversion(conversion)?;
    let r = data::ingest_returns(&returns).map_err(data_err)?;
    let rf = data::ingest_risk_free(&risk_free).map_err(data_err)?;
    let al = data::align_panel(&r, &rf, min_months).map_err(data_err)?;
    data::compute_sharpe_panel(&al.series, &al.risk_free, window, conv).map(PySharpePanel).map_err(data_err)
}

/// `(split, origin, val_start, val_end)` rows, 1-based.
#[pyfunction]
#[pyo3(signature = (n, horizon, splits=6, min_train=60))]
fn plan_splits(n: usize, horizon: usize, splits: usize, min_train: usize) -> PyResult<Vec<(usize, usize, usize, usize)>> {
    let plan = cv::plan_splits(n, horizon, splits, min_train).map_err(config_err)?;
    Ok((1..=plan.splits)
        .map(|i| {
            let (a, b) = plan.validation_range(i);
            (i, plan.origins[i - 1], a, b)
        })
        .collect())
}

#[pyfunction]
fn mase(train: Vec<f64>, actual: Vec<f64>, forecast: Vec<f64>) -> PyResult<f64> {
    metrics::mase(&train, &actual, &forecast).map_err(numeric_err)
}

#[pyfunction]
fn rmse(actual: Vec<f64>, forecast: Vec<f64>) -> PyResult<f64> {
    metrics::rmse(&actual, &forecast).map_err(numeric_err)
}

#[pyfunction]
fn mae(actual: Vec<f64>, forecast: Vec<f64>) -> PyResult<f64> {
    metrics::mae(&actual, &forecast).map_err(numeric_err)
}

#[pyfunction]
fn smdape(actual: Vec<f64>, forecast: Vec<f64>) -> PyResult<f64> {
    metrics::smdape(&actual, &forecast).map_err(numeric_err)
}

/// In radians.
#[pyfunction]
fn maape(actual: Vec<f64>, forecast: Vec<f64>) -> PyResult<f64> {
    metrics::maape(&actual, &forecast).map_err(numeric_err)
}

/// All five measures as a dict keyed by lower-case name.
#[pyfunction]
fn evaluate<'py>(py: Python<'py>, train: Vec<f64>, actual: Vec<f64>, forecast: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let v = MetricValues::evaluate(&train, &actual, &forecast).map_err(numeric_err)?;
    let d = PyDict::new(py);
    for (name, x) in MetricValues::NAMES.iter().zip(v.as_array()) {
        d.set_item(name.to_lowercase(), x)?;
    }
    Ok(d)
}

#[pyfunction]
fn fit_transform(panel: &PySharpePanel) -> PyResult<(PySharpePanel, PyPreprocessState)> {
    let (t, s) = preprocess::fit_transform(&panel.0).map_err(data_err)?;
    Ok((PySharpePanel(t), PyPreprocessState(s)))
}

/// Maps per-series forecasts of the steps after the train block back to the original scale.
#[pyfunction]
fn inverse_transform(forecasts: Vec<Vec<f64>>, state: &PyPreprocessState) -> PyResult<Vec<Vec<f64>>> {
    preprocess::inverse_transform(&forecasts, &state.0).map_err(numeric_err)
}

/// Fits `kind` (naive, theta, ets, arima) and forecasts `horizon` steps.
/// Returns the forecast and a dict describing the fitted model.
#[pyfunction]
fn forecast_stat<'py>(py: Python<'py>, kind: &str, train: Vec<f64>, horizon: usize) -> PyResult<(Vec<f64>, Bound<'py, PyDict>)> {
    let kind = StatKind::ALL
        .into_iter()
        .find(|k| k.name() == kind)
        .ok_or_else(|| config_err(format!("unknown model `{kind}` (naive, theta, ets, arima)")))?;
    let (fit, f) = stats::fit_forecast(kind, &train, horizon).map_err(numeric_err)?;
    let d = PyDict::new(py);
    d.set_item("kind", fit.kind.name())?;
    d.set_item("params", fit.params)?;
    d.set_item("orders", fit.orders)?;
    d.set_item("sse", fit.sse)?;
    d.set_item("aicc", fit.aicc)?;
    Ok((f, d))
}

/// Inverse-MASE weights, in input order.
#[pyfunction]
fn global_weights(mase: Vec<(String, f64)>) -> PyResult<Vec<(String, f64)>> {
    let w = ensemble::global_weights_or_perfect(&mase).map_err(numeric_err)?;
    Ok(w.algorithms.into_iter().zip(w.weights.column(0).iter().copied()).collect())
}

/// Minimizes `objective(params: dict) -> float` over uniform real bounds
/// `[(name, lo, hi), ...]` with TPE (or random search). Returns
/// `(best_params, best_value, [(params, value), ...])`; failed trials have value `inf`.
#[pyfunction]
#[pyo3(signature = (objective, bounds, iterations, seed, random=false))]
fn tpe_minimize<'py>(
    py: Python<'py>,
    objective: &Bound<'py, PyAny>,
    bounds: Vec<(String, f64, f64)>,
    iterations: usize,
    seed: u64,
    random: bool,
) -> PyResult<(Bound<'py, PyDict>, f64, Vec<(Bound<'py, PyDict>, f64)>)> {
    let space = SearchSpace {
        dims: bounds
            .iter()
            .map(|(name, lo, hi)| Dimension { name: name.clone(), kind: DimKind::Uniform { lo: *lo, hi: *hi }, condition: None })
            .collect(),
    };
    let to_dict = |cfg: &hpo::Config| -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for (dim, v) in space.dims.iter().zip(cfg) {
            if let Some(Value::Real(x)) = v {
                d.set_item(&dim.name, x)?;
            }
        }
        Ok(d)
    };
    let mut py_error: Option<PyErr> = None;
    let f = |cfg: &hpo::Config, _seed: u64| -> Result<f64, String> {
        let out = to_dict(cfg).and_then(|d| objective.call1((d,))).and_then(|r| r.extract::<f64>());
        out.map_err(|e| {
            let msg = e.to_string();
            if e.is_instance_of::<pyo3::exceptions::PyKeyboardInterrupt>(py) {
                py_error.get_or_insert(e);
            }
            msg
        })
    };
    let result = if random {
        hpo::random_search(f, &space, iterations, seed)
    } else {
        hpo::optimize(f, &space, iterations, seed, TpeState::default())
    }
    .map_err(config_err)?;
    if let Some(e) = py_error {
        return Err(e);
    }
    let best = result.best_trial().ok_or_else(|| numeric_err("every trial failed"))?;
    let trials = result.trials.iter().map(|t| Ok((to_dict(&t.config)?, t.objective))).collect::<PyResult<Vec<_>>>()?;
    Ok((to_dict(&best.config)?, best.objective, trials))
}

/// Runs every stage and writes artifacts to `config.out_dir`. Returns the metric rows.
#[pyfunction]
fn run_pipeline<'py>(py: Python<'py>, config: &PyRunConfig) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = config.0.clone();
    let summary = py.detach(move || pipeline::run_pipeline(&cfg)).map_err(pipeline_err)?;
    cells_to_dicts(py, &summary.cells)
}

/// Reads a `metrics.csv` written by a run.
#[pyfunction]
fn read_metrics<'py>(py: Python<'py>, path: PathBuf) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let file = std::fs::File::open(&path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    let cells = metrics::read_cells(file).map_err(data_err)?;
    cells_to_dicts(py, &cells)
}

fn cells_to_dicts<'py>(py: Python<'py>, cells: &[metrics::MetricCell]) -> PyResult<Vec<Bound<'py, PyDict>>> {
    cells
        .iter()
        .map(|c| {
            let d = PyDict::new(py);
            d.set_item("algorithm", &c.algorithm)?;
            d.set_item("horizon", c.horizon)?;
            d.set_item("split", c.split)?;
            d.set_item("fund_id", &c.fund_id)?;
            for (name, x) in MetricValues::NAMES.iter().zip(c.values.as_array()) {
                d.set_item(name.to_lowercase(), x)?;
            }
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn _sharpecast(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add("DataError", py.get_type::<DataError>())?;
    m.add("NumericError", py.get_type::<NumericError>())?;
    m.add_class::<PySharpePanel>()?;
    m.add_class::<PyPreprocessState>()?;
    m.add_class::<PyRunConfig>()?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(sharpe_panel, m)?)?;
    m.add_function(wrap_pyfunction!(plan_splits, m)?)?;
    m.add_function(wrap_pyfunction!(mase, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(mae, m)?)?;
    m.add_function(wrap_pyfunction!(smdape, m)?)?;
    m.add_function(wrap_pyfunction!(maape, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(fit_transform, m)?)?;
    m.add_function(wrap_pyfunction!(inverse_transform, m)?)?;
    m.add_function(wrap_pyfunction!(forecast_stat, m)?)?;
    m.add_function(wrap_pyfunction!(global_weights, m)?)?;
    m.add_function(wrap_pyfunction!(tpe_minimize, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(read_metrics, m)?)?;
    Ok(())
}
