//! End-to-end runs: ingest, Sharpe panel, rolling-origin splits,
//! preprocessing, baselines, tuned networks, metrics, ensembles and report.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cv::{plan_splits, split_view, write_plan, CvPlan, DEFAULT_MIN_TRAIN, DEFAULT_SPLITS};
use crate::data::{
    align_panel, compute_sharpe_panel, ingest_returns, ingest_risk_free, read_sharpe, write_sharpe, RiskFreeConversion,
    SharpePanel,
};
use crate::ensemble::{self, EnsembleGroup, EnsembleWeights, ForecastSet};
use crate::hpo::{self, OptimizeResult, SearchSpace, TpeState};
use crate::metrics::{self, MetricCell, MetricValues};
use crate::neural::{self, CellKind, HyperParams};
use crate::preprocess::{build_windows, fit_transform, inverse_transform, last_window, transform_following, PreprocessState};
use crate::seed::derive;
use crate::stats::{self, StatKind};

mod manifest;
pub mod report;

pub use manifest::{sha256_hex, FileHash, RunManifest, StageRecord, StageStatus, MANIFEST_FILE};
pub use report::{render_tables, ReportError};

pub const HORIZON_CHOICES: [usize; 5] = [6, 9, 12, 18, 24];
pub const DEFAULT_WINDOW: usize = 12;
pub const DEFAULT_MIN_MONTHS: usize = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Lstm,
    Gru,
    Arima,
    Ets,
    Theta,
    Naive,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] =
        [Algorithm::Lstm, Algorithm::Gru, Algorithm::Arima, Algorithm::Ets, Algorithm::Theta, Algorithm::Naive];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Lstm => "lstm",
            Algorithm::Gru => "gru",
            Algorithm::Arima => "arima",
            Algorithm::Ets => "ets",
            Algorithm::Theta => "theta",
            Algorithm::Naive => "naive",
        }
    }

    pub fn stat_kind(self) -> Option<StatKind> {
        match self {
            Algorithm::Arima => Some(StatKind::Arima),
            Algorithm::Ets => Some(StatKind::Ets),
            Algorithm::Theta => Some(StatKind::Theta),
            Algorithm::Naive => Some(StatKind::Naive),
            _ => None,
        }
    }

    pub fn cell(self) -> Option<CellKind> {
        match self {
            Algorithm::Lstm => Some(CellKind::Lstm),
            Algorithm::Gru => Some(CellKind::Gru),
            _ => None,
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown algorithm `{s}`"))
    }
}

/// Display label used in tables.
pub fn algorithm_label(name: &str) -> String {
    match name {
        "lstm" | "gru" | "arima" | "ets" => name.to_ascii_uppercase(),
        "theta" => "Theta".into(),
        "naive" => "Naive".into(),
        other => other.into(),
    }
}

fn default_window() -> usize {
    DEFAULT_WINDOW
}
fn default_min_months() -> usize {
    DEFAULT_MIN_MONTHS
}
fn default_horizons() -> Vec<usize> {
    HORIZON_CHOICES.to_vec()
}
fn default_splits() -> usize {
    DEFAULT_SPLITS
}
fn default_min_train() -> usize {
    DEFAULT_MIN_TRAIN
}
fn default_algorithms() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}
fn default_iterations() -> usize {
    hpo::DEFAULT_ITERATIONS
}

/// One run. Either `returns` + `risk_free`, or a precomputed `sharpe` panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub returns: Option<PathBuf>,
    #[serde(default)]
    pub risk_free: Option<PathBuf>,
    #[serde(default)]
    pub sharpe: Option<PathBuf>,
    #[serde(default = "default_window")]
    pub sharpe_window: usize,
    #[serde(default)]
    pub risk_free_conversion: RiskFreeConversion,
    /// Minimum common months kept when aligning funds.
    #[serde(default = "default_min_months")]
    pub min_months: usize,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<usize>,
    #[serde(default = "default_splits")]
    pub splits: usize,
    #[serde(default = "default_min_train")]
    pub min_train: usize,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    /// `None` selects the default groups whose members are all configured.
    #[serde(default)]
    pub ensemble_groups: Option<Vec<EnsembleGroup>>,
    #[serde(default = "default_iterations")]
    pub hpo_iterations: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn new(seed: u64, out_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            returns: None,
            risk_free: None,
            sharpe: None,
            sharpe_window: DEFAULT_WINDOW,
            risk_free_conversion: RiskFreeConversion::Simple,
            min_months: DEFAULT_MIN_MONTHS,
            horizons: default_horizons(),
            splits: DEFAULT_SPLITS,
            min_train: DEFAULT_MIN_TRAIN,
            algorithms: default_algorithms(),
            ensemble_groups: None,
            hpo_iterations: hpo::DEFAULT_ITERATIONS,
            seed,
            out_dir: out_dir.into(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Groups used by this run, after defaults are resolved.
    pub fn groups(&self) -> Vec<EnsembleGroup> {
        if let Some(g) = &self.ensemble_groups {
            return g.clone();
        }
        let names: Vec<String> = self.algorithms.iter().map(|a| a.name().to_string()).collect();
        EnsembleGroup::defaults(&names)
            .into_iter()
            .filter(|g| g.algorithms.len() >= 2 && g.algorithms.iter().all(|a| names.contains(a)))
            .collect()
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::config(m));
        if self.horizons.is_empty() {
            return bad("horizons must not be empty".into());
        }
        let mut seen = BTreeSet::new();
        for &h in &self.horizons {
            if !HORIZON_CHOICES.contains(&h) {
                return bad(format!("horizon {h} not in {HORIZON_CHOICES:?}"));
            }
            if !seen.insert(h) {
                return bad(format!("horizon {h} listed twice"));
            }
        }
        if self.splits == 0 || self.horizons.iter().any(|&h| h < self.splits) {
            return bad(format!("splits must lie in 1..=min(horizons), got {}", self.splits));
        }
        if self.sharpe_window < 2 {
            return bad(format!("sharpe_window must be at least 2, got {}", self.sharpe_window));
        }
        if self.algorithms.is_empty() {
            return bad("algorithms must not be empty".into());
        }
        if self.algorithms.iter().collect::<BTreeSet<_>>().len() != self.algorithms.len() {
            return bad("algorithms listed twice".into());
        }
        if self.algorithms.iter().any(|a| a.cell().is_some()) && self.hpo_iterations == 0 {
            return bad("hpo_iterations must be at least 1".into());
        }
        let names: Vec<&str> = self.algorithms.iter().map(|a| a.name()).collect();
        let mut group_names = BTreeSet::new();
        for g in self.groups() {
            if !group_names.insert(g.name.clone()) {
                return bad(format!("ensemble group `{}` listed twice", g.name));
            }
            if g.name.is_empty() || g.name.contains([',', '_']) {
                return bad(format!("ensemble group name `{}` must be non-empty without `,` or `_`", g.name));
            }
            if g.algorithms.len() < 2 {
                return bad(format!("ensemble group `{}` needs at least two algorithms", g.name));
            }
            if let Some(a) = g.algorithms.iter().find(|a| !names.contains(&a.as_str())) {
                return bad(format!("ensemble group `{}` uses `{a}`, which is not a configured algorithm", g.name));
            }
        }
        match (&self.returns, &self.risk_free, &self.sharpe) {
            (Some(_), Some(_), None) | (None, None, Some(_)) => Ok(()),
            _ => bad("give either `returns` and `risk_free`, or `sharpe`".into()),
        }
    }
}

/// Exit-code classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{stage}: {message}")]
pub struct PipelineError {
    pub stage: String,
    pub kind: ErrorKind,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: &str, kind: ErrorKind, message: impl std::fmt::Display) -> Self {
        PipelineError { stage: stage.into(), kind, message: message.to_string() }
    }

    pub fn config(message: impl std::fmt::Display) -> Self {
        Self::new("config", ErrorKind::Config, message)
    }
}

fn data_err(stage: &str) -> impl Fn(&dyn std::fmt::Display) -> PipelineError + '_ {
    move |e| PipelineError::new(stage, ErrorKind::Data, e)
}

fn numeric_err(stage: &str) -> impl Fn(&dyn std::fmt::Display) -> PipelineError + '_ {
    move |e| PipelineError::new(stage, ErrorKind::Numeric, e)
}

/// Train/validation data of one split, in both scales. Rows are series.
#[derive(Debug, Clone)]
pub struct SplitData {
    pub index: usize,
    pub train: SharpePanel,
    pub actual: Vec<Vec<f64>>,
    pub transformed: SharpePanel,
    pub state: PreprocessState,
    pub actual_transformed: Vec<Vec<f64>>,
}

pub fn prepare_splits(panel: &SharpePanel, plan: &CvPlan) -> Result<Vec<SplitData>, PipelineError> {
    (1..=plan.splits)
        .map(|i| {
            let (train, val) = split_view(panel, plan, i).map_err(|e| data_err("cv")(&e))?;
            let (transformed, state) = fit_transform(&train).map_err(|e| data_err("preprocess")(&e))?;
            let actual_transformed =
                transform_following(&val.values, &state).map_err(|e| data_err("preprocess")(&e))?;
            Ok(SplitData { index: i, train, actual: val.values, transformed, state, actual_transformed })
        })
        .collect()
}

fn all_finite(rows: &[Vec<f64>]) -> bool {
    rows.iter().flatten().all(|x| x.is_finite())
}

/// Stat forecasts per split (original scale, rows are series) plus fitted summaries.
pub type StatOutput = (Vec<Vec<Vec<f64>>>, Vec<(String, usize, stats::FittedStatModel)>);

pub fn forecast_stat(kind: StatKind, splits: &[SplitData], horizon: usize) -> Result<StatOutput, PipelineError> {
    let stage = kind.name();
    let per_split: Vec<_> = splits
        .par_iter()
        .map(|s| {
            let mut rows = Vec::with_capacity(s.transformed.n_series());
            let mut fits = Vec::with_capacity(s.transformed.n_series());
            for (id, row) in s.transformed.fund_ids.iter().zip(&s.transformed.values) {
                let (fit, f) = stats::fit_forecast(kind, row, horizon)
                    .map_err(|e| PipelineError::new(stage, ErrorKind::Numeric, format!("{id}, split {}: {e}", s.index)))?;
                rows.push(f);
                fits.push((id.clone(), s.index, fit));
            }
            let original = inverse_transform(&rows, &s.state).map_err(|e| numeric_err(stage)(&e))?;
            if !all_finite(&original) {
                return Err(PipelineError::new(stage, ErrorKind::Numeric, format!("non-finite forecast on split {}", s.index)));
            }
            Ok((original, fits))
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let mut forecasts = Vec::new();
    let mut fits = Vec::new();
    for (f, m) in per_split {
        forecasts.push(f);
        fits.extend(m);
    }
    Ok((forecasts, fits))
}

/// Validation RMSE (transformed scale) and original-scale forecast of one
/// trained network per split.
fn neural_trial(hp: &HyperParams, splits: &[SplitData], horizon: usize, seed: u64) -> Result<(f64, Vec<Vec<Vec<f64>>>), String> {
    hp.validate().map_err(|e| e.to_string())?;
    let results: Vec<(f64, Vec<Vec<f64>>)> = splits
        .par_iter()
        .map(|s| {
            let ds = build_windows(&s.transformed, horizon).map_err(|e| e.to_string())?;
            let (model, _) =
                neural::train(&ds, hp, derive(seed, &format!("split/{}", s.index))).map_err(|e| e.to_string())?;
            let window = last_window(&s.transformed, horizon).map_err(|e| e.to_string())?;
            let f = model.predict(window.view()).map_err(|e| e.to_string())?;
            // H x N to one row per series.
            let rows: Vec<Vec<f64>> = f.columns().into_iter().map(|c| c.to_vec()).collect();
            let flat_f: Vec<f64> = rows.iter().flatten().copied().collect();
            let flat_a: Vec<f64> = s.actual_transformed.iter().flatten().copied().collect();
            let rmse = metrics::rmse(&flat_a, &flat_f).map_err(|e| e.to_string())?;
            let original = inverse_transform(&rows, &s.state).map_err(|e| e.to_string())?;
            if !rmse.is_finite() || !all_finite(&original) {
                return Err(format!("non-finite forecast on split {}", s.index));
            }
            Ok((rmse, original))
        })
        .collect::<Result<_, String>>()?;
    let objective = results.iter().map(|r| r.0).sum::<f64>() / results.len() as f64;
    Ok((objective, results.into_iter().map(|r| r.1).collect()))
}

/// Tuning outcome for one cell type and horizon.
#[derive(Debug, Clone)]
pub struct TunedNeural {
    pub space: SearchSpace,
    pub result: OptimizeResult,
    pub best: HyperParams,
    /// Forecasts of the best trial, per split (rows are series).
    pub forecasts: Vec<Vec<Vec<f64>>>,
}

/// TPE over the neural space; the objective is mean validation RMSE over splits.
pub fn tune_neural(
    cell: CellKind,
    splits: &[SplitData],
    horizon: usize,
    iterations: usize,
    seed: u64,
) -> Result<TunedNeural, PipelineError> {
    let stage = cell.name();
    let space = SearchSpace::neural();
    let mut best: Option<(f64, Vec<Vec<Vec<f64>>>)> = None;
    let mut n = 0usize;
    let result = hpo::optimize(
        |config, trial_seed| {
            let hp = hpo::to_hyperparams(&space, config, cell).map_err(|e| e.to_string())?;
            let started = std::time::Instant::now();
            let out = neural_trial(&hp, splits, horizon, trial_seed);
            log::info!(
                "{cell} h{horizon} trial {n}: {} ({:.1}s)",
                out.as_ref().map(|o| crate::format::fmt_sig(o.0, 6)).unwrap_or_else(|e| e.clone()),
                started.elapsed().as_secs_f64()
            );
            n += 1;
            let (objective, forecasts) = out?;
            if best.as_ref().is_none_or(|(b, _)| objective < *b) {
                best = Some((objective, forecasts));
            }
            Ok(objective)
        },
        &space,
        iterations,
        seed,
        TpeState::default(),
    )
    .map_err(PipelineError::config)?;
    let (Some(trial), Some((_, forecasts))) = (result.best_trial(), best) else {
        return Err(PipelineError::new(stage, ErrorKind::Numeric, format!("all {iterations} tuning trials failed")));
    };
    let best_hp = hpo::to_hyperparams(&space, &trial.config, cell).map_err(|e| numeric_err(stage)(&e))?;
    Ok(TunedNeural { space, best: best_hp, forecasts, result })
}

pub fn best_config_json(tuned: &TunedNeural) -> String {
    let t = tuned.result.best_trial().expect("tuned has a best trial");
    let best = hpo::BestConfig { trial: t.index, objective: t.objective, hyper_params: tuned.best.clone() };
    serde_json::to_string_pretty(&best).expect("serializes")
}

fn to_array(per_split: &[Vec<Vec<f64>>], horizon: usize) -> Array3<f64> {
    let (s, n) = (per_split.len(), per_split.first().map_or(0, Vec::len));
    Array3::from_shape_fn((s, n, horizon), |(i, j, h)| per_split[i][j][h])
}

fn evaluate_cells(
    algorithm: &str,
    horizon: usize,
    splits: &[SplitData],
    forecasts: &Array3<f64>,
) -> Result<Vec<MetricCell>, PipelineError> {
    let mut cells = Vec::new();
    for (k, s) in splits.iter().enumerate() {
        for (j, id) in s.train.fund_ids.iter().enumerate() {
            let f: Vec<f64> = forecasts.slice(ndarray::s![k, j, ..]).to_vec();
            let values = MetricValues::evaluate(&s.train.values[j], &s.actual[j], &f).map_err(|e| {
                PipelineError::new("metrics", ErrorKind::Numeric, format!("{algorithm}, h{horizon}, {id}, split {}: {e}", s.index))
            })?;
            cells.push(MetricCell { algorithm: algorithm.into(), horizon, split: s.index, fund_id: id.clone(), values });
        }
    }
    Ok(cells)
}

/// Mean MASE per algorithm over all cells, and per series (algorithm x series).
fn mase_tables(cells: &[MetricCell], algs: &[String], funds: &[String]) -> (Vec<(String, f64)>, Array2<f64>) {
    let mut sums: BTreeMap<(&str, &str), (f64, usize)> = BTreeMap::new();
    for c in cells {
        let e = sums.entry((c.algorithm.as_str(), c.fund_id.as_str())).or_insert((0.0, 0));
        e.0 += c.values.mase;
        e.1 += 1;
    }
    let local = Array2::from_shape_fn((algs.len(), funds.len()), |(a, s)| {
        let (sum, k) = sums[&(algs[a].as_str(), funds[s].as_str())];
        sum / k as f64
    });
    let global = algs
        .iter()
        .enumerate()
        .map(|(a, name)| (name.clone(), local.row(a).mean().expect("nonempty")))
        .collect();
    (global, local)
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub cells: Vec<MetricCell>,
    pub manifest: RunManifest,
}

fn load_panel(config: &RunConfig, run: &mut manifest::Run) -> Result<SharpePanel, PipelineError> {
    if let Some(path) = &config.sharpe {
        run.begin("ingest")?;
        run.declare_input(path)?;
        let file = std::fs::File::open(path).map_err(|e| data_err("ingest")(&format!("{}: {e}", path.display())))?;
        let panel = read_sharpe(file).map_err(|e| data_err("ingest")(&e))?;
        run.finish()?;
        return Ok(panel);
    }
    let (rp, fp) = (config.returns.as_ref().expect("validated"), config.risk_free.as_ref().expect("validated"));
    run.begin("ingest")?;
    run.declare_input(rp)?;
    run.declare_input(fp)?;
    let returns = ingest_returns(rp).map_err(|e| data_err("ingest")(&e))?;
    let rf = ingest_risk_free(fp).map_err(|e| data_err("ingest")(&e))?;
    let aligned = align_panel(&returns, &rf, config.min_months).map_err(|e| data_err("ingest")(&e))?;
    if !aligned.dropped.is_empty() {
        log::warn!("dropped funds to keep {} common months: {:?}", config.min_months, aligned.dropped);
    }
    run.finish()?;
    run.begin("sharpe")?;
    let panel = compute_sharpe_panel(&aligned.series, &aligned.risk_free, config.sharpe_window, config.risk_free_conversion)
        .map_err(|e| data_err("sharpe")(&e))?;
    let mut buf = Vec::new();
    write_sharpe(&mut buf, &panel).map_err(|e| data_err("sharpe")(&e))?;
    run.write("sharpe.csv", &buf)?;
    run.finish()?;
    Ok(panel)
}

/// Runs every configured stage and writes artifacts under `config.out_dir`.
/// On failure the manifest marks the failing stage incomplete.
pub fn run_pipeline(config: &RunConfig) -> Result<RunSummary, PipelineError> {
    config.validate()?;
    let mut run = manifest::Run::create(config)?;
    match run_stages(config, &mut run) {
        Ok(cells) => Ok(RunSummary { out_dir: config.out_dir.clone(), cells, manifest: run.manifest.clone() }),
        Err(e) => {
            run.fail();
            Err(e)
        }
    }
}

fn run_stages(config: &RunConfig, run: &mut manifest::Run) -> Result<Vec<MetricCell>, PipelineError> {
    let panel = load_panel(config, run)?;
    let groups = config.groups();
    let mut cells: Vec<MetricCell> = Vec::new();
    let mut forecast_rows: Vec<u8> = b"algorithm,horizon,split,fund_id,step,date,forecast,actual\n".to_vec();

    for &h in &config.horizons {
        let tag = format!("h{h}");
        run.begin(&format!("cv/{tag}"))?;
        let plan =
            plan_splits(panel.len(), h, config.splits, config.min_train).map_err(|e| data_err("cv")(&e))?;
        let mut buf = Vec::new();
        write_plan(&mut buf, &plan).map_err(|e| data_err("cv")(&e))?;
        run.write(&format!("cv_{tag}.csv"), &buf)?;
        run.finish()?;

        run.begin(&format!("preprocess/{tag}"))?;
        let splits = prepare_splits(&panel, &plan)?;
        let states: Vec<&PreprocessState> = splits.iter().map(|s| &s.state).collect();
        run.write(&format!("preprocess_{tag}.json"), serde_json::to_string_pretty(&states).expect("json").as_bytes())?;
        run.finish()?;

        let mut set = ForecastSet::new(h, panel.fund_ids.clone(), splits.len());
        let mut summaries = Vec::new();
        for &alg in &config.algorithms {
            run.begin(&format!("{alg}/{tag}"))?;
            let per_split = if let Some(kind) = alg.stat_kind() {
                let (f, fits) = forecast_stat(kind, &splits, h)?;
                summaries.extend(fits);
                f
            } else {
                let cell = alg.cell().expect("neural algorithm");
                let seed = derive(config.seed, &format!("hpo/{cell}/{tag}"));
                let tuned = tune_neural(cell, &splits, h, config.hpo_iterations, seed)?;
                let mut buf = Vec::new();
                hpo::write_trial_log(&mut buf, &tuned.space, &tuned.result.trials).map_err(|e| data_err("hpo")(&e))?;
                run.write(&format!("hpo/{cell}_{tag}_trials.csv"), &buf)?;
                run.write(&format!("hpo/{cell}_{tag}_best.json"), best_config_json(&tuned).as_bytes())?;
                tuned.forecasts
            };
            let arr = to_array(&per_split, h);
            cells.extend(evaluate_cells(alg.name(), h, &splits, &arr)?);
            set.insert(alg.name(), arr).map_err(|e| numeric_err("ensemble")(&e))?;
            run.finish()?;
        }
        if !summaries.is_empty() {
            run.begin(&format!("stat-models/{tag}"))?;
            let mut buf = Vec::new();
            stats::write_summaries(&mut buf, &summaries).map_err(|e| data_err("stats")(&e))?;
            run.write(&format!("stat_models_{tag}.csv"), &buf)?;
            run.finish()?;
        }

        run.begin(&format!("ensemble/{tag}"))?;
        let base: Vec<MetricCell> = cells.iter().filter(|c| c.horizon == h).cloned().collect();
        let mut weight_rows: Vec<(String, EnsembleWeights)> = Vec::new();
        for g in &groups {
            let (global, local) = mase_tables(&base, &g.algorithms, &panel.fund_ids);
            let schemes = [
                ensemble::simple_weights(&g.algorithms),
                ensemble::global_weights_or_perfect(&global),
                ensemble::local_weights_or_perfect(&g.algorithms, &local),
            ];
            for w in schemes {
                let w = w.map_err(|e| numeric_err("ensemble")(&e))?;
                let combined = ensemble::combine(&set, &w).map_err(|e| numeric_err("ensemble")(&e))?;
                let name = g.member_name(w.scheme);
                cells.extend(evaluate_cells(&name, h, &splits, &combined)?);
                append_forecasts(&mut forecast_rows, &name, h, &splits, &combined);
                weight_rows.push((g.name.clone(), w));
            }
        }
        let mut buf = Vec::new();
        ensemble::write_weights(&mut buf, &weight_rows, &panel.fund_ids).map_err(|e| data_err("ensemble")(&e))?;
        run.write(&format!("weights_{tag}.csv"), &buf)?;
        run.finish()?;

        for alg in &config.algorithms {
            append_forecasts(&mut forecast_rows, alg.name(), h, &splits, set.get(alg.name()).expect("inserted"));
        }
    }

    run.begin("metrics")?;
    run.write("forecasts.csv", &forecast_rows)?;
    let mut buf = Vec::new();
    metrics::write_cells(&mut buf, &cells).map_err(|e| data_err("metrics")(&e))?;
    run.write("metrics.csv", &buf)?;
    run.finish()?;

    run.begin("report")?;
    for (path, bytes) in render_tables(&cells).map_err(|e| numeric_err("report")(&e))? {
        run.write(&format!("report/{path}"), &bytes)?;
    }
    run.finish()?;
    Ok(cells)
}

fn append_forecasts(out: &mut Vec<u8>, name: &str, h: usize, splits: &[SplitData], f: &Array3<f64>) {
    use std::io::Write;
    for (k, s) in splits.iter().enumerate() {
        let first = s.train.start.add_months(s.train.len() as i64);
        for (j, id) in s.train.fund_ids.iter().enumerate() {
            for step in 0..h {
                let date = first.add_months(step as i64);
                writeln!(out, "{name},{h},{},{id},{},{date},{},{}", s.index, step + 1, f[[k, j, step]], s.actual[j][step])
                    .expect("write to vec");
            }
        }
    }
}
