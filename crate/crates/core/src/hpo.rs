//! Tree-structured Parzen estimator over a generic mixed search space.
//!
//! Reals (and integers, treated as reals on `[lo - 0.5, hi + 0.5]`) are
//! modelled on their transformed scale by truncated Gaussian mixtures;
//! categoricals by add-one smoothed frequencies. Each mixture also carries
//! one wide prior component, so an empty set still has a proper density.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::format::fmt_sig;
use crate::neural::{Activation, CellKind, HyperParams, BATCH_CHOICES, EPOCH_RANGE, LAYER_RANGE, LR_RANGE, UNIT_CHOICES, WEIGHT_DECAY_MAX};

pub const DEFAULT_GAMMA: f64 = 0.25;
pub const DEFAULT_STARTUP: usize = 10;
pub const DEFAULT_CANDIDATES: usize = 24;
pub const DEFAULT_ITERATIONS: usize = 50;
/// Smallest kernel bandwidth as a fraction of the dimension's range.
const MIN_BANDWIDTH_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HpoError {
    #[error("dimension `{0}` is empty or has non-finite bounds")]
    EmptyDimension(String),
    #[error("dimension `{dim}` conditions on unknown or later dimension")]
    BadCondition { dim: String },
    #[error("gamma must lie in (0, 1), got {0}")]
    BadGamma(f64),
    #[error("at least one iteration is required")]
    NoIterations,
    #[error("configuration does not fit the search space: {0}")]
    ConfigMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DimKind {
    LogUniform { lo: f64, hi: f64 },
    Uniform { lo: f64, hi: f64 },
    Int { lo: i64, hi: i64 },
    Categorical { choices: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub kind: DimKind,
    /// Active only when dimension `.0` (earlier in the space) takes choice `.1`.
    pub condition: Option<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Real(f64),
    Int(i64),
    Choice(usize),
}

/// One point of a space; `None` marks an inactive conditional dimension.
pub type Config = Vec<Option<Value>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub dims: Vec<Dimension>,
}

impl Dimension {
    fn real(name: &str, kind: DimKind) -> Self {
        Dimension { name: name.into(), kind, condition: None }
    }

    /// Bounds on the modelling scale for real-like dimensions.
    fn scale_bounds(&self) -> Option<(f64, f64)> {
        match self.kind {
            DimKind::LogUniform { lo, hi } => Some((lo.ln(), hi.ln())),
            DimKind::Uniform { lo, hi } => Some((lo, hi)),
            DimKind::Int { lo, hi } => Some((lo as f64 - 0.5, hi as f64 + 0.5)),
            DimKind::Categorical { .. } => None,
        }
    }

    fn to_scale(&self, v: Value) -> f64 {
        match (v, &self.kind) {
            (Value::Real(x), DimKind::LogUniform { .. }) => x.ln(),
            (Value::Real(x), _) => x,
            (Value::Int(i), _) => i as f64,
            (Value::Choice(c), _) => c as f64,
        }
    }

    fn from_scale(&self, s: f64) -> Value {
        match self.kind {
            DimKind::LogUniform { lo, hi } => Value::Real(s.exp().clamp(lo, hi)),
            DimKind::Uniform { .. } => Value::Real(s),
            DimKind::Int { lo, hi } => Value::Int((s.round() as i64).clamp(lo, hi)),
            DimKind::Categorical { .. } => unreachable!("categorical has no real scale"),
        }
    }

    fn contains(&self, v: Value) -> bool {
        match (&self.kind, v) {
            (DimKind::LogUniform { lo, hi }, Value::Real(x)) => (*lo..=*hi).contains(&x),
            (DimKind::Uniform { lo, hi }, Value::Real(x)) => *lo <= x && x < *hi,
            (DimKind::Int { lo, hi }, Value::Int(i)) => (*lo..=*hi).contains(&i),
            (DimKind::Categorical { choices }, Value::Choice(c)) => c < choices.len(),
            _ => false,
        }
    }

    fn sample_uniform(&self, rng: &mut impl Rng) -> Value {
        match &self.kind {
            DimKind::LogUniform { lo, hi } => Value::Real(rng.random_range(lo.ln()..=hi.ln()).exp().clamp(*lo, *hi)),
            DimKind::Uniform { lo, hi } => Value::Real(rng.random_range(*lo..*hi)),
            DimKind::Int { lo, hi } => Value::Int(rng.random_range(*lo..=*hi)),
            DimKind::Categorical { choices } => Value::Choice(rng.random_range(0..choices.len())),
        }
    }

    /// Text form used in trial logs.
    pub fn display(&self, v: Value) -> String {
        match (v, &self.kind) {
            (Value::Real(x), _) => fmt_sig(x, 10),
            (Value::Int(i), _) => i.to_string(),
            (Value::Choice(c), DimKind::Categorical { choices }) => choices[c].clone(),
            (Value::Choice(c), _) => c.to_string(),
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<(), HpoError> {
        for (i, d) in self.dims.iter().enumerate() {
            let ok = match &d.kind {
                DimKind::LogUniform { lo, hi } => lo.is_finite() && hi.is_finite() && *lo > 0.0 && lo < hi,
                DimKind::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
                DimKind::Int { lo, hi } => lo <= hi,
                DimKind::Categorical { choices } => !choices.is_empty(),
            };
            if !ok {
                return Err(HpoError::EmptyDimension(d.name.clone()));
            }
            if let Some((p, c)) = d.condition {
                let parent_ok = p < i
                    && matches!(&self.dims[p].kind, DimKind::Categorical { choices } if c < choices.len());
                if !parent_ok {
                    return Err(HpoError::BadCondition { dim: d.name.clone() });
                }
            }
        }
        Ok(())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.dims.iter().position(|d| d.name == name)
    }

    fn active(&self, i: usize, partial: &[Option<Value>]) -> bool {
        match self.dims[i].condition {
            None => true,
            Some((p, c)) => partial[p] == Some(Value::Choice(c)),
        }
    }

    /// Uniform draw over the space, honouring conditions.
    pub fn sample(&self, rng: &mut impl Rng) -> Config {
        let mut cfg: Config = Vec::with_capacity(self.dims.len());
        for (i, d) in self.dims.iter().enumerate() {
            let v = self.active(i, &cfg).then(|| d.sample_uniform(rng));
            cfg.push(v);
        }
        cfg
    }

    /// Bounds and conditionality hold.
    pub fn contains(&self, cfg: &Config) -> bool {
        cfg.len() == self.dims.len()
            && self.dims.iter().enumerate().all(|(i, d)| match (self.active(i, cfg), cfg[i]) {
                (true, Some(v)) => d.contains(v),
                (false, None) => true,
                _ => false,
            })
    }

    /// Neural tuning space. The cell type is not a dimension: each cell
    /// type gets its own optimization.
    pub fn neural() -> SearchSpace {
        let cats = |v: &[&str]| DimKind::Categorical { choices: v.iter().map(|s| s.to_string()).collect() };
        let units: Vec<String> = UNIT_CHOICES.iter().map(|u| u.to_string()).collect();
        let batches: Vec<String> = BATCH_CHOICES.iter().map(|u| u.to_string()).collect();
        let mut dims = vec![
            Dimension::real("learning_rate", DimKind::LogUniform { lo: LR_RANGE.0, hi: LR_RANGE.1 }),
            Dimension::real("n_layers", DimKind::Int { lo: LAYER_RANGE.0 as i64, hi: LAYER_RANGE.1 as i64 }),
            Dimension::real("units", DimKind::Categorical { choices: units }),
            Dimension::real("dropout_input", DimKind::Uniform { lo: 0.0, hi: 1.0 }),
            Dimension::real("dropout_hidden", DimKind::Uniform { lo: 0.0, hi: 1.0 }),
            Dimension::real("batch_size", DimKind::Categorical { choices: batches }),
            Dimension::real("use_batchnorm", cats(&["false", "true"])),
            Dimension::real("bn_before_dropout", cats(&["false", "true"])),
            Dimension::real("activation", cats(&["tanh", "relu"])),
            Dimension::real("weight_decay", DimKind::Uniform { lo: 0.0, hi: WEIGHT_DECAY_MAX }),
            Dimension::real("epochs", DimKind::Int { lo: EPOCH_RANGE.0 as i64, hi: EPOCH_RANGE.1 as i64 }),
        ];
        dims[7].condition = Some((6, 1));
        SearchSpace { dims }
    }
}

fn get<'a>(space: &'a SearchSpace, cfg: &Config, name: &str) -> Result<(&'a Dimension, Option<Value>), HpoError> {
    let i = space.index_of(name).ok_or_else(|| HpoError::ConfigMismatch(format!("no dimension `{name}`")))?;
    Ok((&space.dims[i], cfg.get(i).copied().flatten()))
}

/// Maps a point of [`SearchSpace::neural`] to hyper-parameters.
pub fn to_hyperparams(space: &SearchSpace, cfg: &Config, cell: CellKind) -> Result<HyperParams, HpoError> {
    let real = |name: &str| match get(space, cfg, name)? {
        (_, Some(Value::Real(x))) => Ok(x),
        _ => Err(HpoError::ConfigMismatch(format!("`{name}` is not a real"))),
    };
    let int = |name: &str| match get(space, cfg, name)? {
        (_, Some(Value::Int(i))) if i >= 0 => Ok(i as usize),
        _ => Err(HpoError::ConfigMismatch(format!("`{name}` is not an integer"))),
    };
    let choice = |name: &str| match get(space, cfg, name)? {
        (d, Some(v @ Value::Choice(_))) => Ok(Some(d.display(v))),
        (_, None) => Ok(None),
        _ => Err(HpoError::ConfigMismatch(format!("`{name}` is not categorical"))),
    };
    let parse_usize = |name: &str| -> Result<usize, HpoError> {
        choice(name)?
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| HpoError::ConfigMismatch(format!("`{name}` missing")))
    };
    let flag = |name: &str| -> Result<bool, HpoError> { Ok(choice(name)?.as_deref() == Some("true")) };
    let activation = choice("activation")?
        .and_then(|s| s.parse::<Activation>().ok())
        .ok_or_else(|| HpoError::ConfigMismatch("`activation` missing".into()))?;
    Ok(HyperParams {
        learning_rate: real("learning_rate")?,
        n_layers: int("n_layers")?,
        units: parse_usize("units")?,
        dropout_input: real("dropout_input")?,
        dropout_hidden: real("dropout_hidden")?,
        batch_size: parse_usize("batch_size")?,
        use_batchnorm: flag("use_batchnorm")?,
        bn_before_dropout: flag("bn_before_dropout")?,
        activation,
        weight_decay: real("weight_decay")?,
        epochs: int("epochs")?,
        cell,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub config: Config,
    /// `+inf` for failed trials.
    pub objective: f64,
    pub status: TrialStatus,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TpeState {
    pub history: Vec<Trial>,
    pub gamma: f64,
    pub n_startup: usize,
    pub n_candidates: usize,
}

impl Default for TpeState {
    fn default() -> Self {
        TpeState { history: vec![], gamma: DEFAULT_GAMMA, n_startup: DEFAULT_STARTUP, n_candidates: DEFAULT_CANDIDATES }
    }
}

/// Truncated Gaussian mixture on `[lo, hi]`.
struct Parzen {
    lo: f64,
    hi: f64,
    mus: Vec<f64>,
    sigmas: Vec<f64>,
    /// Truncation mass of each component.
    masses: Vec<f64>,
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2))
}

impl Parzen {
    fn new(obs: &[f64], lo: f64, hi: f64) -> Self {
        let range = hi - lo;
        let bw = (range / (obs.len().max(1) as f64).sqrt()).max(MIN_BANDWIDTH_FRACTION * range);
        let mut mus: Vec<f64> = obs.to_vec();
        let mut sigmas = vec![bw; obs.len()];
        mus.push(0.5 * (lo + hi));
        sigmas.push(range);
        let masses = mus
            .iter()
            .zip(&sigmas)
            .map(|(m, s)| (normal_cdf((hi - m) / s) - normal_cdf((lo - m) / s)).max(1e-300))
            .collect();
        Parzen { lo, hi, mus, sigmas, masses }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        let k = rng.random_range(0..self.mus.len());
        let (m, s) = (self.mus[k], self.sigmas[k]);
        for _ in 0..64 {
            let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng);
            let x = m + s * z;
            if x >= self.lo && x < self.hi {
                return x;
            }
        }
        m.clamp(self.lo, self.hi)
    }

    fn log_pdf(&self, x: f64) -> f64 {
        let n = self.mus.len() as f64;
        let p: f64 = self
            .mus
            .iter()
            .zip(&self.sigmas)
            .zip(&self.masses)
            .map(|((m, s), z)| {
                let u = (x - m) / s;
                (-0.5 * u * u).exp() / (s * (2.0 * std::f64::consts::PI).sqrt() * z)
            })
            .sum::<f64>()
            / n;
        p.max(1e-300).ln()
    }
}

enum Density {
    Real(Parzen),
    Cat(Vec<f64>),
}

impl Density {
    fn fit(dim: &Dimension, obs: &[Value]) -> Self {
        match &dim.kind {
            DimKind::Categorical { choices } => {
                let mut counts = vec![1.0; choices.len()];
                for v in obs {
                    if let Value::Choice(c) = v {
                        counts[*c] += 1.0;
                    }
                }
                let total: f64 = counts.iter().sum();
                Density::Cat(counts.into_iter().map(|c| c / total).collect())
            }
            _ => {
                let (lo, hi) = dim.scale_bounds().expect("real-like");
                let xs: Vec<f64> = obs.iter().map(|v| dim.to_scale(*v)).collect();
                Density::Real(Parzen::new(&xs, lo, hi))
            }
        }
    }

    fn sample(&self, dim: &Dimension, rng: &mut impl Rng) -> Value {
        match self {
            Density::Cat(p) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (i, pi) in p.iter().enumerate() {
                    acc += pi;
                    if u < acc {
                        return Value::Choice(i);
                    }
                }
                Value::Choice(p.len() - 1)
            }
            Density::Real(pz) => dim.from_scale(pz.sample(rng)),
        }
    }

    fn log_pdf(&self, dim: &Dimension, v: Value) -> f64 {
        match (self, v) {
            (Density::Cat(p), Value::Choice(c)) => p[c].ln(),
            (Density::Real(pz), v) => pz.log_pdf(dim.to_scale(v)),
            _ => f64::NEG_INFINITY,
        }
    }
}

impl TpeState {
    pub fn new(gamma: f64, n_startup: usize, n_candidates: usize) -> Result<Self, HpoError> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(HpoError::BadGamma(gamma));
        }
        Ok(TpeState { history: vec![], gamma, n_startup, n_candidates: n_candidates.max(1) })
    }

    pub fn observe(&mut self, trial: Trial) {
        self.history.push(trial);
    }

    /// History indices split into (good, bad). Failed trials sort last;
    /// ties are broken by trial order.
    fn split(&self) -> (Vec<usize>, Vec<usize>) {
        let mut idx: Vec<usize> = (0..self.history.len()).collect();
        let key = |t: &Trial| if t.status == TrialStatus::Ok { t.objective } else { f64::INFINITY };
        idx.sort_by(|&a, &b| key(&self.history[a]).total_cmp(&key(&self.history[b])).then(a.cmp(&b)));
        let n_good = ((self.gamma * idx.len() as f64).ceil() as usize).max(1);
        let mut good: Vec<usize> =
            idx[..n_good].iter().copied().filter(|&i| self.history[i].status == TrialStatus::Ok).collect();
        good.sort_unstable();
        let mut bad: Vec<usize> = idx.iter().copied().filter(|i| !good.contains(i)).collect();
        bad.sort_unstable();
        (good, bad)
    }

    pub fn suggest(&self, space: &SearchSpace, rng: &mut impl Rng) -> Result<Config, HpoError> {
        space.validate()?;
        if self.history.len() < self.n_startup {
            return Ok(space.sample(rng));
        }
        let (good, bad) = self.split();
        let obs = |set: &[usize], d: usize| -> Vec<Value> {
            set.iter().filter_map(|&i| self.history[i].config.get(d).copied().flatten()).collect()
        };
        let l: Vec<Density> = space.dims.iter().enumerate().map(|(d, dim)| Density::fit(dim, &obs(&good, d))).collect();
        let g: Vec<Density> = space.dims.iter().enumerate().map(|(d, dim)| Density::fit(dim, &obs(&bad, d))).collect();
        let mut best: Option<(f64, Config)> = None;
        for _ in 0..self.n_candidates {
            let mut cfg: Config = Vec::with_capacity(space.dims.len());
            let mut score = 0.0;
            for (d, dim) in space.dims.iter().enumerate() {
                if space.active(d, &cfg) {
                    let v = l[d].sample(dim, rng);
                    score += l[d].log_pdf(dim, v) - g[d].log_pdf(dim, v);
                    cfg.push(Some(v));
                } else {
                    cfg.push(None);
                }
            }
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, cfg));
            }
        }
        Ok(best.expect("at least one candidate").1)
    }

    pub fn best(&self) -> Option<&Trial> {
        self.history
            .iter()
            .filter(|t| t.status == TrialStatus::Ok)
            .min_by(|a, b| a.objective.total_cmp(&b.objective).then(a.index.cmp(&b.index)))
    }
}

/// Independent stream for the objective of trial `index`: does not consume
/// the suggestion generator.
pub fn trial_seed(seed: u64, index: usize) -> u64 {
    crate::seed::derive(seed, &format!("trial/{index}"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    pub trials: Vec<Trial>,
    /// Index into `trials`, `None` if every trial failed.
    pub best: Option<usize>,
}

impl OptimizeResult {
    pub fn best_trial(&self) -> Option<&Trial> {
        self.best.map(|i| &self.trials[i])
    }
}

/// Sequential suggest / evaluate / observe loop. The objective receives the
/// configuration and a per-trial seed; an `Err` marks the trial failed.
pub fn optimize<F>(
    mut objective: F,
    space: &SearchSpace,
    iterations: usize,
    seed: u64,
    mut state: TpeState,
) -> Result<OptimizeResult, HpoError>
where
    F: FnMut(&Config, u64) -> Result<f64, String>,
{
    space.validate()?;
    if iterations == 0 {
        return Err(HpoError::NoIterations);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for index in 0..iterations {
        let config = state.suggest(space, &mut rng)?;
        let tseed = trial_seed(seed, index);
        let (objective, status) = match objective(&config, tseed) {
            Ok(v) if v.is_finite() => (v, TrialStatus::Ok),
            Ok(v) => {
                log::warn!("trial {index}: non-finite objective {v}");
                (f64::INFINITY, TrialStatus::Failed)
            }
            Err(e) => {
                log::warn!("trial {index} failed: {e}");
                (f64::INFINITY, TrialStatus::Failed)
            }
        };
        state.observe(Trial { index, config, objective, status, seed: tseed });
    }
    let best = state.best().map(|t| t.index);
    Ok(OptimizeResult { trials: state.history, best })
}

/// `optimize` with the startup phase covering the whole budget.
pub fn random_search<F>(objective: F, space: &SearchSpace, iterations: usize, seed: u64) -> Result<OptimizeResult, HpoError>
where
    F: FnMut(&Config, u64) -> Result<f64, String>,
{
    let state = TpeState { n_startup: iterations, ..TpeState::default() };
    optimize(objective, space, iterations, seed, state)
}

/// `trial,status,objective,<one column per dimension>`; inactive values are empty.
pub fn write_trial_log<W: Write>(mut w: W, space: &SearchSpace, trials: &[Trial]) -> std::io::Result<()> {
    let names: Vec<&str> = space.dims.iter().map(|d| d.name.as_str()).collect();
    writeln!(w, "trial,status,objective,{}", names.join(","))?;
    for t in trials {
        let status = match t.status {
            TrialStatus::Ok => "ok",
            TrialStatus::Failed => "failed",
        };
        let values: Vec<String> =
            space.dims.iter().zip(&t.config).map(|(d, v)| v.map(|v| d.display(v)).unwrap_or_default()).collect();
        let obj = if t.objective.is_finite() { fmt_sig(t.objective, 10) } else { "inf".into() };
        writeln!(w, "{},{status},{obj},{}", t.index, values.join(","))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestConfig {
    pub trial: usize,
    pub objective: f64,
    pub hyper_params: HyperParams,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> SearchSpace {
        SearchSpace { dims: vec![Dimension::real("x", DimKind::Uniform { lo: 0.0, hi: 1.0 })] }
    }

    fn x_of(c: &Config) -> f64 {
        match c[0] {
            Some(Value::Real(x)) => x,
            _ => panic!("real"),
        }
    }

    fn quadratic(c: &Config, _: u64) -> Result<f64, String> {
        Ok((x_of(c) - 0.3).powi(2))
    }

    #[test]
    fn startup_draws_are_in_bounds() {
        let space = SearchSpace::neural();
        space.validate().unwrap();
        let state = TpeState::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let c = state.suggest(&space, &mut rng).unwrap();
            assert!(space.contains(&c));
            to_hyperparams(&space, &c, CellKind::Gru).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn tpe_suggestions_respect_conditions() {
        let space = SearchSpace::neural();
        let res = optimize(
            |c, _| {
                let hp = to_hyperparams(&space, c, CellKind::Lstm).map_err(|e| e.to_string())?;
                hp.validate().map_err(|e| e.to_string())?;
                Ok(hp.learning_rate.ln().abs() + hp.dropout_input + if hp.use_batchnorm { 0.0 } else { 1.0 })
            },
            &space,
            40,
            3,
            TpeState::default(),
        )
        .unwrap();
        let bn = space.index_of("use_batchnorm").unwrap();
        let order = space.index_of("bn_before_dropout").unwrap();
        for t in &res.trials {
            assert_eq!(t.status, TrialStatus::Ok);
            assert!(space.contains(&t.config));
            assert_eq!(t.config[order].is_some(), t.config[bn] == Some(Value::Choice(1)));
        }
    }

    #[test]
    fn default_constants() {
        let s = TpeState::default();
        assert_eq!((s.gamma, s.n_startup, s.n_candidates), (0.25, 10, 24));
        assert!(matches!(TpeState::new(1.0, 10, 24), Err(HpoError::BadGamma(_))));
        assert!(matches!(TpeState::new(0.0, 10, 24), Err(HpoError::BadGamma(_))));
    }

    #[test]
    fn bad_spaces_rejected() {
        let s = SearchSpace { dims: vec![Dimension::real("x", DimKind::Uniform { lo: 1.0, hi: 1.0 })] };
        assert!(matches!(s.validate(), Err(HpoError::EmptyDimension(_))));
        let s = SearchSpace { dims: vec![Dimension::real("c", DimKind::Categorical { choices: vec![] })] };
        assert!(s.validate().is_err());
        let mut s = line();
        s.dims[0].condition = Some((0, 0));
        assert!(matches!(s.validate(), Err(HpoError::BadCondition { .. })));
    }

    #[test]
    fn single_iteration_returns_the_random_draw() {
        let res = optimize(quadratic, &line(), 1, 9, TpeState::default()).unwrap();
        assert_eq!(res.trials.len(), 1);
        assert_eq!(res.best, Some(0));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(res.trials[0].config, line().sample(&mut rng));
        assert!(matches!(optimize(quadratic, &line(), 0, 9, TpeState::default()), Err(HpoError::NoIterations)));
    }

    #[test]
    fn failed_trials_never_good_and_loop_continues() {
        let mut n = 0;
        let res = optimize(
            |c, _| {
                n += 1;
                if n % 3 == 0 {
                    Err("boom".into())
                } else {
                    quadratic(c, 0)
                }
            },
            &line(),
            30,
            4,
            TpeState::default(),
        )
        .unwrap();
        assert_eq!(res.trials.len(), 30);
        assert_eq!(res.trials.iter().filter(|t| t.status == TrialStatus::Failed).count(), 10);
        assert!(res.trials.iter().all(|t| (t.status == TrialStatus::Ok) == t.objective.is_finite()));
        let state = TpeState { history: res.trials.clone(), ..TpeState::default() };
        let (good, _) = state.split();
        assert!(good.iter().all(|&i| state.history[i].status == TrialStatus::Ok));
        assert_eq!(res.best_trial().unwrap().status, TrialStatus::Ok);
    }

    #[test]
    fn equal_objectives_split_by_order() {
        let space = line();
        let mut state = TpeState::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for index in 0..12 {
            let config = space.sample(&mut rng);
            state.observe(Trial { index, config, objective: 1.0, status: TrialStatus::Ok, seed: 0 });
        }
        let (good, bad) = state.split();
        assert_eq!(good, vec![0, 1, 2]);
        assert_eq!(bad, (3..12).collect::<Vec<_>>());
        let c = state.suggest(&space, &mut rng).unwrap();
        assert!(space.contains(&c));
        // Re-observing an identical configuration is allowed.
        let again = state.history[0].clone();
        state.observe(Trial { index: 12, ..again });
        assert_eq!(state.history.len(), 13);
    }

    #[test]
    fn full_startup_is_random_search() {
        let space = SearchSpace::neural();
        let res = random_search(|_, _| Ok(0.5), &space, 25, 77).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for t in &res.trials {
            assert_eq!(t.config, space.sample(&mut rng));
        }
    }

    #[test]
    fn best_so_far_monotone() {
        let res = optimize(quadratic, &line(), 50, 5, TpeState::default()).unwrap();
        let mut best = f64::INFINITY;
        let mut prev = f64::INFINITY;
        for t in &res.trials {
            best = best.min(t.objective);
            assert!(best <= prev);
            prev = best;
        }
        assert_eq!(res.best_trial().unwrap().objective, best);
    }

    #[test]
    fn trial_log_format() {
        let space = SearchSpace::neural();
        let res = random_search(|_, _| Ok(0.25), &space, 3, 1).unwrap();
        let mut buf = vec![];
        write_trial_log(&mut buf, &space, &res.trials).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "trial,status,objective,learning_rate,n_layers,units,dropout_input,dropout_hidden,batch_size,use_batchnorm,bn_before_dropout,activation,weight_decay,epochs"
        );
        for (i, l) in lines.enumerate() {
            assert!(l.starts_with(&format!("{i},ok,0.25,")));
            assert_eq!(l.split(',').count(), 14);
        }
    }
}
