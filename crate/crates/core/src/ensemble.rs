//! Forecast combination: simple averages and inverse-MASE weights, either
//! global (one weight per algorithm) or local (one per algorithm and series).

use std::collections::BTreeMap;
use std::io::Write;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::format::fmt_sig;

/// MASE at or below this counts as a perfect constituent.
pub const PERFECT_MASE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnsembleError {
    #[error("group `{group}` needs at least two algorithms, has {found}")]
    GroupTooSmall { group: String, found: usize },
    #[error("no forecasts for algorithm `{0}`")]
    MissingAlgorithm(String),
    #[error("forecast shape for `{algorithm}` is {found:?}, expected {expected:?}")]
    Shape { algorithm: String, expected: [usize; 3], found: [usize; 3] },
    #[error("algorithm `{algorithm}` has MASE {mase} <= {PERFECT_MASE}")]
    PerfectConstituent { algorithm: String, mase: f64 },
    #[error("MASE for `{algorithm}` is not a positive finite number: {mase}")]
    InvalidMase { algorithm: String, mase: f64 },
    #[error("weights do not match the forecast set: {0}")]
    Mismatch(String),
}

/// H-step forecasts per (algorithm, split, series), original scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSet {
    pub horizon: usize,
    pub fund_ids: Vec<String>,
    pub n_splits: usize,
    /// Each array is (split, series, step).
    pub forecasts: BTreeMap<String, Array3<f64>>,
}

impl ForecastSet {
    pub fn new(horizon: usize, fund_ids: Vec<String>, n_splits: usize) -> Self {
        ForecastSet { horizon, fund_ids, n_splits, forecasts: BTreeMap::new() }
    }

    fn shape(&self) -> [usize; 3] {
        [self.n_splits, self.fund_ids.len(), self.horizon]
    }

    pub fn insert(&mut self, algorithm: &str, values: Array3<f64>) -> Result<(), EnsembleError> {
        let found: [usize; 3] = values.dim().into();
        if found != self.shape() {
            return Err(EnsembleError::Shape { algorithm: algorithm.into(), expected: self.shape(), found });
        }
        self.forecasts.insert(algorithm.into(), values);
        Ok(())
    }

    pub fn get(&self, algorithm: &str) -> Result<&Array3<f64>, EnsembleError> {
        self.forecasts.get(algorithm).ok_or_else(|| EnsembleError::MissingAlgorithm(algorithm.into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Simple,
    Global,
    Local,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Simple, Scheme::Global, Scheme::Local];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Simple => "simple",
            Scheme::Global => "global",
            Scheme::Local => "local",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Scheme::Simple => "Simple average",
            Scheme::Global => "Global weights",
            Scheme::Local => "Local weights",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleGroup {
    pub name: String,
    pub algorithms: Vec<String>,
}

impl EnsembleGroup {
    pub fn new(name: &str, algorithms: &[&str]) -> Self {
        EnsembleGroup { name: name.into(), algorithms: algorithms.iter().map(|s| s.to_string()).collect() }
    }

    /// `all` (every algorithm given), `dl` (lstm, gru) and `stats` (arima, ets, theta).
    pub fn defaults(all: &[String]) -> Vec<EnsembleGroup> {
        vec![
            EnsembleGroup { name: "all".into(), algorithms: all.to_vec() },
            EnsembleGroup::new("dl", &["lstm", "gru"]),
            EnsembleGroup::new("stats", &["arima", "ets", "theta"]),
        ]
    }

    /// Display label used in report tables.
    pub fn label(&self) -> &str {
        match self.name.as_str() {
            "all" => "All algorithms",
            "dl" => "Deep learning",
            "stats" => "Stats",
            other => other,
        }
    }

    /// Name used in the algorithm column of metrics files, e.g. `ens_dl_global`.
    pub fn member_name(&self, scheme: Scheme) -> String {
        format!("ens_{}_{}", self.name, scheme.name())
    }
}

/// Weights per algorithm; one column for simple/global, one per series for local.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleWeights {
    pub scheme: Scheme,
    pub algorithms: Vec<String>,
    /// (algorithm, column).
    pub weights: Array2<f64>,
}

fn inverse_normalized(algorithms: &[String], mase: &[f64]) -> Result<Vec<f64>, EnsembleError> {
    for (a, &m) in algorithms.iter().zip(mase) {
        if !m.is_finite() || m < 0.0 {
            return Err(EnsembleError::InvalidMase { algorithm: a.clone(), mase: m });
        }
        if m <= PERFECT_MASE {
            return Err(EnsembleError::PerfectConstituent { algorithm: a.clone(), mase: m });
        }
    }
    let inv: Vec<f64> = mase.iter().map(|m| 1.0 / m).collect();
    let total: f64 = inv.iter().sum();
    Ok(inv.into_iter().map(|w| w / total).collect())
}

fn check_group(algorithms: &[String]) -> Result<(), EnsembleError> {
    if algorithms.len() < 2 {
        return Err(EnsembleError::GroupTooSmall { group: algorithms.join("+"), found: algorithms.len() });
    }
    Ok(())
}

/// Equal weight per algorithm.
pub fn simple_weights(algorithms: &[String]) -> Result<EnsembleWeights, EnsembleError> {
    check_group(algorithms)?;
    let k = algorithms.len();
    Ok(EnsembleWeights {
        scheme: Scheme::Simple,
        algorithms: algorithms.to_vec(),
        weights: Array2::from_elem((k, 1), 1.0 / k as f64),
    })
}

/// `w_a = (1/MASE_a) / sum_b (1/MASE_b)`.
pub fn global_weights(mase: &[(String, f64)]) -> Result<EnsembleWeights, EnsembleError> {
    let algorithms: Vec<String> = mase.iter().map(|(a, _)| a.clone()).collect();
    let m: Vec<f64> = mase.iter().map(|(_, m)| *m).collect();
    let w = inverse_normalized(&algorithms, &m)?;
    let k = w.len();
    Ok(EnsembleWeights {
        scheme: Scheme::Global,
        weights: Array2::from_shape_vec((k, 1), w).expect("k x 1"),
        algorithms,
    })
}

/// Inverse-MASE weights normalized within each series. `mase` is (algorithm, series).
pub fn local_weights(algorithms: &[String], mase: &Array2<f64>) -> Result<EnsembleWeights, EnsembleError> {
    if mase.nrows() != algorithms.len() {
        return Err(EnsembleError::Mismatch(format!("{} algorithms, {} MASE rows", algorithms.len(), mase.nrows())));
    }
    let mut weights = Array2::zeros(mase.dim());
    for (s, col) in mase.columns().into_iter().enumerate() {
        let w = inverse_normalized(algorithms, &col.to_vec())?;
        weights.column_mut(s).assign(&ndarray::Array1::from(w));
    }
    Ok(EnsembleWeights { scheme: Scheme::Local, algorithms: algorithms.to_vec(), weights })
}

/// Weight shared equally among the perfect constituents, zero elsewhere.
pub fn perfect_weights(mase: &[f64]) -> Vec<f64> {
    let n = mase.iter().filter(|&&m| m <= PERFECT_MASE).count().max(1) as f64;
    mase.iter().map(|&m| if m <= PERFECT_MASE { 1.0 / n } else { 0.0 }).collect()
}

/// Global weights, falling back to [`perfect_weights`] when a constituent is perfect.
pub fn global_weights_or_perfect(mase: &[(String, f64)]) -> Result<EnsembleWeights, EnsembleError> {
    match global_weights(mase) {
        Err(EnsembleError::PerfectConstituent { .. }) => {
            let m: Vec<f64> = mase.iter().map(|(_, m)| *m).collect();
            let w = perfect_weights(&m);
            Ok(EnsembleWeights {
                scheme: Scheme::Global,
                algorithms: mase.iter().map(|(a, _)| a.clone()).collect(),
                weights: Array2::from_shape_vec((w.len(), 1), w).expect("k x 1"),
            })
        }
        other => other,
    }
}

/// Local weights with the same per-series perfect-constituent fallback.
pub fn local_weights_or_perfect(algorithms: &[String], mase: &Array2<f64>) -> Result<EnsembleWeights, EnsembleError> {
    let mut out = Array2::zeros(mase.dim());
    for s in 0..mase.ncols() {
        let col = mase.column(s).to_owned().insert_axis(ndarray::Axis(1));
        let w = match local_weights(algorithms, &col) {
            Ok(w) => w.weights.column(0).to_vec(),
            Err(EnsembleError::PerfectConstituent { .. }) => perfect_weights(&col.column(0).to_vec()),
            Err(e) => return Err(e),
        };
        out.column_mut(s).assign(&ndarray::Array1::from(w));
    }
    Ok(EnsembleWeights { scheme: Scheme::Local, algorithms: algorithms.to_vec(), weights: out })
}

/// Pointwise weighted average of the group's forecasts, shape (split, series, step).
pub fn combine(forecasts: &ForecastSet, weights: &EnsembleWeights) -> Result<Array3<f64>, EnsembleError> {
    check_group(&weights.algorithms)?;
    let n_series = forecasts.fund_ids.len();
    let cols = weights.weights.ncols();
    match weights.scheme {
        Scheme::Local if cols != n_series => {
            return Err(EnsembleError::Mismatch(format!("{cols} weight columns for {n_series} series")))
        }
        Scheme::Simple | Scheme::Global if cols != 1 => {
            return Err(EnsembleError::Mismatch(format!("{cols} weight columns for a {} scheme", weights.scheme.name())))
        }
        _ => {}
    }
    let mut out = Array3::zeros((forecasts.n_splits, n_series, forecasts.horizon));
    for (a, alg) in weights.algorithms.iter().enumerate() {
        let f = forecasts.get(alg)?;
        for s in 0..n_series {
            let w = weights.weights[[a, if cols == 1 { 0 } else { s }]];
            let mut dst = out.slice_mut(ndarray::s![.., s, ..]);
            dst.scaled_add(w, &f.slice(ndarray::s![.., s, ..]));
        }
    }
    Ok(out)
}

/// Unweighted mean of the group.
pub fn simple_average(forecasts: &ForecastSet, group: &[String]) -> Result<Array3<f64>, EnsembleError> {
    combine(forecasts, &simple_weights(group)?)
}

/// `scheme,group,algorithm,fund_id,weight`; `fund_id` is empty except for local weights.
pub fn write_weights<W: Write>(mut w: W, rows: &[(String, EnsembleWeights)], fund_ids: &[String]) -> std::io::Result<()> {
    writeln!(w, "scheme,group,algorithm,fund_id,weight")?;
    for (group, ew) in rows {
        for (a, alg) in ew.algorithms.iter().enumerate() {
            if ew.scheme == Scheme::Local {
                for (s, fund) in fund_ids.iter().enumerate() {
                    writeln!(w, "local,{group},{alg},{fund},{}", fmt_sig(ew.weights[[a, s]], 10))?;
                }
            } else {
                writeln!(w, "{},{group},{alg},,{}", ew.scheme.name(), fmt_sig(ew.weights[[a, 0]], 10))?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn set(values: &[(&str, Vec<f64>)], n_series: usize, h: usize) -> ForecastSet {
        let mut fs = ForecastSet::new(h, (0..n_series).map(|i| format!("F{i}")).collect(), 1);
        for (a, v) in values {
            fs.insert(a, Array3::from_shape_vec((1, n_series, h), v.clone()).unwrap()).unwrap();
        }
        fs
    }

    #[test]
    fn simple_average_cases() {
        let fs = set(&[("a", vec![1.0]), ("b", vec![3.0])], 1, 1);
        assert_eq!(simple_average(&fs, &names(&["a", "b"])).unwrap()[[0, 0, 0]], 2.0);
        assert_eq!(simple_average(&fs, &names(&["b", "a"])).unwrap(), simple_average(&fs, &names(&["a", "b"])).unwrap());
        let same = set(&[("a", vec![1.5, -2.0]), ("b", vec![1.5, -2.0])], 1, 2);
        assert_eq!(simple_average(&same, &names(&["a", "b"])).unwrap(), same.forecasts["a"]);
        assert!(matches!(simple_average(&fs, &names(&["a", "z"])), Err(EnsembleError::MissingAlgorithm(_))));
        assert!(matches!(simple_average(&fs, &names(&["a"])), Err(EnsembleError::GroupTooSmall { .. })));
    }

    #[test]
    fn global_cases() {
        let w = global_weights(&[("a".into(), 1.0), ("b".into(), 3.0)]).unwrap();
        assert_eq!(w.weights.column(0).to_vec(), vec![0.75, 0.25]);
        let w = global_weights(&[("lstm".into(), 1.510), ("gru".into(), 1.546)]).unwrap();
        assert!((w.weights[[0, 0]] - 0.5059).abs() < 1e-4);
        assert!((w.weights[[1, 0]] - 0.4941).abs() < 1e-4);
        let w = global_weights(&[("a".into(), 2.0), ("b".into(), 2.0), ("c".into(), 2.0)]).unwrap();
        assert!(w.weights.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        assert!(matches!(
            global_weights(&[("a".into(), 0.0), ("b".into(), 1.0)]),
            Err(EnsembleError::PerfectConstituent { .. })
        ));
        let w = global_weights_or_perfect(&[("a".into(), 0.0), ("b".into(), 1.0)]).unwrap();
        assert_eq!(w.weights.column(0).to_vec(), vec![1.0, 0.0]);
    }

    #[test]
    fn local_cases() {
        let algs = names(&["a", "b"]);
        let w = local_weights(&algs, &Array2::from_shape_vec((2, 1), vec![2.0, 2.0]).unwrap()).unwrap();
        assert_eq!(w.weights.column(0).to_vec(), vec![0.5, 0.5]);
        // Series s1 MASE {1, 1}, s2 MASE {1, 3}: rows are algorithms.
        let m = Array2::from_shape_vec((2, 2), vec![1.0, 1.0, 1.0, 3.0]).unwrap();
        let w = local_weights(&algs, &m).unwrap();
        assert_eq!(w.weights.column(0).to_vec(), vec![0.5, 0.5]);
        assert_eq!(w.weights.column(1).to_vec(), vec![0.75, 0.25]);
        // Averaging local weights over series is not the global weighting.
        let mean_local = (w.weights[[0, 0]] + w.weights[[0, 1]]) / 2.0;
        let g = global_weights(&[("a".into(), 1.0), ("b".into(), 2.0)]).unwrap();
        assert!((mean_local - g.weights[[0, 0]]).abs() > 1e-3);
    }

    #[test]
    fn combine_cases() {
        let fs = set(&[("a", vec![0.0]), ("b", vec![4.0])], 1, 1);
        let w = global_weights(&[("a".into(), 1.0), ("b".into(), 3.0)]).unwrap();
        assert_eq!(combine(&fs, &w).unwrap()[[0, 0, 0]], 1.0);
        let eq = global_weights(&[("a".into(), 2.0), ("b".into(), 2.0)]).unwrap();
        assert_eq!(combine(&fs, &eq).unwrap(), simple_average(&fs, &names(&["a", "b"])).unwrap());
        let bad = EnsembleWeights { scheme: Scheme::Local, algorithms: names(&["a", "b"]), weights: Array2::zeros((2, 3)) };
        assert!(matches!(combine(&fs, &bad), Err(EnsembleError::Mismatch(_))));
    }

    #[test]
    fn weights_csv() {
        let algs = names(&["a", "b"]);
        let rows = vec![
            ("dl".to_string(), global_weights(&[("a".into(), 1.0), ("b".into(), 3.0)]).unwrap()),
            ("dl".to_string(), local_weights(&algs, &Array2::from_shape_vec((2, 1), vec![1.0, 1.0]).unwrap()).unwrap()),
        ];
        let mut buf = vec![];
        write_weights(&mut buf, &rows, &["F0".to_string()]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "scheme,group,algorithm,fund_id,weight\nglobal,dl,a,,0.75\nglobal,dl,b,,0.25\nlocal,dl,a,F0,0.5\nlocal,dl,b,F0,0.5\n"
        );
    }

    proptest! {
        #[test]
        fn convex_normalized_and_scale_free(
            vals in proptest::collection::vec(-5.0f64..5.0, 3 * 4 * 2),
            mase in proptest::collection::vec(0.1f64..5.0, 3 * 4),
            alpha in 0.1f64..10.0,
        ) {
            let algs = names(&["a", "b", "c"]);
            let mut fs = ForecastSet::new(2, (0..4).map(|i| format!("F{i}")).collect(), 1);
            for (i, a) in algs.iter().enumerate() {
                let v = vals[i * 8..(i + 1) * 8].to_vec();
                fs.insert(a, Array3::from_shape_vec((1, 4, 2), v).unwrap()).unwrap();
            }
            let m = Array2::from_shape_vec((3, 4), mase.clone()).unwrap();
            let global: Vec<(String, f64)> = algs.iter().cloned().zip(m.rows().into_iter().map(|r| r.mean().unwrap())).collect();
            let ws = [simple_weights(&algs).unwrap(), global_weights(&global).unwrap(), local_weights(&algs, &m).unwrap()];
            for w in &ws {
                for col in w.weights.columns() {
                    prop_assert!((col.sum() - 1.0).abs() < 1e-12);
                    prop_assert!(col.iter().all(|&x| x >= 0.0));
                }
                let c = combine(&fs, w).unwrap();
                for ((_, s, h), &x) in c.indexed_iter() {
                    let pts: Vec<f64> = algs.iter().map(|a| fs.forecasts[a][[0, s, h]]).collect();
                    let lo = pts.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = pts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(x >= lo - 1e-12 && x <= hi + 1e-12);
                }
                // Scaling forecasts scales the combination; MASE (and so weights) is unchanged.
                let mut scaled = fs.clone();
                for f in scaled.forecasts.values_mut() {
                    f.mapv_inplace(|v| v * alpha);
                }
                let cs = combine(&scaled, w).unwrap();
                for (a, b) in cs.iter().zip(c.iter()) {
                    prop_assert!((a - alpha * b).abs() < 1e-9 * (1.0 + b.abs() * alpha));
                }
            }
        }

        #[test]
        fn identical_mase_makes_schemes_agree(vals in proptest::collection::vec(-5.0f64..5.0, 8), m in 0.1f64..5.0) {
            let algs = names(&["a", "b"]);
            let mut fs = ForecastSet::new(2, names(&["F0", "F1"]), 1);
            fs.insert("a", Array3::from_shape_vec((1, 2, 2), vals[..4].to_vec()).unwrap()).unwrap();
            fs.insert("b", Array3::from_shape_vec((1, 2, 2), vals[4..].to_vec()).unwrap()).unwrap();
            let s = simple_average(&fs, &algs).unwrap();
            let g = combine(&fs, &global_weights(&[("a".into(), m), ("b".into(), m)]).unwrap()).unwrap();
            let l = combine(&fs, &local_weights(&algs, &Array2::from_elem((2, 2), m)).unwrap()).unwrap();
            prop_assert_eq!(&s, &g);
            prop_assert_eq!(&s, &l);
        }
    }
}
