//! Point-forecast accuracy measures and their two-stage aggregation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

/// Denominators of SMDAPE terms below this are rejected.
pub const SMDAPE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("actual has {actual} values but forecast has {forecast}")]
    LengthMismatch { actual: usize, forecast: usize },
    #[error("empty input")]
    Empty,
    #[error("near-zero denominator |X+F| at t = {0:?}")]
    NearZeroDenominator(Vec<usize>),
    #[error("MASE needs a non-constant train series of length >= 2")]
    ZeroScale,
    #[error("missing metric cell for ({algorithm}, horizon {horizon}, {fund_id}, split {split})")]
    MissingCell { algorithm: String, horizon: usize, fund_id: String, split: usize },
}

fn errors(actual: &[f64], forecast: &[f64]) -> Result<Vec<f64>, MetricError> {
    if actual.len() != forecast.len() {
        return Err(MetricError::LengthMismatch { actual: actual.len(), forecast: forecast.len() });
    }
    if actual.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(actual.iter().zip(forecast).map(|(x, f)| x - f).collect())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Midpoint of the two central values for even lengths.
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Sample standard deviation; zero for a single value.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn rmse(actual: &[f64], forecast: &[f64]) -> Result<f64, MetricError> {
    let e = errors(actual, forecast)?;
    Ok((e.iter().map(|e| e * e).sum::<f64>() / e.len() as f64).sqrt())
}

pub fn mae(actual: &[f64], forecast: &[f64]) -> Result<f64, MetricError> {
    let e = errors(actual, forecast)?;
    Ok(e.iter().map(|e| e.abs()).sum::<f64>() / e.len() as f64)
}

/// Median of `200 |X - F| / |X + F|`, in percent.
pub fn smdape(actual: &[f64], forecast: &[f64]) -> Result<f64, MetricError> {
    errors(actual, forecast)?;
    let bad: Vec<usize> = actual
        .iter()
        .zip(forecast)
        .enumerate()
        .filter(|(_, (x, f))| (*x + *f).abs() < SMDAPE_TOLERANCE)
        .map(|(t, _)| t)
        .collect();
    if !bad.is_empty() {
        return Err(MetricError::NearZeroDenominator(bad));
    }
    let terms: Vec<f64> = actual.iter().zip(forecast).map(|(x, f)| 200.0 * (x - f).abs() / (x + f).abs()).collect();
    Ok(median(&terms))
}

/// Mean of `arctan |e / X|` in radians; `X = 0` contributes `pi/2` unless the error is also zero.
pub fn maape(actual: &[f64], forecast: &[f64]) -> Result<f64, MetricError> {
    let e = errors(actual, forecast)?;
    let terms: Vec<f64> = e
        .iter()
        .zip(actual)
        .map(|(e, x)| if *e == 0.0 { 0.0 } else { (e / x).abs().atan() })
        .collect();
    Ok(mean(&terms))
}

/// Mean absolute one-step change of the in-sample series.
pub fn naive_scale(train: &[f64]) -> Result<f64, MetricError> {
    if train.len() < 2 {
        return Err(MetricError::ZeroScale);
    }
    let d = train.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (train.len() - 1) as f64;
    if d <= 0.0 {
        return Err(MetricError::ZeroScale);
    }
    Ok(d)
}

/// Errors divided by the in-sample naive MAE.
pub fn scaled_errors(train: &[f64], actual: &[f64], forecast: &[f64]) -> Result<Vec<f64>, MetricError> {
    let scale = naive_scale(train)?;
    Ok(errors(actual, forecast)?.into_iter().map(|e| e / scale).collect())
}

pub fn mase(train: &[f64], actual: &[f64], forecast: &[f64]) -> Result<f64, MetricError> {
    let q = scaled_errors(train, actual, forecast)?;
    Ok(q.iter().map(|q| q.abs()).sum::<f64>() / q.len() as f64)
}

/// The five measures for one series on one split. `maape` is in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub mase: f64,
    pub rmse: f64,
    pub mae: f64,
    pub smdape: f64,
    pub maape: f64,
}

impl MetricValues {
    pub const NAMES: [&'static str; 5] = ["MASE", "RMSE", "MAE", "SMDAPE", "MAAPE"];

    pub fn evaluate(train: &[f64], actual: &[f64], forecast: &[f64]) -> Result<Self, MetricError> {
        Ok(Self {
            mase: mase(train, actual, forecast)?,
            rmse: rmse(actual, forecast)?,
            mae: mae(actual, forecast)?,
            smdape: smdape(actual, forecast)?,
            maape: maape(actual, forecast)?,
        })
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.mase, self.rmse, self.mae, self.smdape, self.maape]
    }

    /// Values as reported in tables: MAAPE scaled by 100.
    pub fn reported(&self) -> [f64; 5] {
        [self.mase, self.rmse, self.mae, self.smdape, self.maape * 100.0]
    }
}

/// One row of the per-cell metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCell {
    pub algorithm: String,
    pub horizon: usize,
    pub split: usize,
    pub fund_id: String,
    pub values: MetricValues,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        Self { mean: mean(xs), median: median(xs), sd: sample_sd(xs) }
    }
}

/// Per (algorithm, horizon): a summary over series of each metric, where every
/// series value is first averaged over its splits. MAAPE is in radians here.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricReport {
    pub entries: BTreeMap<(String, usize), [Summary; 5]>,
    /// Split-averaged values per series, keyed like `entries`, in fund order.
    pub per_series: BTreeMap<(String, usize), Vec<(String, MetricValues)>>,
}

pub fn aggregate_report(cells: &[MetricCell]) -> Result<MetricReport, MetricError> {
    let mut by_key: BTreeMap<(String, usize), BTreeMap<(String, usize), MetricValues>> = BTreeMap::new();
    let mut funds: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
    let mut splits: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for c in cells {
        by_key
            .entry((c.algorithm.clone(), c.horizon))
            .or_default()
            .insert((c.fund_id.clone(), c.split), c.values);
        funds.entry(c.horizon).or_default().insert(c.fund_id.clone());
        splits.entry(c.horizon).or_default().insert(c.split);
    }
    let mut report = MetricReport::default();
    for ((alg, h), table) in by_key {
        let mut per_series = Vec::new();
        for fund in &funds[&h] {
            let mut sums = [0.0; 5];
            for &split in &splits[&h] {
                let v = table.get(&(fund.clone(), split)).ok_or_else(|| MetricError::MissingCell {
                    algorithm: alg.clone(),
                    horizon: h,
                    fund_id: fund.clone(),
                    split,
                })?;
                for (s, x) in sums.iter_mut().zip(v.as_array()) {
                    *s += x;
                }
            }
            let k = splits[&h].len() as f64;
            let avg = sums.map(|s| s / k);
            per_series.push((
                fund.clone(),
                MetricValues { mase: avg[0], rmse: avg[1], mae: avg[2], smdape: avg[3], maape: avg[4] },
            ));
        }
        let summaries = std::array::from_fn(|m| {
            let xs: Vec<f64> = per_series.iter().map(|(_, v)| v.as_array()[m]).collect();
            Summary::of(&xs)
        });
        report.entries.insert((alg.clone(), h), summaries);
        report.per_series.insert((alg, h), per_series);
    }
    Ok(report)
}

pub const CELLS_HEADER: &str = "algorithm,horizon,split,fund_id,mase,rmse,mae,smdape,maape";

/// Writes cells in the given order with round-trip precision; MAAPE in radians.
pub fn write_cells<W: std::io::Write>(mut w: W, cells: &[MetricCell]) -> std::io::Result<()> {
    writeln!(w, "{CELLS_HEADER}")?;
    for c in cells {
        let v = c.values;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            c.algorithm, c.horizon, c.split, c.fund_id, v.mase, v.rmse, v.mae, v.smdape, v.maape
        )?;
    }
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum CellsReadError {
    #[error("row {row}: {message}")]
    Row { row: u64, message: String },
    #[error("expected header `{CELLS_HEADER}`, found `{0}`")]
    Header(String),
}

pub fn read_cells<R: std::io::Read>(reader: R) -> Result<Vec<MetricCell>, CellsReadError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| CellsReadError::Row { row: 1, message: e.to_string() })?;
    let found: Vec<&str> = header.iter().collect();
    if found.join(",") != CELLS_HEADER {
        return Err(CellsReadError::Header(found.join(",")));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i as u64 + 2;
        let bad = |message: String| CellsReadError::Row { row, message };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |k: usize| rec[k].parse::<f64>().map_err(|_| bad(format!("non-numeric value {:?}", &rec[k])));
        let int = |k: usize| rec[k].parse::<usize>().map_err(|_| bad(format!("non-integer value {:?}", &rec[k])));
        out.push(MetricCell {
            algorithm: rec[0].to_string(),
            horizon: int(1)?,
            split: int(2)?,
            fund_id: rec[3].to_string(),
            values: MetricValues { mase: num(4)?, rmse: num(5)?, mae: num(6)?, smdape: num(7)?, maape: num(8)? },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rmse_cases() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[3.0, 4.0], &[0.0, 0.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!((rmse(&[2.5; 4], &[0.0; 4]).unwrap() - 2.5).abs() < 1e-15);
        assert!(matches!(rmse(&[1.0], &[1.0, 2.0]), Err(MetricError::LengthMismatch { .. })));
        assert!(matches!(rmse(&[], &[]), Err(MetricError::Empty)));
    }

    #[test]
    fn mae_cases() {
        assert_eq!(mae(&[1.0], &[1.0]).unwrap(), 0.0);
        assert_eq!(mae(&[-1.0, 3.0], &[0.0, 0.0]).unwrap(), 2.0);
    }

    #[test]
    fn smdape_cases() {
        assert_eq!(smdape(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((smdape(&[2.0, 4.0], &[1.0, 2.0]).unwrap() - 200.0 / 3.0).abs() < 1e-12);
        match smdape(&[1.0, 2.0], &[-1.0, 1.0]) {
            Err(MetricError::NearZeroDenominator(t)) => assert_eq!(t, vec![0]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn maape_cases() {
        assert_eq!(maape(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((maape(&[1.0, 2.0], &[2.0, 2.0]).unwrap() - 0.3926991).abs() < 1e-7);
        assert!((maape(&[0.0], &[0.7]).unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn mase_cases() {
        assert!((mase(&[1.0, 2.0, 3.0, 4.0], &[5.0, 6.0], &[4.5, 7.5]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(mase(&[1.0, 2.0], &[5.0], &[5.0]).unwrap(), 0.0);
        assert!(matches!(mase(&[2.0, 2.0, 2.0], &[1.0], &[0.0]), Err(MetricError::ZeroScale)));
        assert!(matches!(mase(&[2.0], &[1.0], &[0.0]), Err(MetricError::ZeroScale)));
    }

    #[test]
    fn in_sample_naive_has_unit_mase() {
        let train = [1.0, 3.0, 2.0, 5.0, 4.0];
        let actual = &train[1..];
        let naive = &train[..4];
        assert!((mase(&train, actual, naive).unwrap() - 1.0).abs() < 1e-15);
    }

    fn cell(alg: &str, fund: &str, split: usize, mase: f64) -> MetricCell {
        MetricCell {
            algorithm: alg.into(),
            horizon: 6,
            split,
            fund_id: fund.into(),
            values: MetricValues { mase, rmse: mase, mae: mase, smdape: mase, maape: mase },
        }
    }

    #[test]
    fn aggregate_single_cell() {
        let r = aggregate_report(&[cell("naive", "a", 1, 1.7)]).unwrap();
        let s = r.entries[&("naive".to_string(), 6)][0];
        assert_eq!((s.mean, s.median, s.sd), (1.7, 1.7, 0.0));
    }

    #[test]
    fn aggregate_two_stage() {
        let cells = [cell("x", "a", 1, 0.5), cell("x", "a", 2, 1.5), cell("x", "b", 1, 2.0), cell("x", "b", 2, 4.0)];
        let r = aggregate_report(&cells).unwrap();
        let s = r.entries[&("x".to_string(), 6)][0];
        assert!((s.mean - 2.0).abs() < 1e-15);
        assert!((s.median - 2.0).abs() < 1e-15);
        assert!((s.sd - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn aggregate_rejects_holes() {
        let cells = [cell("x", "a", 1, 1.0), cell("x", "a", 2, 1.0), cell("x", "b", 1, 1.0)];
        match aggregate_report(&cells) {
            Err(MetricError::MissingCell { fund_id, split, .. }) => assert_eq!((fund_id.as_str(), split), ("b", 2)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn even_median_is_midpoint() {
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    proptest! {
        #[test]
        fn non_negative_and_ordered(
            actual in prop::collection::vec(0.1f64..5.0, 1..20),
            noise in prop::collection::vec(-1.0f64..1.0, 20),
        ) {
            let forecast: Vec<f64> = actual.iter().zip(&noise).map(|(a, n)| a + n * 0.05).collect();
            let r = rmse(&actual, &forecast).unwrap();
            let m = mae(&actual, &forecast).unwrap();
            prop_assert!(m <= r + 1e-15);
            prop_assert!(smdape(&actual, &forecast).unwrap() >= 0.0);
            let a = maape(&actual, &forecast).unwrap();
            prop_assert!((0.0..=std::f64::consts::FRAC_PI_2).contains(&a));
        }

        #[test]
        fn mase_scale_free(
            train in prop::collection::vec(-3.0f64..3.0, 3..30),
            actual in prop::collection::vec(-3.0f64..3.0, 6),
            forecast in prop::collection::vec(-3.0f64..3.0, 6),
            alpha in 0.01f64..100.0,
        ) {
            prop_assume!(naive_scale(&train).is_ok());
            let base = mase(&train, &actual, &forecast).unwrap();
            let s = |v: &[f64]| v.iter().map(|x| x * alpha).collect::<Vec<_>>();
            let scaled = mase(&s(&train), &s(&actual), &s(&forecast)).unwrap();
            prop_assert!((base - scaled).abs() <= 1e-10 * base.max(1.0));
        }
    }

    #[test]
    fn cells_csv_roundtrip() {
        let cells = vec![MetricCell {
            algorithm: "lstm".into(),
            horizon: 6,
            split: 2,
            fund_id: "F001".into(),
            values: MetricValues { mase: 1.0 / 3.0, rmse: 0.5, mae: 0.25, smdape: 12.5, maape: 0.1 },
        }];
        let mut buf = vec![];
        write_cells(&mut buf, &cells).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("algorithm,horizon,split,fund_id,mase,rmse,mae,smdape,maape\nlstm,6,2,F001,0.3333333333333333,"));
        assert_eq!(read_cells(&buf[..]).unwrap(), cells);
        assert!(matches!(read_cells(&b"a,b\n"[..]), Err(CellsReadError::Header(_))));
    }
}
