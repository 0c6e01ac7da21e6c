//! Fund return ingestion, alignment and rolling Sharpe panels.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::format::fmt_sig;
use crate::month::MonthStamp;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row}: {message}")]
    Csv { row: u64, message: String },
    #[error("row {row}: expected header `{expected}`, found `{found}`")]
    Header { row: u64, expected: String, found: String },
    #[error("row {row}: malformed date {value:?} (expected YYYY-MM)")]
    MalformedDate { row: u64, value: String },
    #[error("row {row}: non-numeric {field} value {value:?}")]
    NonNumeric { row: u64, field: &'static str, value: String },
    #[error("row {row}: gap in months for {series}: expected {expected}, found {found}")]
    Gap { row: u64, series: String, expected: MonthStamp, found: MonthStamp },
    #[error("row {row}: duplicate row for ({date}, {series})")]
    Duplicate { row: u64, series: String, date: MonthStamp },
    #[error("file contains no data rows")]
    Empty,
    #[error("degenerate volatility for fund {fund_id} in window ending {month}: excess returns have zero standard deviation")]
    DegenerateVolatility { fund_id: String, month: MonthStamp },
    #[error("fund {fund_id}: {available} months overlap the risk-free series, need at least {needed}")]
    Coverage { fund_id: String, needed: usize, available: usize },
    #[error("series do not share a common date range")]
    EmptyCommonRange,
    #[error("fund {fund_id} spans {start}..{end} but the panel spans {panel_start}..{panel_end}; align the series first")]
    Misaligned {
        fund_id: String,
        start: MonthStamp,
        end: MonthStamp,
        panel_start: MonthStamp,
        panel_end: MonthStamp,
    },
    #[error("sharpe window must be at least 2 months, got {0}")]
    InvalidWindow(usize),
    #[error("duplicate fund id {0}")]
    DuplicateFund(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io { path: path.display().to_string(), source }
}

/// Contiguous monthly returns of one fund, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub fund_id: String,
    pub start: MonthStamp,
    pub values: Vec<f64>,
}

impl ReturnSeries {
    pub fn end(&self) -> MonthStamp {
        self.start.add_months(self.values.len() as i64 - 1)
    }
}

/// Contiguous annualized risk-free yields, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskFreeSeries {
    pub start: MonthStamp,
    pub values: Vec<f64>,
}

impl RiskFreeSeries {
    pub fn end(&self) -> MonthStamp {
        self.start.add_months(self.values.len() as i64 - 1)
    }

    /// Yield at `month`, if covered.
    pub fn at(&self, month: MonthStamp) -> Option<f64> {
        let idx = self.start.months_until(month);
        (idx >= 0).then(|| self.values.get(idx as usize).copied()).flatten()
    }
}

/// How an annual yield becomes a monthly rate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskFreeConversion {
    /// `y / 12`
    #[default]
    Simple,
    /// `(1 + y)^(1/12) - 1`, in percent.
    Compound,
}

impl RiskFreeConversion {
    pub fn monthly_pct(self, annual_pct: f64) -> f64 {
        match self {
            RiskFreeConversion::Simple => annual_pct / 12.0,
            RiskFreeConversion::Compound => ((1.0 + annual_pct / 100.0).powf(1.0 / 12.0) - 1.0) * 100.0,
        }
    }
}

/// N funds by T months of annualized Sharpe ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpePanel {
    pub fund_ids: Vec<String>,
    pub start: MonthStamp,
    /// One row per fund, every row of length `len()`.
    pub values: Vec<Vec<f64>>,
}

impl SharpePanel {
    pub fn new(fund_ids: Vec<String>, start: MonthStamp, values: Vec<Vec<f64>>) -> Result<Self, DataError> {
        let mut seen = std::collections::HashSet::new();
        for id in &fund_ids {
            if !seen.insert(id) {
                return Err(DataError::DuplicateFund(id.clone()));
            }
        }
        let t = values.first().map_or(0, Vec::len);
        if values.len() != fund_ids.len() || values.iter().any(|r| r.len() != t) {
            return Err(DataError::Csv { row: 0, message: "panel rows must all have the same length".into() });
        }
        Ok(Self { fund_ids, start, values })
    }

    pub fn n_series(&self) -> usize {
        self.values.len()
    }

    pub fn len(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn month(&self, col: usize) -> MonthStamp {
        self.start.add_months(col as i64)
    }

    /// Columns `range` (0-based, half-open) as a new panel.
    pub fn slice(&self, range: std::ops::Range<usize>) -> SharpePanel {
        SharpePanel {
            fund_ids: self.fund_ids.clone(),
            start: self.month(range.start),
            values: self.values.iter().map(|r| r[range.clone()].to_vec()).collect(),
        }
    }
}

fn records<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), DataError> {
    let headers = rdr.headers().map_err(|e| DataError::Csv { row: 1, message: e.to_string() })?;
    let found: Vec<&str> = headers.iter().collect();
    if found != expected {
        return Err(DataError::Header { row: 1, expected: expected.join(","), found: found.join(",") });
    }
    Ok(())
}

fn parse_date(row: u64, s: &str) -> Result<MonthStamp, DataError> {
    s.parse().map_err(|_| DataError::MalformedDate { row, value: s.to_string() })
}

fn parse_num(row: u64, field: &'static str, s: &str) -> Result<f64, DataError> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(DataError::NonNumeric { row, field, value: s.to_string() }),
    }
}

/// Sorts `(row, date, value)` triples and checks uniqueness and contiguity.
fn contiguous(series: &str, mut rows: Vec<(u64, MonthStamp, f64)>) -> Result<(MonthStamp, Vec<f64>), DataError> {
    rows.sort_by_key(|&(row, date, _)| (date, row));
    for pair in rows.windows(2) {
        let (_, prev, _) = pair[0];
        let (row, date, _) = pair[1];
        if date == prev {
            return Err(DataError::Duplicate { row, series: series.to_string(), date });
        }
        if date != prev.succ() {
            return Err(DataError::Gap { row, series: series.to_string(), expected: prev.succ(), found: date });
        }
    }
    let start = rows[0].1;
    Ok((start, rows.into_iter().map(|(_, _, v)| v).collect()))
}

/// Parses `date,fund_id,return_pct` rows. Rows may arrive in any order.
pub fn read_returns<R: Read>(reader: R) -> Result<Vec<ReturnSeries>, DataError> {
    let mut rdr = records(reader);
    check_header(&mut rdr, &["date", "fund_id", "return_pct"])?;
    let mut by_fund: BTreeMap<String, Vec<(u64, MonthStamp, f64)>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| DataError::Csv {
            row: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let row = rec.position().map_or(0, |p| p.line());
        let date = parse_date(row, &rec[0])?;
        let value = parse_num(row, "return_pct", &rec[2])?;
        by_fund.entry(rec[1].to_string()).or_default().push((row, date, value));
    }
    if by_fund.is_empty() {
        return Err(DataError::Empty);
    }
    by_fund
        .into_iter()
        .map(|(fund_id, rows)| {
            let (start, values) = contiguous(&fund_id, rows)?;
            Ok(ReturnSeries { fund_id, start, values })
        })
        .collect()
}

pub fn ingest_returns(path: impl AsRef<Path>) -> Result<Vec<ReturnSeries>, DataError> {
    let path = path.as_ref();
    read_returns(std::fs::File::open(path).map_err(io_err(path))?)
}

/// Parses `date,yield_pct` rows.
pub fn read_risk_free<R: Read>(reader: R) -> Result<RiskFreeSeries, DataError> {
    let mut rdr = records(reader);
    check_header(&mut rdr, &["date", "yield_pct"])?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| DataError::Csv {
            row: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let row = rec.position().map_or(0, |p| p.line());
        rows.push((row, parse_date(row, &rec[0])?, parse_num(row, "yield_pct", &rec[1])?));
    }
    if rows.is_empty() {
        return Err(DataError::Empty);
    }
    let (start, values) = contiguous("risk-free", rows)?;
    Ok(RiskFreeSeries { start, values })
}

pub fn ingest_risk_free(path: impl AsRef<Path>) -> Result<RiskFreeSeries, DataError> {
    let path = path.as_ref();
    read_risk_free(std::fs::File::open(path).map_err(io_err(path))?)
}

/// Writes returns ordered by date, then fund. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_returns<W: Write>(mut w: W, series: &[ReturnSeries]) -> std::io::Result<()> {
    writeln!(w, "date,fund_id,return_pct")?;
    let mut rows: Vec<(MonthStamp, &str, f64)> = series
        .iter()
        .flat_map(|s| {
            s.values.iter().enumerate().map(move |(i, &v)| (s.start.add_months(i as i64), s.fund_id.as_str(), v))
        })
        .collect();
    rows.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    for (date, fund, v) in rows {
        writeln!(w, "{date},{fund},{v}")?;
    }
    Ok(())
}

pub fn write_risk_free<W: Write>(mut w: W, rf: &RiskFreeSeries) -> std::io::Result<()> {
    writeln!(w, "date,yield_pct")?;
    for (i, v) in rf.values.iter().enumerate() {
        writeln!(w, "{},{v}", rf.start.add_months(i as i64))?;
    }
    Ok(())
}

/// Writes `date,fund_id,sharpe` with 10 significant digits.
pub fn write_sharpe<W: Write>(mut w: W, panel: &SharpePanel) -> std::io::Result<()> {
    writeln!(w, "date,fund_id,sharpe")?;
    for col in 0..panel.len() {
        let date = panel.month(col);
        for (id, row) in panel.fund_ids.iter().zip(&panel.values) {
            writeln!(w, "{date},{id},{}", fmt_sig(row[col], 10))?;
        }
    }
    Ok(())
}

/// Reads a `date,fund_id,sharpe` file back into a panel.
pub fn read_sharpe<R: Read>(reader: R) -> Result<SharpePanel, DataError> {
    let mut rdr = records(reader);
    check_header(&mut rdr, &["date", "fund_id", "sharpe"])?;
    let mut order: Vec<String> = Vec::new();
    let mut by_fund: HashMap<String, Vec<(u64, MonthStamp, f64)>> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| DataError::Csv { row: e.position().map_or(0, |p| p.line()), message: e.to_string() })?;
        let row = rec.position().map_or(0, |p| p.line());
        let date = parse_date(row, &rec[0])?;
        let v = parse_num(row, "sharpe", &rec[2])?;
        let entry = by_fund.entry(rec[1].to_string()).or_insert_with(|| {
            order.push(rec[1].to_string());
            Vec::new()
        });
        entry.push((row, date, v));
    }
    if order.is_empty() {
        return Err(DataError::Empty);
    }
    let mut start = None;
    let mut values = Vec::new();
    for id in &order {
        let (s, v) = contiguous(id, by_fund.remove(id).unwrap_or_default())?;
        if *start.get_or_insert(s) != s || values.first().is_some_and(|r: &Vec<f64>| r.len() != v.len()) {
            let first_len = values.first().map_or(v.len(), Vec::len);
            let panel_start = start.unwrap_or(s);
            return Err(DataError::Misaligned {
                fund_id: id.clone(),
                start: s,
                end: s.add_months(v.len() as i64 - 1),
                panel_start,
                panel_end: panel_start.add_months(first_len as i64 - 1),
            });
        }
        values.push(v);
    }
    SharpePanel::new(order, start.expect("nonempty"), values)
}

/// Result of [`align_panel`].
#[derive(Debug, Clone, PartialEq)]
pub struct Aligned {
    pub series: Vec<ReturnSeries>,
    pub risk_free: RiskFreeSeries,
    /// Funds removed because keeping them would shrink the common range below the requested minimum.
    pub dropped: Vec<String>,
}

fn trim(values: &[f64], start: MonthStamp, from: MonthStamp, to: MonthStamp) -> Vec<f64> {
    let a = start.months_until(from) as usize;
    let b = start.months_until(to) as usize;
    values[a..=b].to_vec()
}

/// Trims every series and the risk-free rate to their maximal common date range.
///
/// If that range has fewer than `min_months` months, the fund whose removal
/// lengthens the range the most is dropped repeatedly until it is long enough.
pub fn align_panel(series: &[ReturnSeries], rf: &RiskFreeSeries, min_months: usize) -> Result<Aligned, DataError> {
    if series.is_empty() {
        return Err(DataError::EmptyCommonRange);
    }
    let range_of = |kept: &[&ReturnSeries]| -> i64 {
        let lo = kept.iter().map(|s| s.start).chain(std::iter::once(rf.start)).max().expect("nonempty");
        let hi = kept.iter().map(|s| s.end()).chain(std::iter::once(rf.end())).min().expect("nonempty");
        lo.months_until(hi) + 1
    };
    let mut kept: Vec<&ReturnSeries> = series.iter().collect();
    let mut dropped = Vec::new();
    let min_months = min_months.max(1) as i64;
    while range_of(&kept) < min_months {
        if kept.len() <= 1 {
            return Err(DataError::EmptyCommonRange);
        }
        let (worst, _) = (0..kept.len())
            .map(|i| {
                let rest: Vec<&ReturnSeries> =
                    kept.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, s)| *s).collect();
                (i, range_of(&rest))
            })
            .max_by_key(|&(i, len)| (len, std::cmp::Reverse(i)))
            .expect("nonempty");
        dropped.push(kept.remove(worst).fund_id.clone());
    }
    let lo = kept.iter().map(|s| s.start).chain(std::iter::once(rf.start)).max().expect("nonempty");
    let hi = kept.iter().map(|s| s.end()).chain(std::iter::once(rf.end())).min().expect("nonempty");
    let aligned = kept
        .iter()
        .map(|s| ReturnSeries { fund_id: s.fund_id.clone(), start: lo, values: trim(&s.values, s.start, lo, hi) })
        .collect();
    Ok(Aligned {
        series: aligned,
        risk_free: RiskFreeSeries { start: lo, values: trim(&rf.values, rf.start, lo, hi) },
        dropped,
    })
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Annualized Sharpe ratio of a window of monthly excess returns.
pub fn annualized_sharpe(excess: &[f64]) -> Option<f64> {
    let (mean, sd) = mean_sd(excess);
    if sd <= 1e-12 * (1.0 + mean.abs()) {
        return None;
    }
    Some((mean * 12.0) / (sd * 12f64.sqrt()))
}

/// Rolling annualized Sharpe ratios over a trailing `window`.
///
/// All `returns` must span the same months (see [`align_panel`]); the risk-free
/// series must cover them. The panel starts at the end of the first full window.
pub fn compute_sharpe_panel(
    returns: &[ReturnSeries],
    rf: &RiskFreeSeries,
    window: usize,
    conversion: RiskFreeConversion,
) -> Result<SharpePanel, DataError> {
    if window < 2 {
        return Err(DataError::InvalidWindow(window));
    }
    let first = returns.first().ok_or(DataError::EmptyCommonRange)?;
    let (start, end) = (first.start, first.end());
    let mut rows = Vec::with_capacity(returns.len());
    for s in returns {
        if s.start != start || s.end() != end {
            return Err(DataError::Misaligned {
                fund_id: s.fund_id.clone(),
                start: s.start,
                end: s.end(),
                panel_start: start,
                panel_end: end,
            });
        }
        let covered: Vec<f64> = (0..s.values.len())
            .map_while(|i| rf.at(s.start.add_months(i as i64)))
            .collect();
        let overlap = if rf.at(s.start).is_some() { covered.len() } else { 0 };
        if overlap < s.values.len() || overlap < window {
            return Err(DataError::Coverage { fund_id: s.fund_id.clone(), needed: s.values.len().max(window), available: overlap });
        }
        let excess: Vec<f64> = s.values.iter().zip(&covered).map(|(r, y)| r - conversion.monthly_pct(*y)).collect();
        let row = excess
            .windows(window)
            .enumerate()
            .map(|(k, w)| {
                annualized_sharpe(w).ok_or_else(|| DataError::DegenerateVolatility {
                    fund_id: s.fund_id.clone(),
                    month: start.add_months((k + window - 1) as i64),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    SharpePanel::new(
        returns.iter().map(|s| s.fund_id.clone()).collect(),
        start.add_months(window as i64 - 1),
        rows,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(y: i32, mo: u8) -> MonthStamp {
        MonthStamp::new(y, mo).unwrap()
    }

    fn series(id: &str, start: MonthStamp, values: Vec<f64>) -> ReturnSeries {
        ReturnSeries { fund_id: id.into(), start, values }
    }

    #[test]
    fn two_funds_three_months() {
        let csv = "date,fund_id,return_pct\n2001-01,A,1.0\n2001-01,B,2\n2001-02,A,-0.5\n2001-03,B,0.1\n2001-02,B,3\n2001-03,A,0.25\n";
        let s = read_returns(csv.as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].fund_id, "A");
        assert_eq!(s[0].values, vec![1.0, -0.5, 0.25]);
        assert_eq!(s[1].values, vec![2.0, 3.0, 0.1]);
    }

    #[test]
    fn gap_is_reported_at_row_three() {
        let csv = "date,fund_id,return_pct\n2001-01,A,1.0\n2001-03,A,1.0\n";
        match read_returns(csv.as_bytes()) {
            Err(DataError::Gap { row, .. }) => assert_eq!(row, 3),
            other => panic!("expected gap error, got {other:?}"),
        }
    }

    #[test]
    fn distinct_parse_errors() {
        let bad_date = "date,fund_id,return_pct\n2001/01,A,1.0\n";
        assert!(matches!(read_returns(bad_date.as_bytes()), Err(DataError::MalformedDate { row: 2, .. })));
        let bad_num = "date,fund_id,return_pct\n2001-01,A,abc\n";
        assert!(matches!(read_returns(bad_num.as_bytes()), Err(DataError::NonNumeric { row: 2, .. })));
        let dup = "date,fund_id,return_pct\n2001-01,A,1\n2001-02,A,1\n2001-01,A,2\n";
        assert!(matches!(read_returns(dup.as_bytes()), Err(DataError::Duplicate { row: 4, .. })));
        let header = "when,fund,ret\n2001-01,A,1\n";
        assert!(matches!(read_returns(header.as_bytes()), Err(DataError::Header { .. })));
    }

    #[test]
    fn constant_returns_are_degenerate() {
        let s = vec![series("A", m(2001, 1), vec![1.0; 24])];
        let rf = RiskFreeSeries { start: m(2001, 1), values: vec![0.0; 24] };
        assert!(matches!(
            compute_sharpe_panel(&s, &rf, 12, RiskFreeConversion::Simple),
            Err(DataError::DegenerateVolatility { .. })
        ));
    }

    #[test]
    fn alternating_excess_has_zero_sharpe() {
        let vals: Vec<f64> = (0..12).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let s = vec![series("A", m(2001, 1), vals)];
        let rf = RiskFreeSeries { start: m(2001, 1), values: vec![0.0; 12] };
        let p = compute_sharpe_panel(&s, &rf, 12, RiskFreeConversion::Simple).unwrap();
        assert_eq!(p.len(), 1);
        assert!(p.values[0][0].abs() < 1e-15);
    }

    #[test]
    fn one_two_pattern_sharpe() {
        let vals: Vec<f64> = (0..12).map(|i| if i % 2 == 0 { 1.0 } else { 2.0 }).collect();
        let s = vec![series("A", m(2001, 1), vals)];
        let rf = RiskFreeSeries { start: m(2001, 1), values: vec![0.0; 12] };
        let p = compute_sharpe_panel(&s, &rf, 12, RiskFreeConversion::Simple).unwrap();
        // mean 1.5, sample sd sqrt(3/11)
        let expected = 18.0 / ((3.0f64 / 11.0).sqrt() * 12f64.sqrt());
        assert!((p.values[0][0] - expected).abs() < 1e-12);
        assert!((p.values[0][0] - 9.9499).abs() < 1e-4);
        assert_eq!(p.start, m(2001, 12));
    }

    #[test]
    fn risk_free_shortfall_is_a_coverage_error() {
        let s = vec![series("A", m(2001, 1), (0..24).map(|i| i as f64).collect())];
        let rf = RiskFreeSeries { start: m(2001, 1), values: vec![1.0; 20] };
        assert!(matches!(
            compute_sharpe_panel(&s, &rf, 12, RiskFreeConversion::Simple),
            Err(DataError::Coverage { .. })
        ));
    }

    #[test]
    fn align_identity_and_offset() {
        let rf = RiskFreeSeries { start: m(2000, 1), values: vec![1.0; 300] };
        let a = series("A", m(2001, 1), vec![0.5; 10]);
        let b = series("B", m(2001, 1), vec![0.7; 10]);
        let out = align_panel(&[a.clone(), b.clone()], &rf, 1).unwrap();
        assert_eq!(out.series, vec![a.clone(), b]);
        assert!(out.dropped.is_empty());

        let c = series("C", m(2001, 2), vec![0.1; 10]);
        let out = align_panel(&[a, c], &rf, 1).unwrap();
        assert_eq!(out.series[0].start, m(2001, 2));
        assert_eq!(out.series[0].values.len(), 9);
        assert_eq!(out.series[1].values.len(), 9);
        assert_eq!(out.risk_free.values.len(), 9);
    }

    #[test]
    fn align_three_ranges() {
        // month indices 1..240, 13..240, 1..228 relative to 2000-01 = index 1
        let base = m(2000, 1);
        let rf = RiskFreeSeries { start: base, values: vec![1.0; 240] };
        let s1 = series("a", base, vec![0.0; 240]);
        let s2 = series("b", base.add_months(12), vec![0.0; 228]);
        let s3 = series("c", base, vec![0.0; 228]);
        let out = align_panel(&[s1, s2, s3], &rf, 1).unwrap();
        for s in &out.series {
            assert_eq!(s.start, base.add_months(12));
            assert_eq!(s.end(), base.add_months(227));
        }
    }

    #[test]
    fn align_drops_fund_that_blocks_the_range() {
        let base = m(2000, 1);
        let rf = RiskFreeSeries { start: base, values: vec![1.0; 240] };
        let long = series("long", base, vec![0.0; 240]);
        let short = series("short", base.add_months(230), vec![0.0; 10]);
        let out = align_panel(&[long, short], &rf, 120).unwrap();
        assert_eq!(out.dropped, vec!["short".to_string()]);
        assert_eq!(out.series.len(), 1);
        assert!(matches!(
            align_panel(
                &[series("x", base, vec![0.0; 5]), series("y", base.add_months(100), vec![0.0; 5])],
                &RiskFreeSeries { start: base.add_months(50), values: vec![1.0; 4] },
                1
            ),
            Err(DataError::EmptyCommonRange)
        ));
    }

    #[test]
    fn compound_conversion() {
        let c = RiskFreeConversion::Compound.monthly_pct(12.0);
        assert!((c - (1.12f64.powf(1.0 / 12.0) - 1.0) * 100.0).abs() < 1e-14);
        assert_eq!(RiskFreeConversion::Simple.monthly_pct(6.0), 0.5);
    }

    #[test]
    fn sharpe_csv_round_trip() {
        let p = SharpePanel::new(vec!["x".into(), "y".into()], m(2001, 12), vec![vec![0.25, -1.5], vec![3.0, 0.125]]).unwrap();
        let mut buf = Vec::new();
        write_sharpe(&mut buf, &p).unwrap();
        assert_eq!(read_sharpe(buf.as_slice()).unwrap(), p);
    }
}
