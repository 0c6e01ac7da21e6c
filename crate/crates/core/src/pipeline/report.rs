//! Accuracy tables (markdown and CSV) and per-horizon MASE bar charts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::ensemble::{EnsembleGroup, Scheme};
use crate::format::fmt_sig;
use crate::metrics::{aggregate_report, MetricCell, MetricReport, MetricValues, Summary};

use super::algorithm_label;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReportError {
    #[error("no metric cells")]
    Empty,
    #[error("{} missing metric cells: {}", .0.len(), .0.iter().take(10).cloned().collect::<Vec<_>>().join("; "))]
    Incomplete(Vec<String>),
    #[error(transparent)]
    Metric(#[from] crate::metrics::MetricError),
}

/// Parses `ens_<group>_<scheme>`.
pub fn parse_member(name: &str) -> Option<(String, Scheme)> {
    let rest = name.strip_prefix("ens_")?;
    let (group, scheme) = rest.rsplit_once('_')?;
    let scheme = Scheme::ALL.into_iter().find(|s| s.name() == scheme)?;
    Some((group.to_string(), scheme))
}

/// Every (algorithm, horizon, fund, split) combination absent from `cells`.
pub fn missing_cells(cells: &[MetricCell]) -> Vec<String> {
    let algs: BTreeSet<&str> = cells.iter().map(|c| c.algorithm.as_str()).collect();
    let horizons: BTreeSet<usize> = cells.iter().map(|c| c.horizon).collect();
    let funds: BTreeSet<&str> = cells.iter().map(|c| c.fund_id.as_str()).collect();
    let mut splits: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for c in cells {
        splits.entry(c.horizon).or_default().insert(c.split);
    }
    let have: BTreeSet<(&str, usize, &str, usize)> =
        cells.iter().map(|c| (c.algorithm.as_str(), c.horizon, c.fund_id.as_str(), c.split)).collect();
    let mut missing = Vec::new();
    for &a in &algs {
        for &h in &horizons {
            for &f in &funds {
                for &s in &splits[&h] {
                    if !have.contains(&(a, h, f, s)) {
                        missing.push(format!("{a}/h{h}/{f}/split{s}"));
                    }
                }
            }
        }
    }
    missing
}

fn ordered_algorithms(cells: &[MetricCell]) -> (Vec<String>, Vec<String>) {
    let mut base = Vec::new();
    let mut members = Vec::new();
    for c in cells {
        let list = if parse_member(&c.algorithm).is_some() { &mut members } else { &mut base };
        if !list.contains(&c.algorithm) {
            list.push(c.algorithm.clone());
        }
    }
    (base, members)
}

struct Table {
    title: String,
    corner: String,
    columns: Vec<String>,
    rows: Vec<(String, Vec<f64>)>,
    /// Flag the column minimum in markdown.
    flag_best: bool,
}

impl Table {
    fn csv(&self) -> Vec<u8> {
        let mut s = format!("{},{}\n", self.corner, self.columns.join(","));
        for (label, vals) in &self.rows {
            let v: Vec<String> = vals.iter().map(|x| fmt_sig(*x, 10)).collect();
            let _ = writeln!(s, "{label},{}", v.join(","));
        }
        s.into_bytes()
    }

    fn markdown(&self) -> Vec<u8> {
        let mut s = format!("# {}\n\n| {} | {} |\n|---|", self.title, self.corner, self.columns.join(" | "));
        s.push_str(&"---:|".repeat(self.columns.len()));
        s.push('\n');
        let best: Vec<f64> = (0..self.columns.len())
            .map(|c| self.rows.iter().map(|r| r.1[c]).fold(f64::INFINITY, f64::min))
            .collect();
        for (label, vals) in &self.rows {
            let cells: Vec<String> = vals
                .iter()
                .enumerate()
                .map(|(c, x)| {
                    let text = format!("{x:.3}");
                    if self.flag_best && self.rows.len() > 1 && *x == best[c] {
                        format!("**{text}**")
                    } else {
                        text
                    }
                })
                .collect();
            let _ = writeln!(s, "| {label} | {} |", cells.join(" | "));
        }
        s.into_bytes()
    }

    fn emit(&self, stem: &str, out: &mut Vec<(String, Vec<u8>)>) {
        out.push((format!("{stem}.csv"), self.csv()));
        out.push((format!("{stem}.md"), self.markdown()));
    }
}

fn horizon_mean(report: &MetricReport, alg: &str, horizons: &[usize], pick: impl Fn(&[Summary; 5]) -> [f64; 5]) -> [f64; 5] {
    let mut acc = [0.0; 5];
    for &h in horizons {
        for (a, v) in acc.iter_mut().zip(pick(&report.entries[&(alg.to_string(), h)])) {
            *a += v;
        }
    }
    acc.map(|a| a / horizons.len() as f64)
}

/// Table scale: MAAPE times 100.
fn reported(v: [f64; 5]) -> Vec<f64> {
    MetricValues { mase: v[0], rmse: v[1], mae: v[2], smdape: v[3], maape: v[4] }.reported().to_vec()
}

fn svg_bars(title: &str, bars: &[(String, f64)]) -> Vec<u8> {
    let (bw, gap, top, bottom, left) = (36.0, 14.0, 40.0, 110.0, 50.0);
    let plot_h = 240.0;
    let width = left + bars.len() as f64 * (bw + gap) + gap;
    let height = top + plot_h + bottom;
    let max = bars.iter().map(|b| b.1).fold(0.0f64, f64::max).max(1e-12);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(s, "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{title}</text>", width / 2.0);
    let base = top + plot_h;
    let _ = writeln!(s, "<line x1=\"{left}\" y1=\"{base}\" x2=\"{}\" y2=\"{base}\" stroke=\"black\"/>", width - gap / 2.0);
    let _ = writeln!(s, "<line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{base}\" stroke=\"black\"/>");
    for (i, (label, v)) in bars.iter().enumerate() {
        let h = plot_h * v / max;
        let x = left + gap + i as f64 * (bw + gap);
        let fill = if label.starts_with("ens_") { "#d08c3a" } else { "#3a6fd0" };
        let _ = writeln!(s, "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"{bw}\" height=\"{h:.1}\" fill=\"{fill}\"/>", base - h);
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{v:.3}</text>", x + bw / 2.0, base - h - 4.0);
        let (tx, ty) = (x + bw / 2.0, base + 12.0);
        let _ = writeln!(
            s,
            "<text x=\"{tx:.1}\" y=\"{ty:.1}\" text-anchor=\"end\" transform=\"rotate(-45 {tx:.1} {ty:.1})\">{}</text>",
            algorithm_label(label)
        );
    }
    s.push_str("</svg>\n");
    s.into_bytes()
}

/// Report files as `(relative path, bytes)`:
///
/// - `table2`: algorithms x {MASE, RMSE, MAE, SMDAPE, MAAPE}, averaged over horizons
/// - `table3`: ensemble groups x {simple, global, local}, MASE averaged over horizons
/// - `table4`: mean / median / sd over series of every metric, per algorithm
/// - `horizon_<H>`: every algorithm and ensemble at one horizon
/// - `mase_h<H>.svg`: MASE bars per horizon
pub fn render_tables(cells: &[MetricCell]) -> Result<Vec<(String, Vec<u8>)>, ReportError> {
    if cells.is_empty() {
        return Err(ReportError::Empty);
    }
    let missing = missing_cells(cells);
    if !missing.is_empty() {
        return Err(ReportError::Incomplete(missing));
    }
    let report = aggregate_report(cells)?;
    let horizons: Vec<usize> = cells.iter().map(|c| c.horizon).collect::<BTreeSet<_>>().into_iter().collect();
    let (base, members) = ordered_algorithms(cells);
    let metric_cols: Vec<String> = MetricValues::NAMES.iter().map(|s| s.to_string()).collect();
    let mut out = Vec::new();

    let hs: Vec<String> = horizons.iter().map(|h| h.to_string()).collect();
    let span = format!("horizons {}", hs.join(", "));
    Table {
        title: format!("Average accuracy over {span}"),
        corner: "algorithm".into(),
        columns: metric_cols.clone(),
        rows: base
            .iter()
            .map(|a| (algorithm_label(a), reported(horizon_mean(&report, a, &horizons, |s| s.map(|x| x.mean)))))
            .collect(),
        flag_best: true,
    }
    .emit("table2", &mut out);

    if !members.is_empty() {
        let mut groups: Vec<String> = Vec::new();
        for m in &members {
            let (g, _) = parse_member(m).expect("member");
            if !groups.contains(&g) {
                groups.push(g);
            }
        }
        let rows = groups
            .iter()
            .map(|g| {
                let label = EnsembleGroup { name: g.clone(), algorithms: vec![] }.label().to_string();
                let vals = Scheme::ALL
                    .iter()
                    .map(|s| {
                        let name = format!("ens_{g}_{}", s.name());
                        if members.contains(&name) {
                            horizon_mean(&report, &name, &horizons, |x| x.map(|y| y.mean))[0]
                        } else {
                            f64::NAN
                        }
                    })
                    .collect();
                (label, vals)
            })
            .collect();
        Table {
            title: format!("Ensemble MASE over {span}"),
            corner: "group".into(),
            columns: Scheme::ALL.iter().map(|s| s.label().to_string()).collect(),
            rows,
            flag_best: true,
        }
        .emit("table3", &mut out);
    }

    let mut rows = Vec::new();
    let stats: [(&str, fn(&Summary) -> f64); 3] = [("mean", |s| s.mean), ("median", |s| s.median), ("sd", |s| s.sd)];
    let per_alg: Vec<[Vec<f64>; 3]> = base
        .iter()
        .map(|a| stats.map(|(_, f)| reported(horizon_mean(&report, a, &horizons, |s| s.each_ref().map(f)))))
        .collect();
    for (m, name) in MetricValues::NAMES.iter().enumerate() {
        for (k, (stat, _)) in stats.iter().enumerate() {
            rows.push((format!("{name} {stat}"), per_alg.iter().map(|v| v[k][m]).collect()));
        }
    }
    Table {
        title: format!("Distribution over series, {span}"),
        corner: "statistic".into(),
        columns: base.iter().map(|a| algorithm_label(a)).collect(),
        rows,
        flag_best: false,
    }
    .emit("table4", &mut out);

    let all: Vec<&String> = base.iter().chain(&members).collect();
    for &h in &horizons {
        let rows: Vec<(String, Vec<f64>)> = all
            .iter()
            .map(|a| (algorithm_label(a), reported(report.entries[&((*a).clone(), h)].map(|s| s.mean))))
            .collect();
        Table { title: format!("Accuracy at horizon {h}"), corner: "algorithm".into(), columns: metric_cols.clone(), rows, flag_best: true }
            .emit(&format!("horizon_{h}"), &mut out);
        let bars: Vec<(String, f64)> = all.iter().map(|a| ((*a).clone(), report.entries[&((*a).clone(), h)][0].mean)).collect();
        out.push((format!("mase_h{h}.svg"), svg_bars(&format!("Mean MASE, horizon {h}"), &bars)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cells(algs: &[&str], horizons: &[usize], funds: usize, splits: usize) -> Vec<MetricCell> {
        let mut out = Vec::new();
        for (k, a) in algs.iter().enumerate() {
            for &h in horizons {
                for f in 0..funds {
                    for s in 1..=splits {
                        let x = 1.0 + k as f64 + 0.01 * (f + s) as f64;
                        out.push(MetricCell {
                            algorithm: a.to_string(),
                            horizon: h,
                            split: s,
                            fund_id: format!("F{f}"),
                            values: MetricValues { mase: x, rmse: x, mae: x, smdape: x, maape: 0.01 * x },
                        });
                    }
                }
            }
        }
        out
    }

    fn file<'a>(files: &'a [(String, Vec<u8>)], name: &str) -> &'a str {
        std::str::from_utf8(&files.iter().find(|f| f.0 == name).unwrap().1).unwrap()
    }

    #[test]
    fn paper_shaped_tables() {
        let mut names = vec!["lstm", "gru", "arima", "ets", "theta", "naive"];
        let members: Vec<String> = ["all", "dl", "stats"]
            .iter()
            .flat_map(|g| Scheme::ALL.iter().map(move |s| format!("ens_{g}_{}", s.name())))
            .collect();
        names.extend(members.iter().map(|s| s.as_str()));
        let files = render_tables(&cells(&names, &[6, 12], 3, 2)).unwrap();
        let t2 = file(&files, "table2.csv");
        assert_eq!(t2.lines().count(), 7);
        assert_eq!(t2.lines().next().unwrap(), "algorithm,MASE,RMSE,MAE,SMDAPE,MAAPE");
        assert!(t2.lines().all(|l| l.split(',').count() == 6));
        let t3 = file(&files, "table3.csv");
        assert_eq!(t3.lines().count(), 4);
        assert_eq!(t3.lines().next().unwrap(), "group,Simple average,Global weights,Local weights");
        assert!(t3.contains("Deep learning,"));
        let md = file(&files, "table2.md");
        assert_eq!(md.matches("**").count(), 10, "{md}");
        assert!(md.contains("| LSTM | **1.025** |"));
        assert!(file(&files, "mase_h6.svg").starts_with("<svg"));
        assert!(file(&files, "horizon_12.csv").lines().count() == 16);
    }

    #[test]
    fn single_algorithm_table4() {
        let files = render_tables(&cells(&["naive"], &[6], 2, 3)).unwrap();
        let t4 = file(&files, "table4.csv");
        assert_eq!(t4.lines().next().unwrap(), "statistic,Naive");
        assert_eq!(t4.lines().count(), 16);
        assert!(!files.iter().any(|f| f.0.starts_with("table3")));
    }

    #[test]
    fn incomplete_lists_missing() {
        let mut c = cells(&["naive", "theta"], &[6], 2, 2);
        c.retain(|x| !(x.algorithm == "theta" && x.fund_id == "F1"));
        match render_tables(&c) {
            Err(ReportError::Incomplete(m)) => assert_eq!(m, vec!["theta/h6/F1/split1", "theta/h6/F1/split2"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn member_names() {
        assert_eq!(parse_member("ens_dl_global"), Some(("dl".into(), Scheme::Global)));
        assert_eq!(parse_member("lstm"), None);
        assert_eq!(parse_member("ens_dl_best"), None);
    }
}
