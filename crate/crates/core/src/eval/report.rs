//! Per-run report rows, seed aggregation and threshold tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::pareto::pareto_frontier;
use super::EvalError;

/// One evaluated model: method, hyper-parameters, seed and split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    /// Canonical `key=value` pairs joined by `;`, keys sorted.
    pub params: String,
    pub seed: u64,
    pub split: String,
    pub mrr: f64,
    pub diff_dp: f64,
    pub diff_eo: f64,
}

impl EvalReport {
    pub fn fairness(&self, metric: FairnessMetric) -> f64 {
        match metric {
            FairnessMetric::Dp => self.diff_dp,
            FairnessMetric::Eo => self.diff_eo,
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let finite = self.mrr.is_finite() && self.diff_dp.is_finite() && self.diff_eo.is_finite();
        if !finite || !(self.mrr > 0.0 && self.mrr <= 1.0) {
            return Err(EvalError::InvalidReport(format!("{} {} seed {}: metrics out of range", self.method, self.params, self.seed)));
        }
        Ok(())
    }
}

/// Canonical params string from key/value pairs.
pub fn format_params<K: AsRef<str>, V: ToString>(pairs: impl IntoIterator<Item = (K, V)>) -> String {
    let map: BTreeMap<String, String> = pairs.into_iter().map(|(k, v)| (k.as_ref().to_string(), v.to_string())).collect();
    map.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}

/// Value of `key` in a params string.
pub fn param_value<'a>(params: &'a str, key: &str) -> Option<&'a str> {
    params.split(';').filter_map(|kv| kv.split_once('=')).find(|(k, _)| *k == key).map(|(_, v)| v)
}

pub fn write_reports<W: Write>(w: W, reports: &[EvalReport]) -> Result<(), EvalError> {
    let mut wr = csv::Writer::from_writer(w);
    for r in reports {
        wr.serialize(r)?;
    }
    wr.flush().map_err(|e| EvalError::Csv(e.to_string()))?;
    Ok(())
}

pub fn read_reports<R: Read>(r: R) -> Result<Vec<EvalReport>, EvalError> {
    let mut rd = csv::Reader::from_reader(r);
    let headers = rd.headers()?.clone();
    let expected = ["method", "params", "seed", "split", "mrr", "diff_dp", "diff_eo"];
    if headers.iter().ne(expected) {
        return Err(EvalError::Csv(format!("unexpected header {:?}", headers.iter().collect::<Vec<_>>())));
    }
    let mut out = Vec::new();
    for row in rd.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FairnessMetric {
    Dp,
    Eo,
}

impl FairnessMetric {
    pub fn name(self) -> &'static str {
        match self {
            FairnessMetric::Dp => "diff_dp",
            FairnessMetric::Eo => "diff_eo",
        }
    }
}

/// Mean metrics of one (method, params) configuration over its runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanPoint {
    pub method: String,
    pub params: String,
    pub runs: usize,
    pub mrr: f64,
    pub diff_dp: f64,
    pub diff_eo: f64,
}

impl MeanPoint {
    pub fn fairness(&self, metric: FairnessMetric) -> f64 {
        match metric {
            FairnessMetric::Dp => self.diff_dp,
            FairnessMetric::Eo => self.diff_eo,
        }
    }
}

/// Averages reports over seeds and splits per (method, params), sorted by
/// method then params.
pub fn mean_points(reports: &[EvalReport]) -> Vec<MeanPoint> {
    let mut acc: BTreeMap<(String, String), (usize, f64, f64, f64)> = BTreeMap::new();
    for r in reports {
        let e = acc.entry((r.method.clone(), r.params.clone())).or_default();
        e.0 += 1;
        e.1 += r.mrr;
        e.2 += r.diff_dp;
        e.3 += r.diff_eo;
    }
    acc.into_iter()
        .map(|((method, params), (n, m, dp, eo))| {
            let k = n as f64;
            MeanPoint { method, params, runs: n, mrr: m / k, diff_dp: dp / k, diff_eo: eo / k }
        })
        .collect()
}

/// Mean fairness gap of the baseline method's runs.
pub fn gnn_baseline_for_fairness(reports: &[EvalReport], baseline_method: &str, metric: FairnessMetric) -> Result<f64, EvalError> {
    let vals: Vec<f64> = reports.iter().filter(|r| r.method == baseline_method).map(|r| r.fairness(metric)).collect();
    if vals.is_empty() {
        return Err(EvalError::MissingBaseline(baseline_method.to_string()));
    }
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub lf: f64,
    pub mf: f64,
    pub hf: f64,
}

impl Thresholds {
    pub fn from_baseline(baseline: f64) -> Self {
        Self { lf: baseline, mf: 0.75 * baseline, hf: 0.5 * baseline }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.lf, self.mf, self.hf]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub method: String,
    /// Best mean MRR under LF, MF and HF; `None` when no configuration qualifies.
    pub cells: [Option<f64>; 3],
    /// Params of the configuration behind each cell.
    pub chosen: [Option<String>; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTable {
    pub metric: FairnessMetric,
    pub baseline: f64,
    pub thresholds: Thresholds,
    pub rows: Vec<ThresholdRow>,
}

/// For every method, the highest seed-mean MRR among its configurations
/// whose seed-mean fairness gap is within each threshold.
pub fn threshold_select(reports: &[EvalReport], metric: FairnessMetric, baseline: f64) -> ThresholdTable {
    let thresholds = Thresholds::from_baseline(baseline);
    let points = mean_points(reports);
    let mut rows: Vec<ThresholdRow> = Vec::new();
    for p in &points {
        if rows.last().is_none_or(|r| r.method != p.method) {
            rows.push(ThresholdRow { method: p.method.clone(), cells: [None; 3], chosen: [None, None, None] });
        }
        let row = rows.last_mut().expect("pushed above");
        for (i, t) in thresholds.as_array().into_iter().enumerate() {
            if p.fairness(metric) <= t && row.cells[i].is_none_or(|m| p.mrr > m) {
                row.cells[i] = Some(p.mrr);
                row.chosen[i] = Some(p.params.clone());
            }
        }
    }
    ThresholdTable { metric, baseline, thresholds, rows }
}

impl ThresholdTable {
    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.method.len()).max().unwrap_or(6).max(6);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# {} baseline {:.4}; thresholds LF {:.4} MF {:.4} HF {:.4}",
            self.metric.name(),
            self.baseline,
            self.thresholds.lf,
            self.thresholds.mf,
            self.thresholds.hf
        );
        let _ = writeln!(s, "{:<width$}  {:>8}  {:>8}  {:>8}", "method", "LF", "MF", "HF");
        for r in &self.rows {
            let cell = |c: Option<f64>| c.map(|v| format!("{v:.4}")).unwrap_or_else(|| "--".into());
            let _ = writeln!(s, "{:<width$}  {:>8}  {:>8}  {:>8}", r.method, cell(r.cells[0]), cell(r.cells[1]), cell(r.cells[2]));
        }
        s
    }
}

/// Seed-mean points on each method's frontier for `metric`.
pub fn method_frontiers(reports: &[EvalReport], metric: FairnessMetric) -> BTreeMap<String, Vec<MeanPoint>> {
    let mut by_method: BTreeMap<String, Vec<MeanPoint>> = BTreeMap::new();
    for p in mean_points(reports) {
        by_method.entry(p.method.clone()).or_default().push(p);
    }
    by_method
        .into_iter()
        .map(|(m, pts)| {
            let xy: Vec<(f64, f64)> = pts.iter().map(|p| (p.mrr, p.fairness(metric))).collect();
            let keep = pareto_frontier(&xy);
            (m, keep.into_iter().map(|i| pts[i].clone()).collect())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rep(method: &str, params: &str, seed: u64, mrr: f64, dp: f64) -> EvalReport {
        EvalReport { method: method.into(), params: params.into(), seed, split: "fold0".into(), mrr, diff_dp: dp, diff_eo: dp / 2.0 }
    }

    #[test]
    fn csv_round_trip() {
        let rs = vec![rep("gnn", "lambda=0", 1, 0.4, 0.3), rep("gnn-dp", "lambda=10;lr=0.05", 2, 0.35, 0.1)];
        let mut buf = Vec::new();
        write_reports(&mut buf, &rs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("method,params,seed,split,mrr,diff_dp,diff_eo\n"));
        assert_eq!(read_reports(buf.as_slice()).unwrap(), rs);
        assert!(read_reports("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn params_are_canonical() {
        assert_eq!(format_params([("r", "2"), ("lambda", "10")]), "lambda=10;r=2");
        assert_eq!(param_value("lambda=10;r=2", "r"), Some("2"));
        assert_eq!(param_value("lambda=10", "r"), None);
    }

    #[test]
    fn baseline_and_thresholds() {
        let rs: Vec<EvalReport> = (0..5).map(|s| rep("gnn", "", s, 0.4, 0.3)).collect();
        assert!((gnn_baseline_for_fairness(&rs, "gnn", FairnessMetric::Dp).unwrap() - 0.3).abs() < 1e-15);
        assert!(matches!(gnn_baseline_for_fairness(&rs, "other", FairnessMetric::Dp), Err(EvalError::MissingBaseline(_))));
        let t = Thresholds::from_baseline(0.4);
        assert_eq!(t.as_array(), [0.4, 0.30000000000000004, 0.2]);
    }

    #[test]
    fn mean_points_average_seeds() {
        let rs = vec![rep("a", "x=1", 0, 0.2, 0.1), rep("a", "x=1", 1, 0.4, 0.3), rep("a", "x=2", 0, 0.5, 0.5)];
        let pts = mean_points(&rs);
        assert_eq!(pts.len(), 2);
        assert!((pts[0].mrr - 0.3).abs() < 1e-15 && (pts[0].diff_dp - 0.2).abs() < 1e-15);
        assert_eq!(pts[0].runs, 2);
    }
}
