//! `results.csv` and `summary.json`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::{Error, Result};

pub const RESULTS_HEADER: &str = "method,param,value,slot,mean_sumrate_bpshz,std_sumrate,episodes,seed";

/// One (method, sweep point, slot) line of `results.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub param: String,
    pub value: f64,
    /// One-based slot index.
    pub slot: usize,
    pub mean_sumrate: f64,
    pub std_sumrate: f64,
    pub episodes: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesSummary {
    pub method: String,
    pub value: f64,
    /// Mean over slots of the per-slot mean sum-rate, bps/Hz.
    pub time_avg_sumrate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapSummary {
    pub value: f64,
    pub drl_minus_zf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub param: String,
    pub seed: u64,
    pub episodes: usize,
    pub series: Vec<SeriesSummary>,
    pub gaps: Vec<GapSummary>,
}

/// Sorts by (method, value, slot).
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| a.method.cmp(&b.method).then(a.value.total_cmp(&b.value)).then(a.slot.cmp(&b.slot)));
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut rows = rows.to_vec();
    sort_rows(&mut rows);
    let mut s = String::from(RESULTS_HEADER);
    s.push('\n');
    for r in &rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.method, r.param, r.value, r.slot, r.mean_sumrate, r.std_sumrate, r.episodes, r.seed
        );
    }
    s
}

pub fn summarize(rows: &[ResultRow]) -> Summary {
    let mut acc: BTreeMap<(String, u64), (f64, f64, usize)> = BTreeMap::new();
    for r in rows {
        let e = acc.entry((r.method.clone(), r.value.to_bits())).or_insert((r.value, 0.0, 0));
        e.1 += r.mean_sumrate;
        e.2 += 1;
    }
    let mut series: Vec<SeriesSummary> = acc
        .into_iter()
        .map(|((method, _), (value, sum, n))| SeriesSummary { method, value, time_avg_sumrate: sum / n as f64 })
        .collect();
    series.sort_by(|a, b| a.method.cmp(&b.method).then(a.value.total_cmp(&b.value)));
    let find = |m: &str, v: f64| series.iter().find(|s| s.method == m && s.value == v).map(|s| s.time_avg_sumrate);
    let gaps = series
        .iter()
        .filter(|s| s.method == "drl")
        .filter_map(|s| find("zf", s.value).map(|zf| GapSummary { value: s.value, drl_minus_zf: s.time_avg_sumrate - zf }))
        .collect();
    let first = rows.first();
    Summary {
        param: first.map(|r| r.param.clone()).unwrap_or_default(),
        seed: first.map_or(0, |r| r.seed),
        episodes: first.map_or(0, |r| r.episodes),
        series,
        gaps,
    }
}

/// Writes `results.csv` and `summary.json` into `dir`, creating it.
pub fn emit_results(rows: &[ResultRow], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = dir.join("results.csv");
    std::fs::write(&csv, results_csv(rows)).map_err(|e| Error::io(&csv, e))?;
    let json = dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(&summarize(rows)).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    std::fs::write(&json, text).map_err(|e| Error::io(&json, e))
}
