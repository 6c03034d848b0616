//! Parameter sweeps over ξ, the cluster spacing `l` and the users per
//! cluster `K`, with DRL and both baselines evaluated on paired seeds.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::results::ResultRow;
use super::RunConfig;
use crate::agents::{evaluate, load_checkpoint, ActionMode, ActorPair, EvalSeries, Method};
use crate::radio::Baseline;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepParam {
    Xi,
    L,
    K,
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xi" => Ok(SweepParam::Xi),
            "l" => Ok(SweepParam::L),
            "K" | "k" => Ok(SweepParam::K),
            _ => Err(Error::Config(format!("unknown sweep parameter {s:?} (expected xi, l or K)"))),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Xi => "xi",
            SweepParam::L => "l",
            SweepParam::K => "K",
        })
    }
}

impl SweepParam {
    /// The config with this parameter set to `v`, validated.
    pub fn apply(self, cfg: &RunConfig, v: f64) -> Result<RunConfig> {
        let mut c = cfg.clone();
        match self {
            SweepParam::Xi => c.channel.xi = v,
            SweepParam::L => c.scenario.l_m = v,
            SweepParam::K => c.scenario.users_per_cluster = as_count(v)?,
        }
        c.validate()?;
        Ok(c)
    }
}

fn as_count(v: f64) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v < 1e6 {
        Ok(v as usize)
    } else {
        Err(Error::Config(format!("K must be a positive integer, got {v}")))
    }
}

/// Where DRL policies for a sweep come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicySource {
    /// Baselines only.
    None,
    /// One checkpoint for every sweep point (ξ and `l` sweeps).
    Single(PathBuf),
    /// `dir/k{K}.bin` for every `K` in a `K` sweep.
    PerK(PathBuf),
}

pub fn per_k_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("k{k}.bin"))
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub episodes: usize,
    pub mode: ActionMode,
}

fn rows_of(series: &EvalSeries, param: SweepParam, value: f64, seed: u64) -> Vec<ResultRow> {
    series
        .mean
        .iter()
        .zip(&series.std)
        .enumerate()
        .map(|(t, (m, s))| ResultRow {
            method: series.method.to_string(),
            param: param.to_string(),
            value,
            slot: t + 1,
            mean_sumrate: *m,
            std_sumrate: *s,
            episodes: series.episodes,
            seed,
        })
        .collect()
}

/// Evaluates every sweep point. Baseline rows are emitted for each point;
/// they see perfect CSI, so across a ξ sweep they repeat exactly.
pub fn run_sweep(cfg: &RunConfig, param: SweepParam, values: &[f64], policy: &PolicySource, opts: &SweepOptions) -> Result<Vec<ResultRow>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let points = values.iter().map(|v| param.apply(cfg, *v)).collect::<Result<Vec<_>>>()?;
    let policies: Vec<Option<ActorPair>> = match policy {
        PolicySource::None => vec![None; points.len()],
        PolicySource::Single(path) => {
            if param == SweepParam::K && values.len() > 1 {
                return Err(Error::Config("a K sweep needs one checkpoint per K (use a checkpoint directory)".into()));
            }
            let (pair, _) = load_checkpoint(path)?;
            for p in &points {
                pair.check_scenario(&p.scenario)?;
            }
            vec![Some(pair); points.len()]
        }
        PolicySource::PerK(dir) => {
            if param != SweepParam::K {
                return Err(Error::Config("a checkpoint directory is only used for K sweeps".into()));
            }
            let ks: Vec<usize> = points.iter().map(|p| p.scenario.users_per_cluster).collect();
            let missing: Vec<usize> = ks.iter().copied().filter(|k| !per_k_path(dir, *k).is_file()).collect();
            if !missing.is_empty() {
                return Err(Error::MissingCheckpoints(missing));
            }
            ks.iter()
                .zip(&points)
                .map(|(k, p)| {
                    let (pair, _) = load_checkpoint(&per_k_path(dir, *k))?;
                    pair.check_scenario(&p.scenario)?;
                    Ok(Some(pair))
                })
                .collect::<Result<_>>()?
        }
    };

    let mut rows = Vec::new();
    let mut shared_baselines: Option<Vec<EvalSeries>> = None;
    for ((point, value), pair) in points.iter().zip(values).zip(&policies) {
        let baselines = match (&shared_baselines, param) {
            (Some(b), SweepParam::Xi) => b.clone(),
            _ => {
                let b = vec![
                    evaluate(Method::Baseline(Baseline::Zf), point, opts.episodes)?,
                    evaluate(Method::Baseline(Baseline::Mrt), point, opts.episodes)?,
                ];
                shared_baselines = Some(b.clone());
                b
            }
        };
        for s in &baselines {
            rows.extend(rows_of(s, param, *value, point.run.seed));
        }
        if let Some(actors) = pair {
            let s = evaluate(Method::Drl { actors, mode: opts.mode }, point, opts.episodes)?;
            rows.extend(rows_of(&s, param, *value, point.run.seed));
        }
    }
    Ok(rows)
}

/// Parses `v1,v2,…`.
pub fn parse_values(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad sweep value {t:?}"))))
        .collect()
}
