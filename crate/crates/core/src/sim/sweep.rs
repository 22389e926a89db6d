use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::{loss::splitmix64, run_trial, LossModel, SimError, Topology, TrialResult, TrialSpec};
use crate::engine::{DropCounters, EngineConfig};
use crate::kgc::SecurityBundle;

/// Retransmission sweep: every `k` sees the same trial seeds.
#[derive(Clone, Debug)]
pub struct SweepSpec<'a> {
    pub topology: &'a Topology,
    pub bundles: &'a [SecurityBundle],
    pub loss: LossModel,
    /// Engine settings; `retransmissions` is overridden per point.
    pub config: EngineConfig,
    pub ks: Vec<u32>,
    pub trials: u32,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub k: u32,
    pub trial: u32,
    pub result: TrialResult,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub k: u32,
    pub trials: u32,
    pub mean: f64,
    /// Sample standard deviation; zero for a single trial.
    pub stddev: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub points: Vec<SweepPoint>,
}

pub fn trial_seed(master: u64, trial: u32) -> u64 {
    splitmix64(master ^ splitmix64(u64::from(trial)))
}

pub fn run_sweep(spec: &SweepSpec<'_>) -> Result<SweepReport, SimError> {
    let jobs: Vec<(u32, u32)> = spec
        .ks
        .iter()
        .flat_map(|&k| (0..spec.trials).map(move |t| (k, t)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(k, trial)| {
            let config = EngineConfig {
                retransmissions: k,
                ..spec.config
            };
            let result = run_trial(&TrialSpec {
                topology: spec.topology,
                bundles: spec.bundles,
                loss: spec.loss,
                config,
                rules: Vec::new(),
                seed: trial_seed(spec.seed, trial),
            })?;
            Ok(SweepRow { k, trial, result })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    let points = spec
        .ks
        .iter()
        .map(|&k| {
            let ratios: Vec<f64> = rows.iter().filter(|r| r.k == k).map(|r| r.result.ratio).collect();
            summarize(k, &ratios)
        })
        .collect();
    Ok(SweepReport { rows, points })
}

fn summarize(k: u32, xs: &[f64]) -> SweepPoint {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let stddev = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    SweepPoint {
        k,
        trials: xs.len() as u32,
        mean,
        stddev,
        min: xs.iter().copied().fold(f64::INFINITY, f64::min),
        max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// One line per trial: `k,trial,seed,ratio,<drop causes>,sm_total`.
pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["k", "trial", "seed", "ratio"];
    header.extend(DropCounters::COLUMNS);
    header.push("sm_total");
    w.write_record(&header)?;
    for row in rows {
        let mut record = vec![
            row.k.to_string(),
            row.trial.to_string(),
            row.result.seed.to_string(),
            format!("{:.6}", row.result.ratio),
        ];
        record.extend(row.result.metrics.drops.values().iter().map(u64::to_string));
        record.push(row.result.sm_total.to_string());
        w.write_record(&record)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
