use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{FilterMode, RunConfig};
use super::trial::{run_trial_with_truth, stream_rng, trial_seed, Stream, TrialRecord};
use crate::error::{Error, Result};
use crate::models::generate_ground_truth;

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    /// Sorted before summation so the result does not depend on input order.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let mut dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
        dev.sort_by(f64::total_cmp);
        let std = (dev.iter().sum::<f64>() / n).sqrt();
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanAggregate {
    pub k: u32,
    pub n_trials: usize,
    pub ospa_total: Summary,
    pub ospa_loc: Summary,
    pub ospa_card: Summary,
    /// Estimated minus true number of targets.
    pub cardinality_error: Summary,
    pub centroid_distance: Summary,
}

/// Per-scan statistics over trials. All records must share `n_scans`.
pub fn aggregate(records: &[TrialRecord]) -> Result<Vec<ScanAggregate>> {
    let Some(first) = records.first() else {
        return Err(Error::Config("cannot aggregate zero trials".into()));
    };
    let n_scans = first.scans.len();
    if records.iter().any(|r| r.scans.len() != n_scans) {
        return Err(Error::Config("trial records differ in length".into()));
    }
    Ok((0..n_scans)
        .map(|i| {
            let col = |f: &dyn Fn(&super::trial::ScanRecord) -> Option<f64>| -> Vec<f64> {
                records.iter().filter_map(|r| f(&r.scans[i])).collect()
            };
            ScanAggregate {
                k: first.scans[i].k,
                n_trials: records.len(),
                ospa_total: Summary::of(&col(&|s| Some(s.ospa.total))),
                ospa_loc: Summary::of(&col(&|s| Some(s.ospa.localization))),
                ospa_card: Summary::of(&col(&|s| Some(s.ospa.cardinality))),
                cardinality_error: Summary::of(&col(&|s| {
                    Some(s.n_est() as f64 - s.n_true() as f64)
                })),
                centroid_distance: Summary::of(&col(&|s| s.centroid_distance())),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarlo {
    pub mode: FilterMode,
    pub records: Vec<TrialRecord>,
    pub aggregate: Vec<ScanAggregate>,
}

fn run_modes(cfg: &RunConfig, modes: &[FilterMode]) -> Result<Vec<MonteCarlo>> {
    cfg.validate()?;
    let per_trial: Vec<Vec<TrialRecord>> = (0..cfg.n_trials)
        .into_par_iter()
        .map(|i| {
            let seed = trial_seed(cfg.seed, i);
            let mut gt_rng = stream_rng(seed, 0, Stream::GroundTruth);
            let truth = generate_ground_truth(&cfg.truth, &cfg.motion, cfg.n_scans, &mut gt_rng);
            modes
                .iter()
                .map(|&m| run_trial_with_truth(cfg, m, i, seed, &truth))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    modes
        .iter()
        .enumerate()
        .map(|(j, &mode)| {
            let records: Vec<TrialRecord> = per_trial.iter().map(|t| t[j].clone()).collect();
            Ok(MonteCarlo {
                mode,
                aggregate: aggregate(&records)?,
                records,
            })
        })
        .collect()
}

/// `cfg.n_trials` independent trials of `cfg.mode`, in parallel.
pub fn run_monte_carlo(cfg: &RunConfig) -> Result<MonteCarlo> {
    Ok(run_modes(cfg, &[cfg.mode])?.remove(0))
}

/// Both filter modes on the same trial seeds, hence the same truth,
/// detections, noise and clutter draws.
pub fn run_comparison(cfg: &RunConfig) -> Result<[MonteCarlo; 2]> {
    let mut out = run_modes(cfg, &FilterMode::ALL)?;
    let cb = out.pop().expect("two modes");
    let lmb = out.pop().expect("two modes");
    Ok([lmb, cb])
}

/// Mean of `values[k]` over scans `from..=to` (1-based, inclusive).
pub fn window_mean(per_scan: &[f64], from: u32, to: u32) -> f64 {
    let lo = (from.max(1) - 1) as usize;
    let hi = (to as usize).min(per_scan.len());
    let slice = &per_scan[lo..hi];
    slice.iter().sum::<f64>() / slice.len() as f64
}

/// Runs `f` on a dedicated pool with `workers` threads, or the global pool.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
