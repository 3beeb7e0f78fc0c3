use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::{FilterMode, RunConfig};
use crate::cbmember::{cbmember_update, extract_states, predict_mb, prune_and_resample, MbDensity};
use crate::control::{select_command, select_command_mb, CommandCost, SensorCommand, SensorState};
use crate::error::Result;
use crate::lmb::{self, LmbDensity};
use crate::metrics::{ospa, OspaError};
use crate::models::{
    detection_prob, generate_ground_truth, measure, sample_clutter, BirthModel, GroundTruth,
    Measurement, MeasurementModel,
};
use crate::types::{Label, SingleTargetState};

/// Independent random streams of one trial. Streams other than `Filter`
/// depend only on the trial seed (and scan), so both filter modes see the
/// same truth, detections, noise and clutter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    GroundTruth = 1,
    Detection = 2,
    MeasurementNoise = 3,
    Clutter = 4,
    Shuffle = 5,
    Filter = 6,
}

/// Seed of trial `index` under `base`.
pub fn trial_seed(base: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index as u64);
    rng.next_u64()
}

/// Generator for `stream` at `scan` (0 for trial-wide streams).
pub fn stream_rng(seed: u64, scan: u32, stream: Stream) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..12].copy_from_slice(&scan.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub label: Option<Label>,
    pub state: SingleTargetState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRecord {
    pub k: u32,
    /// Position the scan's measurements were taken from.
    pub sensor: SensorState,
    pub command: SensorCommand,
    pub command_index: usize,
    pub truth: Vec<(usize, SingleTargetState)>,
    pub tracks: Vec<Track>,
    pub ospa: OspaError,
    pub n_measurements: usize,
    pub costs: Vec<CommandCost>,
}

impl ScanRecord {
    pub fn n_true(&self) -> usize {
        self.truth.len()
    }

    pub fn n_est(&self) -> usize {
        self.tracks.len()
    }

    /// Distance from the sensor to the mean true position, if any target lives.
    pub fn centroid_distance(&self) -> Option<f64> {
        if self.truth.is_empty() {
            return None;
        }
        let n = self.truth.len() as f64;
        let cx = self.truth.iter().map(|(_, s)| s.x).sum::<f64>() / n;
        let cy = self.truth.iter().map(|(_, s)| s.y).sum::<f64>() / n;
        Some(self.sensor.distance_to([cx, cy]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub mode: FilterMode,
    pub trial: usize,
    pub seed: u64,
    pub scans: Vec<ScanRecord>,
}

/// Measurement set of scan `k`: one Bernoulli detection draw and one noise
/// pair per live target regardless of outcome, then clutter, shuffled.
pub fn simulate_measurements(
    truth: &[(usize, SingleTargetState)],
    sensor: &SensorState,
    model: &MeasurementModel,
    seed: u64,
    k: u32,
) -> Vec<Measurement> {
    let mut det_rng = stream_rng(seed, k, Stream::Detection);
    let mut noise_rng = stream_rng(seed, k, Stream::MeasurementNoise);
    let mut clutter_rng = stream_rng(seed, k, Stream::Clutter);
    let mut shuffle_rng = stream_rng(seed, k, Stream::Shuffle);
    let mut zs = Vec::new();
    for (_, x) in truth {
        let u: f64 = det_rng.random();
        let detected = u < detection_prob([sensor.x, sensor.y], x.position(), model);
        match measure(sensor, x, model, &mut noise_rng) {
            Ok(z) if detected && model.region.contains(&z) => zs.push(z),
            Ok(_) => {}
            Err(_) => {
                let _: f64 = noise_rng.sample(StandardNormal);
                let _: f64 = noise_rng.sample(StandardNormal);
            }
        }
    }
    zs.extend(sample_clutter(model, &mut clutter_rng));
    zs.shuffle(&mut shuffle_rng);
    zs
}

enum FilterState {
    Lmb(LmbDensity),
    Mb(MbDensity),
}

/// Runs one trial of the predict, control, move, measure, update loop.
pub fn run_trial(
    cfg: &RunConfig,
    mode: FilterMode,
    trial: usize,
    seed: u64,
) -> Result<TrialRecord> {
    cfg.validate()?;
    let mut gt_rng = stream_rng(seed, 0, Stream::GroundTruth);
    let truth = generate_ground_truth(&cfg.truth, &cfg.motion, cfg.n_scans, &mut gt_rng);
    run_trial_with_truth(cfg, mode, trial, seed, &truth)
}

pub fn run_trial_with_truth(
    cfg: &RunConfig,
    mode: FilterMode,
    trial: usize,
    seed: u64,
    truth: &GroundTruth,
) -> Result<TrialRecord> {
    let mut filter_rng = stream_rng(seed, 0, Stream::Filter);
    let meas = &cfg.measurement;
    let mut sensor = cfg.sensor_start();
    let mut state = match mode {
        FilterMode::LmbPeecs => FilterState::Lmb(LmbDensity::empty()),
        FilterMode::CbmemberPeecs => FilterState::Mb(MbDensity::default()),
    };
    let mut scans = Vec::with_capacity(cfg.n_scans as usize);

    for k in 1..=cfg.n_scans {
        let birth = BirthModel::sample(&cfg.birth, cfg.birth_particles, &mut filter_rng)?;
        let live = truth.at(k);
        let (next, selection, tracks) = match state {
            FilterState::Lmb(post) => {
                let pred = lmb::predict(&post, &birth, &cfg.motion, k, &mut filter_rng)?;
                let sel = select_command(&pred, &sensor, &cfg.control, meas)?;
                sensor = sensor.apply(&sel.command);
                let zs = simulate_measurements(&live, &sensor, meas, seed, k);
                let post =
                    lmb::update(&pred, &zs, &sensor, meas, &cfg.truncation, &mut filter_rng)?;
                let tracks = lmb::extract_tracks(&post, cfg.extraction_threshold)
                    .into_iter()
                    .map(|(label, state)| Track {
                        label: Some(label),
                        state,
                    })
                    .collect();
                (FilterState::Lmb(post), (sel, zs.len()), tracks)
            }
            FilterState::Mb(post) => {
                let pred = predict_mb(&post, &birth, &cfg.motion, &mut filter_rng);
                let sel = select_command_mb(&pred, &sensor, &cfg.control, meas)?;
                sensor = sensor.apply(&sel.command);
                let zs = simulate_measurements(&live, &sensor, meas, seed, k);
                let trunc = &cfg.truncation;
                let post = cbmember_update(&pred, &zs, &sensor, meas, trunc.prune_r)?;
                let post =
                    prune_and_resample(post, trunc.prune_r, trunc.max_particles, &mut filter_rng);
                let tracks = extract_states(&post, cfg.extraction_threshold)
                    .into_iter()
                    .map(|state| Track { label: None, state })
                    .collect();
                (FilterState::Mb(post), (sel, zs.len()), tracks)
            }
        };
        state = next;
        let (sel, n_measurements) = selection;
        let tracks: Vec<Track> = tracks;
        let truth_pos: Vec<[f64; 2]> = live.iter().map(|(_, s)| s.position()).collect();
        let est_pos: Vec<[f64; 2]> = tracks.iter().map(|t| t.state.position()).collect();
        scans.push(ScanRecord {
            k,
            sensor,
            command: sel.command,
            command_index: sel.index,
            truth: live,
            tracks,
            ospa: ospa(&truth_pos, &est_pos, &cfg.ospa),
            n_measurements,
            costs: sel.table,
        });
    }
    Ok(TrialRecord {
        mode,
        trial,
        seed,
        scans,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::TruthConfig;

    fn tiny() -> RunConfig {
        let mut cfg = RunConfig {
            n_scans: 3,
            birth_particles: 100,
            ..RunConfig::default()
        };
        cfg.truncation.max_particles = 100;
        cfg
    }

    #[test]
    fn empty_scene_gives_zero_error() {
        let mut cfg = tiny();
        cfg.n_scans = 1;
        cfg.truth = TruthConfig {
            targets: vec![],
            process_noise: false,
        };
        cfg.measurement.clutter_intensity = 0.0;
        for mode in FilterMode::ALL {
            let rec = run_trial(&cfg, mode, 0, 7).unwrap();
            assert_eq!(rec.scans.len(), 1);
            assert!(rec.scans[0].tracks.is_empty());
            assert_eq!(rec.scans[0].ospa.total, 0.0);
            assert_eq!(rec.scans[0].n_measurements, 0);
        }
    }

    #[test]
    fn same_seed_same_record() {
        let cfg = tiny();
        for mode in FilterMode::ALL {
            let a = run_trial(&cfg, mode, 0, 42).unwrap();
            let b = run_trial(&cfg, mode, 0, 42).unwrap();
            assert_eq!(a, b);
            assert_eq!(
                a.scans.iter().map(|s| s.k).collect::<Vec<_>>(),
                vec![1, 2, 3]
            );
            assert!(a.scans.iter().all(|s| s.costs.len() == 17));
        }
    }

    #[test]
    fn measurements_ignore_sensor_for_random_draws() {
        // With certain detection everywhere, both sensor positions see the same
        // noise: measurement offsets from the noise-free values agree.
        let model = MeasurementModel {
            full_detection_radius: 1e6,
            clutter_intensity: 0.0,
            ..MeasurementModel::default()
        };
        let truth = vec![(0, SingleTargetState::new(700.0, 700.0, 0.0, 0.0, 0.0))];
        let s1 = SensorState::new(0.0, 0.0);
        let s2 = SensorState::new(100.0, -50.0);
        let z1 = simulate_measurements(&truth, &s1, &model, 3, 5);
        let z2 = simulate_measurements(&truth, &s2, &model, 3, 5);
        let h1 = crate::models::noise_free_measurement(&s1, [700.0, 700.0]).unwrap();
        let h2 = crate::models::noise_free_measurement(&s2, [700.0, 700.0]).unwrap();
        assert!(((z1[0].range - h1.range) - (z2[0].range - h2.range)).abs() < 1e-9);
    }

    #[test]
    fn clutter_is_shared_between_sensor_positions() {
        let model = MeasurementModel::default();
        let a = simulate_measurements(&[], &SensorState::new(0.0, 0.0), &model, 9, 2);
        let b = simulate_measurements(&[], &SensorState::new(500.0, 0.0), &model, 9, 2);
        assert_eq!(a, b);
        assert_ne!(
            a,
            simulate_measurements(&[], &SensorState::new(0.0, 0.0), &model, 9, 3)
        );
    }

    #[test]
    fn trial_seeds_differ() {
        let seeds: Vec<u64> = (0..50).map(|i| trial_seed(1, i)).collect();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), seeds.len());
        assert_eq!(trial_seed(1, 3), trial_seed(1, 3));
    }
}
