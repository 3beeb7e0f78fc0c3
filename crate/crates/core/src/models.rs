//! Target dynamics, range-bearing sensing, clutter and ground truth for the
//! mobile-sensor scenario.

use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector4};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::control::SensorState;
use crate::error::{Error, Result};
use crate::types::{ParticleDensity, SingleTargetState};

/// Below this `|omega * T|` the turn matrix falls back to its constant-velocity limit.
const TURN_RATE_EPS: f64 = 1e-6;

/// Nearly-constant-turn motion with acceleration and turn-rate noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionModel {
    /// Sampling period `T` (s).
    pub period: f64,
    /// Acceleration noise std (m/s^2).
    pub sigma_accel: f64,
    /// Turn-rate noise std (rad/s).
    pub sigma_turn: f64,
    /// Survival probability.
    pub survival: f64,
}

impl Default for MotionModel {
    fn default() -> Self {
        Self {
            period: 1.0,
            sigma_accel: 15.0,
            sigma_turn: PI / 180.0,
            survival: 0.99,
        }
    }
}

impl MotionModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.period > 0.0) {
            return Err(Error::Config(format!(
                "period must be > 0, got {}",
                self.period
            )));
        }
        if !(self.sigma_accel >= 0.0 && self.sigma_turn >= 0.0) {
            return Err(Error::Config("motion noise stds must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.survival) {
            return Err(Error::Config(format!(
                "survival {} outside [0, 1]",
                self.survival
            )));
        }
        Ok(())
    }

    pub fn noiseless(period: f64, survival: f64) -> Self {
        Self {
            period,
            sigma_accel: 0.0,
            sigma_turn: 0.0,
            survival,
        }
    }
}

/// Coordinated-turn transition matrix acting on `[x, y, vx, vy]`.
pub fn ct_transition_matrix(omega: f64, period: f64) -> Matrix4<f64> {
    let wt = omega * period;
    let (s, c) = wt.sin_cos();
    let (a, b) = if wt.abs() < TURN_RATE_EPS {
        (period, 0.0)
    } else {
        (s / omega, (1.0 - c) / omega)
    };
    Matrix4::new(
        1.0, 0.0, a, -b, //
        0.0, 1.0, b, a, //
        0.0, 0.0, c, -s, //
        0.0, 0.0, s, c,
    )
}

/// One step of the turn model; deterministic when both noise stds are zero.
pub fn propagate<R: Rng + ?Sized>(
    state: &SingleTargetState,
    model: &MotionModel,
    rng: &mut R,
) -> SingleTargetState {
    let t = model.period;
    let f = ct_transition_matrix(state.omega, t);
    let mut next = f * Vector4::new(state.x, state.y, state.vx, state.vy);
    let mut omega = state.omega;
    if model.sigma_accel > 0.0 {
        let ex: f64 = rng.sample::<f64, _>(StandardNormal) * model.sigma_accel;
        let ey: f64 = rng.sample::<f64, _>(StandardNormal) * model.sigma_accel;
        next += Vector4::new(0.5 * t * t * ex, 0.5 * t * t * ey, t * ex, t * ey);
    }
    if model.sigma_turn > 0.0 {
        omega += t * rng.sample::<f64, _>(StandardNormal) * model.sigma_turn;
    }
    SingleTargetState::new(next[0], next[1], next[2], next[3], omega)
}

/// Range-bearing measurement; bearing is measured clockwise from the +y axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub bearing: f64,
    pub range: f64,
}

impl Measurement {
    pub const fn new(bearing: f64, range: f64) -> Self {
        Self { bearing, range }
    }
}

/// Rectangular support in measurement space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementRegion {
    pub bearing: [f64; 2],
    pub range: [f64; 2],
}

impl MeasurementRegion {
    pub fn contains(&self, z: &Measurement) -> bool {
        (self.bearing[0]..=self.bearing[1]).contains(&z.bearing)
            && (self.range[0]..=self.range[1]).contains(&z.range)
    }

    /// Area in rad * m.
    pub fn area(&self) -> f64 {
        (self.bearing[1] - self.bearing[0]) * (self.range[1] - self.range[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementModel {
    /// Bearing noise std (rad).
    pub sigma_bearing: f64,
    /// Range noise std (m).
    pub sigma_range: f64,
    /// Radius within which detection is certain (m).
    pub full_detection_radius: f64,
    /// Linear decay of the detection probability beyond that radius (1/m).
    pub detection_decay: f64,
    /// Uniform clutter intensity ((rad m)^-1).
    pub clutter_intensity: f64,
    /// Sensor-relative support of clutter and of reported measurements.
    pub region: MeasurementRegion,
}

impl Default for MeasurementModel {
    fn default() -> Self {
        Self {
            sigma_bearing: PI / 180.0,
            sigma_range: 5.0,
            full_detection_radius: 300.0,
            detection_decay: 0.001,
            clutter_intensity: 1.6e-3,
            region: MeasurementRegion {
                bearing: [-PI, PI],
                range: [0.0, 2000.0],
            },
        }
    }
}

impl MeasurementModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_bearing > 0.0 && self.sigma_range > 0.0) {
            return Err(Error::Config("measurement noise stds must be > 0".into()));
        }
        if !(self.full_detection_radius >= 0.0 && self.detection_decay >= 0.0) {
            return Err(Error::Config(
                "detection radius and decay must be >= 0".into(),
            ));
        }
        if !(self.clutter_intensity >= 0.0) {
            return Err(Error::Config("clutter intensity must be >= 0".into()));
        }
        let r = &self.region;
        if !(r.bearing[0] < r.bearing[1] && r.range[0] < r.range[1]) {
            return Err(Error::Config("measurement region must be non-empty".into()));
        }
        Ok(())
    }

    /// Mean number of clutter returns per scan.
    pub fn expected_clutter(&self) -> f64 {
        self.clutter_intensity * self.region.area()
    }
}

/// Noise-free bearing and range of `target` seen from `sensor`.
pub fn noise_free_measurement(sensor: &SensorState, target: [f64; 2]) -> Result<Measurement> {
    let dx = target[0] - sensor.x;
    let dy = target[1] - sensor.y;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::UndefinedBearing);
    }
    Ok(Measurement::new(dx.atan2(dy), dx.hypot(dy)))
}

/// Noisy range-bearing measurement of a target.
pub fn measure<R: Rng + ?Sized>(
    sensor: &SensorState,
    target: &SingleTargetState,
    model: &MeasurementModel,
    rng: &mut R,
) -> Result<Measurement> {
    let z = noise_free_measurement(sensor, target.position())?;
    let nb: f64 = rng.sample(StandardNormal);
    let nr: f64 = rng.sample(StandardNormal);
    Ok(Measurement::new(
        wrap_angle(z.bearing + model.sigma_bearing * nb),
        z.range + model.sigma_range * nr,
    ))
}

/// Range-dependent detection probability: one inside the full-detection
/// radius, then decaying linearly to zero.
pub fn detection_prob(sensor: [f64; 2], target: [f64; 2], model: &MeasurementModel) -> f64 {
    let d = (target[0] - sensor[0]).hypot(target[1] - sensor[1]);
    if d <= model.full_detection_radius {
        1.0
    } else {
        (1.0 - model.detection_decay * (d - model.full_detection_radius)).max(0.0)
    }
}

/// Distance beyond which a target can no longer be detected.
pub fn detection_horizon(model: &MeasurementModel) -> f64 {
    if model.detection_decay > 0.0 {
        model.full_detection_radius + 1.0 / model.detection_decay
    } else {
        f64::INFINITY
    }
}

/// Poisson number of clutter returns, uniform over the measurement region.
pub fn sample_clutter<R: Rng + ?Sized>(model: &MeasurementModel, rng: &mut R) -> Vec<Measurement> {
    let mean = model.expected_clutter();
    if !(mean > 0.0) {
        return Vec::new();
    }
    let count = Poisson::new(mean)
        .expect("positive finite mean")
        .sample(rng) as usize;
    let region = &model.region;
    let bearing =
        Uniform::new_inclusive(region.bearing[0], region.bearing[1]).expect("valid region");
    let range = Uniform::new_inclusive(region.range[0], region.range[1]).expect("valid region");
    (0..count)
        .map(|_| Measurement::new(bearing.sample(rng), range.sample(rng)))
        .collect()
}

/// Clutter intensity at `z`.
pub fn clutter_intensity(z: &Measurement, model: &MeasurementModel) -> f64 {
    if model.region.contains(z) {
        model.clutter_intensity
    } else {
        0.0
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Squared Mahalanobis residual of `z` about the noise-free measurement of
/// `x`, or `None` when `x` sits on the sensor.
pub fn residual_sq(
    z: &Measurement,
    sensor: &SensorState,
    x: &SingleTargetState,
    model: &MeasurementModel,
) -> Option<f64> {
    let h = noise_free_measurement(sensor, x.position()).ok()?;
    let db = wrap_angle(z.bearing - h.bearing) / model.sigma_bearing;
    let dr = (z.range - h.range) / model.sigma_range;
    Some(db * db + dr * dr)
}

/// Gaussian measurement likelihood `g(z | x)`.
pub fn likelihood(
    z: &Measurement,
    sensor: &SensorState,
    x: &SingleTargetState,
    model: &MeasurementModel,
) -> f64 {
    match residual_sq(z, sensor, x, model) {
        Some(d2) => likelihood_peak(model) * (-0.5 * d2).exp(),
        None => 0.0,
    }
}

pub fn likelihood_peak(model: &MeasurementModel) -> f64 {
    1.0 / (2.0 * PI * model.sigma_bearing * model.sigma_range)
}

/// Birth track specification: a Gaussian in state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BirthSpec {
    pub r: f64,
    pub mean: [f64; 5],
    /// Diagonal standard deviations.
    pub std: [f64; 5],
}

fn default_birth_specs() -> Vec<BirthSpec> {
    let std = [50.0, 50.0, 50.0, 50.0, 6.0 * PI / 180.0];
    [
        (0.02, [800.0, 600.0]),
        (0.02, [650.0, 500.0]),
        (0.03, [620.0, 700.0]),
        (0.03, [750.0, 800.0]),
    ]
    .into_iter()
    .map(|(r, [x, y])| BirthSpec {
        r,
        mean: [x, y, 0.0, 0.0, 0.0],
        std,
    })
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BirthConfig {
    pub components: Vec<BirthSpec>,
}

impl Default for BirthConfig {
    fn default() -> Self {
        Self {
            components: default_birth_specs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BirthComponent {
    pub r: f64,
    pub density: ParticleDensity,
    pub label_index: u32,
}

/// Labeled multi-Bernoulli birth model; component `i` is born with label
/// `(k, label_index)` at scan `k`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BirthModel {
    pub components: Vec<BirthComponent>,
}

impl BirthModel {
    /// Samples `n_particles` equally weighted particles per Gaussian birth spec.
    pub fn sample<R: Rng + ?Sized>(
        config: &BirthConfig,
        n_particles: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let components = config
            .components
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                if !(0.0..=1.0).contains(&spec.r) {
                    return Err(Error::Config(format!("birth r {} outside [0, 1]", spec.r)));
                }
                let states = (0..n_particles.max(1)).map(|_| {
                    let mut v = spec.mean;
                    for (value, sd) in v.iter_mut().zip(spec.std) {
                        *value += sd * rng.sample::<f64, _>(StandardNormal);
                    }
                    SingleTargetState::from_array(v)
                });
                Ok(BirthComponent {
                    r: spec.r,
                    density: ParticleDensity::uniform(states.collect::<Vec<_>>())?,
                    label_index: i as u32,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { components })
    }
}

/// A ground-truth target: initial `[x, y, vx, vy]` and its lifetime
/// `[birth_scan, death_scan)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub initial: [f64; 4],
    #[serde(default = "default_birth_scan")]
    pub birth_scan: u32,
    /// Exclusive; `None` keeps the target alive to the end of the run.
    #[serde(default)]
    pub death_scan: Option<u32>,
}

fn default_birth_scan() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruthConfig {
    pub targets: Vec<TargetSpec>,
    /// Propagate truth with the noisy turn model instead of exact constant velocity.
    pub process_noise: bool,
}

impl Default for TruthConfig {
    fn default() -> Self {
        let targets = [
            [800.0, 600.0, 1.0, 0.0],
            [650.0, 500.0, 0.3, 0.6],
            [620.0, 700.0, 0.25, 0.45],
            [750.0, 800.0, 0.0, 0.6],
            [700.0, 700.0, 0.2, 0.6],
        ]
        .into_iter()
        .map(|initial| TargetSpec {
            initial,
            birth_scan: 1,
            death_scan: None,
        })
        .collect();
        Self {
            targets,
            process_noise: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthTrack {
    pub id: usize,
    pub birth_scan: u32,
    /// Exclusive.
    pub death_scan: u32,
    /// `states[i]` is the state at scan `birth_scan + i`.
    pub states: Vec<SingleTargetState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub n_scans: u32,
    pub tracks: Vec<TruthTrack>,
}

impl GroundTruth {
    /// Live targets at scan `k` (1-based), ordered by track id.
    pub fn at(&self, k: u32) -> Vec<(usize, SingleTargetState)> {
        self.tracks
            .iter()
            .filter(|t| t.birth_scan <= k && k < t.death_scan)
            .map(|t| (t.id, t.states[(k - t.birth_scan) as usize]))
            .collect()
    }
}

/// Propagates each configured target over scans `1..=n_scans`.
///
/// Without process noise targets follow exact constant-velocity motion.
pub fn generate_ground_truth<R: Rng + ?Sized>(
    config: &TruthConfig,
    motion: &MotionModel,
    n_scans: u32,
    rng: &mut R,
) -> GroundTruth {
    let step = if config.process_noise {
        *motion
    } else {
        MotionModel::noiseless(motion.period, 1.0)
    };
    let tracks = config
        .targets
        .iter()
        .enumerate()
        .map(|(id, spec)| {
            let birth = spec.birth_scan.max(1);
            let death = spec
                .death_scan
                .unwrap_or(n_scans + 1)
                .min(n_scans + 1)
                .max(birth);
            let [x, y, vx, vy] = spec.initial;
            let mut state = SingleTargetState::new(x, y, vx, vy, 0.0);
            let mut states = Vec::with_capacity((death - birth) as usize);
            for _ in birth..death {
                states.push(state);
                state = propagate(&state, &step, rng);
            }
            TruthTrack {
                id,
                birth_scan: birth,
                death_scan: death,
                states,
            }
        })
        .collect();
    GroundTruth { n_scans, tracks }
}
