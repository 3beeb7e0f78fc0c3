//! Sequential Monte Carlo labeled multi-Bernoulli (LMB) filter.
//!
//! Prediction keeps the LMB form exactly. The update enumerates the most
//! significant `(label subset, association map)` hypotheses: the K heaviest
//! predicted label subsets, then for each subset its M cheapest association
//! maps. The hypothesis weights are renormalized over what was enumerated and
//! folded back into one Bernoulli component per label.

mod murty;
mod resample;
mod subsets;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::control::SensorState;
use crate::error::{Error, Result};
use crate::models::{
    clutter_intensity, detection_prob, likelihood_peak, noise_free_measurement, propagate,
    wrap_angle, BirthModel, Measurement, MeasurementModel, MotionModel,
};
use crate::types::{
    eap_estimate, Label, LmbComponent, Particle, ParticleDensity, SingleTargetState,
};

pub use murty::{ranked_assignments, AssociationCosts, RankedAssignment};
pub use resample::resample;
pub use subsets::{top_k_subsets, RankedSubset};

/// Association pairs whose best particle is further than this many standard
/// deviations from the measurement get zero likelihood.
pub const GATE_SIGMAS: f64 = 6.0;

/// LMB density: components with distinct labels, kept in label order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LmbDensity {
    components: Vec<LmbComponent>,
}

impl LmbDensity {
    pub fn new(mut components: Vec<LmbComponent>) -> Result<Self> {
        components.sort_by_key(|c| c.label);
        if let Some(w) = components.windows(2).find(|w| w[0].label == w[1].label) {
            return Err(Error::DuplicateLabel(w[0].label));
        }
        Ok(Self { components })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn components(&self) -> &[LmbComponent] {
        &self.components
    }

    pub fn into_components(self) -> Vec<LmbComponent> {
        self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.components.iter().map(|c| c.label)
    }

    pub fn existence(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.r).collect()
    }

    /// Expected number of targets.
    pub fn expected_cardinality(&self) -> f64 {
        self.components.iter().map(|c| c.r).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationConfig {
    /// Label subsets kept per update.
    pub k_subsets: usize,
    /// Association maps kept per label subset.
    pub m_assignments: usize,
    /// Components below this existence probability are dropped.
    pub prune_r: f64,
    /// Particles per component after resampling.
    pub max_particles: usize,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self {
            k_subsets: 100,
            m_assignments: 100,
            prune_r: 1e-3,
            max_particles: 1000,
        }
    }
}

impl TruncationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_subsets == 0 || self.m_assignments == 0 || self.max_particles == 0 {
            return Err(Error::Config("truncation counts must be positive".into()));
        }
        if !(self.prune_r > 0.0 && self.prune_r < 1.0) {
            return Err(Error::Config(format!(
                "prune_r {} outside (0, 1)",
                self.prune_r
            )));
        }
        Ok(())
    }
}

/// Chapman-Kolmogorov step: survivors are thinned by the survival
/// probability and moved through the turn model, then the birth components
/// for scan `k` are appended with labels `(k, label_index)`.
pub fn predict<R: Rng + ?Sized>(
    prior: &LmbDensity,
    birth: &BirthModel,
    motion: &MotionModel,
    k: u32,
    rng: &mut R,
) -> Result<LmbDensity> {
    let mut components = Vec::with_capacity(prior.len() + birth.components.len());
    for c in prior.components() {
        // Survival is state independent, so eta_S = p_S and the reweighting
        // by p_S cancels under normalization.
        let eta_s: f64 = c.density.weights().map(|w| w * motion.survival).sum();
        let particles: Vec<Particle> = c
            .density
            .particles()
            .iter()
            .map(|p| Particle::new(p.weight * motion.survival, propagate(&p.state, motion, rng)))
            .collect();
        let density = if eta_s > 0.0 {
            ParticleDensity::from_weighted(particles)?
        } else {
            c.density.map_states(|s| propagate(s, motion, rng))
        };
        components.push(LmbComponent::new(
            c.label,
            (eta_s * c.r).clamp(0.0, 1.0),
            density,
        ));
    }
    for b in &birth.components {
        components.push(LmbComponent::new(
            Label::new(k, b.label_index),
            b.r,
            b.density.clone(),
        ));
    }
    LmbDensity::new(components)
}

/// Per-particle detection and association terms for one predicted density
/// against one measurement set.
///
/// `psi[i][t][j]` is the factor of particle `j` of component `i` for
/// association `t` (0 = missed detection), and `eta[i][t]` its
/// particle-weighted sum.
#[derive(Debug, Clone)]
pub struct AssociationTable {
    pub psi: Vec<Vec<Vec<f64>>>,
    pub eta: Vec<Vec<f64>>,
    pub n_meas: usize,
}

impl AssociationTable {
    pub fn build(
        densities: &[&ParticleDensity],
        measurements: &[Measurement],
        sensor: &SensorState,
        model: &MeasurementModel,
    ) -> Self {
        let n_meas = measurements.len();
        let kappa: Vec<f64> = measurements
            .iter()
            .map(|z| clutter_intensity(z, model))
            .collect();
        let peak = likelihood_peak(model);
        let gate = GATE_SIGMAS * GATE_SIGMAS;
        let mut psi = Vec::with_capacity(densities.len());
        let mut eta = Vec::with_capacity(densities.len());
        for density in densities {
            let np = density.len();
            let mut rows = vec![vec![0.0; np]; n_meas + 1];
            for (j, p) in density.particles().iter().enumerate() {
                let pos = p.state.position();
                let pd = detection_prob([sensor.x, sensor.y], pos, model);
                rows[0][j] = 1.0 - pd;
                if pd == 0.0 || n_meas == 0 {
                    continue;
                }
                let Ok(h) = noise_free_measurement(sensor, pos) else {
                    continue;
                };
                for (t, z) in measurements.iter().enumerate() {
                    if kappa[t] <= 0.0 {
                        continue;
                    }
                    let db = wrap_angle(z.bearing - h.bearing) / model.sigma_bearing;
                    let dr = (z.range - h.range) / model.sigma_range;
                    let d2 = db * db + dr * dr;
                    if d2 <= gate {
                        rows[t + 1][j] = pd * peak * (-0.5 * d2).exp() / kappa[t];
                    }
                }
            }
            let sums = rows
                .iter()
                .map(|row| density.weights().zip(row).map(|(w, v)| w * v).sum())
                .collect();
            psi.push(rows);
            eta.push(sums);
        }
        Self { psi, eta, n_meas }
    }

    /// Negative log association weights for the given component indices.
    pub fn costs(&self, members: &[usize]) -> AssociationCosts {
        let costs = members
            .iter()
            .flat_map(|&i| {
                self.eta[i]
                    .iter()
                    .map(|&e| if e > 0.0 { -e.ln() } else { f64::INFINITY })
            })
            .collect();
        AssociationCosts::new(members.len(), self.n_meas, costs)
    }
}

/// `psi_Z(x; theta)`: missed-detection probability for `z_index = 0`,
/// otherwise `p_D(x) g(z | x) / kappa(z)` for measurement `z_index` (1-based).
pub fn psi_z(
    x: &SingleTargetState,
    sensor: &SensorState,
    z_index: usize,
    measurements: &[Measurement],
    model: &MeasurementModel,
) -> Result<f64> {
    let pd = detection_prob([sensor.x, sensor.y], x.position(), model);
    if z_index == 0 {
        return Ok(1.0 - pd);
    }
    let z = measurements
        .get(z_index - 1)
        .ok_or(Error::MeasurementIndex {
            index: z_index,
            len: measurements.len(),
        })?;
    let kappa = clutter_intensity(z, model);
    if pd == 0.0 || kappa <= 0.0 {
        return Ok(0.0);
    }
    Ok(pd * crate::models::likelihood(z, sensor, x, model) / kappa)
}

/// One joint hypothesis: the included labels and, aligned with them, the
/// association of each (0 = missed detection, else 1-based measurement index).
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub members: Vec<usize>,
    pub subset: Vec<Label>,
    pub assoc: Vec<usize>,
    pub weight: f64,
}

/// Top-K subsets crossed with top-M association maps, weights normalized.
pub fn enumerate_hypotheses(
    pred: &LmbDensity,
    table: &AssociationTable,
    trunc: &TruncationConfig,
) -> Result<Vec<Hypothesis>> {
    let existence = pred.existence();
    let mut hyps = Vec::new();
    let mut log_weights = Vec::new();
    for subset in top_k_subsets(&existence, trunc.k_subsets) {
        if !(subset.weight > 0.0) {
            continue;
        }
        let costs = table.costs(&subset.members);
        let log_w = subset.weight.ln();
        for ranked in ranked_assignments(&costs, trunc.m_assignments) {
            log_weights.push(log_w - ranked.cost);
            hyps.push(Hypothesis {
                subset: subset
                    .members
                    .iter()
                    .map(|&i| pred.components[i].label)
                    .collect(),
                members: subset.members.clone(),
                assoc: ranked.assoc,
                weight: 0.0,
            });
        }
    }
    normalize_log_weights(&mut hyps, &log_weights)?;
    Ok(hyps)
}

fn normalize_log_weights(hyps: &mut [Hypothesis], log_weights: &[f64]) -> Result<()> {
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateUpdate);
    }
    let total: f64 = log_weights.iter().map(|l| (l - max).exp()).sum();
    for (h, l) in hyps.iter_mut().zip(log_weights) {
        h.weight = (l - max).exp() / total;
    }
    Ok(())
}

/// Marginalizes weighted hypotheses into one Bernoulli component per label.
/// No pruning or resampling happens here.
pub fn mix_hypotheses(
    pred: &LmbDensity,
    table: &AssociationTable,
    hyps: &[Hypothesis],
) -> Result<Vec<LmbComponent>> {
    let n = pred.len();
    let width = table.n_meas + 1;
    // beta[i][t]: total weight of hypotheses giving label i association t.
    let mut beta = vec![vec![0.0; width]; n];
    for h in hyps {
        for (&i, &t) in h.members.iter().zip(&h.assoc) {
            beta[i][t] += h.weight;
        }
    }
    pred.components
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let r: f64 = beta[i].iter().sum();
            if !(r > 0.0) {
                return Ok(LmbComponent::new(c.label, 0.0, c.density.clone()));
            }
            let mut weights = vec![0.0; c.density.len()];
            for (t, &b) in beta[i].iter().enumerate() {
                let eta = table.eta[i][t];
                if b == 0.0 || eta == 0.0 {
                    continue;
                }
                let scale = b / eta;
                for ((acc, w), psi) in weights
                    .iter_mut()
                    .zip(c.density.weights())
                    .zip(&table.psi[i][t])
                {
                    *acc += scale * w * psi;
                }
            }
            Ok(LmbComponent::new(
                c.label,
                r.min(1.0),
                c.density.reweighted(weights)?,
            ))
        })
        .collect()
}

/// Posterior before pruning and resampling.
pub fn update_components(
    pred: &LmbDensity,
    measurements: &[Measurement],
    sensor: &SensorState,
    model: &MeasurementModel,
    trunc: &TruncationConfig,
) -> Result<Vec<LmbComponent>> {
    let densities: Vec<&ParticleDensity> = pred.components.iter().map(|c| &c.density).collect();
    let table = AssociationTable::build(&densities, measurements, sensor, model);
    let hyps = enumerate_hypotheses(pred, &table, trunc)?;
    mix_hypotheses(pred, &table, &hyps)
}

/// Full LMB measurement update: hypothesis enumeration, marginalization,
/// pruning below `prune_r` and systematic resampling to `max_particles`.
pub fn update<R: Rng + ?Sized>(
    pred: &LmbDensity,
    measurements: &[Measurement],
    sensor: &SensorState,
    model: &MeasurementModel,
    trunc: &TruncationConfig,
    rng: &mut R,
) -> Result<LmbDensity> {
    let components = update_components(pred, measurements, sensor, model, trunc)?;
    let kept = components
        .into_iter()
        .filter(|c| c.r >= trunc.prune_r)
        .map(|c| LmbComponent {
            density: resample(&c.density, trunc.max_particles, rng),
            ..c
        })
        .collect();
    LmbDensity::new(kept)
}

/// `(label, EAP state)` for every component with existence above `threshold`.
pub fn extract_tracks(post: &LmbDensity, threshold: f64) -> Vec<(Label, SingleTargetState)> {
    post.components
        .iter()
        .filter(|c| c.r > threshold)
        .map(|c| (c.label, eap_estimate(&c.density)))
        .collect()
}
