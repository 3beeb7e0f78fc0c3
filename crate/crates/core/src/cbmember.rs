//! Cardinality-balanced multi-Bernoulli (CB-MeMBer) update on unlabeled
//! particle densities.
//!
//! The posterior holds one legacy component per predicted component (the
//! missed-detection branch) and one component per measurement built from
//! all predicted components' particles.

use rand::Rng;

use crate::control::SensorState;
use crate::error::Result;
use crate::lmb::{resample, AssociationTable, LmbDensity};
use crate::models::{clutter_intensity, Measurement, MeasurementModel, MotionModel};
use crate::types::{
    clamp_existence, eap_estimate, BernoulliComponent, Particle, ParticleDensity, SingleTargetState,
};

/// Measurement-updated components below this existence are dropped.
pub const DEFAULT_UPDATED_PRUNE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MbDensity {
    pub components: Vec<BernoulliComponent>,
}

impl MbDensity {
    pub fn new(components: Vec<BernoulliComponent>) -> Self {
        Self { components }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn expected_cardinality(&self) -> f64 {
        self.components.iter().map(|c| c.r).sum()
    }
}

/// Drops the labels of a predicted LMB density, keeping label order.
pub fn strip_labels(pred: &LmbDensity) -> MbDensity {
    MbDensity::new(
        pred.components()
            .iter()
            .map(|c| BernoulliComponent::new(c.r, c.density.clone()))
            .collect(),
    )
}

/// CB-MeMBer update of `pred` with measurement set `measurements`.
///
/// Measurement-updated components with existence below `updated_prune` are
/// discarded; legacy components are always kept. Particles with zero
/// posterior weight are not carried into measurement-updated components.
pub fn cbmember_update(
    pred: &MbDensity,
    measurements: &[Measurement],
    sensor: &SensorState,
    model: &MeasurementModel,
    updated_prune: f64,
) -> Result<MbDensity> {
    let densities: Vec<&ParticleDensity> = pred.components.iter().map(|c| &c.density).collect();
    let table = AssociationTable::build(&densities, measurements, sensor, model);
    let n = pred.len();

    // rho_L^(i) = <p^(i), p_D>.
    let detect: Vec<f64> = (0..n).map(|i| 1.0 - table.eta[i][0]).collect();
    let mut out = Vec::with_capacity(n + measurements.len());

    for (i, c) in pred.components.iter().enumerate() {
        let r = clamp_existence(c.r);
        let rho = detect[i].clamp(0.0, 1.0);
        let r_legacy = (r * (1.0 - rho) / (1.0 - r * rho)).clamp(0.0, 1.0);
        let density = if table.eta[i][0] > 0.0 {
            c.density.reweighted(table.psi[i][0].iter().copied())?
        } else {
            c.density.clone()
        };
        let r_legacy = if table.eta[i][0] > 0.0 { r_legacy } else { 0.0 };
        out.push(BernoulliComponent::new(r_legacy, density));
    }

    for (t, z) in measurements.iter().enumerate() {
        let kappa = clutter_intensity(z, model);
        // Table entries are already divided by kappa; undo that so the sums
        // below use <p, p_D g(z|.)> directly.
        let mut numer = 0.0;
        let mut denom = 0.0;
        for (i, c) in pred.components.iter().enumerate() {
            let r = clamp_existence(c.r);
            let rho_u = table.eta[i][t + 1] * kappa;
            let one_minus = 1.0 - r * detect[i];
            numer += r * (1.0 - r) * rho_u / (one_minus * one_minus);
            denom += r * rho_u / one_minus;
        }
        if !(numer > 0.0) {
            continue;
        }
        let r_updated = (numer / (kappa + denom)).clamp(0.0, 1.0);
        if r_updated < updated_prune {
            continue;
        }
        let mut particles = Vec::new();
        for (i, c) in pred.components.iter().enumerate() {
            let r = clamp_existence(c.r);
            let odds = r / (1.0 - r);
            for (p, &psi) in c.density.particles().iter().zip(&table.psi[i][t + 1]) {
                let w = odds * p.weight * psi;
                if w > 0.0 {
                    particles.push(Particle::new(w, p.state));
                }
            }
        }
        out.push(BernoulliComponent::new(
            r_updated,
            ParticleDensity::from_weighted(particles)?,
        ));
    }
    Ok(MbDensity::new(out))
}

/// Unlabeled prediction used when CB-MeMBer is the main filter: survivors
/// plus every birth component.
pub fn predict_mb<R: Rng + ?Sized>(
    prior: &MbDensity,
    birth: &crate::models::BirthModel,
    motion: &MotionModel,
    rng: &mut R,
) -> MbDensity {
    let mut components: Vec<BernoulliComponent> = prior
        .components
        .iter()
        .map(|c| {
            let density = c
                .density
                .map_states(|s| crate::models::propagate(s, motion, rng));
            BernoulliComponent::new((c.r * motion.survival).clamp(0.0, 1.0), density)
        })
        .collect();
    components.extend(
        birth
            .components
            .iter()
            .map(|b| BernoulliComponent::new(b.r, b.density.clone())),
    );
    MbDensity::new(components)
}

/// Drops components below `prune_r` and resamples the rest.
pub fn prune_and_resample<R: Rng + ?Sized>(
    post: MbDensity,
    prune_r: f64,
    n_particles: usize,
    rng: &mut R,
) -> MbDensity {
    MbDensity::new(
        post.components
            .into_iter()
            .filter(|c| c.r >= prune_r)
            .map(|c| BernoulliComponent::new(c.r, resample(&c.density, n_particles, rng)))
            .collect(),
    )
}

/// EAP states of components with existence above `threshold`.
pub fn extract_states(post: &MbDensity, threshold: f64) -> Vec<SingleTargetState> {
    post.components
        .iter()
        .filter(|c| c.r > threshold)
        .map(|c| eap_estimate(&c.density))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmb::LmbDensity;
    use crate::models::{likelihood, noise_free_measurement};
    use crate::types::{Label, LmbComponent};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn state(x: f64, y: f64) -> SingleTargetState {
        SingleTargetState::new(x, y, 0.0, 0.0, 0.0)
    }

    fn cloud(x: f64, y: f64) -> ParticleDensity {
        ParticleDensity::uniform([state(x - 5.0, y), state(x, y), state(x + 5.0, y + 3.0)]).unwrap()
    }

    #[test]
    fn strip_labels_is_identity_on_parameters() {
        assert!(strip_labels(&LmbDensity::empty()).is_empty());
        let lmb = LmbDensity::new(
            (0..3)
                .map(|i| {
                    LmbComponent::new(Label::new(1, i), 0.1 * (i + 1) as f64, cloud(i as f64, 0.0))
                })
                .collect(),
        )
        .unwrap();
        let mb = strip_labels(&lmb);
        assert_eq!(mb.len(), 3);
        for (a, b) in mb.components.iter().zip(lmb.components()) {
            assert_eq!(a.r, b.r);
            assert_eq!(a.density, b.density);
        }
    }

    #[test]
    fn no_detection_is_identity() {
        let m = MeasurementModel {
            full_detection_radius: 0.0,
            detection_decay: 1e9,
            ..Default::default()
        };
        let pred = MbDensity::new(vec![
            BernoulliComponent::new(0.3, cloud(0.0, 100.0)),
            BernoulliComponent::new(0.9, cloud(50.0, 80.0)),
        ]);
        let post = cbmember_update(
            &pred,
            &[],
            &SensorState::new(0.0, 0.0),
            &m,
            DEFAULT_UPDATED_PRUNE,
        )
        .unwrap();
        assert_eq!(post.len(), 2);
        for (a, b) in post.components.iter().zip(&pred.components) {
            assert_abs_diff_eq!(a.r, b.r, epsilon = 1e-15);
            for (wa, wb) in a.density.weights().zip(b.density.weights()) {
                assert_abs_diff_eq!(wa, wb, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn legacy_existence_with_constant_detection() {
        // A single particle at distance 500 with R0 = 300, slope 0.001 gives p_D = 0.8.
        let m = MeasurementModel::default();
        let sensor = SensorState::new(0.0, 0.0);
        let d = 0.8;
        let r = 0.6;
        let pred = MbDensity::new(vec![BernoulliComponent::new(
            r,
            ParticleDensity::point(state(0.0, 500.0)),
        )]);
        let post = cbmember_update(&pred, &[], &sensor, &m, DEFAULT_UPDATED_PRUNE).unwrap();
        assert_abs_diff_eq!(
            post.components[0].r,
            r * (1.0 - d) / (1.0 - r * d),
            epsilon = 1e-12
        );
    }

    #[test]
    fn far_clutter_creates_no_confident_component() {
        let m = MeasurementModel::default();
        let sensor = SensorState::new(0.0, 0.0);
        let pred = MbDensity::new(vec![BernoulliComponent::new(0.7, cloud(0.0, 200.0))]);
        let z = Measurement::new(2.5, 1500.0);
        let post = cbmember_update(&pred, &[z], &sensor, &m, 0.0).unwrap();
        // The gated likelihood is zero, so no measurement-updated component appears.
        assert_eq!(post.len(), 1);
        // A weak but non-gated association: residual of 5 sigma in range.
        let z = Measurement::new(0.0, 200.0 + 5.0 * m.sigma_range);
        let post = cbmember_update(&pred, &[z], &sensor, &m, 0.0).unwrap();
        assert_eq!(post.len(), 2);
        assert!(post.components[1].r < 0.05, "{}", post.components[1].r);
        assert!(post.components[0].r < 1e-6);
    }

    #[test]
    fn measurement_updated_component_matches_hand_evaluation() {
        let m = MeasurementModel::default();
        let sensor = SensorState::new(0.0, 0.0);
        let density = cloud(0.0, 200.0);
        let r: f64 = 0.5;
        let pred = MbDensity::new(vec![BernoulliComponent::new(r, density.clone())]);
        let z = noise_free_measurement(&sensor, [1.0, 201.0]).unwrap();
        let post = cbmember_update(&pred, &[z], &sensor, &m, 0.0).unwrap();
        // p_D = 1 everywhere in the cloud, so rho_L = 1.
        let rho_u: f64 = density
            .particles()
            .iter()
            .map(|p| p.weight * likelihood(&z, &sensor, &p.state, &m))
            .sum();
        let kappa = m.clutter_intensity;
        let expected =
            (r * (1.0 - r) * rho_u / (1.0 - r).powi(2)) / (kappa + r * rho_u / (1.0 - r));
        assert_abs_diff_eq!(post.components[1].r, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(post.components[0].r, 0.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn posterior_existence_in_unit_interval(
            rs in prop::collection::vec(0.0f64..=1.0, 1..5),
            offsets in prop::collection::vec((-30.0f64..30.0, -30.0f64..30.0), 0..4),
        ) {
            let m = MeasurementModel::default();
            let sensor = SensorState::new(0.0, 0.0);
            let pred = MbDensity::new(rs.iter().enumerate()
                .map(|(i, &r)| BernoulliComponent::new(r, cloud(20.0 * i as f64, 250.0)))
                .collect());
            let zs: Vec<Measurement> = offsets.iter()
                .map(|&(dx, dy)| noise_free_measurement(&sensor, [dx, 250.0 + dy]).unwrap())
                .collect();
            let post = cbmember_update(&pred, &zs, &sensor, &m, 0.0).unwrap();
            for c in &post.components {
                prop_assert!((0.0..=1.0).contains(&c.r));
                let total: f64 = c.density.weights().sum();
                prop_assert!((total - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn close_measurement_raises_expected_cardinality(
            r in 0.05f64..0.95, dx in -3.0f64..3.0, dy in -3.0f64..3.0,
        ) {
            let m = MeasurementModel {
                full_detection_radius: 0.0,
                detection_decay: 1.0 / 600.0,
                ..Default::default()
            };
            let sensor = SensorState::new(0.0, 0.0);
            let pred = MbDensity::new(vec![BernoulliComponent::new(r, cloud(0.0, 300.0))]);
            let without = cbmember_update(&pred, &[], &sensor, &m, 0.0).unwrap();
            let z = noise_free_measurement(&sensor, [dx, 300.0 + dy]).unwrap();
            let with = cbmember_update(&pred, &[z], &sensor, &m, 0.0).unwrap();
            prop_assert!(with.expected_cardinality() > without.expected_cardinality());
        }
    }
}
