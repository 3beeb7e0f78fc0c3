//! Core value types for labeled and unlabeled multi-Bernoulli densities.
//!
//! Every density here is particle based: a single-object density is a set of
//! weighted five-component states `(x, y, vx, vy, omega)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Existence probabilities are clamped to `[EXISTENCE_EPS, 1 - EXISTENCE_EPS]`
/// wherever a formula divides by `1 - r`.
pub const EXISTENCE_EPS: f64 = 1e-9;

pub fn clamp_existence(r: f64) -> f64 {
    r.clamp(EXISTENCE_EPS, 1.0 - EXISTENCE_EPS)
}

/// Track label: the scan a component was born on plus an index that separates
/// simultaneous births. Ordered lexicographically by `(birth_time, birth_index)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Label {
    pub birth_time: u32,
    pub birth_index: u32,
}

impl Label {
    pub const fn new(birth_time: u32, birth_index: u32) -> Self {
        Self {
            birth_time,
            birth_index,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.birth_time, self.birth_index)
    }
}

/// Nearly-constant-turn state: planar position (m), velocity (m/s) and turn
/// rate (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SingleTargetState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl SingleTargetState {
    pub const fn new(x: f64, y: f64, vx: f64, vy: f64, omega: f64) -> Self {
        Self {
            x,
            y,
            vx,
            vy,
            omega,
        }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.x, self.y, self.vx, self.vy, self.omega]
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4])
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub weight: f64,
    pub state: SingleTargetState,
}

impl Particle {
    pub const fn new(weight: f64, state: SingleTargetState) -> Self {
        Self { weight, state }
    }
}

/// Weighted particle approximation of a single-object density.
///
/// Always holds at least one particle and weights that sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleDensity {
    particles: Vec<Particle>,
}

impl ParticleDensity {
    /// Builds a density from arbitrary non-negative weights, normalizing them.
    pub fn from_weighted(particles: Vec<Particle>) -> Result<Self> {
        normalize_particles(particles).map(|particles| Self { particles })
    }

    /// Equally weighted particles.
    pub fn uniform(states: impl IntoIterator<Item = SingleTargetState>) -> Result<Self> {
        let particles: Vec<Particle> = states.into_iter().map(|s| Particle::new(1.0, s)).collect();
        Self::from_weighted(particles)
    }

    pub fn point(state: SingleTargetState) -> Self {
        Self {
            particles: vec![Particle::new(1.0, state)],
        }
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.particles.iter().map(|p| p.weight)
    }

    pub fn states(&self) -> impl Iterator<Item = &SingleTargetState> + '_ {
        self.particles.iter().map(|p| &p.state)
    }

    /// Replaces the weights (same particle order) and renormalizes.
    pub fn reweighted(&self, weights: impl IntoIterator<Item = f64>) -> Result<Self> {
        let particles = self
            .particles
            .iter()
            .zip(weights)
            .map(|(p, w)| Particle::new(w, p.state))
            .collect();
        Self::from_weighted(particles)
    }

    /// Same weights, states replaced through `f`.
    pub fn map_states(&self, mut f: impl FnMut(&SingleTargetState) -> SingleTargetState) -> Self {
        Self {
            particles: self
                .particles
                .iter()
                .map(|p| Particle::new(p.weight, f(&p.state)))
                .collect(),
        }
    }

    pub fn into_particles(self) -> Vec<Particle> {
        self.particles
    }
}

fn normalize_particles(mut particles: Vec<Particle>) -> Result<Vec<Particle>> {
    let total: f64 = particles.iter().map(|p| p.weight).sum();
    if particles.is_empty()
        || !(total > 0.0)
        || !total.is_finite()
        || particles.iter().any(|p| p.weight < 0.0)
    {
        return Err(Error::DegenerateDensity(total));
    }
    for p in &mut particles {
        p.weight /= total;
    }
    Ok(particles)
}

/// Rescales the weights of a density so they sum to one.
pub fn normalize(density: ParticleDensity) -> Result<ParticleDensity> {
    ParticleDensity::from_weighted(density.particles)
}

/// Weighted mean of the particle states (EAP point estimate).
pub fn eap_estimate(density: &ParticleDensity) -> SingleTargetState {
    let mut acc = [0.0; 5];
    for p in density.particles() {
        for (a, v) in acc.iter_mut().zip(p.state.as_array()) {
            *a += p.weight * v;
        }
    }
    SingleTargetState::from_array(acc)
}

/// One labeled Bernoulli track.
#[derive(Debug, Clone, PartialEq)]
pub struct LmbComponent {
    pub label: Label,
    pub r: f64,
    pub density: ParticleDensity,
}

impl LmbComponent {
    pub fn new(label: Label, r: f64, density: ParticleDensity) -> Self {
        debug_assert!((0.0..=1.0).contains(&r), "existence {r} outside [0, 1]");
        Self { label, r, density }
    }
}

/// One unlabeled Bernoulli component.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliComponent {
    pub r: f64,
    pub density: ParticleDensity,
}

impl BernoulliComponent {
    pub fn new(r: f64, density: ParticleDensity) -> Self {
        debug_assert!((0.0..=1.0).contains(&r), "existence {r} outside [0, 1]");
        Self { r, density }
    }
}

/// Product-form weight of a label subset, evaluated in component order:
/// `prod_{i not in L} (1 - r_i) * prod_{i in L} r_i` with clamped `r`.
///
/// The evaluation order is fixed so that equal subsets always give
/// bit-identical weights.
pub fn product_weight(existence: &[f64], included: impl Fn(usize) -> bool) -> f64 {
    existence.iter().enumerate().fold(1.0, |acc, (i, &r)| {
        let r = clamp_existence(r);
        acc * if included(i) { r } else { 1.0 - r }
    })
}

/// Weight of the label set `subset` under the LMB density `components`.
pub fn lmb_subset_weight(components: &[LmbComponent], subset: &[Label]) -> Result<f64> {
    if let Some(missing) = subset
        .iter()
        .find(|l| !components.iter().any(|c| c.label == **l))
    {
        return Err(Error::UnknownLabel(*missing));
    }
    let existence: Vec<f64> = components.iter().map(|c| c.r).collect();
    Ok(product_weight(&existence, |i| {
        subset.contains(&components[i].label)
    }))
}
