use rand::Rng;

use crate::types::{Particle, ParticleDensity};

/// Systematic resampling to `n` equally weighted particles.
pub fn resample<R: Rng + ?Sized>(
    density: &ParticleDensity,
    n: usize,
    rng: &mut R,
) -> ParticleDensity {
    let n = n.max(1);
    let particles = density.particles();
    let step = 1.0 / n as f64;
    let mut u = rng.random::<f64>() * step;
    let mut cumulative = particles[0].weight;
    let mut i = 0;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        while u > cumulative && i + 1 < particles.len() {
            i += 1;
            cumulative += particles[i].weight;
        }
        out.push(Particle::new(step, particles[i].state));
        u += step;
    }
    ParticleDensity::from_weighted(out).expect("positive equal weights")
}
