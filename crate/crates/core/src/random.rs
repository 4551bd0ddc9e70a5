//! Seeded real-valued trial fields.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::lattice::{FrequencyLattice, SpectralField};

/// Envelope bounding `|c_n|` as a function of the Euclidean length `|n|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DecayProfile {
    FlatBand,
    Polynomial(f64),
    Exponential(f64),
}

impl DecayProfile {
    pub fn envelope(&self, n: &[i64]) -> f64 {
        let r = (n.iter().map(|&k| (k * k) as f64).sum::<f64>()).sqrt();
        match *self {
            DecayProfile::FlatBand => 1.0,
            DecayProfile::Polynomial(alpha) => (1.0 + r).powf(-alpha),
            DecayProfile::Exponential(gamma) => (-gamma * r).exp(),
        }
    }
}

/// Hermitian-symmetric random coefficients with `|c_n| ≤ envelope(n)`.
/// Deterministic in `seed`.
pub fn random_field(
    lattice: &Arc<FrequencyLattice>,
    seed: u64,
    decay: DecayProfile,
    mean_zero: bool,
) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = SpectralField::zeros(lattice.clone());
    let origin = lattice.origin();
    for k in (origin + 1)..lattice.len() {
        let bound = decay.envelope(lattice.point(k));
        let radius = bound * rng.gen::<f64>();
        let angle = rng.gen::<f64>() * std::f64::consts::TAU;
        let c = Complex64::from_polar(radius, angle);
        f.coefficients_mut()[k] = c;
        f.coefficients_mut()[lattice.negated(k)] = c.conj();
    }
    if !mean_zero {
        f.coefficients_mut()[origin] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_real_and_enveloped() {
        let l = Arc::new(FrequencyLattice::new(vec![8, 8]).unwrap());
        let a = random_field(&l, 7, DecayProfile::Polynomial(2.0), true);
        let b = random_field(&l, 7, DecayProfile::Polynomial(2.0), true);
        assert_eq!(a, b);
        assert_eq!(a.mean(), Complex64::new(0.0, 0.0));
        assert!(a.is_real(1e-12));
        for (n, c) in l.points().zip(a.coefficients()) {
            assert!(c.norm() <= DecayProfile::Polynomial(2.0).envelope(n) + 1e-15);
        }
        let c = random_field(&l, 8, DecayProfile::FlatBand, false);
        assert_ne!(a, c);
        assert!(c.is_real(1e-12));
    }
}
