//! Trial dictionaries for lower estimates of operator norms.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::lattice::SpectralField;
use crate::random::{random_field, DecayProfile};
use crate::torus::Torus;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trial {
    pub label: String,
    pub seed: Option<u64>,
    #[serde(skip)]
    pub field: SpectralField,
}

/// Single modes, seeded random fields at three decay profiles, and random
/// `±1` combinations of the lowest modes.
#[derive(Debug, Clone)]
pub struct TrialDictionary {
    pub trials: Vec<Trial>,
}

pub const TRIAL_PROFILES: [DecayProfile; 3] =
    [DecayProfile::FlatBand, DecayProfile::Polynomial(2.0), DecayProfile::Exponential(0.5)];

impl TrialDictionary {
    /// `per_kind` seeded trials for each random kind, derived from `seed`.
    pub fn standard(torus: &Torus, per_kind: usize, seed: u64) -> Self {
        let mut trials = Vec::new();
        let d = torus.dim();
        let bands = torus.lattice().bandwidths().to_vec();
        for i in 0..d {
            for k in 1..=bands[i].min(3) as i64 {
                let n = torus.axis_mode(i, k);
                trials.push(Trial {
                    label: format!("cos{n:?}"),
                    seed: None,
                    field: torus.cosine(&n, 1.0).expect("mode inside the band"),
                });
            }
        }
        if d >= 2 {
            let mut n = vec![0; d];
            n[0] = 1;
            n[1] = 1;
            trials.push(Trial { label: format!("cos{n:?}"), seed: None, field: torus.cosine(&n, 1.0).unwrap() });
        }
        for (p, profile) in TRIAL_PROFILES.iter().enumerate() {
            for j in 0..per_kind {
                let s = seed.wrapping_mul(1000).wrapping_add((p * per_kind + j) as u64);
                trials.push(Trial {
                    label: format!("random:{profile:?}"),
                    seed: Some(s),
                    field: random_field(torus.lattice(), s, *profile, true),
                });
            }
        }
        for j in 0..per_kind {
            let s = seed.wrapping_mul(1000).wrapping_add((3 * per_kind + j) as u64);
            trials.push(Trial { label: "signs".into(), seed: Some(s), field: sign_pattern(torus, s) });
        }
        TrialDictionary { trials }
    }

    /// Only seeded random fields with the given decay.
    pub fn random(torus: &Torus, count: usize, seed: u64, profile: DecayProfile) -> Self {
        let trials = (0..count)
            .map(|j| {
                let s = seed.wrapping_add(j as u64);
                Trial {
                    label: format!("random:{profile:?}"),
                    seed: Some(s),
                    field: random_field(torus.lattice(), s, profile, true),
                }
            })
            .collect();
        TrialDictionary { trials }
    }

    pub fn fields(&self) -> impl Iterator<Item = &SpectralField> {
        self.trials.iter().map(|t| &t.field)
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }
}

/// `Σ_n s_n cos(n·x)` over the nonzero half of `{|n_i| ≤ 1}` with random
/// signs `s_n`.
pub fn sign_pattern(torus: &Torus, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lattice = torus.lattice();
    let mut f = SpectralField::zeros(lattice.clone());
    let origin = lattice.origin();
    for k in (origin + 1)..lattice.len() {
        if lattice.point(k).iter().any(|v| v.abs() > 1) {
            continue;
        }
        let s = if rng.gen::<bool>() { 0.5 } else { -0.5 };
        f.coefficients_mut()[k] = Complex64::new(s, 0.0);
        f.coefficients_mut()[lattice.negated(k)] = Complex64::new(s, 0.0);
    }
    f
}
