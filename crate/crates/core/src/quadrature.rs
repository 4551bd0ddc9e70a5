//! `L^p(ν)` norms of band-limited fields.
//!
//! Up to four dimensions the tensor grid is used directly. Above that the
//! norm is estimated with a randomly shifted rank-1 lattice rule: each shift
//! folds the coefficients onto `n·z mod M` and a single length-`M` FFT
//! produces all lattice samples. The spread over shifts gives the reported
//! standard error.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::lattice::{fft_nd, norm_of_samples, SpectralField};

/// Largest dimension handled by the exact tensor grid.
pub const TENSOR_MAX_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormEstimate {
    pub value: f64,
    pub std_error: f64,
}

impl NormEstimate {
    pub fn exact(value: f64) -> Self {
        NormEstimate { value, std_error: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuadratureMode {
    Tensor { oversample: usize },
    Rank1 { points_per_shift: usize, shifts: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    mode: QuadratureMode,
}

impl Quadrature {
    pub fn tensor(oversample: usize) -> Self {
        Quadrature { mode: QuadratureMode::Tensor { oversample: oversample.max(1) } }
    }

    /// `shifts` randomly shifted copies of a rank-1 rule with
    /// `points_per_shift` points (rounded up to a power of two).
    pub fn rank1(points_per_shift: usize, shifts: usize, seed: u64) -> Self {
        Quadrature {
            mode: QuadratureMode::Rank1 {
                points_per_shift: points_per_shift.next_power_of_two().max(16),
                shifts: shifts.max(2),
                seed,
            },
        }
    }

    /// Tensor grid up to four dimensions, else `8 × 2^13 = 2^16` lattice points.
    pub fn for_dimension(dim: usize) -> Self {
        if dim <= TENSOR_MAX_DIM {
            Self::tensor(1)
        } else {
            Self::rank1(1 << 13, 8, 0x5eed)
        }
    }

    pub fn mode(&self) -> QuadratureMode {
        self.mode
    }

    /// Norm of a scalar field.
    pub fn norm(&self, f: &SpectralField, p: f64) -> Result<NormEstimate> {
        self.vector_norm(std::slice::from_ref(f), p)
    }

    /// Norm of the pointwise Euclidean length `(Σ_i |g_i|²)^{1/2}`.
    pub fn vector_norm(&self, components: &[SpectralField], p: f64) -> Result<NormEstimate> {
        Ok(self.vector_norms(components, &[p])?[0])
    }

    /// Several exponents from one set of samples.
    pub fn norms(&self, f: &SpectralField, ps: &[f64]) -> Result<Vec<NormEstimate>> {
        self.vector_norms(std::slice::from_ref(f), ps)
    }

    pub fn vector_norms(&self, components: &[SpectralField], ps: &[f64]) -> Result<Vec<NormEstimate>> {
        if let Some(p) = ps.iter().find(|p| !(**p >= 1.0)) {
            return Err(LabError::InvalidParameter(format!("L^p exponent must be ≥ 1, got {p}")));
        }
        let Some(first) = components.first() else {
            return Ok(vec![NormEstimate::exact(0.0); ps.len()]);
        };
        let parseval = || components.iter().map(SpectralField::energy).sum::<f64>().sqrt();
        if ps.iter().all(|&p| p == 2.0) {
            return Ok(vec![NormEstimate::exact(parseval()); ps.len()]);
        }
        let groups = self.sample_lengths(components, first.lattice().dim());
        ps.iter()
            .map(|&p| {
                if p == 2.0 {
                    Ok(NormEstimate::exact(parseval()))
                } else {
                    reduce(&groups, p)
                }
            })
            .collect()
    }

    /// Pointwise lengths grouped by independent sample set (one group for
    /// the tensor grid, one per shift for the lattice rule).
    fn sample_lengths(&self, components: &[SpectralField], dim: usize) -> Vec<Vec<f64>> {
        match self.mode {
            QuadratureMode::Tensor { oversample } => {
                let mut sq: Vec<f64> = Vec::new();
                for g in components {
                    let samples = g.sample_grid(oversample);
                    if sq.is_empty() {
                        sq = vec![0.0; samples.len()];
                    }
                    for (acc, z) in sq.iter_mut().zip(&samples) {
                        *acc += z.norm_sqr();
                    }
                }
                vec![sq.into_iter().map(f64::sqrt).collect()]
            }
            QuadratureMode::Rank1 { points_per_shift, shifts, seed } => {
                let rule = generating_vector(dim, points_per_shift);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..shifts)
                    .map(|_| {
                        let shift: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() * 2.0 * PI).collect();
                        let mut sq = vec![0.0; points_per_shift];
                        for g in components {
                            for (acc, v) in sq.iter_mut().zip(&rank1_samples(g, &rule, &shift)) {
                                *acc += v.norm_sqr();
                            }
                        }
                        sq.into_iter().map(f64::sqrt).collect()
                    })
                    .collect()
            }
        }
    }
}

fn reduce(groups: &[Vec<f64>], p: f64) -> Result<NormEstimate> {
    if groups.len() == 1 {
        return Ok(NormEstimate::exact(norm_of_samples(groups[0].iter().copied(), p)?));
    }
    if p.is_infinite() {
        let max = groups.iter().flatten().copied().fold(0.0, f64::max);
        return Ok(NormEstimate::exact(max));
    }
    let per_shift: Vec<f64> =
        groups.iter().map(|g| g.iter().map(|v| v.powf(p)).sum::<f64>() / g.len() as f64).collect();
    let r = per_shift.len() as f64;
    let mean = per_shift.iter().sum::<f64>() / r;
    let var = per_shift.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0);
    let se_mean = (var / r).sqrt();
    let value = mean.powf(1.0 / p);
    // delta method for the p-th root
    let std_error = if mean > 0.0 { value / (p * mean) * se_mean } else { 0.0 };
    Ok(NormEstimate { value, std_error })
}

#[derive(Debug, Clone)]
struct Rank1Rule {
    points: usize,
    z: Vec<i64>,
}

fn rank1_samples(f: &SpectralField, rule: &Rank1Rule, shift: &[f64]) -> Vec<Complex64> {
    let m = rule.points;
    let mut bins = vec![Complex64::new(0.0, 0.0); m];
    for (n, c) in f.lattice().points().zip(f.coefficients()) {
        if c.norm_sqr() == 0.0 {
            continue;
        }
        let mut k: i64 = 0;
        let mut phase = 0.0;
        for ((&ni, &zi), &si) in n.iter().zip(&rule.z).zip(shift) {
            k = (k + ni * zi).rem_euclid(m as i64);
            phase += ni as f64 * si;
        }
        bins[k as usize] += c * Complex64::from_polar(1.0, phase);
    }
    fft_nd(&mut bins, &[m], true);
    bins
}

/// Korobov generating vector `(1, α, α², …) mod M` minimizing the `P_2`
/// worst-case error over a fixed candidate set. Cached per `(d, M)`.
fn generating_vector(dim: usize, points: usize) -> Rank1Rule {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Rank1Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(z) = cache.lock().unwrap().get(&(dim, points)) {
        return z.clone();
    }
    let m = points as i64;
    let korobov = |alpha: i64| {
        let mut z = Vec::with_capacity(dim);
        let mut v = 1i64;
        for _ in 0..dim {
            z.push(v);
            v = (v * alpha).rem_euclid(m);
        }
        z
    };
    let p2 = |z: &[i64]| {
        let mut total = 0.0;
        for j in 0..points as i64 {
            let mut prod = 1.0;
            for &zi in z {
                let x = ((j * zi).rem_euclid(m)) as f64 / points as f64;
                prod *= 1.0 + 2.0 * PI * PI * (x * x - x + 1.0 / 6.0);
            }
            total += prod;
        }
        total / points as f64 - 1.0
    };
    let candidates = 96usize;
    let mut best = (f64::INFINITY, 1i64);
    for c in 0..candidates {
        let alpha = (((c * points) / candidates) as i64 | 1) + 2;
        let alpha = alpha.rem_euclid(m) | 1;
        let score = p2(&korobov(alpha));
        if score < best.0 {
            best = (score, alpha);
        }
    }
    let out = Rank1Rule { points, z: korobov(best.1) };
    cache.lock().unwrap().insert((dim, points), out.clone());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::FrequencyLattice;
    use std::sync::Arc;

    #[test]
    fn rank1_integrates_band_limited_energy() {
        // |f|² has more frequencies than the rule has points, so only
        // approximate agreement is expected.
        let l = Arc::new(FrequencyLattice::new(vec![3, 2, 2, 1, 1, 1]).unwrap());
        let f = crate::random::random_field(&l, 3, crate::random::DecayProfile::Polynomial(1.0), true);
        let q = Quadrature::rank1(1 << 12, 8, 1);
        // Force the sampled path by asking for p slightly off 2.
        let est = q.norm(&f, 2.000001).unwrap();
        assert!((est.value - f.l2_norm()).abs() < 1e-3 * f.l2_norm(), "{est:?} {}", f.l2_norm());
        assert!(est.std_error < 5e-3 * f.l2_norm(), "{est:?}");
    }

    #[test]
    fn tensor_and_rank1_agree() {
        let l = Arc::new(FrequencyLattice::new(vec![4, 4, 3]).unwrap());
        let f = crate::random::random_field(&l, 11, crate::random::DecayProfile::Exponential(0.3), false);
        let exact = Quadrature::tensor(2).norm(&f, 1.5).unwrap().value;
        let est = Quadrature::rank1(1 << 13, 8, 2).norm(&f, 1.5).unwrap();
        assert!((est.value - exact).abs() < 4.0 * est.std_error + 1e-3 * exact, "{est:?} vs {exact}");
    }
}
