//! Spectral Poisson solver `u = L^{-1} f` and regularity checks for `u`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, LabError, Result};
use crate::heat::{heat_apply, log_mu_identity_on, p_star};
use crate::lattice::SpectralField;
use crate::lipschitz::{
    canonical_difference_order, canonical_time_order, dist_seminorm, lambda_seminorm_with, SeminormOptions,
};
use crate::report::{ExperimentReport, Table};
use crate::riesz::{riesz_components, riesz_second};
use crate::torus::Torus;
use crate::trials::TrialDictionary;

/// `u = L^{-1} f` with multiplier `1/λ(n)`, zero at `n = 0`.
pub fn solve_poisson(torus: &Torus, f: &SpectralField) -> Result<SpectralField> {
    torus.check_field(f)?;
    if !f.is_mean_zero() {
        return Err(LabError::NotMeanZero(f.mean().norm()));
    }
    torus.apply_eigen(f, |l| if l == 0.0 { 0.0 } else { 1.0 / l })
}

/// `L u`.
pub fn apply_generator(torus: &Torus, u: &SpectralField) -> Result<SpectralField> {
    torus.apply_eigen(u, |l| l)
}

/// Index pairs `(i, j)`, `i ≤ j`: all of them up to dimension 4, otherwise a
/// seeded sample of 12.
pub fn sampled_pairs(dim: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut all: Vec<(usize, usize)> = (0..dim).flat_map(|i| (i..dim).map(move |j| (i, j))).collect();
    if dim > 4 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        all.shuffle(&mut rng);
        all.truncate(12);
        all.sort_unstable();
    }
    all
}

const PAIR_SEED: u64 = 0x9a1f;

/// Tabulates `‖X_i u‖_p` and `‖X_i X_j u‖_p` and asserts
/// `‖X_i X_j u‖_p ≤ 2(p*−1)‖L u‖_p + 1e-8`.
pub fn sobolev_report(torus: &Torus, u: &SpectralField, p: f64) -> Result<ExperimentReport> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid(format!("sobolev report needs 1 < p < ∞, got {p}")));
    }
    let f = apply_generator(torus, u)?;
    let f_norm = torus.norm(&f, p)?.value;
    let bound = 2.0 * (p_star(p) - 1.0) * f_norm;
    let mut report = ExperimentReport::new("sobolev", "second-order-lp").with_resolution(format!("p={p}"));
    let mut table = Table::new(&["i", "j", "norm"]);
    for i in 0..torus.dim() {
        let v = torus.norm(&torus.derivative(u, i)?, p)?.value;
        table.push(vec![(i + 1).into(), "-".into(), v.into()]);
    }
    for (i, j) in sampled_pairs(torus.dim(), PAIR_SEED) {
        let xx = torus.derivative(&torus.derivative(u, j)?, i)?;
        let v = torus.norm(&xx, p)?.value;
        report.check(v, bound, 1e-8, || format!("X_{}X_{}u", i + 1, j + 1));
        table.push(vec![(i + 1).into(), (j + 1).into(), v.into()]);
    }
    report.fit("f_norm", f_norm);
    report.fit("bound", bound);
    report.table = table;
    Ok(report)
}

/// Scale in which tail fields are measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "scale", rename_all = "snake_case")]
pub enum TailScale {
    Lp,
    Lambda { theta: f64, n: u32 },
    Dist { theta: f64, k: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailPoint {
    /// One-based first axis of the tail.
    pub m: usize,
    pub s_m: f64,
    /// `2(p*−1)‖(R_m f, …, R_d f)‖_p`.
    pub bound_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityInputs {
    pub theta: Option<f64>,
    pub p: f64,
    pub weights: String,
    pub bandwidths: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub inputs: RegularityInputs,
    pub seminorms: Vec<(String, f64)>,
    pub tail: Vec<TailPoint>,
    pub assertions: ExperimentReport,
}

impl RegularityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default()
    }

    /// `m, s_m, bound_m`.
    pub fn tail_tsv(&self) -> String {
        let mut t = Table::new(&["m", "s_m", "bound_m"]);
        for pt in &self.tail {
            t.push(vec![pt.m.into(), pt.s_m.into(), pt.bound_m.into()]);
        }
        t.to_tsv()
    }
}

fn inputs(torus: &Torus, theta: Option<f64>, p: f64) -> RegularityInputs {
    RegularityInputs {
        theta,
        p,
        weights: format!("{:?}:{:?}", torus.weights().kind(), torus.weights().weights()),
        bandwidths: torus.lattice().bandwidths().to_vec(),
    }
}

/// `Σ_{i=m}^{d} X_i² u` for zero-based `m`.
pub fn tail_field(torus: &Torus, u: &SpectralField, m: usize) -> Result<SpectralField> {
    let mut acc = torus.zeros();
    for i in m..torus.dim() {
        acc = acc.add(&torus.derivative(&torus.derivative(u, i)?, i)?)?;
    }
    Ok(acc)
}

fn measure(torus: &Torus, g: &SpectralField, p: f64, scale: TailScale, opts: &SeminormOptions) -> Result<f64> {
    match scale {
        TailScale::Lp => Ok(torus.norm(g, p)?.value),
        TailScale::Lambda { theta, n } => Ok(lambda_seminorm_with(torus, g, theta, n, p, opts)?.value),
        TailScale::Dist { theta, k } => Ok(dist_seminorm(torus, g, theta, k, p, &opts.sampler)?.value),
    }
}

/// Tail curve `s_m` of `Σ_{i≥m} X_i² u` in the chosen scale against the
/// Riesz bound curve. The `L^p` bound is asserted for every `m`; monotone
/// decrease is asserted at `p = 2`, where it follows from the multipliers.
pub fn tail_convergence(
    torus: &Torus,
    u: &SpectralField,
    p: f64,
    scale: TailScale,
    opts: &SeminormOptions,
) -> Result<RegularityReport> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid(format!("tail convergence needs 1 < p < ∞, got {p}")));
    }
    let f = apply_generator(torus, u)?;
    let c = 2.0 * (p_star(p) - 1.0);
    let d = torus.dim();
    let mut assertions = ExperimentReport::new("tail-convergence", "riesz-tail-convergence")
        .with_resolution(format!("d={d}, p={p}, scale={scale:?}"));
    let mut tail = Vec::with_capacity(d + 1);
    for m in 0..d {
        let g = tail_field(torus, u, m)?;
        let s = measure(torus, &g, p, scale, opts)?;
        let comps = riesz_components(torus, &f, m, d - 1)?;
        let rnorm = if comps.iter().all(|c| c.max_abs_coefficient() == 0.0) {
            0.0
        } else {
            match scale {
                TailScale::Lp => torus.vector_norm(&comps, p)?.value,
                _ => comps.iter().map(|c| measure(torus, c, p, scale, opts)).sum::<Result<f64>>()?,
            }
        };
        let bound = c * rnorm;
        if scale == TailScale::Lp {
            assertions.check(s, bound, 1e-8, || format!("tail bound at m={}", m + 1));
        }
        tail.push(TailPoint { m: m + 1, s_m: s, bound_m: bound });
    }
    tail.push(TailPoint { m: d + 1, s_m: 0.0, bound_m: 0.0 });
    if p == 2.0 {
        for w in tail.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            assertions.check(b.s_m, a.s_m, 1e-12 * a.s_m.max(1.0), || format!("monotone tail at m={}", b.m));
        }
    }
    // full sum reproduces −f
    let full = tail_field(torus, u, 0)?;
    let residue = full.add(&f)?.max_abs_coefficient();
    assertions.check(residue, 0.0, 1e-10, || "Σ X_i² u + f".to_string());
    assertions.fit("full_sum_residue", residue);
    let mut seminorms = Vec::new();
    if scale != TailScale::Lp {
        seminorms.push(("scale_of_f".to_string(), measure(torus, &f, p, scale, opts)?));
    }
    let theta = match scale {
        TailScale::Lp => None,
        TailScale::Lambda { theta, .. } | TailScale::Dist { theta, .. } => Some(theta),
    };
    Ok(RegularityReport { inputs: inputs(torus, theta, p), seminorms, tail, assertions })
}

/// Lipschitz regularity of `u = L^{-1} f`. For `1 < p < ∞` asserts
/// `Λ_θ(R_i R_j f) ≤ 2(p*−1) Λ_θ(f) + 1e-8` on the sampled pairs; for
/// `p ∈ {1, ∞}` (with `lambda`) reports `Λ_{θ−2λ,1}(X_i X_j u)` against
/// `Λ_{θ,2}(f)` and the distance-scale values at `β = (1−λ)θ − 2λ`.
pub fn lipschitz_regularity_report(
    torus: &Torus,
    f: &SpectralField,
    theta: f64,
    p: f64,
    lambda: Option<f64>,
    opts: &SeminormOptions,
) -> Result<RegularityReport> {
    if !(theta > 0.0) {
        return Err(invalid(format!("θ must be positive, got {theta}")));
    }
    let u = solve_poisson(torus, f)?;
    let n = canonical_time_order(theta);
    let mut seminorms = Vec::new();
    let mut assertions = ExperimentReport::new("lipschitz-regularity", "poisson-lipschitz")
        .with_resolution(format!("θ={theta}, p={p}"));
    let lam_f = lambda_seminorm_with(torus, f, theta, n, p, opts)?.value;
    seminorms.push((format!("Lambda_{theta},{n}(f)"), lam_f));
    let lu = lambda_seminorm_with(torus, &u, theta + 2.0, canonical_time_order(theta + 2.0), p, opts)?.value;
    seminorms.push((format!("Lambda_{},{}(u)", theta + 2.0, canonical_time_order(theta + 2.0)), lu));
    let n1 = canonical_time_order(theta + 1.0);
    for i in 0..torus.dim().min(4) {
        let xi = torus.derivative(&u, i)?;
        let v = lambda_seminorm_with(torus, &xi, theta + 1.0, n1, p, opts)?.value;
        seminorms.push((format!("Lambda_{},{n1}(X_{}u)", theta + 1.0, i + 1), v));
    }
    let pairs = sampled_pairs(torus.dim(), PAIR_SEED);
    if p > 1.0 && p.is_finite() {
        let c = 2.0 * (p_star(p) - 1.0);
        for &(i, j) in &pairs {
            let rr = riesz_second(torus, f, i, j)?;
            let v = lambda_seminorm_with(torus, &rr, theta, n, p, opts)?.value;
            seminorms.push((format!("Lambda_{theta},{n}(X_{}X_{}u)", i + 1, j + 1), v));
            assertions.check(v, c * lam_f, 1e-8, || format!("Λ(R_{}R_{} f)", i + 1, j + 1));
        }
        assertions.fit("bound_factor", c);
    } else if p == 1.0 || p.is_infinite() {
        let l = lambda.ok_or_else(|| invalid("p ∈ {1, ∞} needs the CK exponent λ"))?;
        let shifted = theta - 2.0 * l;
        if shifted <= 0.0 || theta >= 4.0 {
            return Err(invalid(format!("θ − 2λ = {shifted} must be positive and θ < 4")));
        }
        let beta = (1.0 - l) * theta - 2.0 * l;
        let lam2 = lambda_seminorm_with(torus, f, theta, 2, p, opts)?.value;
        seminorms.push((format!("Lambda_{theta},2(f)"), lam2));
        assertions.fit("beta", beta);
        for &(i, j) in &pairs {
            let xx = torus.derivative(&torus.derivative(&u, j)?, i)?;
            if shifted < 2.0 {
                let v = lambda_seminorm_with(torus, &xx, shifted, 1, p, opts)?.value;
                seminorms.push((format!("Lambda_{shifted},1(X_{}X_{}u)", i + 1, j + 1), v));
                if !v.is_finite() {
                    assertions.fail(format!("Λ(X_{}X_{}u) not finite", i + 1, j + 1));
                }
            }
            if beta > 0.0 {
                let k = canonical_difference_order(beta);
                let v = dist_seminorm(torus, &xx, beta, k, p, &opts.sampler)?.value;
                seminorms.push((format!("L_{beta},{k}(X_{}X_{}u)", i + 1, j + 1), v));
            }
        }
    } else {
        return Err(invalid(format!("p must be at least 1, got {p}")));
    }
    Ok(RegularityReport { inputs: inputs(torus, Some(theta), p), seminorms, tail: Vec::new(), assertions })
}

/// Fits `K̂` in `‖|D H_t f|‖_p ≤ 2K √p* (p*−1) t^{-1/2} ‖f‖_p` for finite
/// `p* ` and `Ĉ` in `‖|D H_t f|‖_p ≤ Ĉ t^{-1/2} max{M_0(t)^{3/2}, 1} ‖f‖_p`
/// for every `p`.
pub fn gradient_bound_check(
    torus: &Torus,
    trials: &TrialDictionary,
    t_grid: &[f64],
    ps: &[f64],
) -> Result<ExperimentReport> {
    if ps.iter().any(|p| !(*p >= 1.0)) {
        return Err(invalid("exponents must be at least 1"));
    }
    let mut report = ExperimentReport::new("gradient-bounds", "heat-gradient")
        .with_resolution(format!("{} t-values, {} trials", t_grid.len(), trials.len()));
    let base: Vec<Vec<f64>> = trials
        .fields()
        .map(|f| torus.quadrature().norms(f, ps).map(|v| v.iter().map(|e| e.value).collect()))
        .collect::<Result<_>>()?;
    let mut k_hat = vec![0.0f64; ps.len()];
    let mut c_hat = vec![0.0f64; ps.len()];
    for &t in t_grid {
        let m0 = log_mu_identity_on(torus, t)?;
        let shape = m0.max(0.0).powf(1.5).max(1.0);
        for (k, f) in trials.fields().enumerate() {
            let h = heat_apply(torus, f, t)?;
            let grad = torus.gradient(&h)?;
            let norms = torus.quadrature().vector_norms(&grad, ps)?;
            for (j, &p) in ps.iter().enumerate() {
                if base[k][j] <= 1e-14 {
                    continue;
                }
                let g = norms[j].value * t.sqrt() / base[k][j];
                let ps_ = p_star(p);
                if ps_.is_finite() {
                    k_hat[j] = k_hat[j].max(g / (2.0 * ps_.sqrt() * (ps_ - 1.0)));
                }
                c_hat[j] = c_hat[j].max(g / shape);
            }
        }
    }
    let mut table = Table::new(&["p", "K_hat", "C_hat"]);
    for (j, &p) in ps.iter().enumerate() {
        let kh = if p_star(p).is_finite() { k_hat[j] } else { f64::NAN };
        table.push(vec![p.into(), kh.into(), c_hat[j].into()]);
        report.fit(&format!("K_hat_p{p}"), kh);
        report.fit(&format!("C_hat_p{p}"), c_hat[j]);
        if !c_hat[j].is_finite() {
            report.fail(format!("C_hat not finite at p={p}"));
        }
    }
    let finite: Vec<f64> = k_hat
        .iter()
        .zip(ps)
        .filter(|(_, p)| p_star(**p).is_finite())
        .map(|(k, _)| *k)
        .filter(|k| *k > 0.0)
        .collect();
    if !finite.is_empty() {
        let (lo, hi) = finite.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &k| (a.min(k), b.max(k)));
        report.fit("K_hat_spread", hi / lo);
    }
    report.table = table;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::WeightModel;

    #[test]
    fn solves_two_modes() {
        let t = Torus::new(WeightModel::explicit(vec![1.0, 4.0]).unwrap(), vec![3, 3]).unwrap();
        let f = t.cosine(&[1, 0], 1.0).unwrap().add(&t.cosine(&[0, 1], 1.0).unwrap()).unwrap();
        let u = solve_poisson(&t, &f).unwrap();
        let expect = t.cosine(&[1, 0], 1.0).unwrap().add(&t.cosine(&[0, 1], 0.25).unwrap()).unwrap();
        assert!(u.max_difference(&expect).unwrap() < 1e-15);
        assert!(solve_poisson(&t, &t.constant(1.0)).is_err());
        assert_eq!(solve_poisson(&t, &t.zeros()).unwrap().max_abs_coefficient(), 0.0);
    }

    #[test]
    fn pair_sampling() {
        assert_eq!(sampled_pairs(3, 1).len(), 6);
        let s = sampled_pairs(6, 1);
        assert_eq!(s.len(), 12);
        assert_eq!(s, sampled_pairs(6, 1));
    }
}
