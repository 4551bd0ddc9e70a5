//! Lipschitz seminorms on the semigroup scale (`Λ`) and the distance scale
//! (`L`), with the comparison experiments between them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::geometry::{difference_operator, intrinsic_distance, TorusPoint, YSampler};
use crate::heat::log_grid;
use crate::lattice::SpectralField;
use crate::random::{random_field, DecayProfile};
use crate::report::{Cell, ExperimentReport, Table};
use crate::torus::Torus;

/// Where a supremum was found.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Argmax {
    Time(f64),
    Translation(Vec<f64>),
}

impl std::fmt::Display for Argmax {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Argmax::Time(t) => write!(f, "t={t:.6e}"),
            Argmax::Translation(y) => {
                write!(f, "y=(")?;
                for (i, v) in y.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v:.6e}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scale {
    /// `Λ^p_{θ,n}` with integer time-derivative order.
    Semigroup,
    /// `Λ^p_{θ,η}` with the fractional power `L^η`.
    Fractional,
    /// `L^p_{θ,k}` with `k`-th differences.
    Distance,
}

impl std::fmt::Display for Scale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scale::Semigroup => "Lambda",
            Scale::Fractional => "Lambda_frac",
            Scale::Distance => "L",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeminormReport {
    pub scale: Scale,
    pub theta: f64,
    pub order: f64,
    pub p: f64,
    pub value: f64,
    pub argmax: Argmax,
    /// Relative change of the grid supremum between the half and the full grid.
    pub refinement_delta: f64,
    pub estimator_error: f64,
    pub boundary_attained: bool,
    /// Supremum restricted to `t ≤ 1` (semigroup scales) or `d(e,y) ≤ 1`.
    pub restricted_value: f64,
}

impl SeminormReport {
    fn zero(scale: Scale, theta: f64, order: f64, p: f64, argmax: Argmax) -> Self {
        SeminormReport {
            scale,
            theta,
            order,
            p,
            value: 0.0,
            argmax,
            refinement_delta: 0.0,
            estimator_error: 0.0,
            boundary_attained: false,
            restricted_value: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeminormOptions {
    pub t_min: f64,
    pub t_max: f64,
    pub t_points: usize,
    pub golden_iterations: usize,
    pub sampler: YSampler,
}

impl Default for SeminormOptions {
    fn default() -> Self {
        SeminormOptions { t_min: 1e-6, t_max: 1e2, t_points: 240, golden_iterations: 60, sampler: YSampler::default() }
    }
}

impl SeminormOptions {
    /// Same ranges with twice as many `t` points and a denser `y` sample.
    pub fn doubled(&self) -> Self {
        let mut o = self.clone();
        o.t_points *= 2;
        o.sampler.random *= 2;
        o
    }
}

/// Smallest integer order `n > θ/2`.
pub fn canonical_time_order(theta: f64) -> u32 {
    (theta / 2.0).floor() as u32 + 1
}

/// Smallest integer order `k > θ`.
pub fn canonical_difference_order(theta: f64) -> u32 {
    theta.floor() as u32 + 1
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("p must be at least 1, got {p}")))
    }
}

/// `sup_t t^{n − θ/2} ‖∂_t^n H_t f‖_p`.
pub fn lambda_seminorm(torus: &Torus, f: &SpectralField, theta: f64, n: u32, p: f64) -> Result<SeminormReport> {
    lambda_seminorm_with(torus, f, theta, n, p, &SeminormOptions::default())
}

pub fn lambda_seminorm_with(
    torus: &Torus,
    f: &SpectralField,
    theta: f64,
    n: u32,
    p: f64,
    opts: &SeminormOptions,
) -> Result<SeminormReport> {
    if n == 0 || !(theta > 0.0 && theta < 2.0 * n as f64) {
        return Err(invalid(format!("Λ needs 0 < θ < 2n, got θ={theta}, n={n}")));
    }
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    time_supremum(torus, f, Scale::Semigroup, theta, n as f64, p, opts, |l, t| {
        sign * l.powi(n as i32) * (-t * l).exp()
    })
}

/// `sup_t t^{η − θ/2} ‖L^η H_t f‖_p`. The endpoint `θ = 2η` is admitted;
/// its supremum sits at `t → 0`.
pub fn lambda_seminorm_fractional(
    torus: &Torus,
    f: &SpectralField,
    theta: f64,
    eta: f64,
    p: f64,
    opts: &SeminormOptions,
) -> Result<SeminormReport> {
    if !(eta > 0.0 && theta > 0.0 && theta <= 2.0 * eta) {
        return Err(invalid(format!("fractional Λ needs 0 < θ ≤ 2η, got θ={theta}, η={eta}")));
    }
    time_supremum(torus, f, Scale::Fractional, theta, eta, p, opts, |l, t| {
        if l == 0.0 {
            0.0
        } else {
            l.powf(eta) * (-t * l).exp()
        }
    })
}

#[allow(clippy::too_many_arguments)]
fn time_supremum<M: Fn(f64, f64) -> f64>(
    torus: &Torus,
    f: &SpectralField,
    scale: Scale,
    theta: f64,
    order: f64,
    p: f64,
    opts: &SeminormOptions,
    symbol: M,
) -> Result<SeminormReport> {
    check_p(p)?;
    torus.check_field(f)?;
    if opts.t_points < 3 || !(opts.t_min > 0.0 && opts.t_max > opts.t_min) {
        return Err(invalid("t-grid needs at least three points in (0, ∞)"));
    }
    if f.without_mean().max_abs_coefficient() == 0.0 {
        return Ok(SeminormReport::zero(scale, theta, order, p, Argmax::Time(opts.t_min)));
    }
    let power = order - theta / 2.0;
    let eval = |t: f64| -> Result<(f64, f64)> {
        let g = f.apply_real_table(&torus.eigen_table(|l| symbol(l, t)))?;
        let est = torus.norm(&g, p)?;
        let w = t.powf(power);
        Ok((w * est.value, w * est.std_error))
    };
    let grid = log_grid(opts.t_min, opts.t_max, opts.t_points);
    let values: Vec<(f64, f64)> = grid.iter().map(|&t| eval(t)).collect::<Result<_>>()?;
    let (k_best, _) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (k, v)| if v.0 > acc.1 { (k, v.0) } else { acc });
    let grid_sup = values[k_best].0;
    let half_sup = values.iter().step_by(2).map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
    let restricted_grid = grid
        .iter()
        .zip(&values)
        .filter(|(t, _)| **t <= 1.0)
        .map(|(_, v)| v.0)
        .fold(0.0, f64::max);
    let boundary = k_best == 0 || k_best == grid.len() - 1;
    let (mut value, mut t_best, mut se) = (grid_sup, grid[k_best], values[k_best].1);
    if !boundary {
        // golden section in log t on the bracketing cell
        let (mut lo, mut hi) = (grid[k_best - 1].ln(), grid[k_best + 1].ln());
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = hi - g * (hi - lo);
        let mut x2 = lo + g * (hi - lo);
        let mut f1 = eval(x1.exp())?;
        let mut f2 = eval(x2.exp())?;
        for _ in 0..opts.golden_iterations {
            if f1.0 < f2.0 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = eval(x2.exp())?;
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = eval(x1.exp())?;
            }
        }
        let best = if f1.0 > f2.0 { (x1, f1) } else { (x2, f2) };
        if best.1 .0 > value {
            value = best.1 .0;
            t_best = best.0.exp();
            se = best.1 .1;
        }
    }
    let restricted = if t_best <= 1.0 { restricted_grid.max(value) } else { restricted_grid };
    Ok(SeminormReport {
        scale,
        theta,
        order,
        p,
        value,
        argmax: Argmax::Time(t_best),
        refinement_delta: if grid_sup > 0.0 { (grid_sup - half_sup).abs() / grid_sup } else { 0.0 },
        estimator_error: se,
        boundary_attained: boundary,
        restricted_value: restricted,
    })
}

/// `sup_y ‖Δ_y^k f‖_p / d(e,y)^θ` over the sampler's translations. `θ = k`
/// is admitted; the supremum is then approached as `y → 0`.
pub fn dist_seminorm(
    torus: &Torus,
    f: &SpectralField,
    theta: f64,
    k: u32,
    p: f64,
    sampler: &YSampler,
) -> Result<SeminormReport> {
    if k == 0 || !(theta > 0.0 && theta <= k as f64) {
        return Err(invalid(format!("L needs 0 < θ ≤ k, got θ={theta}, k={k}")));
    }
    check_p(p)?;
    torus.check_field(f)?;
    let d = torus.dim();
    if f.without_mean().max_abs_coefficient() == 0.0 {
        return Ok(SeminormReport::zero(Scale::Distance, theta, k as f64, p, Argmax::Translation(vec![0.0; d])));
    }
    let ys = sampler.sample(d);
    let e = TorusPoint::identity(d);
    let mut best = (f64::NEG_INFINITY, 0usize, 0.0);
    let mut half_best = f64::NEG_INFINITY;
    let mut restricted = 0.0f64;
    let axis_total = d * sampler.axis_levels;
    for (idx, y) in ys.iter().enumerate() {
        let dist = intrinsic_distance(&e, y, torus.weights())?;
        if dist == 0.0 {
            continue;
        }
        let est = torus.norm(&difference_operator(f, y, k)?, p)?;
        let scale = dist.powf(theta);
        let ratio = est.value / scale;
        if ratio > best.0 {
            best = (ratio, idx, est.std_error / scale);
        }
        // the half sample keeps every other axis level and the first half of the random points
        let in_half = if idx < axis_total {
            (idx % sampler.axis_levels) % 2 == 0
        } else {
            idx - axis_total < sampler.random / 2
        };
        if in_half {
            half_best = half_best.max(ratio);
        }
        if dist <= 1.0 {
            restricted = restricted.max(ratio);
        }
    }
    let (value, idx, se) = best;
    let boundary = idx < axis_total && idx % sampler.axis_levels == sampler.axis_levels - 1;
    Ok(SeminormReport {
        scale: Scale::Distance,
        theta,
        order: k as f64,
        p,
        value,
        argmax: Argmax::Translation(ys[idx].coords().to_vec()),
        refinement_delta: if value > 0.0 { (value - half_best).abs() / value } else { 0.0 },
        estimator_error: se,
        boundary_attained: boundary,
        restricted_value: restricted,
    })
}

/// Seminorm table rows `field_id, scale, θ, order, p, value, argmax, flag`.
pub fn seminorm_table(rows: &[(String, SeminormReport)]) -> Table {
    let mut t = Table::new(&["field_id", "scale", "theta", "order", "p", "value", "argmax", "flag"]);
    for (id, r) in rows {
        t.push(vec![
            id.as_str().into(),
            r.scale.to_string().into(),
            r.theta.into(),
            r.order.into(),
            r.p.into(),
            r.value.into(),
            r.argmax.to_string().into(),
            Cell::from(if r.boundary_attained { "boundary" } else { "interior" }),
        ]);
    }
    t
}

/// A labelled test function.
#[derive(Debug, Clone)]
pub struct FamilyMember {
    pub label: String,
    pub field: SpectralField,
}

/// `Σ_k 2^{−sk} cos(2^k x_i + φ_k)` over all `2^k ≤ B_i`, `k ≥ 0`.
pub fn lacunary(torus: &Torus, axis: usize, s: f64, phases: &[f64]) -> Result<SpectralField> {
    torus.check_index(axis)?;
    let band = torus.lattice().bandwidths()[axis] as i64;
    let mut out = torus.zeros();
    let mut k = 0usize;
    while (1i64 << k) <= band {
        let n = torus.axis_mode(axis, 1 << k);
        let phase = phases.get(k).copied().unwrap_or(0.0);
        let amp = 2f64.powf(-s * k as f64);
        let c = torus.cosine(&n, amp * phase.cos())?;
        let sn = torus.sine(&n, -amp * phase.sin())?;
        out = out.add(&c)?.add(&sn)?;
        k += 1;
    }
    Ok(out)
}

/// Lacunary series along rotating axes with exponents cycling through
/// `0.3..1.5`, followed by polynomially decaying random fields.
pub fn comparison_family(torus: &Torus, lacunary_count: usize, random_count: usize, seed: u64) -> Result<Vec<FamilyMember>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(lacunary_count + random_count);
    let exps = [0.3, 0.6, 0.9, 1.2, 1.5];
    for j in 0..lacunary_count {
        let axis = j % torus.dim();
        let s = exps[j % exps.len()];
        let phases: Vec<f64> = (0..16).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        out.push(FamilyMember { label: format!("lacunary-axis{}-s{s}", axis + 1), field: lacunary(torus, axis, s, &phases)? });
    }
    for j in 0..random_count {
        let field_seed = seed.wrapping_add(1000 + j as u64);
        let alpha = 1.5 + (j % 4) as f64 * 0.5;
        out.push(FamilyMember {
            label: format!("random-seed{field_seed}-alpha{alpha}"),
            field: random_field(torus.lattice(), field_seed, DecayProfile::Polynomial(alpha), true),
        });
    }
    Ok(out)
}

/// Ratios over a family, with constants reported as trivially consistent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioSummary {
    pub ratios: Vec<Option<f64>>,
    pub max: f64,
    pub median: f64,
}

impl RatioSummary {
    fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        let ratios: Vec<Option<f64>> = pairs
            .iter()
            .map(|&(num, den)| if den == 0.0 && num == 0.0 { None } else { Some(num / den) })
            .collect();
        let mut finite: Vec<f64> = ratios.iter().flatten().copied().collect();
        finite.sort_by(f64::total_cmp);
        let max = finite.last().copied().unwrap_or(0.0);
        let median = if finite.is_empty() {
            0.0
        } else if finite.len() % 2 == 1 {
            finite[finite.len() / 2]
        } else {
            0.5 * (finite[finite.len() / 2 - 1] + finite[finite.len() / 2])
        };
        RatioSummary { ratios, max, median }
    }

    /// `max / median`, infinite when a ratio diverges.
    pub fn spread(&self) -> f64 {
        if self.ratios.iter().flatten().any(|r| !r.is_finite()) {
            return f64::INFINITY;
        }
        if self.median > 0.0 {
            self.max / self.median
        } else if self.max == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    }
}

pub const FAMILY_SPREAD_LIMIT: f64 = 20.0;

fn family_report(
    name: &str,
    tag: &str,
    family: &[FamilyMember],
    num: &[SeminormReport],
    den: &[SeminormReport],
) -> (ExperimentReport, RatioSummary) {
    let pairs: Vec<(f64, f64)> = num.iter().zip(den).map(|(a, b)| (a.value, b.value)).collect();
    let summary = RatioSummary::from_pairs(&pairs);
    let mut report = ExperimentReport::new(name, tag).with_resolution(format!("{} fields", family.len()));
    let mut table = Table::new(&["field_id", "numerator", "denominator", "ratio", "num_flag", "den_flag"]);
    for (((m, a), b), r) in family.iter().zip(num).zip(den).zip(&summary.ratios) {
        table.push(vec![
            m.label.as_str().into(),
            a.value.into(),
            b.value.into(),
            match r {
                Some(v) => Cell::from(*v),
                None => Cell::from("trivially consistent"),
            },
            Cell::from(if a.boundary_attained { "boundary" } else { "interior" }),
            Cell::from(if b.boundary_attained { "boundary" } else { "interior" }),
        ]);
    }
    report.check(summary.spread(), FAMILY_SPREAD_LIMIT, 0.0, || "family max/median ratio".to_string());
    report.fit("ratio_max", summary.max);
    report.fit("ratio_median", summary.median);
    report.table = table;
    (report, summary)
}

/// `Λ^p_β / L^p_θ` with `β = (1−λ)θ − 2λ`; for `θ > 1` and
/// `λ < (θ−1)/(θ+4)` the order-2 semigroup seminorm is tabulated as well.
pub fn compare_scales_forward(
    torus: &Torus,
    family: &[FamilyMember],
    theta: f64,
    lambda: f64,
    p: f64,
    opts: &SeminormOptions,
) -> Result<ExperimentReport> {
    if !(theta > 0.0 && theta < 2.0) || !(lambda > 0.0 && lambda < 1.0) {
        return Err(invalid(format!("forward comparison needs θ ∈ (0,2), λ ∈ (0,1); got θ={theta}, λ={lambda}")));
    }
    let beta = (1.0 - lambda) * theta - 2.0 * lambda;
    if beta <= 0.0 {
        return Err(invalid(format!("β = (1−λ)θ − 2λ = {beta} is not positive for θ={theta}, λ={lambda}")));
    }
    let k = canonical_difference_order(theta);
    let n = canonical_time_order(beta);
    let mut num = Vec::new();
    let mut den = Vec::new();
    let mut second = Vec::new();
    let order_two = theta > 1.0 && lambda < (theta - 1.0) / (theta + 4.0);
    for m in family {
        num.push(lambda_seminorm_with(torus, &m.field, beta, n, p, opts)?);
        den.push(dist_seminorm(torus, &m.field, theta, k, p, &opts.sampler)?);
        if order_two {
            second.push(lambda_seminorm_with(torus, &m.field, beta, 2, p, opts)?.value);
        }
    }
    let (mut report, _) = family_report("compare-forward", "lambda-over-dist", family, &num, &den);
    report.fit("beta", beta);
    if order_two {
        report.table.columns.push("Lambda_beta_2".into());
        for (row, v) in report.table.rows.iter_mut().zip(&second) {
            row.push((*v).into());
        }
    }
    Ok(report)
}

/// `L^p_θ / Λ^p_θ` for `1 < p < ∞`; for `p ∈ {1, ∞}` the distance side uses
/// `β = θ/(1+3λ)` and `lambda` is required.
pub fn compare_scales_backward(
    torus: &Torus,
    family: &[FamilyMember],
    theta: f64,
    p: f64,
    lambda: Option<f64>,
    opts: &SeminormOptions,
) -> Result<ExperimentReport> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(invalid(format!("backward comparison needs 0 < θ < 1, got {theta}")));
    }
    let endpoint = p == 1.0 || p.is_infinite();
    let beta = if endpoint {
        let l = lambda.ok_or_else(|| invalid("p ∈ {1, ∞} needs the CK exponent λ"))?;
        if !(l > 0.0 && l < 1.0) {
            return Err(invalid(format!("λ must lie in (0,1), got {l}")));
        }
        theta / (1.0 + 3.0 * l)
    } else if p > 1.0 {
        theta
    } else {
        return Err(invalid(format!("p must be at least 1, got {p}")));
    };
    let mut num = Vec::new();
    let mut den = Vec::new();
    for m in family {
        num.push(dist_seminorm(torus, &m.field, beta, 1, p, &opts.sampler)?);
        den.push(lambda_seminorm_with(torus, &m.field, theta, 1, p, opts)?);
    }
    let (mut report, _) = family_report("compare-backward", "dist-over-lambda", family, &num, &den);
    report.fit("beta", beta);
    Ok(report)
}

/// `(2^k − 2^θ) L_k ≤ k L_{k+1}` and `L_{k+1} ≤ 2 L_k` on every field.
pub fn herz_check(
    torus: &Torus,
    fields: &[FamilyMember],
    theta: f64,
    k: u32,
    p: f64,
    sampler: &YSampler,
) -> Result<ExperimentReport> {
    let mut report =
        ExperimentReport::new("herz", "difference-order-raising").with_resolution(format!("{} fields", fields.len()));
    let mut table = Table::new(&["field_id", "L_k", "L_k1", "lower_slack", "upper_slack"]);
    let c = 2f64.powi(k as i32) - 2f64.powf(theta);
    for m in fields {
        let lk = dist_seminorm(torus, &m.field, theta, k, p, sampler)?.value;
        let lk1 = dist_seminorm(torus, &m.field, theta, k + 1, p, sampler)?.value;
        let scale = lk.max(1e-300);
        report.check(c * lk / scale, k as f64 * lk1 / scale, 1e-10, || format!("{} lower", m.label));
        report.check(lk1 / scale, 2.0, 1e-10, || format!("{} upper", m.label));
        table.push(vec![
            m.label.as_str().into(),
            lk.into(),
            lk1.into(),
            (k as f64 * lk1 - c * lk).into(),
            (2.0 * lk - lk1).into(),
        ]);
    }
    report.table = table;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::Quadrature;
    use crate::weights::WeightModel;

    fn line(a: f64) -> Torus {
        Torus::new(WeightModel::explicit(vec![a]).unwrap(), vec![4]).unwrap().with_quadrature(Quadrature::tensor(2))
    }

    #[test]
    fn single_mode_semigroup_value() {
        let t = line(4.0);
        let f = t.cosine(&[1], 1.0).unwrap();
        let r = lambda_seminorm(&t, &f, 1.0, 1, f64::INFINITY).unwrap();
        let exact = 2.0 * 0.5f64.sqrt() * (-0.5f64).exp();
        assert!((r.value - exact).abs() < 1e-9, "{r:?}");
        assert!(!r.boundary_attained);
        let c = lambda_seminorm(&t, &t.constant(2.0), 1.0, 1, 2.0).unwrap();
        assert_eq!(c.value, 0.0);
        assert!(lambda_seminorm(&t, &f, 2.0, 1, 2.0).is_err());
    }

    #[test]
    fn fractional_half_order_hits_the_boundary() {
        let t = line(4.0);
        let f = t.cosine(&[1], 1.0).unwrap();
        let r = lambda_seminorm_fractional(&t, &f, 1.0, 0.5, f64::INFINITY, &SeminormOptions::default()).unwrap();
        assert!(r.boundary_attained);
        assert!((r.value - 2.0).abs() < 1e-4);
    }

    #[test]
    fn distance_value_approaches_sqrt_a() {
        let t = line(4.0);
        let f = t.cosine(&[1], 1.0).unwrap();
        let r = dist_seminorm(&t, &f, 1.0, 1, f64::INFINITY, &YSampler::default()).unwrap();
        assert!(r.value <= 2.0 + 1e-12 && r.value >= 2.0 * (1.0 - 1e-3), "{r:?}");
        assert!(r.boundary_attained);
        assert!(dist_seminorm(&t, &f, 1.5, 1, 2.0, &YSampler::default()).is_err());
    }

    #[test]
    fn canonical_orders() {
        assert_eq!(canonical_time_order(0.5), 1);
        assert_eq!(canonical_time_order(2.0), 2);
        assert_eq!(canonical_difference_order(0.9), 1);
        assert_eq!(canonical_difference_order(1.0), 2);
    }
}
