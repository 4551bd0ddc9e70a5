//! Fixed experiment batteries with one verdict per criterion.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::error::{invalid, LabError, Result};
use crate::geometry::{random_points, verify_gaussian_bound, ConstantMesh, YSampler};
use crate::heat::{
    check_analyticity, check_l1_linf_differentiability, classify_ck, heat_apply, heat_time_derivative,
    kernel_at_identity, log_grid, theta_images, theta_spectral, CkOptions,
};
use crate::lipschitz::{
    compare_scales_backward, compare_scales_forward, comparison_family, dist_seminorm, herz_check, lambda_seminorm,
    FamilyMember, SeminormOptions,
};
use crate::poisson::{lipschitz_regularity_report, solve_poisson, tail_convergence, TailScale};
use crate::quadrature::Quadrature;
use crate::random::{random_field, DecayProfile};
use crate::report::{ExperimentReport, Witness};
use crate::riesz::{estimate_operator_ratio, riesz_second, riesz_vector_norm, RieszOperator};
use crate::stochastic::{mc_riesz_pairing, PathConfig};
use crate::torus::Torus;
use crate::trials::TrialDictionary;
use crate::weights::WeightModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteName {
    /// Every criterion at full resolution.
    Acceptance,
    /// Reduced sizes, about a minute in total.
    Quick,
}

impl FromStr for SuiteName {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "acceptance" => Ok(SuiteName::Acceptance),
            "quick" => Ok(SuiteName::Quick),
            other => Err(invalid(format!("unknown suite '{other}' (expected acceptance or quick)"))),
        }
    }
}

impl fmt::Display for SuiteName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SuiteName::Acceptance => "acceptance",
            SuiteName::Quick => "quick",
        })
    }
}

pub const CRITERIA: [&str; 12] = [
    "spectral-exactness",
    "analyticity-constants",
    "riesz-bounds",
    "ck-classification",
    "gaussian-bound",
    "heat-kernel-value",
    "l1-linf-differentiability",
    "seminorm-closed-forms",
    "scale-comparison",
    "poisson-regularity",
    "martingale-representation",
    "finite-difference-oracle",
];

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: String,
    pub passed: bool,
    pub worst_slack: f64,
    pub checks: usize,
    pub seconds: f64,
    pub witness: Option<Witness>,
    pub fitted: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<27} {}  slack={:.3e} checks={} ({:.1}s)",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.worst_slack,
            self.checks,
            self.seconds
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteSummary {
    pub suite: SuiteName,
    pub passed: bool,
    pub criteria: Vec<CriterionOutcome>,
}

/// Runs criteria `1..=12` in order, calling `progress` after each.
pub fn run_suite(name: SuiteName, mut progress: impl FnMut(&CriterionOutcome)) -> SuiteSummary {
    let mut criteria = Vec::new();
    for id in 1..=CRITERIA.len() {
        let outcome = run_criterion(id, name);
        progress(&outcome);
        criteria.push(outcome);
    }
    SuiteSummary { suite: name, passed: criteria.iter().all(|c| c.passed), criteria }
}

pub fn run_criterion(id: usize, scale: SuiteName) -> CriterionOutcome {
    let start = Instant::now();
    let full = scale == SuiteName::Acceptance;
    let result = match id {
        1 => spectral_exactness(full),
        2 => analyticity(full),
        3 => riesz_bounds(full),
        4 => ck_classification(),
        5 => gaussian_bound(full),
        6 => kernel_value(),
        7 => l1_linf(full),
        8 => seminorm_closed_forms(full),
        9 => scale_comparison(full),
        10 => poisson_regularity(full),
        11 => martingale(full),
        12 => finite_difference(),
        _ => Err(invalid(format!("no criterion {id}"))),
    };
    let seconds = start.elapsed().as_secs_f64();
    let name = CRITERIA.get(id.wrapping_sub(1)).copied().unwrap_or("unknown").to_string();
    let mut report = result.unwrap_or_else(|e| {
        let mut r = ExperimentReport::new(&name, "suite");
        r.fail(format!("error: {e}"));
        r
    });
    if let Some(limit) = runtime_limit(id).filter(|_| full) {
        report.check(seconds, limit, 0.0, || format!("runtime {seconds:.1}s"));
    }
    CriterionOutcome {
        id,
        name,
        passed: report.passed,
        worst_slack: report.worst_slack,
        checks: report.checks,
        seconds,
        witness: report.witness,
        fitted: report.fitted,
        notes: report.notes,
    }
}

fn runtime_limit(id: usize) -> Option<f64> {
    match id {
        1 => Some(10.0),
        4 => Some(5.0),
        11 => Some(60.0),
        _ => None,
    }
}

fn seeds(full: bool, n_full: u64, n_quick: u64) -> std::ops::Range<u64> {
    0..if full { n_full } else { n_quick }
}

fn spectral_exactness(full: bool) -> Result<ExperimentReport> {
    let torus = Torus::new(WeightModel::explicit(vec![1.0, 2.0, 4.0])?, vec![8, 8, 8])?;
    let mut r = ExperimentReport::new("spectral-exactness", "spectral-identities");
    let tol = 1e-10;
    for seed in seeds(full, 100, 20) {
        let f = random_field(torus.lattice(), seed, DecayProfile::Polynomial(1.0), false);
        let scale = f.l2_norm().max(1.0);
        let grid = f.to_grid();
        let parseval = (grid.lp_norm(2.0)?.powi(2) - f.energy()).abs() / scale.powi(2);
        r.check(parseval, tol, 0.0, || format!("Parseval seed {seed}"));
        let round = grid.to_spectral().max_difference(&f)? / scale;
        r.check(round, tol, 0.0, || format!("round trip seed {seed}"));
        let two = heat_apply(&torus, &heat_apply(&torus, &f, 0.3)?, 0.7)?;
        let once = heat_apply(&torus, &f, 1.0)?;
        r.check(two.max_difference(&once)? / scale, tol, 0.0, || format!("semigroup seed {seed}"));
        let mass = (heat_apply(&torus, &f, 0.5)?.mean() - f.mean()).norm();
        r.check(mass, tol, 0.0, || format!("mass seed {seed}"));
        let g = f.without_mean();
        let mut sum = g.clone();
        for j in 0..torus.dim() {
            sum = sum.add(&riesz_second(&torus, &g, j, j)?)?;
        }
        r.check(sum.max_abs_coefficient() / scale, tol, 0.0, || format!("sum of squares seed {seed}"));
        let iso = (riesz_vector_norm(&torus, &g, 2.0)? - g.l2_norm()).abs() / scale;
        r.check(iso, tol, 0.0, || format!("vector isometry seed {seed}"));
    }
    Ok(r)
}

fn analyticity(full: bool) -> Result<ExperimentReport> {
    let torus = Torus::new(WeightModel::explicit(vec![1.0, 2.0])?, vec![6, 6])?.with_quadrature(Quadrature::tensor(2));
    let n = if full { 100 } else { 12 };
    let trials = TrialDictionary::random(&torus, n, 2024, DecayProfile::FlatBand);
    let t_grid = log_grid(1e-3, 1e2, if full { 240 } else { 60 });
    check_analyticity(&torus, &[1.25, 2.0, 4.0], &trials, &t_grid)
}

fn riesz_bounds(full: bool) -> Result<ExperimentReport> {
    let w = WeightModel::power(0.5, 4)?;
    let torus = Torus::new(w.clone(), w.default_bandwidths(3))?.with_quadrature(Quadrature::tensor(2));
    let trials = TrialDictionary::standard(&torus, if full { 8 } else { 2 }, 7);
    let ps: &[f64] = if full { &[1.25, 1.5, 2.0, 3.0, 4.0] } else { &[1.25, 2.0, 4.0] };
    let ops = [
        RieszOperator::First { i: 0 },
        RieszOperator::Vector,
        RieszOperator::Second { i: 0, j: 1 },
        RieszOperator::Second { i: 0, j: 0 },
    ];
    let mut r = ExperimentReport::new("riesz-bounds", "riesz-lp-bound");
    for &p in ps {
        for op in ops {
            let sub = estimate_operator_ratio(&torus, op, p, &trials)?;
            r.absorb(&format!("{op}_p{p}_"), &sub);
        }
    }
    let best = r.fitted.get("R_1R_1_p2_best_ratio").copied().unwrap_or(f64::NAN);
    r.check((best - 1.0).abs(), 1e-10, 0.0, || format!("R_1R_1 best ratio at p=2 is {best}"));
    Ok(r)
}

fn ck_classification() -> Result<ExperimentReport> {
    let grid = log_grid(1e-6, 1.0, 120);
    let mut r = ExperimentReport::new("ck-classification", "ck-lambda");
    let square = classify_ck(&WeightModel::power(0.5, 4)?, &[0.5], &grid, &CkOptions::default())?;
    match square.verdict(0.5) {
        Some(v) if v.stabilized => {
            r.check(v.relative_change_last_decade, 0.01, 0.0, || "a_i = i² stabilization".into());
        }
        _ => r.fail("a_i = i² did not stabilize at λ = 0.5"),
    }
    r.check((square.fitted_exponent - 0.5).abs(), 0.05, 0.0, || format!("λ̂ = {}", square.fitted_exponent));
    r.fit("lambda_hat", square.fitted_exponent);
    let lambdas: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let geo = classify_ck(&WeightModel::geometric(1.0, 4)?, &lambdas, &grid, &CkOptions::default())?;
    for v in &geo.verdicts {
        if v.stabilized {
            r.check(v.relative_change_last_decade, 0.01, 0.0, || format!("a_i = 2^i, λ = {}", v.lambda));
        } else {
            r.fail(format!("a_i = 2^i did not stabilize at λ = {}", v.lambda));
        }
        r.fit(&format!("t_min_used_lambda{}", v.lambda), v.t_min_used);
    }
    r.notes.extend(geo.notes);
    Ok(r)
}

fn gaussian_bound(full: bool) -> Result<ExperimentReport> {
    let w = WeightModel::power(0.5, 4)?;
    let mesh = if full {
        ConstantMesh::default()
    } else {
        ConstantMesh { a: log_grid(1e-3, 1e4, 71), c: log_grid(1e-2, 1e4, 61) }
    };
    let t_grid = log_grid(1e-3, 1.0, 20);
    let base = verify_gaussian_bound(&w, 0.5, &t_grid, &random_points(4, 9, 31), &mesh)?;
    let doubled = verify_gaussian_bound(&w, 0.5, &t_grid, &random_points(4, 19, 31), &mesh)?;
    let mut r = ExperimentReport::new("gaussian-bound", "gaussian-upper-bound");
    r.absorb("", &base);
    r.absorb("doubled_", &doubled);
    for key in ["A_balanced", "C_balanced"] {
        let (a, b) = (base.fitted.get(key).copied(), doubled.fitted.get(key).copied());
        match (a, b) {
            (Some(a), Some(b)) => {
                r.check((b / a - 1.0).abs(), 0.2, 0.0, || format!("{key} stability {a} vs {b}"));
            }
            _ => r.fail(format!("{key} was not fitted")),
        }
    }
    Ok(r)
}

fn kernel_value() -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new("heat-kernel-value", "heat-kernel");
    let k = kernel_at_identity(1.0, &WeightModel::explicit(vec![1.0, 4.0])?)?;
    let mu = k.log_mu.exp();
    r.fit("mu_1_identity", mu);
    r.check((mu - 1.837_574_1).abs(), 1e-5, 0.0, || format!("μ₁(e) = {mu}"));
    for j in 0..16 {
        let x = j as f64 * PI / 8.0;
        let (a, b) = (theta_spectral(x, PI, 0), theta_images(x, PI, 0));
        r.check((a - b).abs() / a.abs().max(1e-300), 1e-12, 0.0, || format!("θ({x}, π) representations"));
    }
    Ok(r)
}

fn l1_linf(full: bool) -> Result<ExperimentReport> {
    let torus = Torus::new(WeightModel::explicit(vec![1.0, 4.0])?, vec![8, 8])?.with_quadrature(Quadrature::tensor(2));
    let trials = TrialDictionary::standard(&torus, if full { 6 } else { 2 }, 3);
    let t_grid = log_grid(1e-2, 10.0, if full { 30 } else { 8 });
    check_l1_linf_differentiability(&torus, &trials, &t_grid)
}

fn seminorm_closed_forms(full: bool) -> Result<ExperimentReport> {
    let line = Torus::new(WeightModel::explicit(vec![4.0])?, vec![4])?.with_quadrature(Quadrature::tensor(2));
    let f = line.cosine(&[1], 1.0)?;
    let mut r = ExperimentReport::new("seminorm-closed-forms", "seminorm-values");
    let lam = lambda_seminorm(&line, &f, 1.0, 1, f64::INFINITY)?;
    r.fit("Lambda_1_1", lam.value);
    r.check((lam.value - 0.857_763_9).abs(), 1e-4, 0.0, || format!("Λ^∞_(1,1)(cos) = {}", lam.value));
    let dist = dist_seminorm(&line, &f, 1.0, 1, f64::INFINITY, &YSampler::default())?;
    r.fit("L_1_1", dist.value);
    let eps = 1.0 - dist.value / 2.0;
    r.check(eps, 1e-3, 0.0, || format!("L^∞_(1,1)(cos) = {}", dist.value));
    r.check(-eps, 0.0, 1e-12, || "L^∞_(1,1)(cos) above 2".into());
    if !dist.boundary_attained {
        r.fail("L^∞_(1,1)(cos) not flagged boundary-attained");
    }
    let torus = Torus::new(WeightModel::explicit(vec![1.0, 4.0])?, vec![6, 6])?;
    let fields: Vec<FamilyMember> = seeds(full, 50, 8)
        .map(|s| FamilyMember {
            label: format!("seed{s}"),
            field: random_field(torus.lattice(), 500 + s, DecayProfile::Polynomial(2.0), true),
        })
        .collect();
    let herz = herz_check(&torus, &fields, 0.5, 1, 2.0, &YSampler::default())?;
    r.absorb("herz_", &herz);
    Ok(r)
}

fn scale_comparison(full: bool) -> Result<ExperimentReport> {
    let torus = Torus::new(WeightModel::explicit(vec![1.0, 2.0])?, vec![32, 32])?.with_quadrature(Quadrature::tensor(2));
    let (lac, rnd) = if full { (25, 25) } else { (5, 5) };
    let family = comparison_family(&torus, lac, rnd, 99)?;
    let opts = SeminormOptions { t_points: 120, ..SeminormOptions::default() };
    let mut r = ExperimentReport::new("scale-comparison", "scale-comparison");
    type Runner<'a> = Box<dyn Fn(&SeminormOptions) -> Result<ExperimentReport> + 'a>;
    let runs: [(&str, Runner); 2] = [
        ("forward_", Box::new(|o| compare_scales_forward(&torus, &family, 0.9, 0.1, f64::INFINITY, o))),
        ("backward_", Box::new(|o| compare_scales_backward(&torus, &family, 0.5, 2.0, None, o))),
    ];
    for (prefix, run) in runs {
        let base = run(&opts)?;
        let doubled = run(&opts.doubled())?;
        r.absorb(prefix, &base);
        let a = base.table.numeric_column("ratio").unwrap_or_default();
        let b = doubled.table.numeric_column("ratio").unwrap_or_default();
        let mut worst = 0.0f64;
        for (k, (x, y)) in a.iter().zip(&b).enumerate() {
            if let (Some(x), Some(y)) = (x, y) {
                let change = (y / x - 1.0).abs();
                worst = worst.max(change);
                r.check(change, 0.1, 0.0, || format!("{prefix}{} grid doubling", family[k].label));
            }
        }
        r.fit(&format!("{prefix}doubling_change"), worst);
    }
    Ok(r)
}

fn poisson_regularity(full: bool) -> Result<ExperimentReport> {
    let w = WeightModel::power(0.5, 6)?;
    let torus = Torus::new(w.clone(), w.default_bandwidths(4))?;
    let opts = SeminormOptions::default();
    let mut r = ExperimentReport::new("poisson-regularity", "poisson-regularity");
    let f = random_field(torus.lattice(), 606, DecayProfile::Polynomial(2.0), true);
    let u = solve_poisson(&torus, &f)?;
    let tail = tail_convergence(&torus, &u, 2.0, TailScale::Lp, &opts)?;
    r.absorb("tail_", &tail.assertions);
    for seed in seeds(full, 30, 4) {
        let g = random_field(torus.lattice(), 700 + seed, DecayProfile::Polynomial(2.0), true);
        let rep = lipschitz_regularity_report(&torus, &g, 0.5, 2.0, None, &opts)?;
        r.absorb(&format!("seed{seed}_"), &rep.assertions);
    }
    Ok(r)
}

fn martingale(full: bool) -> Result<ExperimentReport> {
    let torus = Torus::new(WeightModel::explicit(vec![1.0])?, vec![2])?;
    let f = torus.cosine(&[1], 1.0)?;
    let h = torus.sine(&[1], 1.0)?;
    let cfg = if full {
        PathConfig { seed: 11, ..PathConfig::default() }
    } else {
        PathConfig { seed: 11, n_paths: 20_000, dt: 1e-2, ..PathConfig::default() }
    };
    let p = mc_riesz_pairing(&torus, &h, &f, 0, &cfg)?;
    let mut r = p.to_report("martingale-representation");
    r.check(p.limit_gap, 0.003, 0.0, || format!("reference within 0.3% of 1/4: gap {}", p.limit_gap));
    r.check(p.estimate.se, 0.01, 0.0, || format!("SE {}", p.estimate.se));
    let ez = (p.exit_time.mean - p.expected_exit_time).abs();
    r.check(ez, 3.0 * p.exit_time.se, 0.0, || format!("E σ = {}", p.exit_time.mean));
    Ok(r)
}

fn finite_difference() -> Result<ExperimentReport> {
    let torus = Torus::new(WeightModel::explicit(vec![1.0, 4.0])?, vec![8, 8])?;
    let mut r = ExperimentReport::new("finite-difference-oracle", "time-derivative");
    for seed in 0..5u64 {
        let f = random_field(torus.lattice(), 900 + seed, DecayProfile::Polynomial(2.0), true);
        for t in [0.05, 0.5, 2.0] {
            let exact = heat_time_derivative(&torus, &f, t, 1)?;
            let err = |d: f64| -> Result<f64> {
                let fd = heat_apply(&torus, &f, t + d)?.sub(&heat_apply(&torus, &f, t - d)?)?.scale(0.5 / d);
                fd.sub(&exact).map(|e| e.l2_norm())
            };
            let (e1, e2) = (err(1e-2)?, err(1e-3)?);
            let order = (e1 / e2).log10();
            r.check(-order, -1.9, 0.0, || format!("observed order {order} at t={t}, seed {seed}"));
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_parse() {
        assert_eq!("quick".parse::<SuiteName>().unwrap(), SuiteName::Quick);
        assert!("nightly".parse::<SuiteName>().is_err());
        assert!(!run_criterion(13, SuiteName::Quick).passed);
    }
}
