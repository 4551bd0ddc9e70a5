use serde::Serialize;
use serde_json::{json, Value};
use torus_lab::heat::{check_analyticity, check_l1_linf_differentiability, classify_ck, log_grid, CkOptions};
use torus_lab::lipschitz::{
    canonical_difference_order, canonical_time_order, compare_scales_backward, compare_scales_forward,
    comparison_family, dist_seminorm, lambda_seminorm_fractional, lambda_seminorm_with, seminorm_table,
    SeminormOptions,
};
use torus_lab::poisson::{gradient_bound_check, lipschitz_regularity_report, solve_poisson, tail_convergence, TailScale};
use torus_lab::report::{Cell, Table};
use torus_lab::riesz::{estimate_operator_ratio, RieszOperator};
use torus_lab::stochastic::{mc_riesz_pairing, simulate_paths, PathConfig, SeriesKind, SparseSeries, StartPoint};
use torus_lab::trials::TrialDictionary;
use torus_lab::{ExperimentReport, LabError, Result, Torus};

use crate::config::*;

/// Everything a run produces before it is written out.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub reports: Vec<ExperimentReport>,
    /// `(file stem suffix, TSV body)`.
    pub tables: Vec<(String, String)>,
    pub extra: Value,
}

impl RunOutput {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }

    fn push(&mut self, report: ExperimentReport, table_name: Option<&str>) {
        if let Some(name) = table_name {
            if !report.table.is_empty() {
                self.tables.push((name.to_string(), report.table.to_tsv()));
            }
        }
        self.reports.push(report);
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn bad(msg: impl Into<String>) -> LabError {
    LabError::InvalidParameter(msg.into())
}

pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let torus = cfg.torus()?;
    match &cfg.experiment {
        Experiment::Classify(p) => classify(&torus, p),
        Experiment::KernelBounds(p) => kernel_bounds(&torus, p),
        Experiment::RieszBounds(p) => riesz_bounds(&torus, p),
        Experiment::GradientBounds(p) => gradient_bounds(&torus, p),
        Experiment::Seminorm(p) => seminorm(&torus, p),
        Experiment::SeminormCompare(p) => compare(&torus, p),
        Experiment::PoissonRegularity(p) => poisson(&torus, p),
        Experiment::McRiesz(p) => mc_riesz(&torus, p),
    }
}

fn classify(torus: &Torus, p: &ClassifyParams) -> Result<RunOutput> {
    let grid = log_grid(p.t_min, p.t_max, p.t_points);
    let ck = classify_ck(torus.weights(), &p.lambdas, &grid, &CkOptions::default())?;
    let mut out = RunOutput::default();
    let mut report = ExperimentReport::new("classify", "ck-lambda");
    report.fit("fitted_exponent", ck.fitted_exponent);
    report.notes.extend(ck.notes.iter().cloned());
    let mut verdicts = Table::new(&["lambda", "sup", "argmax_t", "relative_change_last_decade", "stabilized", "t_min_used"]);
    for v in &ck.verdicts {
        verdicts.push(vec![
            v.lambda.into(),
            v.sup.into(),
            v.argmax_t.into(),
            v.relative_change_last_decade.into(),
            v.stabilized.into(),
            v.t_min_used.into(),
        ]);
    }
    out.tables.push(("verdicts".into(), verdicts.to_tsv()));
    out.tables.push(("diagnostics".into(), ck.table().to_tsv()));
    out.extra = json!({
        "ck_zero_plus": ck.ck_zero_plus,
        "classifiable": ck.classifiable,
        "fitted_exponent": ck.fitted_exponent,
        "verdicts": to_value(&ck.verdicts),
    });
    out.push(report, None);
    Ok(out)
}

fn kernel_bounds(torus: &Torus, p: &KernelBoundsParams) -> Result<RunOutput> {
    let trials = TrialDictionary::standard(torus, p.trials_per_kind, p.seed);
    let grid = log_grid(p.t_min, p.t_max, p.t_points);
    let mut out = RunOutput::default();
    out.push(check_analyticity(torus, &p.p, &trials, &grid)?, Some("analyticity"));
    out.push(check_l1_linf_differentiability(torus, &trials, &grid)?, Some("l1-linf"));
    Ok(out)
}

fn riesz_bounds(torus: &Torus, p: &RieszBoundsParams) -> Result<RunOutput> {
    let trials = TrialDictionary::standard(torus, p.trials_per_kind, p.seed);
    let ops: Vec<RieszOperator> = p.ops.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    let mut out = RunOutput::default();
    let mut table = Table::new(&["p", "op", "best_ratio", "bound", "slack", "witness_seed"]);
    for &exp in &p.p {
        for &op in &ops {
            let mut r = estimate_operator_ratio(torus, op, exp, &trials)?;
            r.name = format!("riesz-ratio {op} p={exp}");
            table.rows.extend(r.table.rows.iter().cloned());
            out.push(r, None);
        }
    }
    out.tables.push(("ratios".into(), table.to_tsv()));
    Ok(out)
}

fn gradient_bounds(torus: &Torus, p: &GradientBoundsParams) -> Result<RunOutput> {
    let trials = TrialDictionary::standard(torus, p.trials_per_kind, p.seed);
    let grid = log_grid(p.t_min, p.t_max, p.t_points);
    let ps: Vec<f64> = p.p.iter().map(Exponent::value).collect::<Result<_>>()?;
    let mut out = RunOutput::default();
    out.push(gradient_bound_check(torus, &trials, &grid, &ps)?, Some("gradient"));
    Ok(out)
}

fn seminorm(torus: &Torus, p: &SeminormParams) -> Result<RunOutput> {
    let f = parse_field(torus, &p.field)?;
    let exp = p.p.value()?;
    let opts = SeminormOptions::default();
    let r = match p.scale {
        SeminormScale::Semigroup => {
            let n = p.order.unwrap_or_else(|| canonical_time_order(p.theta));
            if p.theta < 2.0 * n as f64 {
                lambda_seminorm_with(torus, &f, p.theta, n, exp, &opts)?
            } else {
                lambda_seminorm_fractional(torus, &f, p.theta, n as f64, exp, &opts)?
            }
        }
        SeminormScale::Distance => {
            let k = p.order.unwrap_or_else(|| canonical_difference_order(p.theta));
            dist_seminorm(torus, &f, p.theta, k, exp, &opts.sampler)?
        }
    };
    let mut out = RunOutput::default();
    out.tables.push(("seminorm".into(), seminorm_table(&[(p.field.clone(), r.clone())]).to_tsv()));
    let mut report = ExperimentReport::new("seminorm", "seminorm-value");
    report.fit("value", r.value);
    report.fit("refinement_delta", r.refinement_delta);
    if r.boundary_attained {
        report.note("supremum attained at the edge of the search range");
    }
    out.extra = to_value(&r);
    out.push(report, None);
    Ok(out)
}

fn compare(torus: &Torus, p: &CompareParams) -> Result<RunOutput> {
    let family = comparison_family(torus, p.lacunary, p.random, p.seed)?;
    let exp = p.p.value()?;
    let run = |opts: &SeminormOptions| match p.direction {
        Direction::Forward => {
            let l = p.lambda.ok_or_else(|| bad("forward comparison needs lambda"))?;
            compare_scales_forward(torus, &family, p.theta, l, exp, opts)
        }
        Direction::Backward => compare_scales_backward(torus, &family, p.theta, exp, p.lambda, opts),
    };
    let opts = SeminormOptions::default();
    let mut base = run(&opts)?;
    if p.doubling {
        let doubled = run(&opts.doubled())?;
        let a = base.table.numeric_column("ratio").unwrap_or_default();
        let b = doubled.table.numeric_column("ratio").unwrap_or_default();
        base.table.columns.push("ratio_doubled".into());
        let mut changes = Vec::new();
        for ((row, x), y) in base.table.rows.iter_mut().zip(&a).zip(&b) {
            row.push(y.map(Cell::from).unwrap_or_else(|| Cell::from("trivially consistent")));
            if let (Some(x), Some(y)) = (x, y) {
                changes.push((y / x - 1.0).abs());
            }
        }
        for change in changes {
            base.check(change, 0.1, 0.0, || format!("grid doubling changed a ratio by {change}"));
        }
    }
    let mut out = RunOutput::default();
    out.push(base, Some("ratios"));
    Ok(out)
}

fn poisson(torus: &Torus, p: &PoissonParams) -> Result<RunOutput> {
    let exp = p.p.value()?;
    let opts = SeminormOptions::default();
    let mut out = RunOutput::default();
    let mut details = Vec::new();
    for j in 0..p.fields.max(1) {
        let seed = p.seed + j as u64;
        let f = parse_field(torus, &format!("random:{seed}:{}", p.alpha))?;
        let reg = lipschitz_regularity_report(torus, &f, p.theta, exp, p.lambda, &opts)?;
        if exp > 1.0 && exp.is_finite() {
            let tail = tail_convergence(torus, &solve_poisson(torus, &f)?, exp, TailScale::Lp, &opts)?;
            out.tables.push((format!("tail-seed{seed}"), tail.tail_tsv()));
            details.push(json!({"seed": seed, "tail": to_value(&tail)}));
            out.push(tail.assertions.clone(), None);
        }
        let mut rows = Table::new(&["seed", "quantity", "value"]);
        for (name, v) in &reg.seminorms {
            rows.push(vec![seed.into(), name.as_str().into(), (*v).into()]);
        }
        out.tables.push((format!("seminorms-seed{seed}"), rows.to_tsv()));
        details.push(json!({"seed": seed, "regularity": to_value(&reg)}));
        out.push(reg.assertions, None);
    }
    out.extra = Value::Array(details);
    Ok(out)
}

fn mc_riesz(torus: &Torus, p: &McRieszParams) -> Result<RunOutput> {
    if p.axis == 0 || p.axis > torus.dim() {
        return Err(bad(format!("axis {} outside 1..={}", p.axis, torus.dim())));
    }
    let f = parse_field(torus, &p.f)?;
    let h = parse_field(torus, &p.h)?;
    let mut out = RunOutput::default();
    let mut table = Table::new(&["seed", "estimate", "se", "reference", "z_score", "truncated_fraction", "mean_exit_time"]);
    let mut covered = 0usize;
    let panel = p.panel.max(1);
    let mut results = Vec::with_capacity(panel);
    for k in 0..panel {
        let cfg = PathConfig {
            dt: p.dt,
            y0: p.y0,
            y_cap: p.y_cap,
            n_paths: p.paths,
            seed: p.seed + k as u64,
            max_steps: None,
            start: StartPoint::Uniform,
        };
        let r = mc_riesz_pairing(torus, &h, &f, p.axis - 1, &cfg)?;
        covered += r.agrees as usize;
        table.push(vec![
            cfg.seed.into(),
            r.estimate.mean.into(),
            r.estimate.se.into(),
            r.reference.into(),
            r.z_score.into(),
            r.truncated_fraction.into(),
            r.exit_time.mean.into(),
        ]);
        if k == 0 && p.dump_paths {
            let g = SparseSeries::new(torus, &f, SeriesKind::PoissonX(p.axis - 1))?;
            let batch = simulate_paths(&cfg, torus.weights(), &[g])?;
            let mut cols = vec!["path".to_string(), "exit_time".into(), "exit_height".into(), "truncated".into()];
            cols.extend((1..=torus.dim()).map(|i| format!("x_{i}")));
            cols.push("integral".into());
            let mut dump = Table::new(&cols);
            for j in 0..batch.exit_time.len() {
                let mut row: Vec<Cell> = vec![
                    j.into(),
                    batch.exit_time[j].into(),
                    batch.exit_height[j].into(),
                    batch.truncated[j].into(),
                ];
                row.extend(batch.terminal[j].iter().map(|&c| Cell::from(c)));
                row.push(batch.integrals[0][j].into());
                dump.push(row);
            }
            out.tables.push(("paths".into(), dump.to_tsv()));
        }
        results.push((cfg.seed, r));
    }
    if panel == 1 {
        let (seed, r) = &results[0];
        out.push(r.to_report(&format!("mc-riesz-seed{seed}")).with_seed(*seed), None);
    } else {
        // single seeds may leave 3 SE; the panel asserts coverage instead
        let mut report = ExperimentReport::new("mc-riesz-panel", "martingale-riesz-pairing").with_seed(p.seed);
        let coverage = covered as f64 / panel as f64;
        report.check(0.95, coverage, 0.0, || format!("{covered} of {panel} estimates within 3 SE"));
        for (seed, r) in &results {
            report.check(r.truncated_fraction, 1e-3, 0.0, || format!("truncated fraction at seed {seed}"));
            report.fit(&format!("estimate_seed{seed}"), r.estimate.mean);
            report.fit(&format!("se_seed{seed}"), r.estimate.se);
        }
        report.fit("reference", results[0].1.reference);
        report.fit("coverage", coverage);
        out.push(report, None);
    }
    out.tables.push(("panel".into(), table.to_tsv()));
    out.extra = json!({ "panel_size": panel, "within_3se": covered, "coverage": covered as f64 / panel as f64 });
    Ok(out)
}
