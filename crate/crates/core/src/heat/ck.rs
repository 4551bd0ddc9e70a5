//! Empirical on-diagonal growth classes: `sup_{0<t≤1} t^λ log μ_t(e) < ∞`.
//!
//! Finite computation cannot decide an asymptotic condition. A class is
//! declared "empirically" when the running supremum stops moving: extending
//! the `t`-grid by its last decade changes it by less than the stabilization
//! tolerance. When the supremum is still growing at the bottom of the grid,
//! the grid is extended downward a decade at a time while the number of
//! kernel factors stays under the dimension cap.

use serde::Serialize;

use super::kernel::{kernel_at_identity_capped, KernelDiagnostics};
use crate::error::{invalid, Result};
use crate::report::Table;
use crate::weights::WeightModel;

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CkOptions {
    pub stabilization_tol: f64,
    pub extra_decades: usize,
    pub points_per_decade: usize,
    pub dimension_cap: usize,
}

impl Default for CkOptions {
    fn default() -> Self {
        CkOptions { stabilization_tol: 0.01, extra_decades: 8, points_per_decade: 20, dimension_cap: 2_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaVerdict {
    pub lambda: f64,
    pub sup: f64,
    pub argmax_t: f64,
    pub relative_change_last_decade: f64,
    pub stabilized: bool,
    pub t_min_used: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CkReport {
    pub verdicts: Vec<LambdaVerdict>,
    /// Every tested λ stabilized.
    pub ck_zero_plus: bool,
    /// `λ̂` from `log μ_t(e) ~ t^{-λ̂}` over the lowest two decades of the
    /// input grid.
    pub fitted_exponent: f64,
    pub classifiable: bool,
    pub notes: Vec<String>,
    pub diagnostics: KernelDiagnostics,
}

impl CkReport {
    pub fn verdict(&self, lambda: f64) -> Option<&LambdaVerdict> {
        self.verdicts.iter().find(|v| (v.lambda - lambda).abs() < 1e-12)
    }

    pub fn table(&self) -> Table {
        let lambdas: Vec<f64> = self.verdicts.iter().map(|v| v.lambda).collect();
        self.diagnostics.table(&lambdas)
    }
}

/// Classifies a diagonal weight model against every λ in `lambdas`.
pub fn classify_ck(w: &WeightModel, lambdas: &[f64], t_grid: &[f64], opts: &CkOptions) -> Result<CkReport> {
    if t_grid.len() < 3 {
        return Err(invalid("classification needs at least three t values"));
    }
    if t_grid.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
        return Err(invalid("t-grid must lie in (0, 1]"));
    }
    let mut diag = KernelDiagnostics::compute_capped(w, t_grid, opts.dimension_cap)?;
    let input_min = t_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let mut notes = Vec::new();

    let fitted_exponent = fit_exponent(&diag, input_min);

    if diag.tail_significant.iter().any(|&s| s) {
        notes.push("tail-dominated / not classifiable: the weight list ends while its factors are still significant".into());
        let verdicts = lambdas
            .iter()
            .map(|&lambda| {
                let (sup, argmax_t) = sup_over(&diag, lambda, 0.0);
                LambdaVerdict {
                    lambda,
                    sup,
                    argmax_t,
                    relative_change_last_decade: f64::NAN,
                    stabilized: false,
                    t_min_used: input_min,
                }
            })
            .collect();
        return Ok(CkReport { verdicts, ck_zero_plus: false, fitted_exponent, classifiable: false, notes, diagnostics: diag });
    }

    let mut t_min = input_min;
    let mut extended = 0usize;
    let mut capped = false;
    let mut verdicts: Vec<LambdaVerdict> = lambdas.iter().map(|&l| verdict(&diag, l, t_min, opts)).collect();
    while verdicts.iter().any(|v| !v.stabilized) && extended < opts.extra_decades && !capped {
        for k in 1..=opts.points_per_decade {
            let t = t_min * 10f64.powf(-(k as f64) / opts.points_per_decade as f64);
            let point = kernel_at_identity_capped(t, w, opts.dimension_cap)?;
            if point.tail_significant {
                capped = true;
                break;
            }
            diag.push(point);
        }
        if capped {
            notes.push(format!("grid extension stopped at the dimension cap of {} factors", opts.dimension_cap));
            break;
        }
        t_min /= 10.0;
        extended += 1;
        for v in verdicts.iter_mut().filter(|v| !v.stabilized) {
            *v = verdict(&diag, v.lambda, t_min, opts);
        }
    }
    if extended > 0 {
        notes.push(format!("t-grid extended by {extended} decade(s) down to {t_min:e}"));
    }
    let ck_zero_plus = verdicts.iter().all(|v| v.stabilized);
    Ok(CkReport { verdicts, ck_zero_plus, fitted_exponent, classifiable: true, notes, diagnostics: diag })
}

fn sup_over(diag: &KernelDiagnostics, lambda: f64, floor: f64) -> (f64, f64) {
    diag.t
        .iter()
        .zip(&diag.log_mu)
        .filter(|(t, _)| **t >= floor)
        .map(|(&t, &lm)| (t.powf(lambda) * lm, t))
        .fold((f64::NEG_INFINITY, f64::NAN), |best, cur| if cur.0 > best.0 { cur } else { best })
}

fn verdict(diag: &KernelDiagnostics, lambda: f64, t_min: f64, opts: &CkOptions) -> LambdaVerdict {
    let (sup, argmax_t) = sup_over(diag, lambda, t_min * (1.0 - 1e-12));
    let (upper, _) = sup_over(diag, lambda, 10.0 * t_min * (1.0 - 1e-12));
    let change = if sup > 0.0 { (sup - upper) / sup } else { 0.0 };
    LambdaVerdict {
        lambda,
        sup,
        argmax_t,
        relative_change_last_decade: change,
        stabilized: change < opts.stabilization_tol && sup.is_finite(),
        t_min_used: t_min,
    }
}

/// Least-squares slope of `ln log μ_t(e)` against `ln t` over
/// `t ≤ 100 t_min`, negated.
fn fit_exponent(diag: &KernelDiagnostics, t_min: f64) -> f64 {
    let pts: Vec<(f64, f64)> = diag
        .t
        .iter()
        .zip(&diag.log_mu)
        .filter(|(t, lm)| **t <= 100.0 * t_min * (1.0 + 1e-12) && **lm > 0.0)
        .map(|(t, lm)| (t.ln(), lm.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    -sxy / sxx
}
