//! Riesz transforms `R_i = X_i L^{-1/2}` and `R_i R_j` as Fourier
//! multipliers. Axis indices are zero-based.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::heat::p_star;
use crate::lattice::SpectralField;
use crate::report::{ExperimentReport, Table};
use crate::torus::Torus;
use crate::trials::TrialDictionary;

/// Symbol of `R_i` at lattice index `k`: `i (τ_i·n)/√λ(n)`, zero at `n = 0`.
fn first_symbol(torus: &Torus, i: usize, k: usize) -> Complex64 {
    let l = torus.eigenvalues()[k];
    if k == torus.lattice().origin() || l == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        Complex64::new(0.0, torus.direction(i, k) / l.sqrt())
    }
}

fn second_symbol(torus: &Torus, i: usize, j: usize, k: usize) -> f64 {
    let l = torus.eigenvalues()[k];
    if k == torus.lattice().origin() || l == 0.0 {
        0.0
    } else {
        -torus.direction(i, k) * torus.direction(j, k) / l
    }
}

pub fn riesz_first(torus: &Torus, f: &SpectralField, i: usize) -> Result<SpectralField> {
    torus.check_index(i)?;
    torus.check_field(f)?;
    let table: Vec<Complex64> = (0..torus.lattice().len()).map(|k| first_symbol(torus, i, k)).collect();
    f.apply_table(&table)
}

pub fn riesz_second(torus: &Torus, f: &SpectralField, i: usize, j: usize) -> Result<SpectralField> {
    torus.check_index(i)?;
    torus.check_index(j)?;
    torus.check_field(f)?;
    let table: Vec<f64> = (0..torus.lattice().len()).map(|k| second_symbol(torus, i, j, k)).collect();
    f.apply_real_table(&table)
}

/// `(R_m f, …, R_{n_hi} f)`, both ends inclusive.
pub fn riesz_components(torus: &Torus, f: &SpectralField, m: usize, n_hi: usize) -> Result<Vec<SpectralField>> {
    if m > n_hi || n_hi >= torus.dim() {
        return Err(invalid(format!("axis range {m}..={n_hi} invalid in dimension {}", torus.dim())));
    }
    (m..=n_hi).map(|i| riesz_first(torus, f, i)).collect()
}

/// `‖(Σ_i |R_i f|²)^{1/2}‖_p`.
pub fn riesz_vector_norm(torus: &Torus, f: &SpectralField, p: f64) -> Result<f64> {
    riesz_tail(torus, f, 0, torus.dim() - 1, p)
}

/// `‖(Σ_{i=m}^{n_hi} |R_i f|²)^{1/2}‖_p`.
pub fn riesz_tail(torus: &Torus, f: &SpectralField, m: usize, n_hi: usize, p: f64) -> Result<f64> {
    check_p(p, false)?;
    let comps = riesz_components(torus, f, m, n_hi)?;
    if comps.iter().all(|c| c.max_abs_coefficient() == 0.0) {
        return Ok(0.0);
    }
    Ok(torus.vector_norm(&comps, p)?.value)
}

fn check_p(p: f64, open: bool) -> Result<()> {
    let ok = if open { p > 1.0 && p.is_finite() } else { p >= 1.0 };
    if ok {
        Ok(())
    } else {
        Err(LabError::InvalidParameter(format!("exponent {p} outside the admissible range")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RieszOperator {
    First { i: usize },
    Second { i: usize, j: usize },
    /// The vector transform `R^G`, normed pointwise by its length.
    Vector,
}

impl fmt::Display for RieszOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RieszOperator::First { i } => write!(f, "R_{}", i + 1),
            RieszOperator::Second { i, j } => write!(f, "R_{}R_{}", i + 1, j + 1),
            RieszOperator::Vector => write!(f, "R^G"),
        }
    }
}

impl std::str::FromStr for RieszOperator {
    type Err = LabError;
    /// Inverse of the display form, with one-based indices.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "R^G" {
            return Ok(RieszOperator::Vector);
        }
        let index = |t: &str| match t.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(k - 1),
            _ => Err(invalid(format!("bad Riesz label {s:?}"))),
        };
        let parts: Vec<&str> = s.split("R_").collect();
        match parts.as_slice() {
            ["", i] => Ok(RieszOperator::First { i: index(i)? }),
            ["", i, j] => Ok(RieszOperator::Second { i: index(i)?, j: index(j)? }),
            _ => Err(invalid(format!("bad Riesz label {s:?}"))),
        }
    }
}

impl RieszOperator {
    /// `‖op f‖_p`.
    pub fn apply_norm(&self, torus: &Torus, f: &SpectralField, p: f64) -> Result<f64> {
        match *self {
            RieszOperator::First { i } => Ok(torus.norm(&riesz_first(torus, f, i)?, p)?.value),
            RieszOperator::Second { i, j } => Ok(torus.norm(&riesz_second(torus, f, i, j)?, p)?.value),
            RieszOperator::Vector => riesz_vector_norm(torus, f, p),
        }
    }
}

/// Best ratio `‖op f‖_p / ‖f‖_p` over the dictionary, asserted against
/// `2(p* − 1) + 1e-6`.
pub fn estimate_operator_ratio(
    torus: &Torus,
    op: RieszOperator,
    p: f64,
    trials: &TrialDictionary,
) -> Result<ExperimentReport> {
    check_p(p, true)?;
    let bound = 2.0 * (p_star(p) - 1.0);
    let mut report = ExperimentReport::new("riesz-ratio", "riesz-lp-bound")
        .with_resolution(format!("{} trials, bandwidths {:?}", trials.len(), torus.lattice().bandwidths()));
    let mut best = (0.0f64, None::<usize>);
    for (k, trial) in trials.trials.iter().enumerate() {
        let base = torus.norm(&trial.field, p)?.value;
        if base <= 1e-14 {
            continue;
        }
        let ratio = op.apply_norm(torus, &trial.field, p)? / base;
        if ratio > best.0 {
            best = (ratio, Some(k));
        }
        report.check(ratio, bound, 1e-6, || format!("{op} p={p} trial #{k} ({})", trial.label));
    }
    let witness_seed = best.1.and_then(|k| trials.trials[k].seed);
    let mut table = Table::new(&["p", "op", "best_ratio", "bound", "slack", "witness_seed"]);
    table.push(vec![
        p.into(),
        op.to_string().into(),
        best.0.into(),
        bound.into(),
        (bound - best.0).into(),
        witness_seed.map(|s| s.to_string()).unwrap_or_else(|| "-".into()).into(),
    ]);
    if let Some(k) = best.1 {
        report.note(format!("best trial: {}", trials.trials[k].label));
    }
    report.fit("best_ratio", best.0);
    report.fit("bound", bound);
    report.table = table;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip() {
        for op in [RieszOperator::First { i: 2 }, RieszOperator::Second { i: 0, j: 3 }, RieszOperator::Vector] {
            assert_eq!(op.to_string().parse::<RieszOperator>().unwrap(), op);
        }
        assert!("R_0".parse::<RieszOperator>().is_err());
        assert!("Q_1".parse::<RieszOperator>().is_err());
    }
    use crate::weights::WeightModel;

    fn torus() -> Torus {
        Torus::new(WeightModel::explicit(vec![3.0, 5.0]).unwrap(), vec![3, 2]).unwrap()
    }

    #[test]
    fn cosine_maps_to_minus_sine() {
        let t = torus();
        let f = t.cosine(&[1, 0], 1.0).unwrap();
        let r = riesz_first(&t, &f, 0).unwrap();
        assert!(r.max_difference(&t.sine(&[1, 0], -1.0).unwrap()).unwrap() < 1e-15);
        assert_eq!(riesz_first(&t, &f, 1).unwrap().max_abs_coefficient(), 0.0);
        let rr = riesz_second(&t, &f, 0, 0).unwrap();
        assert!(rr.max_difference(&f.scale(-1.0)).unwrap() < 1e-15);
        assert!(riesz_first(&t, &f, 2).is_err());
    }

    #[test]
    fn vector_norm_of_cosine() {
        let t = torus();
        let f = t.cosine(&[1, 0], 1.0).unwrap();
        assert!((riesz_vector_norm(&t, &f, f64::INFINITY).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(riesz_tail(&t, &f, 1, 1, 2.0).unwrap(), 0.0);
        assert!(riesz_tail(&t, &f, 1, 0, 2.0).is_err());
    }

    #[test]
    fn operator_display() {
        assert_eq!(RieszOperator::Second { i: 0, j: 2 }.to_string(), "R_1R_3");
    }
}
