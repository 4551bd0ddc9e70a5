//! Coefficient data of the Laplacian `L = -Σ X_i²`.
//!
//! Diagonal models have `X_i = √a_i ∂_i`; the matrix model has
//! `X_i = Σ_j t_ij ∂_j` where `T = (t_ij)` is the upper-triangular factor of
//! `A = TᵗT`. Axis indices are zero-based throughout the crate, so `a[0]`
//! is the weight of the first coordinate.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum WeightKind {
    /// `a_i = i^(1/λ)`.
    Power { lambda: f64 },
    /// `a_i = 2^(i^σ)`.
    Geometric { sigma: f64 },
    Explicit,
    Matrix,
}

#[derive(Debug, Clone)]
pub struct WeightModel {
    kind: WeightKind,
    weights: Vec<f64>,
    dense: Option<DenseForm>,
}

#[derive(Debug, Clone)]
struct DenseForm {
    matrix: DMatrix<f64>,
    factor: DMatrix<f64>,
    inverse: DMatrix<f64>,
    min_eigenvalue: f64,
}

impl WeightModel {
    pub fn power(lambda: f64, dim: usize) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(LabError::InvalidWeights(format!("power exponent λ must be positive, got {lambda}")));
        }
        Self::generated(WeightKind::Power { lambda }, dim)
    }

    pub fn geometric(sigma: f64, dim: usize) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(LabError::InvalidWeights(format!("geometric exponent σ must be positive, got {sigma}")));
        }
        Self::generated(WeightKind::Geometric { sigma }, dim)
    }

    fn generated(kind: WeightKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(LabError::InvalidWeights("operator dimension must be positive".into()));
        }
        let mut model = WeightModel { kind, weights: Vec::new(), dense: None };
        model.weights = (0..dim).map(|i| model.generated_weight(i).unwrap()).collect();
        Ok(model)
    }

    pub fn explicit(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(LabError::InvalidWeights("explicit weight list is empty".into()));
        }
        if let Some(bad) = weights.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(LabError::InvalidWeights(format!("weights must be positive and finite, got {bad}")));
        }
        Ok(WeightModel { kind: WeightKind::Explicit, weights, dense: None })
    }

    /// Matrix model from a symmetric positive definite `A`.
    pub fn matrix(a: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(LabError::InvalidWeights("matrix must be square and non-empty".into()));
        }
        let scale = a.amax();
        if (&a - a.transpose()).amax() > 1e-14 * scale.max(1.0) {
            return Err(LabError::InvalidWeights("matrix is not symmetric".into()));
        }
        let eigen = a.clone().symmetric_eigen();
        let min_eigenvalue = eigen.eigenvalues.min();
        if !(min_eigenvalue > 0.0) {
            return Err(LabError::InvalidWeights(format!(
                "matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})"
            )));
        }
        let chol = a
            .clone()
            .cholesky()
            .ok_or_else(|| LabError::InvalidWeights("Cholesky factorization failed".into()))?;
        // A = L Lᵗ, so T = Lᵗ is upper triangular with TᵗT = A.
        let factor = chol.l().transpose();
        let inverse = chol.inverse();
        let weights = (0..n).map(|i| a[(i, i)]).collect();
        Ok(WeightModel {
            kind: WeightKind::Matrix,
            weights,
            dense: Some(DenseForm { matrix: a, factor, inverse, min_eigenvalue }),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(LabError::InvalidWeights("matrix rows must all have length n".into()));
        }
        Self::matrix(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Parses `power:λ`, `geometric:σ` or `explicit:a1,a2,...`.
    pub fn from_spec(spec: &str, dim: usize) -> Result<Self> {
        let (head, tail) = spec
            .split_once(':')
            .ok_or_else(|| LabError::InvalidWeights(format!("expected kind:value, got {spec:?}")))?;
        let number = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| LabError::InvalidWeights(format!("not a number: {s:?}")))
        };
        match head {
            "power" => Self::power(number(tail)?, dim),
            "geometric" => Self::geometric(number(tail)?, dim),
            "explicit" => Self::explicit(tail.split(',').map(number).collect::<Result<_>>()?),
            other => Err(LabError::InvalidWeights(format!("unknown weight kind {other:?}"))),
        }
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn is_diagonal(&self) -> bool {
        self.dense.is_none()
    }

    /// Diagonal weights `a_i`; for the matrix model, the diagonal of `A`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight of axis `i` from the generator rule, beyond the operator
    /// dimension when the model has one. `None` past the end of explicit
    /// lists and for the matrix model.
    pub fn generated_weight(&self, i: usize) -> Option<f64> {
        let index = (i + 1) as f64;
        match self.kind {
            WeightKind::Power { lambda } => Some(index.powf(1.0 / lambda)),
            WeightKind::Geometric { sigma } => Some(2f64.powf(index.powf(sigma))),
            WeightKind::Explicit => self.weights.get(i).copied(),
            WeightKind::Matrix => None,
        }
    }

    pub fn matrix_form(&self) -> Option<&DMatrix<f64>> {
        self.dense.as_ref().map(|d| &d.matrix)
    }

    /// Upper-triangular `T` with `TᵗT = A`; rows are the direction vectors.
    pub fn factor(&self) -> Option<&DMatrix<f64>> {
        self.dense.as_ref().map(|d| &d.factor)
    }

    pub fn inverse_matrix(&self) -> Option<&DMatrix<f64>> {
        self.dense.as_ref().map(|d| &d.inverse)
    }

    /// Smallest eigenvalue of the coefficient form.
    pub fn min_eigenvalue(&self) -> f64 {
        match &self.dense {
            Some(d) => d.min_eigenvalue,
            None => self.weights.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// Eigenvalue of `L` on the character `e^{i n·x}`.
    pub fn eigenvalue(&self, n: &[i64]) -> f64 {
        debug_assert_eq!(n.len(), self.dim());
        match &self.dense {
            None => n
                .iter()
                .zip(&self.weights)
                .map(|(&k, a)| a * (k * k) as f64)
                .sum(),
            Some(d) => {
                let mut total = 0.0;
                for i in 0..n.len() {
                    if n[i] == 0 {
                        continue;
                    }
                    for j in 0..n.len() {
                        total += d.matrix[(i, j)] * (n[i] * n[j]) as f64;
                    }
                }
                total
            }
        }
    }

    /// `τ_i · n`, the real factor of the symbol of `X_i`.
    pub fn direction(&self, i: usize, n: &[i64]) -> f64 {
        match &self.dense {
            None => self.weights[i].sqrt() * n[i] as f64,
            Some(d) => (i..n.len()).map(|j| d.factor[(i, j)] * n[j] as f64).sum(),
        }
    }

    /// Symbol of `X_i` on `e^{i n·x}`, namely `i (τ_i · n)`.
    pub fn direction_symbol(&self, i: usize, n: &[i64]) -> Result<Complex64> {
        if i >= self.dim() {
            return Err(LabError::IndexOutOfRange { index: i, dim: self.dim() });
        }
        Ok(Complex64::new(0.0, self.direction(i, n)))
    }

    /// Same model with every coefficient multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        match &self.dense {
            Some(d) => Self::matrix(&d.matrix * c),
            None => {
                let mut model = Self::explicit(self.weights.iter().map(|a| a * c).collect())?;
                if c == 1.0 {
                    model.kind = self.kind.clone();
                }
                Ok(model)
            }
        }
    }

    /// Default per-axis bandwidths `B_i = max(2, ceil(B_1 √(a_1/a_i)))`.
    pub fn default_bandwidths(&self, first: usize) -> Vec<usize> {
        let a1 = self.weights[0];
        self.weights
            .iter()
            .map(|a| ((first as f64 * (a1 / a).sqrt()).ceil() as usize).max(2))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_small_examples() {
        let w = WeightModel::explicit(vec![1.0, 4.0, 9.0]).unwrap();
        assert_eq!(w.eigenvalue(&[1, -2, 1]), 26.0);
        let w2 = WeightModel::explicit(vec![3.0, 5.0]).unwrap();
        assert_eq!(w2.eigenvalue(&[0, 0]), 0.0);
        let m = WeightModel::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert!((m.eigenvalue(&[1, 1]) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn direction_symbols() {
        let w = WeightModel::explicit(vec![4.0, 1.0]).unwrap();
        assert_eq!(w.direction_symbol(0, &[1, 0]).unwrap(), Complex64::new(0.0, 2.0));
        assert_eq!(w.direction_symbol(1, &[3, 0]).unwrap(), Complex64::new(0.0, 0.0));
        assert!(matches!(w.direction_symbol(2, &[0, 0]), Err(LabError::IndexOutOfRange { .. })));
    }

    #[test]
    fn matrix_factor_reassembles() {
        let m = WeightModel::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let t = m.factor().unwrap();
        assert_eq!(t[(1, 0)], 0.0);
        let a = m.matrix_form().unwrap();
        assert!((t.transpose() * t - a).amax() <= 1e-12 * a.amax());
        // τ_1 = (√2, 1/√2), so τ_1·(1,1) = √2 + 1/√2.
        let s = m.direction_symbol(0, &[1, 1]).unwrap();
        assert!((s.im - (2f64.sqrt() + 0.5f64.sqrt())).abs() < 1e-12);
        // Σ_i (τ_i·n)² reproduces nᵗAn.
        let n = [3, -2];
        let sum: f64 = (0..2).map(|i| m.direction(i, &n).powi(2)).sum();
        assert!((sum - m.eigenvalue(&n)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(WeightModel::explicit(vec![1.0, 0.0]).is_err());
        assert!(WeightModel::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
        assert!(WeightModel::from_rows(&[vec![1.0, 0.5], vec![0.4, 1.0]]).is_err());
        assert!(WeightModel::power(-1.0, 3).is_err());
    }

    #[test]
    fn generator_rules() {
        let w = WeightModel::power(0.5, 3).unwrap();
        assert_eq!(w.weights(), &[1.0, 4.0, 9.0]);
        assert_eq!(w.generated_weight(9), Some(100.0));
        let g = WeightModel::geometric(1.0, 2).unwrap();
        assert_eq!(g.weights(), &[2.0, 4.0]);
        let spec = WeightModel::from_spec("explicit:1,2,4", 0).unwrap();
        assert_eq!(spec.weights(), &[1.0, 2.0, 4.0]);
        assert!(WeightModel::from_spec("nope:1", 2).is_err());
    }

    #[test]
    fn bandwidth_rule_shrinks_with_weight() {
        let w = WeightModel::power(0.5, 6).unwrap();
        assert_eq!(w.default_bandwidths(8), vec![8, 4, 3, 2, 2, 2]);
    }
}
