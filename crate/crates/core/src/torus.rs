use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::lattice::{FrequencyLattice, SpectralField};
use crate::quadrature::{NormEstimate, Quadrature};
use crate::weights::WeightModel;

/// A truncated torus `T^d`: weight model, frequency lattice and the
/// per-frequency tables every multiplier is built from.
#[derive(Debug, Clone)]
pub struct Torus {
    weights: WeightModel,
    lattice: Arc<FrequencyLattice>,
    eigenvalues: Vec<f64>,
    directions: Vec<f64>,
    quadrature: Quadrature,
}

impl Torus {
    pub fn new(weights: WeightModel, bandwidths: Vec<usize>) -> Result<Self> {
        if bandwidths.len() != weights.dim() {
            return Err(LabError::ShapeMismatch(format!(
                "{} bandwidths for a weight model of dimension {}",
                bandwidths.len(),
                weights.dim()
            )));
        }
        let lattice = Arc::new(FrequencyLattice::new(bandwidths)?);
        Ok(Self::on_lattice(weights, lattice))
    }

    /// Bandwidths from the default shrink rule with `B_1 = first`.
    pub fn with_default_bandwidths(weights: WeightModel, first: usize) -> Result<Self> {
        let b = weights.default_bandwidths(first);
        Self::new(weights, b)
    }

    pub fn on_lattice(weights: WeightModel, lattice: Arc<FrequencyLattice>) -> Self {
        let d = lattice.dim();
        let eigenvalues = lattice.points().map(|n| weights.eigenvalue(n)).collect();
        let mut directions = Vec::with_capacity(lattice.len() * d);
        for n in lattice.points() {
            for i in 0..d {
                directions.push(weights.direction(i, n));
            }
        }
        Torus { quadrature: Quadrature::for_dimension(d), weights, lattice, eigenvalues, directions }
    }

    pub fn with_quadrature(mut self, quadrature: Quadrature) -> Self {
        self.quadrature = quadrature;
        self
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn weights(&self) -> &WeightModel {
        &self.weights
    }

    pub fn lattice(&self) -> &Arc<FrequencyLattice> {
        &self.lattice
    }

    pub fn quadrature(&self) -> &Quadrature {
        &self.quadrature
    }

    /// `λ(n)` for every lattice point, in lattice order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `τ_i · n` at lattice index `k`.
    pub fn direction(&self, i: usize, k: usize) -> f64 {
        self.directions[k * self.dim() + i]
    }

    /// Smallest nonzero eigenvalue on the lattice.
    pub fn spectral_gap(&self) -> f64 {
        let origin = self.lattice.origin();
        self.eigenvalues
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != origin)
            .map(|(_, v)| *v)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.dim() {
            Err(LabError::IndexOutOfRange { index: i, dim: self.dim() })
        } else {
            Ok(())
        }
    }

    pub fn check_field(&self, f: &SpectralField) -> Result<()> {
        if Arc::ptr_eq(f.lattice(), &self.lattice) || **f.lattice() == *self.lattice {
            Ok(())
        } else {
            Err(LabError::ShapeMismatch("field does not live on this torus".into()))
        }
    }

    /// Table `m(λ(n))` in lattice order.
    pub fn eigen_table<F: Fn(f64) -> f64>(&self, m: F) -> Vec<f64> {
        self.eigenvalues.iter().map(|&l| m(l)).collect()
    }

    /// Applies `m(λ(n))` after checking the field belongs here.
    pub fn apply_eigen<F: Fn(f64) -> f64>(&self, f: &SpectralField, m: F) -> Result<SpectralField> {
        self.check_field(f)?;
        f.apply_real_table(&self.eigen_table(m))
    }

    /// `X_i f`, symbol `i(τ_i·n)`.
    pub fn derivative(&self, f: &SpectralField, i: usize) -> Result<SpectralField> {
        self.check_index(i)?;
        self.check_field(f)?;
        let table: Vec<Complex64> =
            (0..self.lattice.len()).map(|k| Complex64::new(0.0, self.direction(i, k))).collect();
        f.apply_table(&table)
    }

    /// `(X_1 f, …, X_d f)`; its pointwise length is `Γ(f,f)^{1/2}`.
    pub fn gradient(&self, f: &SpectralField) -> Result<Vec<SpectralField>> {
        (0..self.dim()).map(|i| self.derivative(f, i)).collect()
    }

    pub fn norm(&self, f: &SpectralField, p: f64) -> Result<NormEstimate> {
        self.quadrature.norm(f, p)
    }

    pub fn vector_norm(&self, components: &[SpectralField], p: f64) -> Result<NormEstimate> {
        self.quadrature.vector_norm(components, p)
    }

    /// Lattice translated into the field constructors' vocabulary.
    pub fn cosine(&self, n: &[i64], amplitude: f64) -> Result<SpectralField> {
        SpectralField::cosine(self.lattice.clone(), n, amplitude)
    }

    pub fn sine(&self, n: &[i64], amplitude: f64) -> Result<SpectralField> {
        SpectralField::sine(self.lattice.clone(), n, amplitude)
    }

    pub fn constant(&self, value: f64) -> SpectralField {
        SpectralField::constant(self.lattice.clone(), value)
    }

    pub fn zeros(&self) -> SpectralField {
        SpectralField::zeros(self.lattice.clone())
    }

    /// Unit vector along axis `i` with frequency `k`.
    pub fn axis_mode(&self, i: usize, k: i64) -> Vec<i64> {
        let mut n = vec![0; self.dim()];
        n[i] = k;
        n
    }
}
