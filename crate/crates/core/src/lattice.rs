//! Truncated frequency lattices, spectral coefficient tables and tensor-grid
//! samples on `T^d` under normalized Haar measure.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{LabError, Result};

/// Default ceiling on the number of tensor-grid points a lattice may induce.
pub const DEFAULT_GRID_BUDGET: usize = 1 << 24;

/// Frequencies `n ∈ Z^d` with `|n_i| ≤ B_i`, stored row-major with the last
/// axis varying fastest. Negating a point reverses its index.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyLattice {
    bandwidths: Vec<usize>,
    strides: Vec<usize>,
    points: Vec<i64>,
}

impl FrequencyLattice {
    pub fn new(bandwidths: Vec<usize>) -> Result<Self> {
        Self::with_budget(bandwidths, DEFAULT_GRID_BUDGET)
    }

    pub fn with_budget(bandwidths: Vec<usize>, budget: usize) -> Result<Self> {
        if bandwidths.is_empty() {
            return Err(LabError::ShapeMismatch("lattice dimension must be positive".into()));
        }
        let grid_points = bandwidths
            .iter()
            .try_fold(1usize, |acc, &b| acc.checked_mul(2 * b + 2))
            .unwrap_or(usize::MAX);
        if grid_points > budget {
            return Err(LabError::LatticeTooLarge { points: grid_points, budget });
        }
        let d = bandwidths.len();
        let mut strides = vec![1usize; d];
        for i in (0..d - 1).rev() {
            strides[i] = strides[i + 1] * (2 * bandwidths[i + 1] + 1);
        }
        let len = strides[0] * (2 * bandwidths[0] + 1);
        let mut points = Vec::with_capacity(len * d);
        for k in 0..len {
            for i in 0..d {
                let digit = (k / strides[i]) % (2 * bandwidths[i] + 1);
                points.push(digit as i64 - bandwidths[i] as i64);
            }
        }
        Ok(FrequencyLattice { bandwidths, strides, points })
    }

    pub fn dim(&self) -> usize {
        self.bandwidths.len()
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bandwidths(&self) -> &[usize] {
        &self.bandwidths
    }

    pub fn point(&self, k: usize) -> &[i64] {
        let d = self.dim();
        &self.points[k * d..(k + 1) * d]
    }

    pub fn points(&self) -> impl Iterator<Item = &[i64]> + '_ {
        self.points.chunks_exact(self.dim())
    }

    pub fn index_of(&self, n: &[i64]) -> Option<usize> {
        if n.len() != self.dim() {
            return None;
        }
        let mut k = 0;
        for (i, &ni) in n.iter().enumerate() {
            let b = self.bandwidths[i] as i64;
            if ni.abs() > b {
                return None;
            }
            k += (ni + b) as usize * self.strides[i];
        }
        Some(k)
    }

    /// Index of the zero frequency.
    pub fn origin(&self) -> usize {
        self.len() / 2
    }

    /// Index of `-n` given the index of `n`.
    pub fn negated(&self, k: usize) -> usize {
        self.len() - 1 - k
    }

    /// Tensor-grid shape `N_i = 2B_i + 2`.
    pub fn grid_shape(&self) -> Vec<usize> {
        self.bandwidths.iter().map(|b| 2 * b + 2).collect()
    }

    pub fn grid_len(&self) -> usize {
        self.grid_shape().iter().product()
    }
}

/// Complex Fourier coefficients indexed by the points of a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    lattice: Arc<FrequencyLattice>,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(lattice: Arc<FrequencyLattice>) -> Self {
        let coeffs = vec![Complex64::new(0.0, 0.0); lattice.len()];
        SpectralField { lattice, coeffs }
    }

    pub fn from_coefficients(lattice: Arc<FrequencyLattice>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != lattice.len() {
            return Err(LabError::ShapeMismatch(format!(
                "{} coefficients for a lattice of {} points",
                coeffs.len(),
                lattice.len()
            )));
        }
        Ok(SpectralField { lattice, coeffs })
    }

    pub fn constant(lattice: Arc<FrequencyLattice>, value: f64) -> Self {
        let mut f = Self::zeros(lattice);
        let o = f.lattice.origin();
        f.coeffs[o] = Complex64::new(value, 0.0);
        f
    }

    /// `amplitude · cos(n·x)`.
    pub fn cosine(lattice: Arc<FrequencyLattice>, n: &[i64], amplitude: f64) -> Result<Self> {
        Self::trig(lattice, n, Complex64::new(amplitude / 2.0, 0.0), Complex64::new(amplitude / 2.0, 0.0))
    }

    /// `amplitude · sin(n·x)`.
    pub fn sine(lattice: Arc<FrequencyLattice>, n: &[i64], amplitude: f64) -> Result<Self> {
        Self::trig(lattice, n, Complex64::new(0.0, -amplitude / 2.0), Complex64::new(0.0, amplitude / 2.0))
    }

    fn trig(lattice: Arc<FrequencyLattice>, n: &[i64], plus: Complex64, minus: Complex64) -> Result<Self> {
        let k = lattice
            .index_of(n)
            .ok_or_else(|| LabError::ShapeMismatch(format!("frequency {n:?} outside the lattice")))?;
        let mut f = Self::zeros(lattice);
        let kn = f.lattice.negated(k);
        if k == kn {
            f.coeffs[k] += plus + minus;
        } else {
            f.coeffs[k] += plus;
            f.coeffs[kn] += minus;
        }
        Ok(f)
    }

    pub fn lattice(&self) -> &Arc<FrequencyLattice> {
        &self.lattice
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn coefficient(&self, n: &[i64]) -> Option<Complex64> {
        self.lattice.index_of(n).map(|k| self.coeffs[k])
    }

    pub fn mean(&self) -> Complex64 {
        self.coeffs[self.lattice.origin()]
    }

    pub fn without_mean(&self) -> Self {
        let mut g = self.clone();
        let o = g.lattice.origin();
        g.coeffs[o] = Complex64::new(0.0, 0.0);
        g
    }

    /// `Σ |c_n|²`, the squared `L²` norm.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.energy().sqrt()
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Hermitian symmetry `c_{-n} = conj(c_n)` up to `tol · max(1, max|c|)`.
    pub fn is_real(&self, tol: f64) -> bool {
        self.realness_defect() <= tol * self.max_abs_coefficient().max(1.0)
    }

    pub fn realness_defect(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|k| (self.coeffs[self.lattice.negated(k)] - self.coeffs[k].conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_mean_zero(&self) -> bool {
        self.mean().norm() <= 1e-14 * self.l2_norm().max(1.0)
    }

    fn check_compatible(&self, other: &SpectralField) -> Result<()> {
        if Arc::ptr_eq(&self.lattice, &other.lattice) || self.lattice == other.lattice {
            Ok(())
        } else {
            Err(LabError::ShapeMismatch("fields live on different lattices".into()))
        }
    }

    pub fn add(&self, other: &SpectralField) -> Result<Self> {
        self.check_compatible(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(SpectralField { lattice: self.lattice.clone(), coeffs })
    }

    pub fn sub(&self, other: &SpectralField) -> Result<Self> {
        self.check_compatible(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Ok(SpectralField { lattice: self.lattice.clone(), coeffs })
    }

    pub fn scale(&self, c: f64) -> Self {
        SpectralField { lattice: self.lattice.clone(), coeffs: self.coeffs.iter().map(|a| a * c).collect() }
    }

    /// Maximum coefficient difference, used for residual checks.
    pub fn max_difference(&self, other: &SpectralField) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// `c'_n = m(n) c_n`; fails if the symbol is not finite at any point.
    pub fn apply_multiplier<M>(&self, symbol: M) -> Result<Self>
    where
        M: Fn(&[i64]) -> Complex64,
    {
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for (n, c) in self.lattice.points().zip(&self.coeffs) {
            let m = symbol(n);
            if !(m.re.is_finite() && m.im.is_finite()) {
                return Err(LabError::NonFiniteSymbol(n.to_vec()));
            }
            coeffs.push(m * c);
        }
        Ok(SpectralField { lattice: self.lattice.clone(), coeffs })
    }

    /// Multiplier given by a table of values aligned with the lattice order.
    pub fn apply_table(&self, table: &[Complex64]) -> Result<Self> {
        if table.len() != self.coeffs.len() {
            return Err(LabError::ShapeMismatch("multiplier table length".into()));
        }
        if let Some(k) = table.iter().position(|m| !(m.re.is_finite() && m.im.is_finite())) {
            return Err(LabError::NonFiniteSymbol(self.lattice.point(k).to_vec()));
        }
        let coeffs = self.coeffs.iter().zip(table).map(|(c, m)| c * m).collect();
        Ok(SpectralField { lattice: self.lattice.clone(), coeffs })
    }

    /// Real multiplier table, the common case for functions of `λ(n)`.
    pub fn apply_real_table(&self, table: &[f64]) -> Result<Self> {
        if table.len() != self.coeffs.len() {
            return Err(LabError::ShapeMismatch("multiplier table length".into()));
        }
        if let Some(k) = table.iter().position(|m| !m.is_finite()) {
            return Err(LabError::NonFiniteSymbol(self.lattice.point(k).to_vec()));
        }
        let coeffs = self.coeffs.iter().zip(table).map(|(c, m)| c * m).collect();
        Ok(SpectralField { lattice: self.lattice.clone(), coeffs })
    }

    /// Direct evaluation `Σ c_n e^{i n·x}` at one point.
    pub fn evaluate(&self, x: &[f64]) -> Complex64 {
        self.lattice
            .points()
            .zip(&self.coeffs)
            .filter(|(_, c)| c.norm_sqr() > 0.0)
            .map(|(n, c)| {
                let phase: f64 = n.iter().zip(x).map(|(&k, xi)| k as f64 * xi).sum();
                c * Complex64::from_polar(1.0, phase)
            })
            .sum()
    }

    /// Translate: `f(· + z)` has coefficients `c_n e^{i n·z}`.
    pub fn translate(&self, z: &[f64]) -> Self {
        let coeffs = self
            .lattice
            .points()
            .zip(&self.coeffs)
            .map(|(n, c)| {
                let phase: f64 = n.iter().zip(z).map(|(&k, zi)| k as f64 * zi).sum();
                c * Complex64::from_polar(1.0, phase)
            })
            .collect();
        SpectralField { lattice: self.lattice.clone(), coeffs }
    }

    /// Samples on the tensor grid refined by `oversample` along every axis.
    pub fn sample_grid(&self, oversample: usize) -> Vec<Complex64> {
        let shape: Vec<usize> = self.lattice.grid_shape().iter().map(|n| n * oversample.max(1)).collect();
        let mut data = vec![Complex64::new(0.0, 0.0); shape.iter().product()];
        for (n, c) in self.lattice.points().zip(&self.coeffs) {
            data[wrap_index(n, &shape)] = *c;
        }
        fft_nd(&mut data, &shape, true);
        data
    }

    /// Inverse transform onto the standard grid `N_i = 2B_i + 2`.
    pub fn to_grid(&self) -> GridField {
        self.to_grid_oversampled(1)
    }

    pub fn to_grid_oversampled(&self, oversample: usize) -> GridField {
        let shape: Vec<usize> = self.lattice.grid_shape().iter().map(|n| n * oversample.max(1)).collect();
        let samples = self.sample_grid(oversample).into_iter().map(|z| z.re).collect();
        GridField { lattice: self.lattice.clone(), shape, samples }
    }

    /// Inverse transform onto an arbitrary admissible grid.
    pub fn to_grid_shape(&self, shape: Vec<usize>) -> Result<GridField> {
        check_shape(&self.lattice, &shape)?;
        let mut data = vec![Complex64::new(0.0, 0.0); shape.iter().product()];
        for (n, c) in self.lattice.points().zip(&self.coeffs) {
            data[wrap_index(n, &shape)] = *c;
        }
        fft_nd(&mut data, &shape, true);
        let samples = data.into_iter().map(|z| z.re).collect();
        Ok(GridField { lattice: self.lattice.clone(), shape, samples })
    }

    /// Flat coefficient table `n_1..n_d,re,im`.
    pub fn to_csv(&self) -> String {
        let d = self.lattice.dim();
        let mut out = String::new();
        for i in 0..d {
            let _ = write!(out, "n_{},", i + 1);
        }
        out.push_str("re,im\n");
        for (n, c) in self.lattice.points().zip(&self.coeffs) {
            for k in n {
                let _ = write!(out, "{k},");
            }
            let _ = writeln!(out, "{:e},{:e}", c.re, c.im);
        }
        out
    }
}

/// Real samples on a tensor grid paired with the lattice they represent.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    lattice: Arc<FrequencyLattice>,
    shape: Vec<usize>,
    samples: Vec<f64>,
}

impl GridField {
    pub fn new(lattice: Arc<FrequencyLattice>, shape: Vec<usize>, samples: Vec<f64>) -> Result<Self> {
        check_shape(&lattice, &shape)?;
        if samples.len() != shape.iter().product::<usize>() {
            return Err(LabError::ShapeMismatch("sample count does not match grid shape".into()));
        }
        Ok(GridField { lattice, shape, samples })
    }

    /// Samples `g(x)` on the standard grid of `lattice`.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(lattice: Arc<FrequencyLattice>, g: F) -> Self {
        let shape = lattice.grid_shape();
        let points = grid_points(&shape);
        let samples = points.chunks_exact(shape.len()).map(&g).collect();
        GridField { lattice, shape, samples }
    }

    pub fn lattice(&self) -> &Arc<FrequencyLattice> {
        &self.lattice
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Coefficients of the band `|n_i| ≤ B_i` by the discrete transform.
    pub fn to_spectral(&self) -> SpectralField {
        let mut data: Vec<Complex64> = self.samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_nd(&mut data, &self.shape, false);
        let scale = 1.0 / data.len() as f64;
        let coeffs = self
            .lattice
            .points()
            .map(|n| data[wrap_index(n, &self.shape)] * scale)
            .collect();
        SpectralField { lattice: self.lattice.clone(), coeffs }
    }

    /// Grid quadrature of `(∫|g|^p dν)^{1/p}`; `p = ∞` is the grid maximum.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        norm_of_samples(self.samples.iter().map(|v| v.abs()), p)
    }
}

fn check_shape(lattice: &FrequencyLattice, shape: &[usize]) -> Result<()> {
    if shape.len() != lattice.dim() {
        return Err(LabError::ShapeMismatch(format!(
            "grid of dimension {} for a lattice of dimension {}",
            shape.len(),
            lattice.dim()
        )));
    }
    if let Some((i, n)) = shape.iter().enumerate().find(|(i, &n)| n < 2 * lattice.bandwidths()[*i] + 2) {
        return Err(LabError::ShapeMismatch(format!("axis {i} has {n} points, below 2B+2")));
    }
    Ok(())
}

pub(crate) fn norm_of_samples<I: ExactSizeIterator<Item = f64>>(values: I, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(LabError::InvalidParameter(format!("L^p exponent must be ≥ 1, got {p}")));
    }
    let count = values.len();
    if p.is_infinite() {
        return Ok(values.fold(0.0, f64::max));
    }
    let mean = values.map(|v| v.powf(p)).sum::<f64>() / count as f64;
    Ok(mean.powf(1.0 / p))
}

/// `n ↦ grid index of n mod N`.
fn wrap_index(n: &[i64], shape: &[usize]) -> usize {
    let mut idx = 0usize;
    for (k, &len) in n.iter().zip(shape) {
        idx = idx * len + k.rem_euclid(len as i64) as usize;
    }
    idx
}

/// Coordinates of every point of an equispaced grid, row-major.
pub fn grid_points(shape: &[usize]) -> Vec<f64> {
    let total: usize = shape.iter().product();
    let d = shape.len();
    let mut out = Vec::with_capacity(total * d);
    for idx in 0..total {
        let mut rem = idx;
        let mut coords = vec![0.0; d];
        for i in (0..d).rev() {
            coords[i] = 2.0 * PI * (rem % shape[i]) as f64 / shape[i] as f64;
            rem /= shape[i];
        }
        out.extend(coords);
    }
    out
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place multidimensional FFT over a row-major array. `inverse` computes
/// the unnormalized sum `Σ c_k e^{+2πi jk/N}`.
pub(crate) fn fft_nd(data: &mut [Complex64], shape: &[usize], inverse: bool) {
    let total = data.len();
    let mut stride = total;
    for &len in shape {
        stride /= len;
        if len == 1 {
            continue;
        }
        let fft = PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            if inverse {
                p.plan_fft_inverse(len)
            } else {
                p.plan_fft_forward(len)
            }
        });
        let mut line = vec![Complex64::new(0.0, 0.0); len];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let block = len * stride;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, v) in line.iter().enumerate() {
                    data[base + j * stride] = *v;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice(b: Vec<usize>) -> Arc<FrequencyLattice> {
        Arc::new(FrequencyLattice::new(b).unwrap())
    }

    #[test]
    fn negation_reverses_index() {
        let l = lattice(vec![2, 3, 1]);
        for k in 0..l.len() {
            let n: Vec<i64> = l.point(k).iter().map(|v| -v).collect();
            assert_eq!(l.index_of(&n), Some(l.negated(k)));
        }
        assert!(l.point(l.origin()).iter().all(|&v| v == 0));
    }

    #[test]
    fn budget_is_enforced() {
        let err = FrequencyLattice::with_budget(vec![8, 8, 8], 1000).unwrap_err();
        assert!(matches!(err, LabError::LatticeTooLarge { points: 5832, .. }));
    }

    #[test]
    fn cosine_transform() {
        let l = lattice(vec![8, 8]);
        let g = GridField::from_fn(l.clone(), |x| x[0].cos());
        let f = g.to_spectral();
        for (n, c) in l.points().zip(f.coefficients()) {
            let expected = if n == [1, 0] || n == [-1, 0] { 0.5 } else { 0.0 };
            assert!((c - Complex64::new(expected, 0.0)).norm() < 1e-12, "{n:?} {c}");
        }
        let one = GridField::from_fn(l.clone(), |_| 1.0).to_spectral();
        assert!((one.mean() - 1.0).norm() < 1e-14);
    }

    #[test]
    fn grid_shape_mismatch_is_rejected() {
        let l = lattice(vec![3]);
        assert!(GridField::new(l.clone(), vec![7], vec![0.0; 7]).is_err());
        assert!(GridField::new(l.clone(), vec![8, 2], vec![0.0; 16]).is_err());
        assert!(GridField::new(l, vec![8], vec![0.0; 5]).is_err());
    }

    #[test]
    fn norms_of_simple_fields() {
        let l = lattice(vec![8]);
        let c = SpectralField::cosine(l.clone(), &[1], 1.0).unwrap();
        assert!((c.to_grid().lp_norm(2.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        let k = SpectralField::constant(l, -3.0);
        for p in [1.0, 1.5, 2.0, 7.0, f64::INFINITY] {
            assert!((k.to_grid().lp_norm(p).unwrap() - 3.0).abs() < 1e-12);
        }
        assert!(k.to_grid().lp_norm(0.5).is_err());
    }

    #[test]
    fn csv_has_one_row_per_point() {
        let l = lattice(vec![1, 1]);
        let f = SpectralField::constant(l, 1.0);
        let csv = f.to_csv();
        assert!(csv.starts_with("n_1,n_2,re,im\n"));
        assert_eq!(csv.lines().count(), 10);
    }
}
