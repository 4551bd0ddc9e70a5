use serde::Serialize;

use super::theta::{log_theta0, theta_derivative};
use crate::error::{invalid, LabError, Result};
use crate::report::{Cell, Table};
use crate::torus::Torus;
use crate::weights::{WeightKind, WeightModel};

/// Largest lattice box summed for matrix-model densities.
const MATRIX_SUM_BUDGET: usize = 4_000_000;

/// Density `μ_t(x)` of the heat kernel with respect to normalized Haar
/// measure on `T^d`.
///
/// Diagonal weights factor into `Π_i θ(x_i, a_i t)`. For a matrix model the
/// series `Σ_n e^{-t nᵗAn} e^{i n·x}` is summed over a box large enough for
/// the tail to fall below `1e-12`.
pub fn kernel_density(x: &[f64], t: f64, w: &WeightModel) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid(format!("kernel time must be positive, got {t}")));
    }
    if x.len() != w.dim() {
        return Err(LabError::ShapeMismatch(format!("point of dimension {} for dimension {}", x.len(), w.dim())));
    }
    if w.is_diagonal() {
        return Ok(x.iter().zip(w.weights()).map(|(&xi, &a)| theta_derivative(xi, a * t, 0)).product());
    }
    let a = w.matrix_form().expect("matrix model");
    let d = w.dim();
    let rate = t * w.min_eigenvalue();
    let tail_beyond = |k: i64| -> f64 {
        let mut tail = 0.0;
        let mut r = k + 1;
        loop {
            let shell = ((2 * r + 1) as f64).powi(d as i32) - ((2 * r - 1) as f64).powi(d as i32);
            let term = shell * (-rate * (r * r) as f64).exp();
            tail += term;
            if term < 1e-20 * tail.max(1e-300) || r > k + 10_000 {
                break;
            }
            r += 1;
        }
        tail
    };
    let mut k = 1i64;
    loop {
        let tail = tail_beyond(k);
        if tail < 1e-12 {
            break;
        }
        let size = ((2 * k + 3) as f64).powi(d as i32);
        if size > MATRIX_SUM_BUDGET as f64 {
            if tail > 1e-10 {
                return Err(LabError::BandwidthTooSmall { t, tail });
            }
            break;
        }
        k += 1;
    }
    let side = (2 * k + 1) as usize;
    let total = side.pow(d as u32);
    let mut n = vec![0i64; d];
    let mut sum = 0.0;
    for idx in 0..total {
        let mut rem = idx;
        for slot in n.iter_mut() {
            *slot = (rem % side) as i64 - k;
            rem /= side;
        }
        let mut q = 0.0;
        let mut phase = 0.0;
        for i in 0..d {
            phase += n[i] as f64 * x[i];
            for j in 0..d {
                q += a[(i, j)] * (n[i] * n[j]) as f64;
            }
        }
        sum += (-t * q).exp() * phase.cos();
    }
    Ok(sum)
}

/// `log μ_t(e)` with the number of factors that were needed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityKernel {
    pub t: f64,
    pub log_mu: f64,
    pub effective_dimension: usize,
    /// The last factor still contributed above the stopping threshold: either
    /// an explicit list ran out or the dimension cap was hit.
    pub tail_significant: bool,
}

/// Default ceiling on the number of factors summed by
/// [`kernel_at_identity`].
pub const DEFAULT_DIMENSION_CAP: usize = 50_000_000;

/// `log μ_t(e) = Σ_i log θ(0, a_i t)`, summed until
/// `2e^{-a_i t} < 1e-12 (sum + 1)`. Generated weight sequences are followed
/// past the operator dimension; explicit lists stop at their end.
pub fn kernel_at_identity(t: f64, w: &WeightModel) -> Result<IdentityKernel> {
    kernel_at_identity_capped(t, w, DEFAULT_DIMENSION_CAP)
}

pub fn kernel_at_identity_capped(t: f64, w: &WeightModel, cap: usize) -> Result<IdentityKernel> {
    if !(t > 0.0) {
        return Err(invalid(format!("kernel time must be positive, got {t}")));
    }
    if !w.is_diagonal() {
        return Err(invalid("kernel_at_identity needs a diagonal weight model"));
    }
    let mut sum = 0.0;
    let mut i = 0usize;
    loop {
        let Some(a) = w.generated_weight(i) else {
            // explicit list exhausted; was its last factor still significant?
            let last = w.weights()[i - 1] * t;
            let significant = 2.0 * (-last).exp() >= 1e-12 * (sum + 1.0);
            return Ok(IdentityKernel { t, log_mu: sum, effective_dimension: i, tail_significant: significant });
        };
        let s = a * t;
        sum += log_theta0(s);
        i += 1;
        if 2.0 * (-s).exp() < 1e-12 * (sum + 1.0) && monotone_tail(w) {
            return Ok(IdentityKernel { t, log_mu: sum, effective_dimension: i, tail_significant: false });
        }
        if i >= cap {
            return Ok(IdentityKernel { t, log_mu: sum, effective_dimension: i, tail_significant: true });
        }
    }
}

// Generator rules are increasing, so one small factor bounds every later one.
// Explicit lists carry no such guarantee and are summed to the end.
fn monotone_tail(w: &WeightModel) -> bool {
    !matches!(w.kind(), WeightKind::Explicit)
}

/// `log μ_t(e)` on the truncated torus itself (only its `d` axes).
pub fn log_mu_identity_on(torus: &Torus, t: f64) -> Result<f64> {
    let w = torus.weights();
    if w.is_diagonal() {
        if !(t > 0.0) {
            return Err(invalid(format!("kernel time must be positive, got {t}")));
        }
        Ok(w.weights().iter().map(|a| log_theta0(a * t)).sum())
    } else {
        Ok(kernel_density(&vec![0.0; w.dim()], t, w)?.ln())
    }
}

/// On-diagonal diagnostics over a `t`-grid. Since every Fourier coefficient
/// `e^{-tλ(n)}` of `μ_t` is positive, `sup_x μ_t(x) = μ_t(e)` and the
/// ultracontractivity exponent `M_0(t)` equals `log μ_t(e)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelDiagnostics {
    pub t: Vec<f64>,
    pub log_mu: Vec<f64>,
    pub m0: Vec<f64>,
    pub effective_dimension: Vec<usize>,
    pub tail_significant: Vec<bool>,
}

impl KernelDiagnostics {
    pub fn compute(w: &WeightModel, t_grid: &[f64]) -> Result<Self> {
        Self::compute_capped(w, t_grid, DEFAULT_DIMENSION_CAP)
    }

    pub fn compute_capped(w: &WeightModel, t_grid: &[f64], cap: usize) -> Result<Self> {
        let mut out = KernelDiagnostics {
            t: Vec::with_capacity(t_grid.len()),
            log_mu: Vec::new(),
            m0: Vec::new(),
            effective_dimension: Vec::new(),
            tail_significant: Vec::new(),
        };
        for &t in t_grid {
            out.push(kernel_at_identity_capped(t, w, cap)?);
        }
        Ok(out)
    }

    pub(crate) fn push(&mut self, k: IdentityKernel) {
        self.t.push(k.t);
        self.log_mu.push(k.log_mu);
        self.m0.push(k.log_mu);
        self.effective_dimension.push(k.effective_dimension);
        self.tail_significant.push(k.tail_significant);
    }

    /// TSV table `t, log_mu_t_e, M0, sup_t_lambda_<λ>...`, where the last
    /// columns hold `sup_{s ≥ t} s^λ log μ_s(e)` over the grid.
    pub fn table(&self, lambdas: &[f64]) -> Table {
        let mut columns = vec!["t".to_string(), "log_mu_t_e".into(), "M0".into()];
        columns.extend(lambdas.iter().map(|l| format!("sup_t_lambda_{l}")));
        let mut table = Table::new(&columns);
        let mut order: Vec<usize> = (0..self.t.len()).collect();
        order.sort_by(|&a, &b| self.t[b].total_cmp(&self.t[a]));
        let mut running = vec![f64::NEG_INFINITY; lambdas.len()];
        let mut rows = Vec::with_capacity(order.len());
        for &k in &order {
            let mut row: Vec<Cell> = vec![self.t[k].into(), self.log_mu[k].into(), self.m0[k].into()];
            for (j, &l) in lambdas.iter().enumerate() {
                running[j] = running[j].max(self.t[k].powf(l) * self.log_mu[k]);
                row.push(running[j].into());
            }
            rows.push(row);
        }
        rows.reverse();
        for row in rows {
            table.push(row);
        }
        table
    }
}
