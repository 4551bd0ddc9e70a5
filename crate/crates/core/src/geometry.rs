//! Intrinsic distance, translation differences and Gaussian kernel bounds.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::heat::{kernel_at_identity, log_theta, log_theta0};
use crate::lattice::{GridField, SpectralField};
use crate::quadrature::{Quadrature, QuadratureMode};
use crate::report::{ExperimentReport, Table};
use crate::torus::Torus;
use crate::weights::WeightModel;

/// A point of `T^d` with angles reduced to `[0, 2π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    coords: Vec<f64>,
}

impl TorusPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        let coords = coords
            .into_iter()
            .map(|x| {
                let r = x.rem_euclid(TAU);
                if r >= TAU {
                    0.0
                } else {
                    r
                }
            })
            .collect();
        TorusPoint { coords }
    }

    pub fn identity(dim: usize) -> Self {
        TorusPoint { coords: vec![0.0; dim] }
    }

    /// `s` along axis `i`, zero elsewhere.
    pub fn axis(dim: usize, i: usize, s: f64) -> Self {
        let mut c = vec![0.0; dim];
        c[i] = s;
        TorusPoint::new(c)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn add(&self, other: &TorusPoint) -> TorusPoint {
        TorusPoint::new(self.coords.iter().zip(&other.coords).map(|(a, b)| a + b).collect())
    }

    /// `self − other`, the group element `other⁻¹ self`.
    pub fn sub(&self, other: &TorusPoint) -> TorusPoint {
        TorusPoint::new(self.coords.iter().zip(&other.coords).map(|(a, b)| a - b).collect())
    }

    pub fn is_identity(&self) -> bool {
        self.coords.iter().all(|&c| c == 0.0)
    }
}

pub const DEFAULT_WINDING_RADIUS: i64 = 2;
pub const MAX_WINDING_RADIUS: i64 = 8;
const WINDING_BOX_BUDGET: f64 = 5e7;

/// Arc distance on the circle.
fn arc(delta: f64) -> f64 {
    let r = delta.rem_euclid(TAU);
    r.min(TAU - r)
}

/// Intrinsic distance `d(x, y)`. The matrix case searches winding vectors
/// with radius 2, doubling up to 8 while the box boundary still improves.
pub fn intrinsic_distance(x: &TorusPoint, y: &TorusPoint, w: &WeightModel) -> Result<f64> {
    if x.dim() != w.dim() || y.dim() != w.dim() {
        return Err(LabError::ShapeMismatch(format!(
            "points of dimension {} and {} for weights of dimension {}",
            x.dim(),
            y.dim(),
            w.dim()
        )));
    }
    let delta: Vec<f64> = y.coords.iter().zip(&x.coords).map(|(b, a)| b - a).collect();
    if w.is_diagonal() {
        let sq: f64 = delta.iter().zip(w.weights()).map(|(d, a)| arc(*d).powi(2) / a).sum();
        return Ok(sq.sqrt());
    }
    let mut radius = DEFAULT_WINDING_RADIUS;
    loop {
        match winding_search(&delta, w, radius)? {
            Some(v) => return Ok(v.sqrt()),
            None if radius < MAX_WINDING_RADIUS => radius = (radius * 2).min(MAX_WINDING_RADIUS),
            None => return Err(LabError::WindingSearchExhausted(radius)),
        }
    }
}

/// Minimum of the quadratic form over `|m_i| ≤ radius`, or `None` when the
/// shell `|m|_∞ = radius` beats the interior.
pub fn winding_search(delta: &[f64], w: &WeightModel, radius: i64) -> Result<Option<f64>> {
    let inv = w.inverse_matrix().ok_or_else(|| invalid("winding search needs a matrix model"))?;
    let d = delta.len();
    let side = (2 * radius + 1) as f64;
    if side.powi(d as i32) > WINDING_BOX_BUDGET {
        return Err(LabError::WindingSearchExhausted(radius));
    }
    // reduce each coordinate to (−π, π] first so the search is centred
    let base: Vec<f64> = delta.iter().map(|&v| v - TAU * (v / TAU).round()).collect();
    let mut m = vec![-radius; d];
    let mut inner = f64::INFINITY;
    let mut shell = f64::INFINITY;
    let mut v = vec![0.0; d];
    loop {
        for i in 0..d {
            v[i] = base[i] - TAU * m[i] as f64;
        }
        let mut q = 0.0;
        for i in 0..d {
            let mut row = 0.0;
            for j in 0..d {
                row += inv[(i, j)] * v[j];
            }
            q += v[i] * row;
        }
        if m.iter().any(|k| k.abs() == radius) {
            shell = shell.min(q);
        } else {
            inner = inner.min(q);
        }
        let mut i = d;
        loop {
            if i == 0 {
                let best = inner.min(shell);
                return Ok(if shell < inner * (1.0 - 1e-14) { None } else { Some(best) });
            }
            i -= 1;
            m[i] += 1;
            if m[i] <= radius {
                break;
            }
            m[i] = -radius;
        }
    }
}

/// `Δ_y^k f`, multiplier `(e^{in·y} − 1)^k`.
pub fn difference_operator(f: &SpectralField, y: &TorusPoint, k: u32) -> Result<SpectralField> {
    if k == 0 {
        return Err(invalid("difference order must be at least 1"));
    }
    if y.dim() != f.lattice().dim() {
        return Err(LabError::ShapeMismatch("translation vector dimension".into()));
    }
    let table: Vec<Complex64> = f
        .lattice()
        .points()
        .map(|n| {
            let phase: f64 = n.iter().zip(y.coords()).map(|(&a, b)| a as f64 * b).sum();
            // e^{iφ} − 1 = 2i sin(φ/2) e^{iφ/2}, free of cancellation for small φ
            (Complex64::from_polar(2.0 * (0.5 * phase).sin(), 0.5 * phase) * Complex64::i()).powu(k)
        })
        .collect();
    f.apply_table(&table)
}

/// Grid version of [`difference_operator`]; the result is sampled on the
/// same grid.
pub fn difference_operator_grid(f: &GridField, y: &TorusPoint, k: u32) -> Result<GridField> {
    let g = difference_operator(&f.to_spectral(), y, k)?;
    g.to_grid_shape(f.shape().to_vec())
}

/// Binomial expansion `Σ_j (−1)^{k−j} C(k,j) f(x + j·y)` by direct evaluation.
pub fn difference_pointwise(f: &SpectralField, x: &[f64], y: &TorusPoint, k: u32) -> f64 {
    let mut total = 0.0;
    let mut binom = 1.0;
    for j in 0..=k {
        let point: Vec<f64> = x.iter().zip(y.coords()).map(|(a, b)| a + j as f64 * b).collect();
        let sign = if (k - j) % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * binom * f.evaluate(&point).re;
        binom = binom * (k - j) as f64 / (j + 1) as f64;
    }
    total
}

/// Translation vectors for suprema over `y`: every axis at magnitudes
/// `π 2^{-j}`, `j < axis_levels`, then `random` uniform points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YSampler {
    pub axis_levels: usize,
    pub random: usize,
    pub seed: u64,
}

impl Default for YSampler {
    fn default() -> Self {
        YSampler { axis_levels: 24, random: 200, seed: 0x5eed }
    }
}

impl YSampler {
    pub fn sample(&self, dim: usize) -> Vec<TorusPoint> {
        let mut out = Vec::with_capacity(dim * self.axis_levels + self.random);
        for i in 0..dim {
            for j in 0..self.axis_levels {
                out.push(TorusPoint::axis(dim, i, PI * 0.5f64.powi(j as i32)));
            }
        }
        out.extend(random_points(dim, self.random, self.seed));
        out
    }
}

pub fn random_points(dim: usize, count: usize, seed: u64) -> Vec<TorusPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| TorusPoint::new((0..dim).map(|_| rng.gen_range(0.0..TAU)).collect())).collect()
}

/// `log μ_t(x)` for a diagonal model: the identity value of the full model
/// corrected on the axes `x` actually moves.
pub fn log_kernel_at(x: &TorusPoint, t: f64, w: &WeightModel) -> Result<f64> {
    if !w.is_diagonal() {
        return Err(invalid("kernel bound verification needs a diagonal model"));
    }
    let base = kernel_at_identity(t, w)?.log_mu;
    let mut corr = 0.0;
    for (xi, a) in x.coords().iter().zip(w.weights()) {
        if *xi != 0.0 {
            let s = a * t;
            corr += log_theta(*xi, s) - log_theta0(s);
        }
    }
    Ok(base + corr)
}

/// Logarithmic meshes searched for the constants `(A, C)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantMesh {
    pub a: Vec<f64>,
    pub c: Vec<f64>,
}

impl Default for ConstantMesh {
    fn default() -> Self {
        ConstantMesh { a: crate::heat::log_grid(1e-3, 1e4, 141), c: crate::heat::log_grid(1e-2, 1e4, 121) }
    }
}

/// Searches `(A, C)` with `log μ_t(x) ≤ A t^{-λ} − d(e,x)²/(C t)` on every
/// sampled `(t, x)`. Reports the smallest admissible `C` and the smallest
/// `C` whose `A` stays within twice the `d = 0` requirement.
pub fn verify_gaussian_bound(
    w: &WeightModel,
    lambda: f64,
    t_grid: &[f64],
    xs: &[TorusPoint],
    mesh: &ConstantMesh,
) -> Result<ExperimentReport> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(invalid(format!("λ must lie in (0,1), got {lambda}")));
    }
    if t_grid.is_empty() || t_grid.iter().any(|t| !(*t > 0.0)) {
        return Err(invalid("t-grid must be nonempty and positive"));
    }
    let d = w.dim();
    let mut points = vec![TorusPoint::identity(d)];
    points.extend(xs.iter().filter(|x| !x.is_identity()).cloned());
    let mut report = ExperimentReport::new("gaussian-bound", "heat-kernel-gaussian-bound")
        .with_resolution(format!("{} t-values x {} points", t_grid.len(), points.len()));
    let dist2: Vec<f64> = points
        .iter()
        .map(|x| intrinsic_distance(&TorusPoint::identity(d), x, w).map(|v| v * v))
        .collect::<Result<_>>()?;
    // rows[t][x] = log μ_t(x)
    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        rows.push(points.iter().map(|x| log_kernel_at(x, t, w)).collect::<Result<Vec<_>>>()?);
    }
    let required = |c: f64| -> (f64, usize, usize) {
        let mut best = (f64::NEG_INFINITY, 0, 0);
        for (ti, &t) in t_grid.iter().enumerate() {
            for xi in 0..points.len() {
                let v = t.powf(lambda) * (rows[ti][xi] + dist2[xi] / (c * t));
                if v > best.0 {
                    best = (v, ti, xi);
                }
            }
        }
        best
    };
    let a_zero = {
        let mut s = f64::NEG_INFINITY;
        for (ti, &t) in t_grid.iter().enumerate() {
            for row in rows[ti].iter() {
                s = s.max(t.powf(lambda) * row);
            }
        }
        s
    };
    let a_max = mesh.a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let snap = |need: f64| mesh.a.iter().cloned().filter(|&a| a >= need).fold(f64::INFINITY, f64::min);
    let mut table = Table::new(&["C", "A_required", "A_mesh"]);
    let mut smallest: Option<(f64, f64)> = None;
    let mut balanced: Option<(f64, f64)> = None;
    let mut c_sorted = mesh.c.clone();
    c_sorted.sort_by(f64::total_cmp);
    for &c in &c_sorted {
        let (need, _, _) = required(c);
        let a = snap(need);
        table.push(vec![c.into(), need.into(), a.into()]);
        if a.is_finite() {
            smallest.get_or_insert((a, c));
            if need <= 2.0 * a_zero.max(0.0) + f64::EPSILON && balanced.is_none() {
                balanced = Some((a, c));
            }
        }
    }
    report.fit("A_at_identity", a_zero);
    match smallest {
        Some((a, c)) => {
            report.fit("C_min", c);
            report.fit("A_at_C_min", a);
            if let Some((ab, cb)) = balanced {
                report.fit("C_balanced", cb);
                report.fit("A_balanced", ab);
            }
            let (ac, cc) = balanced.unwrap_or((a, c));
            // record the tightest sampled slack for the reported pair
            for (ti, &t) in t_grid.iter().enumerate() {
                for xi in 0..points.len() {
                    let bound = ac / t.powf(lambda) - dist2[xi] / (cc * t);
                    let x = &points[xi];
                    report.check(rows[ti][xi], bound, 1e-12, || format!("t={t:e} x={:?}", x.coords()));
                }
            }
        }
        None => {
            let c = *c_sorted.last().ok_or_else(|| invalid("empty C mesh"))?;
            let (need, ti, xi) = required(c);
            report.fail(format!(
                "no admissible pair: C={c:e} needs A={need:e} > {a_max:e} at t={:e} x={:?}",
                t_grid[ti],
                points[xi].coords()
            ));
        }
    }
    report.table = table;
    Ok(report)
}

/// Asserts `‖Δ_y f‖_p ≤ d(e,y) ‖Γ(f,f)^{1/2}‖_p + 1e-8` for every `y`.
/// For `p = ∞` on tensor grids both sides use a four-fold refined grid.
pub fn poincare_check(torus: &Torus, f: &SpectralField, ys: &[TorusPoint], p: f64) -> Result<ExperimentReport> {
    if !(p >= 1.0) {
        return Err(invalid(format!("p must be at least 1, got {p}")));
    }
    torus.check_field(f)?;
    if !f.is_real(1e-10) {
        return Err(invalid("poincare check needs a real field"));
    }
    let quad = match torus.quadrature().mode() {
        QuadratureMode::Tensor { oversample } if p.is_infinite() => Quadrature::tensor(oversample.max(4)),
        _ => torus.quadrature().clone(),
    };
    let gradient = torus.gradient(f)?;
    let grad_norm = quad.vector_norm(&gradient, p)?.value;
    let mut report = ExperimentReport::new("poincare", "translation-poincare")
        .with_resolution(format!("{} translations, p={p}", ys.len()));
    let e = TorusPoint::identity(torus.dim());
    for y in ys {
        let lhs = quad.norm(&difference_operator(f, y, 1)?, p)?.value;
        let dist = intrinsic_distance(&e, y, torus.weights())?;
        report.check(lhs, dist * grad_norm, 1e-8, || format!("y={:?}", y.coords()));
    }
    report.fit("gradient_norm", grad_norm);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_distance_example() {
        let w = WeightModel::explicit(vec![1.0, 4.0]).unwrap();
        let e = TorusPoint::identity(2);
        let y = TorusPoint::new(vec![PI, PI]);
        let v = intrinsic_distance(&e, &y, &w).unwrap();
        assert!((v - PI * 5f64.sqrt() / 2.0).abs() < 1e-12);
        assert_eq!(intrinsic_distance(&y, &y, &w).unwrap(), 0.0);
    }

    #[test]
    fn matrix_distance_example() {
        let w = WeightModel::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let y = TorusPoint::new(vec![PI / 2.0, 0.0]);
        let v = intrinsic_distance(&TorusPoint::identity(2), &y, &w).unwrap();
        assert!((v - 1.2825498).abs() < 1e-6, "{v}");
        assert!((v * v - PI * PI / 6.0).abs() < 1e-12);
    }

    #[test]
    fn coordinates_reduced() {
        let p = TorusPoint::new(vec![-0.5, 7.0, TAU]);
        assert!((p.coords()[0] - (TAU - 0.5)).abs() < 1e-15);
        assert!((p.coords()[1] - (7.0 - TAU)).abs() < 1e-15);
        assert_eq!(p.coords()[2], 0.0);
    }

    #[test]
    fn difference_of_cosine() {
        let torus = Torus::new(WeightModel::explicit(vec![1.0, 2.0]).unwrap(), vec![3, 2]).unwrap();
        let f = torus.cosine(&[1, 0], 1.0).unwrap();
        let g = difference_operator(&f, &TorusPoint::axis(2, 0, PI), 1).unwrap();
        assert!(g.max_difference(&f.scale(-2.0)).unwrap() < 1e-14);
        let c = torus.constant(3.0);
        for k in 1..4 {
            let z = difference_operator(&c, &TorusPoint::new(vec![0.3, 1.1]), k).unwrap();
            assert!(z.max_abs_coefficient() < 1e-15);
        }
        assert!(difference_operator(&f, &TorusPoint::identity(2), 0).is_err());
    }

    #[test]
    fn poincare_single_mode_sup_norm() {
        let torus = Torus::new(WeightModel::explicit(vec![1.0]).unwrap(), vec![2]).unwrap();
        let f = torus.cosine(&[1], 1.0).unwrap();
        let ys: Vec<_> = [0.1, 0.5, 1.0, 2.0, 3.0].iter().map(|&s| TorusPoint::new(vec![s])).collect();
        let r = poincare_check(&torus, &f, &ys, f64::INFINITY).unwrap();
        assert!(r.passed, "{r:?}");
    }
}
