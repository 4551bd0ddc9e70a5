//! Heat and Poisson semigroups as Fourier multipliers, together with heat
//! kernel evaluation and the on-diagonal diagnostics built on it.

mod bounds;
mod ck;
mod kernel;
mod theta;

pub use bounds::{
    check_analyticity, check_l1_linf_differentiability, derivative_kernel_l1, p_star, KERNEL_GRID_BUDGET,
};
pub use ck::{classify_ck, log_grid, CkOptions, CkReport, LambdaVerdict};
pub use kernel::{
    kernel_at_identity, kernel_at_identity_capped, kernel_density, log_mu_identity_on, IdentityKernel,
    KernelDiagnostics,
};
pub use theta::{log_theta, log_theta0, theta1d, theta_derivative, theta_images, theta_spectral, THETA_CROSSOVER};

use crate::error::{invalid, LabError, Result};
use crate::lattice::SpectralField;
use crate::torus::Torus;

/// `H_t f`, multiplier `e^{-tλ(n)}`.
pub fn heat_apply(torus: &Torus, f: &SpectralField, t: f64) -> Result<SpectralField> {
    if !(t >= 0.0) {
        return Err(invalid(format!("heat time must be nonnegative, got {t}")));
    }
    torus.apply_eigen(f, |l| (-t * l).exp())
}

/// `∂_t^order H_t f = (-L)^order H_t f`.
pub fn heat_time_derivative(torus: &Torus, f: &SpectralField, t: f64, order: u32) -> Result<SpectralField> {
    if order < 1 {
        return Err(invalid("time derivative order must be at least 1"));
    }
    if !(t >= 0.0) {
        return Err(invalid(format!("heat time must be nonnegative, got {t}")));
    }
    torus.apply_eigen(f, |l| (-l).powi(order as i32) * (-t * l).exp())
}

/// `Q_y f = e^{-y√L} f`.
pub fn poisson_apply(torus: &Torus, f: &SpectralField, y: f64) -> Result<SpectralField> {
    if !(y >= 0.0) {
        return Err(invalid(format!("Poisson height must be nonnegative, got {y}")));
    }
    torus.apply_eigen(f, |l| (-y * l.sqrt()).exp())
}

/// `∂_y^order Q_y f`, multiplier `(-√λ)^order e^{-y√λ}`.
pub fn poisson_y_derivative(torus: &Torus, f: &SpectralField, y: f64, order: u32) -> Result<SpectralField> {
    if !(y >= 0.0) {
        return Err(invalid(format!("Poisson height must be nonnegative, got {y}")));
    }
    torus.apply_eigen(f, |l| (-l.sqrt()).powi(order as i32) * (-y * l.sqrt()).exp())
}

/// `L^s f` with multiplier `λ(n)^s` off the origin and `0` at `n = 0`.
/// Negative powers require a mean-zero argument.
pub fn fractional_power(torus: &Torus, f: &SpectralField, s: f64) -> Result<SpectralField> {
    if s < 0.0 && !f.is_mean_zero() {
        return Err(LabError::NotMeanZero(f.mean().norm()));
    }
    torus.apply_eigen(f, |l| if l > 0.0 { l.powf(s) } else { 0.0 })
}

/// `L^η H_t f`, the building block of the fractional Lipschitz scale.
pub fn fractional_heat(torus: &Torus, f: &SpectralField, eta: f64, t: f64) -> Result<SpectralField> {
    if !(t >= 0.0) {
        return Err(invalid(format!("heat time must be nonnegative, got {t}")));
    }
    torus.apply_eigen(f, |l| if l > 0.0 { l.powf(eta) * (-t * l).exp() } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_field, DecayProfile};
    use crate::weights::WeightModel;

    fn torus(a: Vec<f64>, b: usize) -> Torus {
        let d = a.len();
        Torus::new(WeightModel::explicit(a).unwrap(), vec![b; d]).unwrap()
    }

    #[test]
    fn single_mode_heat_and_poisson() {
        let t = torus(vec![1.0], 6);
        let f = t.cosine(&[1], 1.0).unwrap();
        let h = heat_apply(&t, &f, 0.5).unwrap();
        assert!(h.max_difference(&f.scale((-0.5f64).exp())).unwrap() < 1e-15);
        let q = poisson_apply(&t, &f, 1.0).unwrap();
        assert!(q.max_difference(&f.scale((-1f64).exp())).unwrap() < 1e-15);
        assert_eq!(poisson_apply(&t, &f, 0.0).unwrap(), f);
        assert!(heat_apply(&t, &f, -1.0).is_err());
        assert!(poisson_apply(&t, &f, -1.0).is_err());
        let one = t.constant(1.0);
        assert_eq!(heat_apply(&t, &one, 3.0).unwrap(), one);
    }

    #[test]
    fn time_derivatives_of_a_mode() {
        let t = torus(vec![4.0], 4);
        let f = t.cosine(&[1], 1.0).unwrap();
        let d1 = heat_time_derivative(&t, &f, 0.1, 1).unwrap();
        assert!(d1.max_difference(&f.scale(-4.0 * (-0.4f64).exp())).unwrap() < 1e-14);
        let d2 = heat_time_derivative(&t, &f, 0.1, 2).unwrap();
        assert!(d2.max_difference(&f.scale(16.0 * (-0.4f64).exp())).unwrap() < 1e-14);
        assert!(heat_time_derivative(&t, &f, 0.1, 0).is_err());
    }

    #[test]
    fn fractional_powers() {
        let t = torus(vec![4.0], 4);
        let f = t.cosine(&[1], 1.0).unwrap();
        let inv = fractional_power(&t, &f, -1.0).unwrap();
        assert!(inv.max_difference(&f.scale(0.25)).unwrap() < 1e-15);
        let g = t.constant(1.0).add(&f).unwrap();
        assert!(matches!(fractional_power(&t, &g, -0.5), Err(LabError::NotMeanZero(_))));

        let t3 = torus(vec![1.0, 2.0, 4.0], 5);
        let r = random_field(t3.lattice(), 5, DecayProfile::Polynomial(1.5), true);
        let half = fractional_power(&t3, &fractional_power(&t3, &r, 0.5).unwrap(), 0.5).unwrap();
        let one = fractional_power(&t3, &r, 1.0).unwrap();
        assert!(half.max_difference(&one).unwrap() <= 1e-12 * one.max_abs_coefficient());
        let back = fractional_power(&t3, &fractional_power(&t3, &r, -0.7).unwrap(), 0.7).unwrap();
        assert!(back.max_difference(&r).unwrap() < 1e-12);
    }

    #[test]
    fn poisson_extension_is_harmonic() {
        let t = torus(vec![1.0, 3.0], 5);
        let f = random_field(t.lattice(), 2, DecayProfile::Exponential(0.4), false);
        let y = 0.7;
        let qyy = poisson_y_derivative(&t, &f, y, 2).unwrap();
        let lq = t.apply_eigen(&poisson_apply(&t, &f, y).unwrap(), |l| l).unwrap();
        assert!(qyy.max_difference(&lq).unwrap() <= 1e-12);
    }
}
