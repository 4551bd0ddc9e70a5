//! One-dimensional heat kernel `θ(x, s) = Σ_k e^{-sk²} e^{ikx}` on the circle
//! and its `s`-derivatives.
//!
//! Two representations are used: the Fourier series, which converges fast for
//! large `s`, and the image sum `√(π/s) Σ_m e^{-(x-2πm)²/(4s)}`, which
//! converges fast for small `s`. At `s = π` both need at most six terms.

use std::f64::consts::PI;

use crate::error::{invalid, Result};

pub const THETA_CROSSOVER: f64 = PI;

const TERM_FLOOR: f64 = 1e-17;

/// `θ(x, s)` for `s > 0`.
pub fn theta1d(x: f64, s: f64) -> Result<f64> {
    check_s(s)?;
    Ok(theta_derivative(x, s, 0))
}

fn check_s(s: f64) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("theta parameter must be positive, got {s}")))
    }
}

/// `∂^order θ / ∂s^order` for `order ≤ 2`, switching representation at the
/// crossover.
pub fn theta_derivative(x: f64, s: f64, order: u32) -> f64 {
    if s >= THETA_CROSSOVER {
        theta_spectral(x, s, order)
    } else {
        theta_images(x, s, order)
    }
}

/// Fourier-series representation, valid for every `s > 0`.
pub fn theta_spectral(x: f64, s: f64, order: u32) -> f64 {
    let mut sum = if order == 0 { 1.0 } else { 0.0 };
    let mut k = 1u64;
    loop {
        let k2 = (k * k) as f64;
        let decay = (-s * k2).exp();
        let weight = match order {
            0 => 1.0,
            1 => -k2,
            _ => k2 * k2,
        };
        let term = 2.0 * weight * decay * (k as f64 * x).cos();
        sum += term;
        // remaining tail is bounded by a geometric series in e^{-s(2k+1)}
        let ratio = (-s * (2 * k + 1) as f64).exp();
        if 2.0 * weight.abs().max(1.0) * decay * ratio / (1.0 - ratio).max(1e-300) < TERM_FLOOR
            && decay < 1.0
        {
            break;
        }
        k += 1;
    }
    sum
}

/// Image-sum representation `√(π/s) Σ_m e^{-(x-2πm)²/(4s)}`.
pub fn theta_images(x: f64, s: f64, order: u32) -> f64 {
    let x = x - 2.0 * PI * (x / (2.0 * PI)).round();
    let pref = (PI / s).sqrt();
    let image = |m: i64| {
        let u = x - 2.0 * PI * m as f64;
        let g = pref * (-u * u / (4.0 * s)).exp();
        let first = -0.5 / s + u * u / (4.0 * s * s);
        match order {
            0 => g,
            1 => g * first,
            _ => g * (first * first + 0.5 / (s * s) - u * u / (2.0 * s * s * s)),
        }
    };
    let mut sum = image(0);
    let mut m = 1i64;
    loop {
        let pair = image(m) + image(-m);
        sum += pair;
        let u = 2.0 * PI * m as f64 - PI;
        if pref * (-u * u / (4.0 * s)).exp() * (1.0 + u * u / (s * s)) < TERM_FLOOR {
            break;
        }
        m += 1;
    }
    sum
}

/// `log θ(x, s)` without underflow: for small `s` the nearest image is
/// factored out, `θ = √(π/s) e^{-x²/(4s)} (1 + Σ_{m≠0} e^{-((x-2πm)²-x²)/(4s)})`.
pub fn log_theta(x: f64, s: f64) -> f64 {
    if s >= THETA_CROSSOVER {
        return theta_spectral(x, s, 0).ln();
    }
    let x = x - 2.0 * PI * (x / (2.0 * PI)).round();
    let mut rest = 0.0f64;
    let mut m = 1.0f64;
    loop {
        let mut pair = 0.0;
        for sign in [1.0, -1.0] {
            let u = x - sign * 2.0 * PI * m;
            pair += (-(u * u - x * x) / (4.0 * s)).exp();
        }
        rest += pair;
        if pair < 1e-18 * rest.max(1e-300) || pair == 0.0 {
            break;
        }
        m += 1.0;
    }
    0.5 * (PI / s).ln() - x * x / (4.0 * s) + rest.ln_1p()
}

/// `log θ(0, s)`, accurate for tiny `s` where `θ(0,s) ≈ √(π/s)`.
pub fn log_theta0(s: f64) -> f64 {
    if s >= THETA_CROSSOVER {
        let mut rest = 0.0f64;
        let mut n = 1.0f64;
        loop {
            let term = (-s * n * n).exp();
            if term < 1e-18 * rest.max(1e-300) || term == 0.0 {
                break;
            }
            rest += 2.0 * term;
            n += 1.0;
        }
        return rest.ln_1p();
    }
    let mut corr = 0.0;
    let mut m = 1.0f64;
    loop {
        let term = (-PI * PI * m * m / s).exp();
        if term < 1e-18 {
            break;
        }
        corr += 2.0 * term;
        m += 1.0;
    }
    0.5 * (PI / s).ln() + corr.ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_theta_matches_direct_and_survives_underflow() {
        for (x, s) in [(0.3, 0.2), (3.0, 1.0), (PI, 0.05), (1.0, 5.0)] {
            assert!((log_theta(x, s) - theta_derivative(x, s, 0).ln()).abs() < 1e-12);
        }
        let deep = log_theta(3.0, 1e-4);
        assert!(deep.is_finite() && (deep - (0.5 * (PI / 1e-4).ln() - 9.0 / 4e-4)).abs() < 1e-9);
    }

    #[test]
    fn representations_agree_at_crossover() {
        for x in [0.0, PI / 2.0, PI, 1.234] {
            for order in 0..3 {
                let a = theta_spectral(x, PI, order);
                let b = theta_images(x, PI, order);
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "x={x} order={order}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn symmetric_and_positive() {
        for s in [0.01, 0.3, 2.0, 9.0] {
            for x in [0.1, 1.0, 3.0] {
                assert_eq!(theta1d(x, s).unwrap(), theta1d(-x, s).unwrap());
                assert!(theta1d(x, s).unwrap() > 0.0);
            }
        }
        assert!(theta1d(0.0, 0.0).is_err());
        assert!(theta1d(0.0, -1.0).is_err());
    }

    #[test]
    fn large_s_limit() {
        let v = theta1d(0.0, 50.0).unwrap();
        assert!(v - 1.0 <= 2.0 * (-50f64).exp() * 1.0000001);
        assert!(v >= 1.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for (x, s) in [(0.3, 0.05), (2.0, 1.0), (1.0, 4.0)] {
            let h = 1e-5 * s;
            let fd1 = (theta_derivative(x, s + h, 0) - theta_derivative(x, s - h, 0)) / (2.0 * h);
            let fd2 = (theta_derivative(x, s + h, 1) - theta_derivative(x, s - h, 1)) / (2.0 * h);
            assert!((fd1 - theta_derivative(x, s, 1)).abs() < 1e-5 * fd1.abs().max(1.0));
            assert!((fd2 - theta_derivative(x, s, 2)).abs() < 1e-4 * fd2.abs().max(1.0));
        }
    }

    #[test]
    fn log_theta_matches_direct() {
        for s in [1e-6, 1e-3, 0.5, 3.0, 10.0] {
            let direct = theta_derivative(0.0, s, 0).ln();
            assert!((log_theta0(s) - direct).abs() < 1e-13 * direct.abs().max(1.0));
        }
    }
}
