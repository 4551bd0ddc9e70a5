use torus_lab::stochastic::{
    chi_square_uniformity, coordinate_variance, mc_riesz_pairing, quadratic_variation_check, simulate_paths,
    subordination_check, PathConfig, StartPoint,
};
use torus_lab::{Torus, WeightModel};

fn line() -> Torus {
    Torus::new(WeightModel::explicit(vec![1.0]).unwrap(), vec![2]).unwrap()
}

fn small(seed: u64, n_paths: usize) -> PathConfig {
    PathConfig { dt: 1e-2, n_paths, seed, ..PathConfig::default() }
}

#[test]
fn standard_error_shrinks_like_inverse_root() {
    let t = line();
    let (f, h) = (t.cosine(&[1], 1.0).unwrap(), t.sine(&[1], 1.0).unwrap());
    let few = mc_riesz_pairing(&t, &h, &f, 0, &small(3, 4_000)).unwrap();
    let many = mc_riesz_pairing(&t, &h, &f, 0, &small(3, 40_000)).unwrap();
    let ratio = few.estimate.se / many.estimate.se;
    assert!((2.8..=3.5).contains(&ratio), "SE ratio {ratio}");
}

#[test]
fn pairing_panel_coverage() {
    let t = line();
    let (f, h) = (t.cosine(&[1], 1.0).unwrap(), t.sine(&[1], 1.0).unwrap());
    let mut covered = 0;
    for seed in 0..20 {
        let p = mc_riesz_pairing(&t, &h, &f, 0, &small(100 + seed, 3_000)).unwrap();
        if p.agrees {
            covered += 1;
        }
    }
    assert!(covered >= 19, "{covered} of 20 within 3 SE");
}

#[test]
fn pairing_is_reproducible() {
    let t = line();
    let (f, h) = (t.cosine(&[1], 1.0).unwrap(), t.sine(&[1], 1.0).unwrap());
    let a = mc_riesz_pairing(&t, &h, &f, 0, &small(5, 2_000)).unwrap();
    let b = mc_riesz_pairing(&t, &h, &f, 0, &small(5, 2_000)).unwrap();
    let c = mc_riesz_pairing(&t, &h, &f, 0, &small(6, 2_000)).unwrap();
    assert_eq!(a.estimate.mean, b.estimate.mean);
    assert_ne!(a.estimate.mean, c.estimate.mean);
}

#[test]
fn pairing_on_two_axes() {
    let t = Torus::new(WeightModel::explicit(vec![1.0, 4.0]).unwrap(), vec![2, 2]).unwrap();
    let f = t.cosine(&[1, 1], 1.0).unwrap();
    let h = t.sine(&[1, 1], 1.0).unwrap();
    // the Euler bias is first order in λ·dt, so λ = 5 needs a finer step
    let cfg = PathConfig { dt: 1e-3, ..small(9, 8_000) };
    let p = mc_riesz_pairing(&t, &h, &f, 1, &cfg).unwrap();
    assert!(p.z_score.abs() <= 3.0, "z = {}", p.z_score);
    assert!(p.reference.abs() > 0.1);
}

#[test]
fn coordinate_variance_grows_like_2at() {
    let w = WeightModel::explicit(vec![1.0, 3.0]).unwrap();
    let cfg = PathConfig { dt: 1e-2, n_paths: 20_000, seed: 4, ..PathConfig::default() };
    let steps = 50;
    let t = steps as f64 * cfg.dt;
    for (i, e) in coordinate_variance(&w, &cfg, steps).unwrap().iter().enumerate() {
        let expected = 2.0 * w.weights()[i] * t;
        assert!(e.z(expected).abs() <= 4.0, "axis {i}: {} ± {} vs {expected}", e.mean, e.se);
    }
}

#[test]
fn exit_points_from_a_fixed_start_are_uniform() {
    let w = WeightModel::explicit(vec![1.0]).unwrap();
    let cfg = PathConfig { dt: 1e-2, y0: 8.0, n_paths: 10_000, seed: 21, start: StartPoint::Fixed(vec![0.0]), ..PathConfig::default() };
    let batch = simulate_paths(&cfg, &w, &[]).unwrap();
    let angles: Vec<f64> = batch.terminal.iter().map(|x| x[0]).collect();
    let chi = chi_square_uniformity(&angles, 32);
    assert!(chi.passed, "χ² = {} ≥ {}", chi.statistic, chi.critical);
    assert!((chi.critical - 52.19).abs() < 0.05);
}

#[test]
fn chi_square_rejects_clustered_angles() {
    let angles: Vec<f64> = (0..5_000).map(|k| (k % 100) as f64 * 1e-3).collect();
    assert!(!chi_square_uniformity(&angles, 16).passed);
}

#[test]
fn quadratic_variation_matches_its_reference() {
    let t = Torus::new(WeightModel::explicit(vec![1.0, 2.0]).unwrap(), vec![2, 2]).unwrap();
    let f = t.cosine(&[1, 1], 1.0).unwrap().add(&t.sine(&[0, 2], 0.5).unwrap()).unwrap();
    let r = quadratic_variation_check(&t, &f, &small(13, 4_000)).unwrap();
    assert!(r.passed, "{:?}", r.witness);
}

#[test]
fn subordination_reproduces_the_poisson_semigroup() {
    let t = Torus::new(WeightModel::explicit(vec![1.0, 2.0]).unwrap(), vec![2, 2]).unwrap();
    let f = t.cosine(&[1, 0], 1.0).unwrap().add(&t.cosine(&[1, 1], 0.5).unwrap()).unwrap();
    let r = subordination_check(&t, &f, 0.7, &[0.3, 1.1], &small(17, 8_000)).unwrap();
    assert!(r.passed, "{:?} {:?}", r.witness, r.fitted);
}

#[test]
fn invalid_configs_are_rejected() {
    let t = line();
    let (f, h) = (t.cosine(&[1], 1.0).unwrap(), t.sine(&[1], 1.0).unwrap());
    let bad = PathConfig { dt: -1.0, ..small(1, 10) };
    assert!(mc_riesz_pairing(&t, &h, &f, 0, &bad).is_err());
    let bad = PathConfig { y_cap: Some(1.0), ..small(1, 10) };
    assert!(mc_riesz_pairing(&t, &h, &f, 0, &bad).is_err());
    assert!(mc_riesz_pairing(&t, &h, &t.constant(1.0), 0, &small(1, 10)).is_err());
}
