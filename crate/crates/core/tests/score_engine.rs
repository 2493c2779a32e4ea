mod common;

use birs::null_model::{fit_null, CovariateMatrix};
use birs::score::{
    compute_bootstrap, compute_score_set, compute_scores, max_abs, percentile_threshold,
    GenotypeMatrix,
};
use birs::sbirs::global_test;
use birs::simulate::{gen_genotypes, SimConfig};
use birs::{Family, Region};
use common::*;
use ndarray::{array, Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn positions(p: usize) -> Vec<u64> {
    (1..=p as u64).map(|j| 100 * j).collect()
}

fn gaussian_model(r: &mut impl Rng, n: usize) -> (birs::NullModel, Array2<f64>) {
    let x = random_design(r, n, 2);
    let y = Array1::from_shape_fn(n, |_| StandardNormal.sample(r));
    (fit_null(y.view(), &covariates(&x), Family::GaussianIdentity).unwrap(), x)
}

#[test]
fn toy_score_by_hand() {
    let y = array![2.5, 1.5, 3.0, 1.0];
    let model = fit_null(y.view(), &CovariateMatrix::intercept_only(4).unwrap(), Family::GaussianIdentity)
        .unwrap();
    let dos = Array2::from_shape_vec((4, 2), vec![1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 1.0, 0.0]).unwrap();
    let g = GenotypeMatrix::from_dosages(dos, positions(2)).unwrap();
    let u = compute_scores(&g, &model).unwrap();
    assert!((u[0] - 0.75).abs() < 1e-15);
    assert_eq!(u[1], 0.0);
}

#[test]
fn zero_residuals_give_zero_scores() {
    let y = array![3.0, 3.0, 3.0, 3.0];
    let model = fit_null(y.view(), &CovariateMatrix::intercept_only(4).unwrap(), Family::GaussianIdentity)
        .unwrap();
    assert!(model.residuals.iter().all(|&v| v == 0.0));
    let mut r = rng(1);
    let g = GenotypeMatrix::from_dosages(random_dosages(&mut r, 4, 4), positions(4)).unwrap();
    assert!(compute_scores(&g, &model).unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn monomorphic_column_has_zero_bootstrap() {
    let mut r = rng(2);
    let (model, _) = gaussian_model(&mut r, 80);
    let mut dos = random_dosages(&mut r, 80, 5);
    dos.column_mut(2).fill(0.0);
    let g = GenotypeMatrix::from_dosages(dos, positions(5)).unwrap();
    let set = compute_score_set(&g, &model, 200, 9).unwrap();
    assert_eq!(set.u[2], 0.0);
    assert!(set.boot.column(2).iter().all(|&v| v == 0.0));
}

#[test]
fn bootstrap_is_deterministic_and_seed_sensitive() {
    let mut r = rng(3);
    let (model, _) = gaussian_model(&mut r, 60);
    let g = GenotypeMatrix::from_dosages(random_dosages(&mut r, 60, 7), positions(7)).unwrap();
    let a = compute_bootstrap(&g, &model, 150, 42).unwrap();
    let b = compute_bootstrap(&g, &model, 150, 42).unwrap();
    let c = compute_bootstrap(&g, &model, 150, 43).unwrap();
    assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_ne!(a, c);
    // Rows depend only on (seed, b): a longer run shares its prefix.
    let longer = compute_bootstrap(&g, &model, 300, 42).unwrap();
    assert_eq!(longer.slice(ndarray::s![..150, ..]), a);
    assert!(compute_bootstrap(&g, &model, 99, 42).is_err());
}

#[test]
fn bootstrap_variance_matches_explicit_covariance() {
    let mut r = rng(4);
    let n = 200;
    let (model, x) = gaussian_model(&mut r, n);
    let dos = random_dosages(&mut r, n, 3);
    let g = GenotypeMatrix::from_dosages(dos.clone(), positions(3)).unwrap();
    let boot = compute_bootstrap(&g, &model, 5000, 5).unwrap();
    let sigma = dos.t().dot(&explicit_p(&x, &model.variance)).dot(&dos) / n as f64;
    for j in 0..3 {
        let col = boot.column(j);
        let mean = col.mean().unwrap();
        let var = col.mapv(|v| (v - mean).powi(2)).sum() / (col.len() - 1) as f64;
        let rel = (var - sigma[[j, j]]).abs() / sigma[[j, j]];
        assert!(rel < 0.05, "column {j}: {var} vs {}", sigma[[j, j]]);
    }
}

#[test]
fn percentile_examples() {
    let v: Vec<f64> = (1..=100).map(f64::from).collect();
    assert_eq!(percentile_threshold(&v, 0.05).unwrap(), 95.0);
    assert_eq!(percentile_threshold(&[4.0; 7], 0.3).unwrap(), 4.0);
    assert_eq!(percentile_threshold(&[3.0, 1.0, 2.0], 0.5).unwrap(), 2.0);
    assert!(percentile_threshold(&[], 0.05).is_err());
}

#[test]
fn max_abs_examples() {
    let u = array![-3.0, 1.0, 2.0];
    assert_eq!(max_abs(u.view(), Region::full(3).unwrap()).unwrap(), 3.0);
    assert_eq!(max_abs(u.view(), Region::new(1, 2).unwrap()).unwrap(), 1.0);
    let u = array![0.2, -0.9, 0.5];
    assert_eq!(max_abs(u.view(), Region::new(1, 3).unwrap()).unwrap(), 0.9);
    assert!(max_abs(u.view(), Region { start: 2, end: 4 }).is_err());
}

/// 95th percentile of the observed max statistic over fresh outcomes, against
/// the bootstrap threshold.
#[test]
fn null_calibration_small_instance() {
    let (n, p) = (300, 50);
    let mut r = rng(6);
    let x = random_design(&mut r, n, 2);
    let cov = covariates(&x);
    let g = GenotypeMatrix::from_dosages(random_dosages(&mut r, n, p), positions(p)).unwrap();
    let full = Region::full(p).unwrap();
    let mut t = Vec::with_capacity(2000);
    let mut c_sum = 0.0;
    let mut c_count = 0;
    for rep in 0..2000u64 {
        let y = Array1::from_shape_fn(n, |_| StandardNormal.sample(&mut r));
        let model = fit_null(y.view(), &cov, Family::GaussianIdentity).unwrap();
        if rep % 100 == 0 {
            let set = compute_score_set(&g, &model, 1000, rep).unwrap();
            c_sum += global_test(&set, full, 0.05).unwrap().1;
            c_count += 1;
        } else {
            let u = compute_scores(&g, &model).unwrap();
            t.push(max_abs(u.view(), full).unwrap());
        }
    }
    let empirical = percentile_threshold(&t, 0.05).unwrap();
    let c_bar = c_sum / c_count as f64;
    assert!(
        (empirical - c_bar).abs() <= 0.10 * c_bar,
        "empirical {empirical} vs bootstrap {c_bar}"
    );
}

#[test]
fn global_test_size() {
    let cfg = SimConfig {
        n: 500,
        p: 200,
        ld_rho: 0.5,
        maf_range: (0.01, 0.5),
        ..SimConfig::default()
    };
    let mut r = rng(7);
    let mut hits = 0;
    let reps = 1000;
    for rep in 0..reps {
        let g = gen_genotypes(&SimConfig { seed: rep, ..cfg.clone() }).unwrap();
        let x = random_design(&mut r, cfg.n, 2);
        let y = Array1::from_shape_fn(cfg.n, |_| StandardNormal.sample(&mut r));
        let model = fit_null(y.view(), &covariates(&x), Family::GaussianIdentity).unwrap();
        let set = compute_score_set(&g, &model, 500, 1000 + rep).unwrap();
        if global_test(&set, Region::full(cfg.p).unwrap(), 0.05).unwrap().2 {
            hits += 1;
        }
    }
    let rate = hits as f64 / reps as f64;
    assert!((0.035..=0.065).contains(&rate), "rejection rate {rate}");
}
