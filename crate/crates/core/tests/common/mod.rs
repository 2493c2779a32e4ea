//! Reference implementations used as oracles. Plain dense linear algebra,
//! written without touching the library's solvers.
#![allow(dead_code)]

use birs::null_model::CovariateMatrix;
use birs::score::ScoreSet;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Gauss-Jordan with partial pivoting. Returns `A⁻¹`.
pub fn invert(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut inv = Array2::<f64>::eye(n);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[[i, col]].abs().total_cmp(&m[[j, col]].abs()))
            .unwrap();
        assert!(m[[piv, col]].abs() > 1e-14, "oracle: singular matrix");
        for k in 0..n {
            m.swap([col, k], [piv, k]);
            inv.swap([col, k], [piv, k]);
        }
        let d = m[[col, col]];
        for k in 0..n {
            m[[col, k]] /= d;
            inv[[col, k]] /= d;
        }
        for i in 0..n {
            if i != col {
                let f = m[[i, col]];
                if f != 0.0 {
                    for k in 0..n {
                        m[[i, k]] -= f * m[[col, k]];
                        inv[[i, k]] -= f * inv[[col, k]];
                    }
                }
            }
        }
    }
    inv
}

pub fn ols(x: &Array2<f64>, y: &Array1<f64>) -> Array1<f64> {
    invert(&x.t().dot(x)).dot(&x.t().dot(y))
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Newton-Raphson on the logistic log-likelihood, run to machine precision.
pub fn newton_logistic(x: &Array2<f64>, y: &Array1<f64>) -> Array1<f64> {
    let (n, q) = x.dim();
    let mut beta = Array1::<f64>::zeros(q);
    for _ in 0..200 {
        let mut grad = Array1::<f64>::zeros(q);
        let mut hess = Array2::<f64>::zeros((q, q));
        for i in 0..n {
            let xi = x.row(i);
            let m = sigmoid(xi.dot(&beta));
            for a in 0..q {
                grad[a] += xi[a] * (y[i] - m);
                for b in 0..q {
                    hess[[a, b]] += m * (1.0 - m) * xi[a] * xi[b];
                }
            }
        }
        let step = invert(&hess).dot(&grad);
        beta += &step;
        if step.iter().all(|s| s.abs() < 1e-13) {
            break;
        }
    }
    beta
}

/// `P̂ = V − V X (Xᵀ V X)⁻¹ Xᵀ V` with `V = diag(variance)`.
pub fn explicit_p(x: &Array2<f64>, variance: &Array1<f64>) -> Array2<f64> {
    let n = x.nrows();
    let v = Array2::from_diag(variance);
    let vx = v.dot(x);
    let inner = invert(&x.t().dot(&vx));
    let p = &v - &vx.dot(&inner).dot(&vx.t());
    assert_eq!(p.nrows(), n);
    p
}

/// `[1, N(0,1) columns...]`.
pub fn random_design(r: &mut impl Rng, n: usize, q: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, q), |(_, j)| {
        if j == 0 {
            1.0
        } else {
            StandardNormal.sample(r)
        }
    })
}

pub fn covariates(x: &Array2<f64>) -> CovariateMatrix {
    CovariateMatrix::new(x.clone()).unwrap()
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Dosages in {0,1,2} with per-column frequency drawn from `(0.05, 0.5)`.
pub fn random_dosages(r: &mut impl Rng, n: usize, p: usize) -> Array2<f64> {
    let freqs: Vec<f64> = (0..p).map(|_| r.random_range(0.05..0.5)).collect();
    Array2::from_shape_fn((n, p), |(_, j)| {
        (r.random::<f64>() < freqs[j]) as u8 as f64 + (r.random::<f64>() < freqs[j]) as u8 as f64
    })
}

/// Scores with every bootstrap row equal to `level` at each entry.
pub fn flat_scores(u: Vec<f64>, n_boot: usize, level: f64) -> ScoreSet {
    let p = u.len();
    ScoreSet::new(Array1::from(u), Array2::from_elem((n_boot, p), level), 0).unwrap()
}

/// Random scores with i.i.d. normal bootstrap rows, plus optional planted
/// bumps `(start, end, height)`.
pub fn noise_scores(r: &mut impl Rng, p: usize, n_boot: usize, bumps: &[(usize, usize, f64)]) -> ScoreSet {
    let mut u = Array1::from_shape_fn(p, |_| StandardNormal.sample(r));
    for &(s, e, h) in bumps {
        for j in s..e {
            u[j] += h * if r.random::<bool>() { 1.0 } else { -1.0 };
        }
    }
    let boot = Array2::from_shape_fn((n_boot, p), |_| StandardNormal.sample(r));
    ScoreSet::new(u, boot, r.random()).unwrap()
}
