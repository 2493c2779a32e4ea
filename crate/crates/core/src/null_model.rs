//! Global null GLM fit `g(eta) = X gamma` and the bootstrap factor derived
//! from it.
//!
//! `variance` holds the diagonal of `Λ̂⁻¹`, i.e. `a_i(φ̂) v(η̂₀ᵢ)`, so that
//! `P̂ = Λ̂⁻¹ − Λ̂⁻¹X(X'Λ̂⁻¹X)⁻¹X'Λ̂⁻¹` is the covariance of `Y − η̂₀` under the
//! null. `Λ̂` itself is the diagonal of GLM working weights `1/(a_i v_i)`.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::Family;

pub const IRLS_TOLERANCE: f64 = 1e-8;
pub const IRLS_MAX_ITER: usize = 50;
/// Fitted probabilities this close to 0 or 1 count as separated.
pub const SEPARATION_EPS: f64 = 1e-10;
/// Fraction of separated samples that aborts a logistic fit.
pub const SEPARATION_FRACTION: f64 = 0.01;

/// n×q covariates; column 0 must be the all-ones intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateMatrix {
    values: Array2<f64>,
}

impl CovariateMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (n, q) = values.dim();
        if q == 0 {
            return Err(Error::InvalidInput("covariate matrix has no columns".into()));
        }
        if q >= n {
            return Err(Error::InvalidInput(format!(
                "need more samples than covariates (n = {n}, q = {q})"
            )));
        }
        if values.column(0).iter().any(|&v| v != 1.0) {
            return Err(Error::InvalidInput(
                "first covariate column must be the all-ones intercept".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite covariate value".into()));
        }
        Ok(CovariateMatrix { values })
    }

    /// Prepends an intercept column to `extra` (n×k).
    pub fn with_intercept(extra: ArrayView2<f64>) -> Result<Self> {
        let (n, k) = extra.dim();
        let mut values = Array2::ones((n, k + 1));
        values.slice_mut(ndarray::s![.., 1..]).assign(&extra);
        CovariateMatrix::new(values)
    }

    pub fn intercept_only(n: usize) -> Result<Self> {
        CovariateMatrix::new(Array2::ones((n, 1)))
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn q(&self) -> usize {
        self.values.ncols()
    }
}

/// Precomputation for applying `M = Λ̂^{-1/2}(I − Ĥ)`.
///
/// `Ĥ` is invariant to rescaling `Λ̂` by a constant, so the projector is built
/// from `A = diag(sqrt(v)) X` (dispersion left out) and the dispersion is
/// folded into `sqrt_var`. This keeps a noiseless Gaussian fit (`φ̂ = 0`)
/// well defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootFactor {
    /// `sqrt(a_i(φ̂) v_i)`, the diagonal of `Λ̂^{-1/2}`.
    sqrt_var: Array1<f64>,
    /// `diag(sqrt(v)) X`, n×q.
    scaled_x: Array2<f64>,
    /// `(A'A)⁻¹`, q×q.
    gram_inv: Array2<f64>,
}

impl BootFactor {
    fn new(x: ArrayView2<f64>, var_fn: &Array1<f64>, phi_scale: f64) -> Result<Self> {
        let root_v = var_fn.mapv(f64::sqrt);
        let scaled_x = &x * &root_v.view().insert_axis(Axis(1));
        let gram = scaled_x.t().dot(&scaled_x);
        let gram_inv = spd_inverse(&gram)?;
        let sqrt_var = root_v.mapv(|r| r * phi_scale.sqrt());
        Ok(BootFactor {
            sqrt_var,
            scaled_x,
            gram_inv,
        })
    }

    pub fn n(&self) -> usize {
        self.sqrt_var.len()
    }

    /// `M e` for a single vector.
    pub fn apply(&self, e: ArrayView1<f64>) -> Result<Array1<f64>> {
        if e.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "multiplier vector has length {}, model has n = {}",
                e.len(),
                self.n()
            )));
        }
        let coef = self.gram_inv.dot(&self.scaled_x.t().dot(&e));
        let mut out = &e - &self.scaled_x.dot(&coef);
        out *= &self.sqrt_var;
        Ok(out)
    }

    /// Applies `M` to every row of `rows` (k×n), in place: row `b` becomes
    /// `(M e_b)'`.
    pub fn apply_rows(&self, rows: &mut Array2<f64>) -> Result<()> {
        if rows.ncols() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "multiplier rows have {} columns, model has n = {}",
                rows.ncols(),
                self.n()
            )));
        }
        let coef = rows.dot(&self.scaled_x).dot(&self.gram_inv);
        let proj = coef.dot(&self.scaled_x.t());
        *rows -= &proj;
        *rows *= &self.sqrt_var.view().insert_axis(Axis(0));
        Ok(())
    }

    /// Dense `M` (n×n). Only sensible for small n.
    pub fn dense(&self) -> Array2<f64> {
        let mut m = Array2::eye(self.n());
        self.apply_rows(&mut m).expect("square identity matches n");
        // apply_rows computed (M e_b)' for e_b = unit rows, i.e. rows of M'.
        m.reversed_axes()
    }
}

/// Fitted null model. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullModel {
    pub family: Family,
    pub gamma_hat: Array1<f64>,
    pub eta0_hat: Array1<f64>,
    /// Diagonal of `Λ̂⁻¹`: `a_i(φ̂) v(η̂₀ᵢ)`.
    pub variance: Array1<f64>,
    pub phi_hat: f64,
    pub residuals: Array1<f64>,
    pub iterations: usize,
    boot_factor: BootFactor,
}

impl NullModel {
    pub fn n(&self) -> usize {
        self.residuals.len()
    }

    pub fn q(&self) -> usize {
        self.gamma_hat.len()
    }

    /// Diagonal of `Λ̂` (working weights `1/(a_i(φ̂) v_i)`).
    pub fn lambda_hat(&self) -> Array1<f64> {
        self.variance.mapv(|v| 1.0 / v)
    }

    pub fn boot_factor(&self) -> &BootFactor {
        &self.boot_factor
    }

    /// Stable 64-bit fingerprint of the fit (FNV-1a over family and the bit
    /// patterns of γ̂ and φ̂), written into sumstats metadata.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        eat(self.family.name().as_bytes());
        eat(&(self.n() as u64).to_le_bytes());
        for g in self.gamma_hat.iter() {
            eat(&g.to_bits().to_le_bytes());
        }
        eat(&self.phi_hat.to_bits().to_le_bytes());
        h
    }
}

/// Applies the bootstrap factor `M = Λ̂^{-1/2}(I − Ĥ)` to `e`.
pub fn apply_boot_factor(model: &NullModel, e: ArrayView1<f64>) -> Result<Array1<f64>> {
    model.boot_factor.apply(e)
}

/// Fits the null GLM by IRLS (a single weighted least-squares solve for the
/// Gaussian family).
pub fn fit_null(y: ArrayView1<f64>, x: &CovariateMatrix, family: Family) -> Result<NullModel> {
    let n = x.n();
    let q = x.q();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "outcome has length {}, covariates have n = {n}",
            y.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("missing or non-finite outcome".into()));
    }
    let xv = x.values();
    match family {
        Family::GaussianIdentity => {
            let gamma = solve_spd(&xv.t().dot(&xv), &xv.t().dot(&y))?;
            let eta0 = xv.dot(&gamma);
            let residuals = &y - &eta0;
            let rss = residuals.dot(&residuals);
            let phi = rss / (n - q) as f64;
            let var_fn = Array1::ones(n);
            let boot_factor = BootFactor::new(xv, &var_fn, phi)?;
            Ok(NullModel {
                family,
                gamma_hat: gamma,
                eta0_hat: eta0,
                variance: Array1::from_elem(n, phi),
                phi_hat: phi,
                residuals,
                iterations: 1,
                boot_factor,
            })
        }
        Family::BinomialLogit => {
            if y.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::InvalidInput(
                    "binomial outcome must be coded 0/1".into(),
                ));
            }
            fit_logistic(y, xv, family)
        }
    }
}

fn fit_logistic(y: ArrayView1<f64>, x: ArrayView2<f64>, family: Family) -> Result<NullModel> {
    let q = x.ncols();
    let mut gamma = Array1::<f64>::zeros(q);
    let mut mu: Array1<f64>;
    let mut iterations = 0;
    loop {
        if iterations == IRLS_MAX_ITER {
            return Err(Error::NoConvergence(IRLS_MAX_ITER));
        }
        iterations += 1;
        let lin = x.dot(&gamma);
        mu = lin.mapv(|l| family.inverse_link(l));
        let w = mu.mapv(|m| family.variance(m));
        // Newton step: (X'WX) delta = X'(y - mu)
        let xw = &x * &w.view().insert_axis(Axis(1));
        let info = x.t().dot(&xw);
        let grad = x.t().dot(&(&y - &mu));
        let delta = solve_spd(&info, &grad)?;
        gamma += &delta;
        check_separation(&x.dot(&gamma).mapv(|l| family.inverse_link(l)))?;
        let step = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if !step.is_finite() {
            return Err(Error::NoConvergence(iterations));
        }
        if step < IRLS_TOLERANCE {
            break;
        }
    }
    let eta0 = x.dot(&gamma).mapv(|l| family.inverse_link(l));
    check_separation(&eta0)?;
    let var_fn = eta0.mapv(|m| family.variance(m));
    let residuals = &y - &eta0;
    let boot_factor = BootFactor::new(x, &var_fn, 1.0)?;
    Ok(NullModel {
        family,
        gamma_hat: gamma,
        eta0_hat: eta0,
        variance: var_fn,
        phi_hat: 1.0,
        residuals,
        iterations,
        boot_factor,
    })
}

fn check_separation(mu: &Array1<f64>) -> Result<()> {
    let count = mu
        .iter()
        .filter(|&&m| m < SEPARATION_EPS || m > 1.0 - SEPARATION_EPS)
        .count();
    if count as f64 > SEPARATION_FRACTION * mu.len() as f64 {
        return Err(Error::SeparationDetected {
            count,
            n: mu.len(),
        });
    }
    Ok(())
}

fn to_nalgebra(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Cholesky with a relative pivot floor so near-collinear designs are
/// reported rather than silently solved.
fn cholesky(a: &Array2<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let scale = a.diag().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::SingularDesign);
    }
    let chol = to_nalgebra(a).cholesky().ok_or(Error::SingularDesign)?;
    let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v * v));
    if min_pivot <= 1e-12 * scale {
        return Err(Error::SingularDesign);
    }
    Ok(chol)
}

pub(crate) fn solve_spd(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let chol = cholesky(a)?;
    let rhs = nalgebra::DVector::from_iterator(b.len(), b.iter().copied());
    let sol = chol.solve(&rhs);
    Ok(Array1::from_iter(sol.iter().copied()))
}

pub(crate) fn spd_inverse(a: &Array2<f64>) -> Result<Array2<f64>> {
    let inv = cholesky(a)?.inverse();
    Ok(Array2::from_shape_fn(a.dim(), |(i, j)| inv[(i, j)]))
}
