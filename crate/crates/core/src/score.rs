//! Marginal score statistics, multiplier-bootstrap pseudo-scores and the
//! percentile threshold.

use ndarray::parallel::prelude::*;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::null_model::NullModel;
use crate::region::Region;

pub const MIN_BOOTSTRAP: usize = 100;
pub const DEFAULT_BOOTSTRAP: usize = 1000;

/// n×p dosage matrix with per-variant metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenotypeMatrix {
    dosages: Array2<f64>,
    positions: Vec<u64>,
    maf: Vec<f64>,
}

impl GenotypeMatrix {
    pub fn new(dosages: Array2<f64>, positions: Vec<u64>, maf: Vec<f64>) -> Result<Self> {
        let p = dosages.ncols();
        if positions.len() != p || maf.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "{p} variant columns but {} positions and {} MAFs",
                positions.len(),
                maf.len()
            )));
        }
        if dosages.iter().any(|&d| !(0.0..=2.0).contains(&d)) {
            return Err(Error::InvalidInput("dosage outside [0, 2]".into()));
        }
        if positions.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidInput("variant positions are not sorted".into()));
        }
        if maf.iter().any(|&m| !(0.0..=0.5).contains(&m)) {
            return Err(Error::InvalidInput("MAF outside [0, 0.5]".into()));
        }
        Ok(GenotypeMatrix {
            dosages,
            positions,
            maf,
        })
    }

    /// Builds the matrix with MAFs computed from the dosages.
    pub fn from_dosages(dosages: Array2<f64>, positions: Vec<u64>) -> Result<Self> {
        let maf = column_maf(dosages.view());
        GenotypeMatrix::new(dosages, positions, maf)
    }

    pub fn n(&self) -> usize {
        self.dosages.nrows()
    }

    pub fn p(&self) -> usize {
        self.dosages.ncols()
    }

    pub fn dosages(&self) -> ArrayView2<'_, f64> {
        self.dosages.view()
    }

    pub fn positions(&self) -> &[u64] {
        &self.positions
    }

    pub fn maf(&self) -> &[f64] {
        &self.maf
    }

    /// Columns `region` of the dosage matrix, as a view.
    pub fn columns(&self, region: Region) -> ArrayView2<'_, f64> {
        self.dosages.slice(s![.., region.start..region.end])
    }

    /// True when every stored MAF is within `tol` of the dosage-derived one.
    pub fn maf_consistent(&self, tol: f64) -> bool {
        column_maf(self.dosages.view())
            .iter()
            .zip(&self.maf)
            .all(|(a, b)| (a - b).abs() <= tol)
    }
}

/// Minor allele frequency of each column, `min(f, 1 - f)` with `f = mean/2`.
pub fn column_maf(dosages: ArrayView2<f64>) -> Vec<f64> {
    let n = dosages.nrows().max(1) as f64;
    dosages
        .axis_iter(Axis(1))
        .map(|c| {
            let f = c.sum() / (2.0 * n);
            f.min(1.0 - f).clamp(0.0, 0.5)
        })
        .collect()
}

/// Observed scores plus `N` pseudo-score rows, all over the same `p` variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub u: Array1<f64>,
    /// N×p; row `b` is `U^{e_b}`.
    pub boot: Array2<f64>,
    pub seed: u64,
}

impl ScoreSet {
    pub fn new(u: Array1<f64>, boot: Array2<f64>, seed: u64) -> Result<Self> {
        if boot.ncols() != u.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} observed scores but bootstrap rows have {} columns",
                u.len(),
                boot.ncols()
            )));
        }
        if boot.nrows() == 0 {
            return Err(Error::EmptyInput);
        }
        Ok(ScoreSet { u, boot, seed })
    }

    pub fn p(&self) -> usize {
        self.u.len()
    }

    pub fn n_boot(&self) -> usize {
        self.boot.nrows()
    }

    /// Copy of the scores restricted to `region`, re-indexed from 0.
    pub fn slice(&self, region: Region) -> Result<ScoreSet> {
        region.check_bounds(self.p())?;
        Ok(ScoreSet {
            u: self.u.slice(s![region.start..region.end]).to_owned(),
            boot: self.boot.slice(s![.., region.start..region.end]).to_owned(),
            seed: self.seed,
        })
    }
}

/// `u[j] = G_{·j}'(Y − η̂₀)/√n`.
pub fn compute_scores(g: &GenotypeMatrix, model: &NullModel) -> Result<Array1<f64>> {
    scores_for_columns(g.dosages(), model)
}

pub(crate) fn scores_for_columns(cols: ArrayView2<f64>, model: &NullModel) -> Result<Array1<f64>> {
    if cols.nrows() != model.n() {
        return Err(Error::DimensionMismatch(format!(
            "genotypes have {} samples, null model has {}",
            cols.nrows(),
            model.n()
        )));
    }
    let scale = 1.0 / (model.n() as f64).sqrt();
    Ok(cols.t().dot(&model.residuals) * scale)
}

/// Standard-normal multiplier vector `e_b`, regenerated from `(seed, b)`
/// alone: ChaCha8 keyed by `seed`, stream `b`, sample `i` at position `i`.
pub fn multiplier_vector(seed: u64, replicate: u64, n: usize) -> Array1<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    Array1::from_iter((0..n).map(|_| StandardNormal.sample(&mut rng)))
}

/// The N×n matrix whose row `b` is `(M e_b)'/√n`. Multiplying it by any set
/// of genotype columns yields those columns' pseudo-scores, so block workers
/// share one copy (or regenerate it from the seed) instead of the full
/// N×p bootstrap.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    rows: Array2<f64>,
    seed: u64,
}

impl Multipliers {
    pub fn generate(model: &NullModel, n_boot: usize, seed: u64) -> Result<Self> {
        if n_boot < MIN_BOOTSTRAP {
            return Err(Error::InvalidInput(format!(
                "need at least {MIN_BOOTSTRAP} bootstrap replicates, got {n_boot}"
            )));
        }
        let n = model.n();
        let mut rows = Array2::<f64>::zeros((n_boot, n));
        rows.axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .for_each(|(b, mut row)| row.assign(&multiplier_vector(seed, b as u64, n)));
        model.boot_factor().apply_rows(&mut rows)?;
        rows /= (n as f64).sqrt();
        Ok(Multipliers { rows, seed })
    }

    pub fn n_boot(&self) -> usize {
        self.rows.nrows()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// N×k pseudo-scores for the given n×k genotype columns.
    pub fn pseudo_scores(&self, cols: ArrayView2<f64>) -> Result<Array2<f64>> {
        if cols.nrows() != self.rows.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "genotypes have {} samples, multipliers have {}",
                cols.nrows(),
                self.rows.ncols()
            )));
        }
        Ok(self.rows.dot(&cols))
    }
}

/// N×p bootstrap pseudo-scores; row `b` is `G' M e_b / √n`.
pub fn compute_bootstrap(
    g: &GenotypeMatrix,
    model: &NullModel,
    n_boot: usize,
    seed: u64,
) -> Result<Array2<f64>> {
    if g.n() != model.n() {
        return Err(Error::DimensionMismatch(format!(
            "genotypes have {} samples, null model has {}",
            g.n(),
            model.n()
        )));
    }
    Multipliers::generate(model, n_boot, seed)?.pseudo_scores(g.dosages())
}

/// Observed and bootstrap scores in one call.
pub fn compute_score_set(
    g: &GenotypeMatrix,
    model: &NullModel,
    n_boot: usize,
    seed: u64,
) -> Result<ScoreSet> {
    let u = compute_scores(g, model)?;
    let boot = compute_bootstrap(g, model, n_boot, seed)?;
    ScoreSet::new(u, boot, seed)
}

/// The `⌈(1−α)N⌉`-th smallest value (inverse-CDF empirical quantile).
pub fn percentile_threshold(values: &[f64], alpha: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let k = order_statistic_rank(values.len(), alpha);
    let mut buf = values.to_vec();
    let (_, kth, _) = buf.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*kth)
}

/// 1-based rank `⌈(1−α)N⌉`, clamped to `[1, N]`. A small slack absorbs the
/// representation error of `1 − α` so that e.g. α = 0.05, N = 100 gives 95.
pub fn order_statistic_rank(n: usize, alpha: f64) -> usize {
    let target = (1.0 - alpha) * n as f64;
    let k = (target - 1e-9 * n as f64).ceil() as usize;
    k.clamp(1, n)
}

/// `max_{j ∈ region} |v_j|`.
pub fn max_abs(scores: ArrayView1<f64>, region: Region) -> Result<f64> {
    region.check_bounds(scores.len())?;
    Ok(abs_max(scores.slice(s![region.start..region.end])))
}

pub(crate) fn abs_max(v: ArrayView1<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}
