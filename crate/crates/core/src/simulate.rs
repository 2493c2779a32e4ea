//! Synthetic genotypes, planted signal windows and phenotypes.
//!
//! Genotypes come from a latent-Gaussian threshold model: each haplotype is
//! an AR(1) Gaussian sequence along the variant axis with lag-1 correlation
//! `ld_rho`, and carries the minor allele at variant `j` when the latent
//! value falls below `Φ⁻¹(maf_j)`. Every random draw is keyed by
//! `(seed, purpose, index)`, so output does not depend on thread count.

use ndarray::parallel::prelude::*;
use ndarray::{Array1, Array2, Axis};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::family::Family;
use crate::null_model::CovariateMatrix;
use crate::region::Region;
use crate::score::GenotypeMatrix;

const TAG_MAF: u64 = 0x6d61_665f_7370_6563;
const TAG_SAMPLE: u64 = 0x6861_706c_6f74_7970;
const TAG_TRUTH: u64 = 0x7472_7574_685f_7365;
const TAG_PHENO: u64 = 0x7068_656e_6f74_7970;

fn keyed_rng(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ tag);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trait {
    Continuous,
    Dichotomous,
}

impl Trait {
    pub fn family(&self) -> Family {
        match self {
            Trait::Continuous => Family::GaussianIdentity,
            Trait::Dichotomous => Family::BinomialLogit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    pub ld_rho: f64,
    pub maf_range: (f64, f64),
    pub n_causal_windows: usize,
    pub window_bp: u64,
    pub causal_fraction: f64,
    pub effect_c: f64,
    #[serde(rename = "trait")]
    pub trait_type: Trait,
    /// Distance between neighbouring variants on the position grid.
    pub spacing_bp: u64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 2000,
            p: 8192,
            ld_rho: 0.9,
            maf_range: (0.001, 0.5),
            n_causal_windows: 4,
            window_bp: 5000,
            causal_fraction: 0.1,
            effect_c: 0.15,
            trait_type: Trait::Continuous,
            spacing_bp: 78,
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if self.n < 3 || self.p == 0 {
            return bad("need n >= 3 and p >= 1");
        }
        if !(0.0..1.0).contains(&self.ld_rho) {
            return bad("ld_rho must be in [0, 1)");
        }
        let (lo, hi) = self.maf_range;
        if !(lo > 0.0 && lo <= hi && hi <= 0.5) {
            return bad("maf_range must satisfy 0 < low <= high <= 0.5");
        }
        if !(self.causal_fraction > 0.0 && self.causal_fraction <= 1.0) {
            return bad("causal_fraction must be in (0, 1]");
        }
        if !(self.effect_c > 0.0) {
            return bad("effect_c must be positive");
        }
        if self.spacing_bp == 0 || self.window_bp == 0 {
            return bad("spacing_bp and window_bp must be positive");
        }
        Ok(())
    }
}

/// Planted truth for one replicate.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TruthSet {
    pub causal_windows: Vec<Region>,
    /// Sorted.
    pub causal_indices: Vec<usize>,
    /// Non-zero effects `(index, beta)`, sorted by index.
    pub beta: Vec<(usize, f64)>,
}

impl TruthSet {
    pub fn is_null(&self) -> bool {
        self.causal_windows.is_empty()
    }

    pub fn beta_dense(&self, p: usize) -> Array1<f64> {
        let mut b = Array1::zeros(p);
        for &(j, v) in &self.beta {
            b[j] = v;
        }
        b
    }
}

/// `|β| = c·|log10(maf)|`.
pub fn effect_size(maf: f64, c: f64) -> f64 {
    c * maf.log10().abs()
}

/// Per-variant target MAFs, log-uniform on `maf_range`.
pub fn target_maf(config: &SimConfig) -> Vec<f64> {
    let (lo, hi) = config.maf_range;
    let mut rng = keyed_rng(config.seed, TAG_MAF, 0);
    (0..config.p)
        .map(|_| (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp())
        .collect()
}

pub fn gen_genotypes(config: &SimConfig) -> Result<GenotypeMatrix> {
    config.validate()?;
    let (n, p) = (config.n, config.p);
    let std_normal = Normal::standard();
    let cutoffs: Vec<f64> = target_maf(config)
        .into_iter()
        .map(|maf| std_normal.inverse_cdf(maf))
        .collect();
    let rho = config.ld_rho;
    let innov = (1.0 - rho * rho).sqrt();

    let mut dosages = Array2::<f64>::zeros((n, p));
    dosages
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            let mut rng = keyed_rng(config.seed, TAG_SAMPLE, i as u64);
            for _ in 0..2 {
                let mut z: f64 = StandardNormal.sample(&mut rng);
                for (j, cut) in cutoffs.iter().enumerate() {
                    if j > 0 {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        z = rho * z + innov * e;
                    }
                    if z < *cut {
                        row[j] += 1.0;
                    }
                }
            }
        });
    let positions = (0..p as u64).map(|j| (j + 1) * config.spacing_bp).collect();
    GenotypeMatrix::from_dosages(dosages, positions)
}

/// Variants whose position falls in `[start_bp, start_bp + window_bp)`.
fn window_at(positions: &[u64], first: usize, window_bp: u64) -> Region {
    let limit = positions[first] + window_bp;
    let end = first + positions[first..].partition_point(|&x| x < limit);
    Region {
        start: first,
        end,
    }
}

/// Places `n_causal_windows` windows of `window_bp` at random, at least two
/// window widths apart, and draws effects for a random subset of the
/// polymorphic variants inside each.
pub fn plant_truth(g: &GenotypeMatrix, config: &SimConfig) -> Result<TruthSet> {
    config.validate()?;
    let k = config.n_causal_windows;
    if k == 0 {
        return Ok(TruthSet::default());
    }
    let positions = g.positions();
    let p = g.p();
    let last_pos = *positions.last().ok_or(Error::EmptyInput)?;
    let min_gap = 2 * config.window_bp;
    let too_big = || Error::WindowsDontFit {
        windows: k,
        window_bp: config.window_bp,
    };
    let starts: Vec<usize> = (0..p)
        .filter(|&j| positions[j] + config.window_bp <= last_pos + 1)
        .collect();
    if starts.is_empty() {
        return Err(too_big());
    }
    let mut rng = keyed_rng(config.seed, TAG_TRUTH, 0);
    let mut windows: Vec<Region> = Vec::with_capacity(k);
    let mut attempts = 0;
    while windows.len() < k {
        attempts += 1;
        if attempts > 100_000 {
            return Err(too_big());
        }
        let first = starts[rng.random_range(0..starts.len())];
        let cand = window_at(positions, first, config.window_bp);
        let lo = positions[cand.start];
        let hi = lo + config.window_bp;
        let clear = windows.iter().all(|w| {
            let wlo = positions[w.start];
            let whi = wlo + config.window_bp;
            hi + min_gap <= wlo || whi + min_gap <= lo
        });
        if clear {
            windows.push(cand);
        }
    }
    windows.sort();

    let maf = g.maf();
    let mut beta = Vec::new();
    for w in &windows {
        let poly: Vec<usize> = w.indices().filter(|&j| maf[j] > 0.0).collect();
        if poly.is_empty() {
            continue;
        }
        let want = ((config.causal_fraction * w.len() as f64).round() as usize)
            .clamp(1, poly.len());
        let mut picked: Vec<usize> = sample(&mut rng, poly.len(), want)
            .into_iter()
            .map(|i| poly[i])
            .collect();
        picked.sort_unstable();
        for j in picked {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            beta.push((j, sign * effect_size(maf[j], config.effect_c)));
        }
    }
    beta.sort_by_key(|&(j, _)| j);
    Ok(TruthSet {
        causal_windows: windows,
        causal_indices: beta.iter().map(|&(j, _)| j).collect(),
        beta,
    })
}

/// Covariates `[1, X1 ~ N(0,1), X2 ~ Bernoulli(0.5)]` and outcome from
/// `0.5 X1 + 0.5 X2 + Gβ` (plus `N(0,1)` noise, or through the logistic
/// link for a dichotomous trait).
pub fn gen_phenotype(
    g: &GenotypeMatrix,
    truth: &TruthSet,
    config: &SimConfig,
) -> Result<(Array1<f64>, CovariateMatrix)> {
    let n = g.n();
    if let Some(&(j, _)) = truth.beta.last() {
        if j >= g.p() {
            return Err(Error::DimensionMismatch(format!(
                "effect at index {j} but only {} variants",
                g.p()
            )));
        }
    }
    let mut rng = keyed_rng(config.seed, TAG_PHENO, 0);
    let coin = Bernoulli::new(0.5).expect("valid probability");
    let mut x = Array2::<f64>::ones((n, 3));
    for i in 0..n {
        x[[i, 1]] = StandardNormal.sample(&mut rng);
        x[[i, 2]] = if coin.sample(&mut rng) { 1.0 } else { 0.0 };
    }
    let dos = g.dosages();
    let mut lin = Array1::from_shape_fn(n, |i| 0.5 * x[[i, 1]] + 0.5 * x[[i, 2]]);
    for &(j, b) in &truth.beta {
        lin.scaled_add(b, &dos.column(j));
    }
    let y = match config.trait_type {
        Trait::Continuous => lin.mapv(|l| {
            let e: f64 = StandardNormal.sample(&mut rng);
            l + e
        }),
        Trait::Dichotomous => lin.mapv(|l| {
            let prob = Family::BinomialLogit.inverse_link(l);
            if rng.random::<f64>() < prob {
                1.0
            } else {
                0.0
            }
        }),
    };
    Ok((y, CovariateMatrix::new(x)?))
}

/// One complete simulated data set.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub genotypes: GenotypeMatrix,
    pub truth: TruthSet,
    pub y: Array1<f64>,
    pub covariates: CovariateMatrix,
}

pub fn simulate_replicate(config: &SimConfig) -> Result<Replicate> {
    let genotypes = gen_genotypes(config)?;
    let truth = plant_truth(&genotypes, config)?;
    let (y, covariates) = gen_phenotype(&genotypes, &truth, config)?;
    Ok(Replicate {
        genotypes,
        truth,
        y,
        covariates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn effect_size_examples() {
        assert!((effect_size(0.1, 0.15) - 0.15).abs() < 1e-15);
        assert!((effect_size(0.01, 0.12) - 0.24).abs() < 1e-15);
    }

    #[test]
    fn window_grid() {
        let pos: Vec<u64> = (1..=20).map(|j| j * 100).collect();
        assert_eq!(window_at(&pos, 3, 500), Region { start: 3, end: 8 });
        assert_eq!(window_at(&pos, 18, 500), Region { start: 18, end: 20 });
    }

    #[test]
    fn windows_that_cannot_fit_are_reported() {
        let cfg = SimConfig {
            n: 20,
            p: 100,
            n_causal_windows: 4,
            window_bp: 2000,
            spacing_bp: 78,
            ..SimConfig::default()
        };
        let g = gen_genotypes(&cfg).unwrap();
        assert!(matches!(plant_truth(&g, &cfg), Err(Error::WindowsDontFit { .. })));
    }

    #[test]
    fn config_validation() {
        let mut c = SimConfig::default();
        c.ld_rho = 1.0;
        assert!(c.validate().is_err());
        let mut c = SimConfig::default();
        c.causal_fraction = 0.0;
        assert!(c.validate().is_err());
        let mut c = SimConfig::default();
        c.maf_range = (0.2, 0.1);
        assert!(c.validate().is_err());
    }
}
