//! Block-distributed detection: per-block sBiRS on workers, then a central
//! sBiRS over block maxima and a filter at `ĉ_min(α)`.
//!
//! Workers only ever ship a [`BlockResult`] to the central stage. Every
//! block's pseudo-scores come from the same multiplier vectors `e_b`, so the
//! per-block maxima are jointly distributed like the genome-wide ones.

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::null_model::NullModel;
use crate::region::{merge_adjacent, Region};
use crate::sbirs::{
    run_on_owned, search, union_maxima, Detection, DetectionResult, SbirsConfig, ThresholdRule,
};
use crate::score::{
    abs_max, percentile_threshold, scores_for_columns, GenotypeMatrix, Multipliers, ScoreSet,
    DEFAULT_BOOTSTRAP,
};

/// What a worker sends to the central stage for block `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockResult {
    pub block_id: u32,
    pub block_region: Region,
    /// Block-local detections in genome coordinates, each with its max-abs
    /// score.
    pub detected: Vec<Detection>,
    /// `T(B_k) = ‖U(B_k)‖∞`.
    pub block_stat: f64,
    /// `M_b(B_k) = ‖U^{e_b}(B_k)‖∞`.
    pub m_vec: Vec<f64>,
    /// `L_b(B_k) = ‖U^{e_b}(Î^{(k)})‖∞`; zeros when nothing was detected.
    pub l_vec: Vec<f64>,
    pub n_boot: u32,
    pub seed: u64,
}

impl BlockResult {
    pub fn check_invariants(&self) -> bool {
        self.m_vec.len() == self.n_boot as usize
            && self.l_vec.len() == self.n_boot as usize
            && self.m_vec.iter().zip(&self.l_vec).all(|(m, l)| m >= l)
            && self
                .detected
                .iter()
                .all(|d| self.block_region.contains_region(&d.region))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbirsConfig {
    pub alpha: f64,
    pub truncation_s: u32,
    pub block_size: usize,
    pub n_boot: usize,
    pub seed: u64,
    /// Worker threads for the block stage; 0 uses rayon's default.
    pub workers: usize,
}

impl Default for DbirsConfig {
    fn default() -> Self {
        DbirsConfig {
            alpha: 0.05,
            truncation_s: 4,
            block_size: 2048,
            n_boot: DEFAULT_BOOTSTRAP,
            seed: 1,
            workers: 0,
        }
    }
}

impl DbirsConfig {
    pub fn validate(&self) -> Result<()> {
        self.sbirs().validate()?;
        if self.block_size == 0 {
            return Err(Error::InvalidInput("block size must be positive".into()));
        }
        if self.block_size < self.sbirs().min_segment() {
            return Err(Error::InvalidInput(format!(
                "block size {} is smaller than 2^s = {}",
                self.block_size,
                self.sbirs().min_segment()
            )));
        }
        Ok(())
    }

    pub fn sbirs(&self) -> SbirsConfig {
        SbirsConfig {
            alpha: self.alpha,
            truncation_s: self.truncation_s,
            max_research_rounds: None,
        }
    }
}

/// Contiguous blocks of `block_size` variants. A tail of at most half a
/// block is folded into the last full block.
pub fn split_blocks(p: usize, block_size: usize) -> Vec<Region> {
    let block_size = block_size.max(1);
    if p == 0 {
        return Vec::new();
    }
    let full = p / block_size;
    let tail = p % block_size;
    let mut blocks: Vec<Region> = (0..full)
        .map(|k| Region {
            start: k * block_size,
            end: (k + 1) * block_size,
        })
        .collect();
    if tail > 0 {
        match blocks.last_mut() {
            Some(last) if 2 * tail <= block_size => last.end = p,
            _ => blocks.push(Region {
                start: full * block_size,
                end: p,
            }),
        }
    }
    blocks
}

/// Runs sBiRS on one block's scores (indexed from 0 within the block) and
/// packages the result.
pub fn run_block(
    block_id: u32,
    block_region: Region,
    scores: ScoreSet,
    config: &DbirsConfig,
) -> Result<BlockResult> {
    if scores.p() != block_region.len() {
        return Err(Error::DimensionMismatch(format!(
            "block {block_id} spans {} variants but has {} scores",
            block_region.len(),
            scores.p()
        )));
    }
    let whole = Region::full(scores.p())?;
    let m_vec = union_maxima(scores.boot.view(), &[whole]);
    let block_stat = abs_max(scores.u.view());
    let n_boot = scores.n_boot();
    let seed = scores.seed;
    // l_vec must see the untouched bootstrap rows
    let boot_copy = scores.boot.clone();
    let local = run_on_owned(scores.u, scores.boot, &config.sbirs())?;
    let l_vec = if local.regions.is_empty() {
        vec![0.0; n_boot]
    } else {
        union_maxima(boot_copy.view(), &local.regions)
    };
    let detected = local
        .detections()
        .map(|d| Detection {
            region: d.region.shift(block_region.start),
            ..d
        })
        .collect();
    Ok(BlockResult {
        block_id,
        block_region,
        detected,
        block_stat,
        m_vec,
        l_vec,
        n_boot: n_boot as u32,
        seed,
    })
}

/// Output of the central stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralResult {
    pub detection: DetectionResult,
    /// Block ids selected by the central sBiRS.
    pub significant_blocks: Vec<u32>,
    /// `ĉ_min(α)`; `None` when no block is significant.
    pub c_min: Option<f64>,
    /// `f_α(max_{j significant} M_b(B_j))`, the bound `ĉ_min` never exceeds.
    pub significant_threshold: Option<f64>,
}

/// Central stage: sBiRS with `s = 0` over block maxima, then keep local
/// regions in significant blocks whose stat exceeds `ĉ_min(α)`.
pub fn central_aggregate(blocks: &[BlockResult], config: &DbirsConfig) -> Result<CentralResult> {
    if blocks.is_empty() {
        return Err(Error::InconsistentBlocks("no block results".into()));
    }
    let mut blocks: Vec<&BlockResult> = blocks.iter().collect();
    blocks.sort_by_key(|b| b.block_id);
    let n_boot = blocks[0].n_boot;
    let seed = blocks[0].seed;
    let mut expected_start = 0;
    for (k, b) in blocks.iter().enumerate() {
        if b.block_id as usize != k {
            return Err(Error::InconsistentBlocks(format!(
                "expected block id {k}, found {}",
                b.block_id
            )));
        }
        if b.n_boot != n_boot || b.seed != seed {
            return Err(Error::InconsistentBlocks(format!(
                "block {} has (N = {}, seed = {}) but block 0 has (N = {n_boot}, seed = {seed})",
                b.block_id, b.n_boot, b.seed
            )));
        }
        if !b.check_invariants() {
            return Err(Error::InconsistentBlocks(format!(
                "block {} payload violates its invariants",
                b.block_id
            )));
        }
        if b.block_region.start != expected_start {
            return Err(Error::InconsistentBlocks(format!(
                "block {} starts at {} instead of {expected_start}",
                b.block_id, b.block_region.start
            )));
        }
        expected_start = b.block_region.end;
    }

    let k = blocks.len();
    let n = n_boot as usize;
    let u_tilde = Array1::from_iter(blocks.iter().map(|b| b.block_stat));
    let boot_tilde = Array2::from_shape_fn((n, k), |(row, col)| blocks[col].m_vec[row]);
    let central_cfg = SbirsConfig {
        alpha: config.alpha,
        truncation_s: 0,
        max_research_rounds: None,
    };
    let mut central = run_on_owned(u_tilde, boot_tilde, &central_cfg)?;

    let significant: Vec<usize> = central.regions.iter().flat_map(|r| r.indices()).collect();
    if significant.is_empty() {
        central.regions.clear();
        central.region_stats.clear();
        central.region_thresholds.clear();
        return Ok(CentralResult {
            detection: central,
            significant_blocks: Vec::new(),
            c_min: None,
            significant_threshold: None,
        });
    }

    let l_tilde: Vec<f64> = (0..n)
        .map(|row| {
            significant
                .iter()
                .map(|&j| blocks[j].l_vec[row])
                .fold(0.0, f64::max)
        })
        .collect();
    let c_min = percentile_threshold(&l_tilde, config.alpha)?;
    let m_sig: Vec<f64> = (0..n)
        .map(|row| {
            significant
                .iter()
                .map(|&j| blocks[j].m_vec[row])
                .fold(0.0, f64::max)
        })
        .collect();
    let significant_threshold = percentile_threshold(&m_sig, config.alpha)?;
    debug_assert!(c_min <= significant_threshold);

    let kept: Vec<Detection> = significant
        .iter()
        .flat_map(|&j| blocks[j].detected.iter())
        .filter(|d| d.stat > c_min)
        .map(|d| Detection {
            threshold: c_min,
            ..*d
        })
        .collect();
    let merged = merge_adjacent(&kept.iter().map(|d| d.region).collect::<Vec<_>>());
    let region_stats = merged
        .iter()
        .map(|m| {
            kept.iter()
                .filter(|d| m.contains_region(&d.region))
                .map(|d| d.stat)
                .fold(0.0, f64::max)
        })
        .collect();

    let detection = DetectionResult {
        region_thresholds: vec![c_min; merged.len()],
        regions: merged,
        region_stats,
        ..central
    };
    Ok(CentralResult {
        detection,
        significant_blocks: significant.iter().map(|&j| j as u32).collect(),
        c_min: Some(c_min),
        significant_threshold: Some(significant_threshold),
    })
}

/// Where block workers get their scores from.
pub enum ScoreSource<'a> {
    /// Individual-level data; each worker computes its own block of
    /// pseudo-scores from the shared multipliers.
    Genotypes {
        g: &'a GenotypeMatrix,
        model: &'a NullModel,
        multipliers: &'a Multipliers,
    },
    /// Precomputed summary statistics.
    Scores(&'a ScoreSet),
}

impl ScoreSource<'_> {
    pub fn p(&self) -> usize {
        match self {
            ScoreSource::Genotypes { g, .. } => g.p(),
            ScoreSource::Scores(s) => s.p(),
        }
    }

    pub fn n_boot(&self) -> usize {
        match self {
            ScoreSource::Genotypes { multipliers, .. } => multipliers.n_boot(),
            ScoreSource::Scores(s) => s.n_boot(),
        }
    }

    pub fn block(&self, region: Region) -> Result<ScoreSet> {
        match self {
            ScoreSource::Genotypes {
                g,
                model,
                multipliers,
            } => {
                region.check_bounds(g.p())?;
                let cols = g.columns(region);
                let u = scores_for_columns(cols, model)?;
                let boot = multipliers.pseudo_scores(cols)?;
                ScoreSet::new(u, boot, multipliers.seed())
            }
            ScoreSource::Scores(s) => s.slice(region),
        }
    }
}

/// Full result of a distributed run, including the per-block payloads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbirsOutcome {
    pub central: CentralResult,
    pub blocks: Vec<BlockResult>,
}

impl DbirsOutcome {
    pub fn detection(&self) -> &DetectionResult {
        &self.central.detection
    }

    /// All block-local detections, in genome coordinates.
    pub fn local_regions(&self) -> Vec<Region> {
        self.blocks
            .iter()
            .flat_map(|b| b.detected.iter().map(|d| d.region))
            .collect()
    }
}

fn with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(job))
}

/// Block stage over any score source, then the central stage.
pub fn run_dbirs_on(source: &ScoreSource<'_>, config: &DbirsConfig) -> Result<DbirsOutcome> {
    config.validate()?;
    let regions = split_blocks(source.p(), config.block_size);
    let blocks = with_workers(config.workers, || {
        regions
            .par_iter()
            .enumerate()
            .map(|(k, &region)| run_block(k as u32, region, source.block(region)?, config))
            .collect::<Result<Vec<_>>>()
    })??;
    let central = central_aggregate(&blocks, config)?;
    Ok(DbirsOutcome { central, blocks })
}

/// Distributed detection from individual-level data.
pub fn run_dbirs(
    g: &GenotypeMatrix,
    model: &NullModel,
    config: &DbirsConfig,
) -> Result<DbirsOutcome> {
    config.validate()?;
    if g.n() != model.n() {
        return Err(Error::DimensionMismatch(format!(
            "genotypes have {} samples, null model has {}",
            g.n(),
            model.n()
        )));
    }
    let multipliers = Multipliers::generate(model, config.n_boot, config.seed)?;
    run_dbirs_on(
        &ScoreSource::Genotypes {
            g,
            model,
            multipliers: &multipliers,
        },
        config,
    )
}

/// Baseline: each block searched at level `α/K`; detections pooled.
pub fn bonferroni_baseline(source: &ScoreSource<'_>, config: &DbirsConfig) -> Result<DetectionResult> {
    config.validate()?;
    let regions = split_blocks(source.p(), config.block_size);
    let mut per_block = config.sbirs();
    per_block.alpha = config.alpha / regions.len() as f64;
    let results = with_workers(config.workers, || {
        regions
            .par_iter()
            .map(|&region| {
                let s = source.block(region)?;
                let r = run_on_owned(s.u, s.boot, &per_block)?;
                Ok(r.detections()
                    .map(|d| Detection {
                        region: d.region.shift(region.start),
                        ..d
                    })
                    .collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(pool_detections(results.into_iter().flatten().collect()))
}

/// Baseline: one genome-wide `ĉ(α)` used as the threshold at every level
/// in every block.
pub fn fixed_threshold_baseline(
    source: &ScoreSource<'_>,
    config: &DbirsConfig,
) -> Result<DetectionResult> {
    config.validate()?;
    let regions = split_blocks(source.p(), config.block_size);
    let block_scores = with_workers(config.workers, || {
        regions
            .par_iter()
            .map(|&r| source.block(r))
            .collect::<Result<Vec<_>>>()
    })??;
    let n = source.n_boot();
    let genome_max: Vec<f64> = (0..n)
        .map(|row| {
            block_scores
                .iter()
                .map(|s| abs_max(s.boot.row(row)))
                .fold(0.0, f64::max)
        })
        .collect();
    let c = percentile_threshold(&genome_max, config.alpha)?;
    let min_segment = config.sbirs().min_segment();
    let mut found = Vec::new();
    for (s, region) in block_scores.iter().zip(&regions) {
        if abs_max(s.u.view()) <= c {
            continue;
        }
        let (d, _) = search(
            s.u.view(),
            s.boot.view(),
            vec![Region::full(s.p())?],
            min_segment,
            ThresholdRule::Fixed(c),
        )?;
        found.extend(d.into_iter().map(|d| Detection {
            region: d.region.shift(region.start),
            ..d
        }));
    }
    let mut out = pool_detections(found);
    out.global_threshold = c;
    Ok(out)
}

fn pool_detections(parts: Vec<Detection>) -> DetectionResult {
    let merged = merge_adjacent(&parts.iter().map(|d| d.region).collect::<Vec<_>>());
    let mut out = DetectionResult::default();
    for m in merged {
        let strongest = parts
            .iter()
            .filter(|d| m.contains_region(&d.region))
            .max_by(|a, b| a.stat.total_cmp(&b.stat))
            .expect("merged region has a part");
        out.regions.push(m);
        out.region_stats.push(strongest.stat);
        out.region_thresholds.push(strongest.threshold);
    }
    out.global_stat = out.region_stats.iter().copied().fold(0.0, f64::max);
    out
}
