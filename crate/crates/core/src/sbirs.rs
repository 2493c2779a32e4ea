//! Binary search with dynamic thresholds, re-search by zeroing, and
//! rearrangement into separated regions.

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region::{merge_adjacent, Region};
use crate::score::{abs_max, percentile_threshold, ScoreSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbirsConfig {
    pub alpha: f64,
    /// Segments of length `<= 2^truncation_s` are emitted without splitting.
    pub truncation_s: u32,
    /// Cap on binary-search passes; `None` means the domain length.
    pub max_research_rounds: Option<usize>,
}

impl SbirsConfig {
    pub fn new(alpha: f64, truncation_s: u32) -> Result<Self> {
        let cfg = SbirsConfig {
            alpha,
            truncation_s,
            max_research_rounds: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.truncation_s >= usize::BITS {
            return Err(Error::InvalidInput("truncation_s too large".into()));
        }
        Ok(())
    }

    pub fn min_segment(&self) -> usize {
        1usize << self.truncation_s
    }
}

/// A segment accepted by the binary search, with its max-abs score and the
/// level threshold it beat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub region: Region,
    pub stat: f64,
    pub threshold: f64,
}

/// Thresholds seen during one binary-search pass.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RoundTrace {
    /// `T` and `ĉ(α)` on the (zeroed) working scores at the start of the pass.
    pub global_stat: f64,
    pub global_threshold: f64,
    /// `ĉ_1(α), ĉ_2(α), …` for the levels of this pass.
    pub level_thresholds: Vec<f64>,
    pub detections: Vec<Detection>,
}

impl RoundTrace {
    /// `ĉ(α) >= ĉ_1(α) >= ĉ_2(α) >= …` and every detection beat its level.
    pub fn is_monotone(&self) -> bool {
        let mut prev = self.global_threshold;
        for &c in &self.level_thresholds {
            if c > prev {
                return false;
            }
            prev = c;
        }
        self.detections.iter().all(|d| d.stat > d.threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionResult {
    /// Sorted, disjoint and separated by at least one index.
    pub regions: Vec<Region>,
    pub region_stats: Vec<f64>,
    /// Threshold in force when the region (or its strongest piece) was accepted.
    pub region_thresholds: Vec<f64>,
    pub global_stat: f64,
    pub global_threshold: f64,
    pub rounds: usize,
    /// Set when the re-search loop stopped without progress or hit its cap.
    pub stalled: bool,
    pub trace: Vec<RoundTrace>,
}

impl DetectionResult {
    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// Every pass had non-increasing thresholds, and each re-search pass
    /// started no higher than the previous one.
    pub fn thresholds_monotone(&self) -> bool {
        self.trace.iter().all(RoundTrace::is_monotone)
            && self
                .trace
                .windows(2)
                .all(|w| w[1].global_threshold <= w[0].global_threshold)
    }

    pub fn detections(&self) -> impl Iterator<Item = Detection> + '_ {
        self.regions
            .iter()
            .zip(&self.region_stats)
            .zip(&self.region_thresholds)
            .map(|((&region, &stat), &threshold)| Detection {
                region,
                stat,
                threshold,
            })
    }
}

static AUDIT_RUNS: AtomicU64 = AtomicU64::new(0);
static AUDIT_VIOLATIONS: AtomicU64 = AtomicU64::new(0);

/// Process-wide count of sBiRS runs and of runs whose thresholds were not
/// monotone. Every run is checked, in release builds too.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonotonicityAudit {
    pub runs: u64,
    pub violations: u64,
}

pub fn monotonicity_audit() -> MonotonicityAudit {
    MonotonicityAudit {
        runs: AUDIT_RUNS.load(Ordering::Relaxed),
        violations: AUDIT_VIOLATIONS.load(Ordering::Relaxed),
    }
}

/// How each level's critical value is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum ThresholdRule {
    /// Percentile of the bootstrap maxima over the live union at each level.
    Dynamic(f64),
    /// One value for every level (baseline only).
    Fixed(f64),
}

/// Global test on `domain`: `T = ‖U(domain)‖∞`, `ĉ = f_α(‖U^{e_b}(domain)‖∞)`,
/// reject iff `T > ĉ`.
pub fn global_test(scores: &ScoreSet, domain: Region, alpha: f64) -> Result<(f64, f64, bool)> {
    domain.check_bounds(scores.p())?;
    let (t, c) = test_union(scores.u.view(), scores.boot.view(), &[domain], alpha)?;
    Ok((t, c, t > c))
}

fn test_union(
    u: ArrayView1<f64>,
    boot: ArrayView2<f64>,
    segments: &[Region],
    alpha: f64,
) -> Result<(f64, f64)> {
    let t = segments
        .iter()
        .map(|r| abs_max(u.slice(s![r.start..r.end])))
        .fold(0.0, f64::max);
    let c = percentile_threshold(&union_maxima(boot, segments), alpha)?;
    Ok((t, c))
}

/// Per bootstrap row, the max-abs over the union of `segments`.
pub(crate) fn union_maxima(boot: ArrayView2<f64>, segments: &[Region]) -> Vec<f64> {
    boot.axis_iter(Axis(0))
        .map(|row| {
            segments
                .iter()
                .map(|r| abs_max(row.slice(s![r.start..r.end])))
                .fold(0.0, f64::max)
        })
        .collect()
}

/// One binary-search pass over `candidates` with dynamic level thresholds.
/// Returns the emitted segments and the level thresholds.
pub fn binary_search(
    scores: &ScoreSet,
    candidates: &[Region],
    config: &SbirsConfig,
) -> Result<(Vec<Detection>, Vec<f64>)> {
    config.validate()?;
    for c in candidates {
        c.check_bounds(scores.p())?;
    }
    let mut sorted = candidates.to_vec();
    sorted.sort();
    if sorted.windows(2).any(|w| w[0].overlaps(&w[1])) {
        return Err(Error::InvalidInput("candidate regions overlap".into()));
    }
    search(
        scores.u.view(),
        scores.boot.view(),
        sorted,
        config.min_segment(),
        ThresholdRule::Dynamic(config.alpha),
    )
}

pub(crate) fn search(
    u: ArrayView1<f64>,
    boot: ArrayView2<f64>,
    mut alive: Vec<Region>,
    min_segment: usize,
    rule: ThresholdRule,
) -> Result<(Vec<Detection>, Vec<f64>)> {
    let mut emitted = Vec::new();
    let mut levels = Vec::new();
    while !alive.is_empty() {
        let threshold = match rule {
            ThresholdRule::Dynamic(alpha) => {
                percentile_threshold(&union_maxima(boot, &alive), alpha)?
            }
            ThresholdRule::Fixed(c) => c,
        };
        debug_assert!(
            levels.last().is_none_or(|&prev| threshold <= prev),
            "level threshold increased"
        );
        levels.push(threshold);
        let mut next = Vec::with_capacity(alive.len() * 2);
        for seg in alive {
            let stat = abs_max(u.slice(s![seg.start..seg.end]));
            if stat <= threshold {
                continue;
            }
            if seg.len() <= min_segment {
                emitted.push(Detection {
                    region: seg,
                    stat,
                    threshold,
                });
            } else {
                let (left, right) = seg.halves();
                next.push(left);
                next.push(right);
            }
        }
        alive = next;
    }
    Ok((emitted, levels))
}

/// Full detection on `domain`: global test, repeated binary search with
/// zeroing of detected entries, then merging of touching regions. The
/// caller's scores are not modified.
pub fn run_sbirs(scores: &ScoreSet, domain: Region, config: &SbirsConfig) -> Result<DetectionResult> {
    domain.check_bounds(scores.p())?;
    let u = scores.u.slice(s![domain.start..domain.end]).to_owned();
    let boot = scores.boot.slice(s![.., domain.start..domain.end]).to_owned();
    let mut result = run_on_owned(u, boot, config)?;
    for r in result.regions.iter_mut() {
        *r = r.shift(domain.start);
    }
    for round in result.trace.iter_mut() {
        for d in round.detections.iter_mut() {
            d.region = d.region.shift(domain.start);
        }
    }
    Ok(result)
}

/// `run_sbirs` over the whole of `u`/`boot`, consuming them as the working
/// copy.
pub(crate) fn run_on_owned(
    mut u: Array1<f64>,
    mut boot: Array2<f64>,
    config: &SbirsConfig,
) -> Result<DetectionResult> {
    config.validate()?;
    let p = u.len();
    let domain = Region::full(p)?;
    let original = u.clone();
    let cap = config.max_research_rounds.unwrap_or(p).max(1);

    let (mut t, mut c) = test_union(u.view(), boot.view(), &[domain], config.alpha)?;
    let mut result = DetectionResult {
        global_stat: t,
        global_threshold: c,
        ..Default::default()
    };
    let mut detected = vec![false; p];
    let mut all: Vec<Detection> = Vec::new();

    while t > c {
        if result.rounds == cap {
            result.stalled = true;
            break;
        }
        result.rounds += 1;
        let (found, levels) = search(
            u.view(),
            boot.view(),
            vec![domain],
            config.min_segment(),
            ThresholdRule::Dynamic(config.alpha),
        )?;
        let mut progressed = false;
        for d in &found {
            for j in d.region.indices() {
                progressed |= !detected[j];
                detected[j] = true;
            }
            u.slice_mut(s![d.region.start..d.region.end]).fill(0.0);
            boot.slice_mut(s![.., d.region.start..d.region.end]).fill(0.0);
        }
        result.trace.push(RoundTrace {
            global_stat: t,
            global_threshold: c,
            level_thresholds: levels,
            detections: found.clone(),
        });
        all.extend(found);
        if !progressed {
            result.stalled = true;
            break;
        }
        let prev = c;
        (t, c) = test_union(u.view(), boot.view(), &[domain], config.alpha)?;
        debug_assert!(c <= prev, "re-search threshold increased");
    }
    let monotone = result.thresholds_monotone();
    AUDIT_RUNS.fetch_add(1, Ordering::Relaxed);
    if !monotone {
        AUDIT_VIOLATIONS.fetch_add(1, Ordering::Relaxed);
    }
    debug_assert!(monotone, "dynamic thresholds increased");

    rearrange(&original, &all, &mut result);
    Ok(result)
}

/// Merges touching detections and fills the per-region fields from the
/// original scores.
pub(crate) fn rearrange(original: &Array1<f64>, parts: &[Detection], out: &mut DetectionResult) {
    let regions: Vec<Region> = parts.iter().map(|d| d.region).collect();
    out.regions = merge_adjacent(&regions);
    out.region_stats.clear();
    out.region_thresholds.clear();
    for merged in &out.regions {
        let stat = abs_max(original.slice(s![merged.start..merged.end]));
        let strongest = parts
            .iter()
            .filter(|d| merged.contains_region(&d.region))
            .max_by(|a, b| a.stat.total_cmp(&b.stat))
            .expect("merged region has at least one part");
        out.region_stats.push(stat);
        out.region_thresholds.push(strongest.threshold);
    }
}
