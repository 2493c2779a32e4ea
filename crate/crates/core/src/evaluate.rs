//! Detection metrics against planted truth: DR, TPR, FDR(h), Jaccard index,
//! FWER and per-variant selection probabilities.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region::{intersection_len, merge_adjacent, union_len, Region};

pub const DEFAULT_H_KB: [u32; 3] = [25, 50, 75];

/// Fraction of true windows touched by the union of detections.
pub fn detection_rate(truth: &[Region], detected: &[Region]) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::NoTruth);
    }
    let hit = truth
        .iter()
        .filter(|t| detected.iter().any(|d| d.overlaps(t)))
        .count();
    Ok(hit as f64 / truth.len() as f64)
}

/// `|I* ∩ Î| / |I*|`, counted in variants.
pub fn true_positive_rate(truth: &[Region], detected: &[Region]) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::NoTruth);
    }
    Ok(intersection_len(truth, detected) as f64 / union_len(truth) as f64)
}

/// Base-pair distance from `pos` to the nearest variant of any true window;
/// infinite when there is no truth.
fn distance_to_truth(pos: u64, truth_bp: &[(u64, u64)]) -> f64 {
    truth_bp
        .iter()
        .map(|&(lo, hi)| {
            if pos < lo {
                (lo - pos) as f64
            } else if pos > hi {
                (pos - hi) as f64
            } else {
                0.0
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// Fraction of detected variants at least `h_kb` kilobases from every true
/// window. Zero when nothing is detected.
pub fn fdr_at_distance(
    truth: &[Region],
    detected: &[Region],
    h_kb: f64,
    positions: &[u64],
) -> Result<f64> {
    let detected = merge_adjacent(detected);
    let total: usize = detected.iter().map(Region::len).sum();
    if total == 0 {
        return Ok(0.0);
    }
    for r in detected.iter().chain(truth) {
        r.check_bounds(positions.len())?;
    }
    let truth_bp: Vec<(u64, u64)> = merge_adjacent(truth)
        .iter()
        .map(|t| (positions[t.start], positions[t.end - 1]))
        .collect();
    let h_bp = h_kb * 1000.0;
    let far = detected
        .iter()
        .flat_map(|r| r.indices())
        .filter(|&j| distance_to_truth(positions[j], &truth_bp) >= h_bp)
        .count();
    Ok(far as f64 / total as f64)
}

/// `|A ∩ B| / |A ∪ B|` over variant-index sets; 1 when both are empty.
pub fn jaccard(a: &[Region], b: &[Region]) -> f64 {
    let inter = intersection_len(a, b);
    let uni = union_len(a) + union_len(b) - inter;
    if uni == 0 {
        1.0
    } else {
        inter as f64 / uni as f64
    }
}

/// One replicate's detections and truth. An empty `truth` marks a null
/// replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub truth: Vec<Region>,
    pub detected: Vec<Region>,
    pub positions: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub replicates: usize,
    pub null_replicates: usize,
    /// Fraction of null replicates with any detection.
    pub fwer: Option<f64>,
    pub dr: Option<f64>,
    pub tpr: Option<f64>,
    /// Keyed by `h` in kb.
    pub fdr_h: BTreeMap<u32, f64>,
    pub sd_dr: Option<f64>,
    pub sd_tpr: Option<f64>,
    pub sd_fdr_h: BTreeMap<u32, f64>,
    pub selection_prob: Vec<f64>,
}

impl MetricsReport {
    /// FDR(h) never increases with h.
    pub fn fdr_monotone(&self) -> bool {
        let v: Vec<f64> = self.fdr_h.values().copied().collect();
        v.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn csv_header(h_kb: &[u32]) -> String {
        let mut cols = vec![
            "method".to_string(),
            "replicates".into(),
            "null_replicates".into(),
            "fwer".into(),
            "dr".into(),
            "sd_dr".into(),
            "tpr".into(),
            "sd_tpr".into(),
        ];
        for h in h_kb {
            cols.push(format!("fdr_{h}"));
            cols.push(format!("sd_fdr_{h}"));
        }
        cols.join(",")
    }

    pub fn csv_row(&self, method: &str) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut cols = vec![
            method.to_string(),
            self.replicates.to_string(),
            self.null_replicates.to_string(),
            opt(self.fwer),
            opt(self.dr),
            opt(self.sd_dr),
            opt(self.tpr),
            opt(self.sd_tpr),
        ];
        for (h, v) in &self.fdr_h {
            cols.push(v.to_string());
            cols.push(opt(self.sd_fdr_h.get(h).copied()));
        }
        cols.join(",")
    }
}

fn mean_sd(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Some((mean, sd))
}

/// Averages per-replicate metrics. DR, TPR and FDR(h) use replicates with
/// truth; FWER uses the null ones. Standard deviations use the `n − 1`
/// divisor. `p` sizes the selection-probability vector.
pub fn aggregate_replicates(
    outcomes: &[ReplicateOutcome],
    h_kb: &[u32],
    p: usize,
) -> Result<MetricsReport> {
    if outcomes.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut drs = Vec::new();
    let mut tprs = Vec::new();
    let mut fdrs: BTreeMap<u32, Vec<f64>> = h_kb.iter().map(|&h| (h, Vec::new())).collect();
    let mut null_reps = 0usize;
    let mut null_hits = 0usize;
    let mut selected = vec![0usize; p];
    for o in outcomes {
        for r in merge_adjacent(&o.detected) {
            r.check_bounds(p)?;
            for j in r.indices() {
                selected[j] += 1;
            }
        }
        if o.truth.is_empty() {
            null_reps += 1;
            if !o.detected.is_empty() {
                null_hits += 1;
            }
            continue;
        }
        drs.push(detection_rate(&o.truth, &o.detected)?);
        tprs.push(true_positive_rate(&o.truth, &o.detected)?);
        for (&h, v) in fdrs.iter_mut() {
            v.push(fdr_at_distance(&o.truth, &o.detected, h as f64, &o.positions)?);
        }
    }
    let reps = outcomes.len() as f64;
    let dr = mean_sd(&drs);
    let tpr = mean_sd(&tprs);
    let mut fdr_h = BTreeMap::new();
    let mut sd_fdr_h = BTreeMap::new();
    for (h, v) in &fdrs {
        if let Some((m, s)) = mean_sd(v) {
            fdr_h.insert(*h, m);
            sd_fdr_h.insert(*h, s);
        }
    }
    Ok(MetricsReport {
        replicates: outcomes.len(),
        null_replicates: null_reps,
        fwer: (null_reps > 0).then(|| null_hits as f64 / null_reps as f64),
        dr: dr.map(|x| x.0),
        tpr: tpr.map(|x| x.0),
        fdr_h,
        sd_dr: dr.map(|x| x.1),
        sd_tpr: tpr.map(|x| x.1),
        sd_fdr_h,
        selection_prob: selected.into_iter().map(|c| c as f64 / reps).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: usize, e: usize) -> Region {
        Region::new(s, e).unwrap()
    }

    fn grid(p: usize, spacing: u64) -> Vec<u64> {
        (0..p as u64).map(|j| j * spacing).collect()
    }

    #[test]
    fn dr_examples() {
        let truth = [r(0, 5), r(10, 15), r(20, 25), r(30, 35)];
        assert_eq!(detection_rate(&truth, &truth).unwrap(), 1.0);
        assert_eq!(detection_rate(&truth, &[]).unwrap(), 0.0);
        assert_eq!(
            detection_rate(&truth, &[r(4, 12), r(24, 26)]).unwrap(),
            0.75
        );
        assert!(matches!(detection_rate(&[], &truth), Err(Error::NoTruth)));
    }

    #[test]
    fn tpr_examples() {
        let truth = [r(0, 10), r(20, 30)];
        assert_eq!(true_positive_rate(&truth, &[r(0, 40)]).unwrap(), 1.0);
        assert_eq!(true_positive_rate(&truth, &[r(0, 5), r(25, 30)]).unwrap(), 0.5);
        assert_eq!(true_positive_rate(&truth, &[r(12, 18)]).unwrap(), 0.0);
        assert!(true_positive_rate(&[], &truth).is_err());
    }

    #[test]
    fn fdr_examples() {
        let pos = grid(400, 1000);
        let truth = [r(0, 10)];
        for h in [25.0, 50.0, 75.0] {
            assert_eq!(fdr_at_distance(&truth, &[r(2, 8)], h, &pos).unwrap(), 0.0);
        }
        // last truth variant at 9 kb; detections from 110 kb on
        assert_eq!(fdr_at_distance(&truth, &[r(110, 120)], 75.0, &pos).unwrap(), 1.0);
        // half the detected variants exactly 60 kb away, half inside the truth
        let det = [r(5, 10), r(69, 74)];
        // distances of 69..74 are 60..64 kb
        assert_eq!(fdr_at_distance(&truth, &det, 50.0, &pos).unwrap(), 0.5);
        assert_eq!(fdr_at_distance(&truth, &det, 75.0, &pos).unwrap(), 0.0);
        assert_eq!(fdr_at_distance(&truth, &[], 25.0, &pos).unwrap(), 0.0);
        // no truth at all: everything is a false discovery
        assert_eq!(fdr_at_distance(&[], &det, 75.0, &pos).unwrap(), 1.0);
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(jaccard(&[r(0, 10)], &[r(0, 10)]), 1.0);
        assert_eq!(jaccard(&[r(0, 10)], &[r(20, 30)]), 0.0);
        assert!((jaccard(&[r(0, 10)], &[r(5, 15)]) - 5.0 / 15.0).abs() < 1e-15);
        assert_eq!(jaccard(&[], &[]), 1.0);
    }

    #[test]
    fn aggregate_examples() {
        let pos = grid(100, 1000);
        let truth = vec![r(0, 10), r(50, 60)];
        let one = ReplicateOutcome {
            truth: truth.clone(),
            detected: vec![r(0, 10), r(50, 60)],
            positions: pos.clone(),
        };
        let half = ReplicateOutcome {
            truth: truth.clone(),
            detected: vec![r(0, 10)],
            positions: pos.clone(),
        };
        let single = aggregate_replicates(std::slice::from_ref(&one), &DEFAULT_H_KB, 100).unwrap();
        assert_eq!(single.sd_dr, Some(0.0));
        assert_eq!(single.sd_tpr, Some(0.0));
        assert!(single.sd_fdr_h.values().all(|&v| v == 0.0));
        assert_eq!(single.fwer, None);

        let two = aggregate_replicates(&[one, half], &DEFAULT_H_KB, 100).unwrap();
        assert_eq!(two.dr, Some(0.75));
        assert!((two.sd_dr.unwrap() - 0.353_553_390_593_273_8).abs() < 1e-12);
        assert_eq!(two.selection_prob[5], 1.0);
        assert_eq!(two.selection_prob[55], 0.5);
        assert_eq!(two.selection_prob[30], 0.0);
        assert!(two.fdr_monotone());

        let null = ReplicateOutcome {
            truth: vec![],
            detected: vec![],
            positions: pos.clone(),
        };
        let rep = aggregate_replicates(&[null.clone(), null], &DEFAULT_H_KB, 100).unwrap();
        assert_eq!(rep.fwer, Some(0.0));
        assert_eq!(rep.dr, None);
        assert!(aggregate_replicates(&[], &DEFAULT_H_KB, 100).is_err());
    }

    #[test]
    fn csv_layout() {
        let head = MetricsReport::csv_header(&DEFAULT_H_KB);
        assert!(head.starts_with("method,replicates"));
        assert!(head.ends_with("fdr_75,sd_fdr_75"));
    }
}
