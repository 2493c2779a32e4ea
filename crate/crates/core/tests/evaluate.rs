use birs::evaluate::{
    aggregate_replicates, detection_rate, fdr_at_distance, jaccard, true_positive_rate,
    ReplicateOutcome,
};
use birs::region::{merge_adjacent, union_len, Region};
use birs::Error;
use proptest::prelude::*;

fn r(s: usize, e: usize) -> Region {
    Region::new(s, e).unwrap()
}

fn grid(p: usize, spacing: u64) -> Vec<u64> {
    (0..p as u64).map(|j| j * spacing).collect()
}

#[test]
fn rate_examples() {
    let truth = vec![r(0, 10), r(20, 30), r(40, 50), r(60, 70)];
    assert_eq!(detection_rate(&truth, &truth).unwrap(), 1.0);
    assert_eq!(detection_rate(&truth, &[]).unwrap(), 0.0);
    assert_eq!(detection_rate(&truth, &[r(5, 25), r(45, 46)]).unwrap(), 0.75);
    assert!(matches!(detection_rate(&[], &truth), Err(Error::NoTruth)));

    assert_eq!(true_positive_rate(&truth, &[r(0, 80)]).unwrap(), 1.0);
    let halves: Vec<Region> = truth.iter().map(|t| r(t.start, t.start + 5)).collect();
    assert_eq!(true_positive_rate(&truth, &halves).unwrap(), 0.5);
    assert_eq!(true_positive_rate(&truth, &[r(10, 20)]).unwrap(), 0.0);
}

#[test]
fn fdr_examples() {
    // 1 kb spacing: index j sits at j kb.
    let pos = grid(400, 1000);
    let truth = vec![r(100, 110)];
    for h in [25.0, 50.0, 75.0] {
        assert_eq!(fdr_at_distance(&truth, &[r(102, 105)], h, &pos).unwrap(), 0.0);
        assert_eq!(fdr_at_distance(&truth, &[r(300, 310)], h, &pos).unwrap(), 1.0);
        assert_eq!(fdr_at_distance(&truth, &[], h, &pos).unwrap(), 0.0);
    }
    // Half the detected variants 60 kb past the window's last variant (109).
    let det = vec![r(105, 110), r(169, 174)];
    assert_eq!(fdr_at_distance(&truth, &det, 50.0, &pos).unwrap(), 0.5);
    assert_eq!(fdr_at_distance(&truth, &det, 75.0, &pos).unwrap(), 0.0);
}

#[test]
fn jaccard_examples() {
    assert_eq!(jaccard(&[r(0, 10)], &[r(0, 10)]), 1.0);
    assert_eq!(jaccard(&[r(0, 10)], &[r(10, 20)]), 0.0);
    assert!((jaccard(&[r(0, 10)], &[r(5, 15)]) - 5.0 / 15.0).abs() < 1e-15);
    assert_eq!(jaccard(&[], &[]), 1.0);
}

#[test]
fn aggregate_examples() {
    let pos = grid(100, 100);
    let one = |det: Vec<Region>| ReplicateOutcome {
        truth: vec![r(0, 10), r(50, 60)],
        detected: det,
        positions: pos.clone(),
    };
    let single = aggregate_replicates(&[one(vec![r(0, 10)])], &[25, 50, 75], 100).unwrap();
    assert_eq!(single.sd_dr, Some(0.0));
    assert_eq!(single.sd_tpr, Some(0.0));
    assert!(single.sd_fdr_h.values().all(|&v| v == 0.0));

    let two = aggregate_replicates(
        &[one(vec![r(0, 10), r(50, 60)]), one(vec![r(0, 10)])],
        &[25, 50, 75],
        100,
    )
    .unwrap();
    assert!((two.dr.unwrap() - 0.75).abs() < 1e-15);
    assert!((two.sd_dr.unwrap() - 0.353_553_390_593_273_8).abs() < 1e-12);
    assert_eq!(two.selection_prob[5], 1.0);
    assert_eq!(two.selection_prob[55], 0.5);
    assert_eq!(two.selection_prob[30], 0.0);
    assert!(two.fwer.is_none());

    let null = |det: Vec<Region>| ReplicateOutcome {
        truth: vec![],
        detected: det,
        positions: pos.clone(),
    };
    let nulls = aggregate_replicates(&[null(vec![]), null(vec![])], &[25], 100).unwrap();
    assert_eq!(nulls.fwer, Some(0.0));
    assert!(nulls.dr.is_none());
    let nulls = aggregate_replicates(&[null(vec![r(3, 4)]), null(vec![])], &[25], 100).unwrap();
    assert_eq!(nulls.fwer, Some(0.5));
    assert!(aggregate_replicates(&[], &[25], 100).is_err());
}

fn regions(p: usize) -> impl Strategy<Value = Vec<Region>> {
    prop::collection::vec((0..p, 1..40usize), 0..6).prop_map(move |v| {
        let mut rs: Vec<Region> = v
            .into_iter()
            .map(|(s, len)| r(s, (s + len).min(p)))
            .collect();
        rs.sort();
        // Overlapping draws collapse into their union.
        let mut out: Vec<Region> = Vec::new();
        for x in rs {
            match out.last_mut() {
                Some(last) if x.start <= last.end => last.end = last.end.max(x.end),
                _ => out.push(x),
            }
        }
        out
    })
}

proptest! {
    #[test]
    fn fdr_non_increasing_in_h(
        truth in regions(500).prop_filter("need truth", |t| !t.is_empty()),
        det in regions(500),
        spacing in 1u64..2000,
    ) {
        let pos = grid(500, spacing);
        let out = ReplicateOutcome { truth, detected: det, positions: pos };
        let rep = aggregate_replicates(&[out.clone(), out], &[10, 25, 50, 75, 100], 500).unwrap();
        prop_assert!(rep.fdr_monotone());
        let v: Vec<f64> = rep.fdr_h.values().copied().collect();
        for w in v.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
        for x in [rep.dr.unwrap(), rep.tpr.unwrap()].into_iter().chain(v) {
            prop_assert!((0.0..=1.0).contains(&x));
        }
    }

    #[test]
    fn exact_recovery_characterisation(
        truth in regions(300).prop_filter("need truth", |t| !t.is_empty()),
        det in regions(300),
    ) {
        let pos = grid(300, 1);
        let tpr = true_positive_rate(&truth, &det).unwrap();
        // With 1 bp spacing an h beyond the genome length plays the role of ∞;
        // FDR at distance h > 0 only counts variants strictly outside truth.
        let outside = fdr_at_distance(&truth, &det, 0.0005, &pos).unwrap();
        let same = merge_adjacent(&truth) == merge_adjacent(&det);
        prop_assert_eq!(tpr == 1.0 && outside == 0.0, same);
    }

    #[test]
    fn jaccard_properties(a in regions(200), b in regions(200)) {
        let j = jaccard(&a, &b);
        prop_assert_eq!(j, jaccard(&b, &a));
        prop_assert_eq!(jaccard(&a, &a), 1.0);
        let (la, lb) = (union_len(&a), union_len(&b));
        if la.max(lb) > 0 {
            prop_assert!(j <= la.min(lb) as f64 / la.max(lb) as f64 + 1e-15);
        }
    }
}
