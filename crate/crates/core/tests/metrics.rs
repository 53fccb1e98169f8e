mod common;

use std::collections::BTreeMap;

use mitoseg::metrics::{
    evaluate_instances, match_instances, overlap_table, semantic_metrics, SizeBins, SizeCategory,
};
use mitoseg::{Error, Volume};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn permute(v: &Volume<u32>, rng: &mut impl Rng) -> Volume<u32> {
    let mut ids: Vec<u32> = v.as_slice().iter().copied().filter(|&l| l != 0).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut shuffled: Vec<u32> = (0..ids.len())
        .map(|_| rng.random_range(1..u32::MAX))
        .collect();
    shuffled.sort_unstable();
    shuffled.dedup();
    assert_eq!(shuffled.len(), ids.len(), "collision in random ids");
    shuffled.shuffle(rng);
    let map: BTreeMap<u32, u32> = ids.into_iter().zip(shuffled).collect();
    v.map(|l| if l == 0 { 0 } else { map[&l] })
}

/// Blocky labels so that some pairs clear high IoU thresholds.
fn blocky_labels(dims: [usize; 3], rng: &mut impl Rng) -> Volume<u32> {
    let s = common::random_boxes(dims, 6, 6, rng);
    mitoseg::labeling::label_components(&s, Default::default(), 0).unwrap()
}

/// Ground truth with a few voxels flipped.
fn jitter(v: &Volume<u32>, rng: &mut impl Rng) -> Volume<u32> {
    let mut out = v.clone();
    for x in out.as_mut_slice() {
        if rng.random_bool(0.05) {
            *x = 0;
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn overlap_matches_nested_loops(k in 1u64..8, bg in 0.0f64..0.8, seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let p = common::random_labels([6, 7, 8], k, bg, &mut r);
        let g = common::random_labels([6, 7, 8], k, bg, &mut r);
        let t = overlap_table(&p, &g).unwrap();
        let wide = |v: &Volume<u32>| v.as_slice().iter().map(|&l| u64::from(l)).collect::<Vec<_>>();
        prop_assert_eq!(&t.pairs, &common::overlap_oracle(&wide(&p), &wide(&g)));
        for (&(pl, gl), &n) in &t.pairs {
            prop_assert!(n <= t.pred_sizes[&pl] && n <= t.gt_sizes[&gl]);
        }
    }

    #[test]
    fn matching_is_one_to_one_and_counts_balance(seed in any::<u64>(), t in 0.51f64..=1.0) {
        let mut r = common::rng(seed);
        let g = blocky_labels([8, 16, 16], &mut r);
        let p = jitter(&g, &mut r);
        let bins = SizeBins::new(8, 40).unwrap();
        let rep = evaluate_instances(&p, &g, None, t, bins).unwrap();
        let n_pred = overlap_table(&p, &g).unwrap().pred_sizes.len() as u64;
        let n_gt = overlap_table(&p, &g).unwrap().gt_sizes.len() as u64;
        let all = rep.bins.all;
        prop_assert_eq!(all.tp + all.fp, n_pred);
        prop_assert_eq!(all.tp + all.fn_, n_gt);
        let mut gt_seen = std::collections::BTreeSet::new();
        for m in &rep.pairs {
            prop_assert!(m.iou >= t);
            prop_assert!(gt_seen.insert(m.gt));
        }
        let per_bin_gt: u64 = SizeCategory::ALL.iter().map(|&c| rep.bins.get(c).tp + rep.bins.get(c).fn_).sum();
        prop_assert_eq!(per_bin_gt, n_gt);
    }

    #[test]
    fn relabeling_changes_nothing(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let g = blocky_labels([8, 16, 16], &mut r);
        let p = jitter(&g, &mut r);
        let base = evaluate_instances(&p, &g, None, 0.75, SizeBins::new(8, 40).unwrap()).unwrap();
        let pp = permute(&p, &mut r);
        let gg = permute(&g, &mut r);
        let perm = evaluate_instances(&pp, &gg, None, 0.75, SizeBins::new(8, 40).unwrap()).unwrap();
        prop_assert_eq!(base.bins, perm.bins);
        let ious = |rep: &mitoseg::metrics::MatchReport| {
            let mut v: Vec<u64> = rep.pairs.iter().map(|m| m.iou.to_bits()).collect();
            v.sort_unstable();
            v
        };
        prop_assert_eq!(ious(&base), ious(&perm));
    }

    #[test]
    fn extra_false_positive_never_raises_ap(seed in any::<u64>(), score in 0.0f32..=1.0) {
        let mut r = common::rng(seed);
        let g = blocky_labels([8, 16, 16], &mut r);
        let p = jitter(&g, &mut r);
        let scores = common::random_probability([8, 16, 16], &mut r);
        let base = evaluate_instances(&p, &g, Some(&scores), 0.75, SizeBins::default()).unwrap();
        // A fresh label on voxels that are background in both volumes.
        let mut p2 = p.clone();
        let mut s2 = scores.clone();
        let fresh = u32::MAX;
        let mut added = 0;
        for i in 0..p2.len() {
            if p2.as_slice()[i] == 0 && g.as_slice()[i] == 0 && added < 5 {
                p2.as_mut_slice()[i] = fresh;
                s2.as_mut_slice()[i] = score;
                added += 1;
            }
        }
        prop_assume!(added > 0);
        let more = evaluate_instances(&p2, &g, Some(&s2), 0.75, SizeBins::default()).unwrap();
        prop_assert!(more.bins.all.ap <= base.bins.all.ap);
        prop_assert_eq!(more.bins.all.fp, base.bins.all.fp + 1);
    }

    #[test]
    fn semantic_scores_match_counts(seed in any::<u64>(), da in 0.0f64..1.0, db in 0.0f64..1.0) {
        let mut r = common::rng(seed);
        let a = common::random_binary([5, 6, 7], da, &mut r);
        let b = common::random_binary([5, 6, 7], db, &mut r);
        let s = semantic_metrics(&a, &b).unwrap();
        let t = semantic_metrics(&b, &a).unwrap();
        let (j, dsc) = common::semantic_oracle(a.as_slice(), b.as_slice());
        prop_assert_eq!((s.jaccard, s.dsc), (j, dsc));
        prop_assert_eq!(s, t);
    }
}

#[test]
fn two_gt_two_pred_hand_case() {
    let gt = Volume::new([1, 1, 8], vec![1u32, 1, 1, 1, 2, 2, 2, 2]).unwrap();
    let pred = Volume::new([1, 1, 8], vec![1u32, 1, 1, 1, 2, 0, 0, 0]).unwrap();
    let scores = Volume::new([1, 1, 8], vec![0.9f32, 0.9, 0.9, 0.9, 0.1, 0.0, 0.0, 0.0]).unwrap();
    let r = evaluate_instances(&pred, &gt, Some(&scores), 0.75, SizeBins::default()).unwrap();
    assert_eq!(r.bins.all.ap, 0.5);
    assert_eq!((r.bins.all.tp, r.bins.all.fp, r.bins.all.fn_), (1, 1, 1));
    assert_eq!(r.true_positives, [1]);
    assert_eq!(r.false_positives, [2]);
    assert_eq!(r.false_negatives, [2]);
}

#[test]
fn iou_three_quarters_is_inclusive() {
    let gt = Volume::new([1, 1, 4], vec![1u32, 1, 1, 1]).unwrap();
    let pred = Volume::new([1, 1, 4], vec![1u32, 1, 1, 0]).unwrap();
    let t = overlap_table(&pred, &gt).unwrap();
    assert_eq!(t.iou(1, 1), 0.75);
    assert_eq!(match_instances(&t, 0.75).unwrap().pairs.len(), 1);
    assert!(match_instances(&t, 0.76).unwrap().pairs.is_empty());
}

#[test]
fn half_overlap_is_unmatched() {
    let gt = Volume::new([1, 1, 6], vec![1u32, 1, 1, 1, 0, 0]).unwrap();
    let pred = Volume::new([1, 1, 6], vec![0u32, 0, 1, 1, 1, 1]).unwrap();
    let t = overlap_table(&pred, &gt).unwrap();
    assert_eq!(t.iou(1, 1), 2.0 / 6.0);
    assert!(match_instances(&t, 0.75).unwrap().pairs.is_empty());
}

#[test]
fn threshold_domain() {
    let v = Volume::<u32>::zeros([1, 1, 2]);
    for t in [0.5, 0.4, 0.0, 1.01, f64::NAN] {
        assert!(matches!(
            evaluate_instances(&v, &v, None, t, SizeBins::default()),
            Err(Error::UnsupportedThreshold(_))
        ));
    }
    assert_eq!(
        evaluate_instances(&v, &v, None, 1.0, SizeBins::default())
            .unwrap()
            .bins
            .all
            .ap,
        1.0
    );
}

#[test]
fn semantic_hand_case() {
    let a = Volume::new([1, 1, 6], vec![1u8, 1, 1, 1, 0, 0]).unwrap();
    let b = Volume::new([1, 1, 6], vec![0u8, 0, 1, 1, 1, 1]).unwrap();
    let s = semantic_metrics(&a, &b).unwrap();
    assert_eq!(s.jaccard, 2.0 / 6.0);
    assert_eq!(s.dsc, 0.5);
    assert!(matches!(
        semantic_metrics(&a, &Volume::<u8>::zeros([1, 1, 5])),
        Err(Error::DimensionMismatch { .. })
    ));
}
