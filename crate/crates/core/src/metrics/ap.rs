//! IoU matching and average precision.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::bins::{SizeBins, SizeCategory};
use super::overlap::{iou, overlap_table, OverlapTable};
use crate::labeling::{instance_table_with_bins, InstanceTable, Label};
use crate::volume::Volume;
use crate::{Error, Result};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchedPair {
    pub pred: u64,
    pub gt: u64,
    pub iou: f64,
}

/// Pairs at or above the IoU threshold, plus the instance sizes they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    pub iou_threshold: f64,
    pub pairs: Vec<MatchedPair>,
    pub pred_sizes: BTreeMap<u64, u64>,
    pub gt_sizes: BTreeMap<u64, u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct BinReport {
    pub ap: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct BinReports {
    pub small: BinReport,
    pub med: BinReport,
    pub large: BinReport,
    pub all: BinReport,
}

impl BinReports {
    pub fn get(&self, c: SizeCategory) -> &BinReport {
        match c {
            SizeCategory::Small => &self.small,
            SizeCategory::Med => &self.med,
            SizeCategory::Large => &self.large,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchReport {
    pub iou_threshold: f64,
    pub bins: BinReports,
    pub pairs: Vec<MatchedPair>,
    #[serde(skip)]
    pub true_positives: Vec<u64>,
    #[serde(skip)]
    pub false_positives: Vec<u64>,
    #[serde(skip)]
    pub false_negatives: Vec<u64>,
}

fn check_threshold(t: f64) -> Result<()> {
    // Above one half, two sets sharing an IoU >= t with a third must overlap
    // each other, so every instance has at most one partner.
    if t > 0.5 && t <= 1.0 {
        Ok(())
    } else {
        Err(Error::UnsupportedThreshold(t))
    }
}

pub fn match_instances(t: &OverlapTable, iou_threshold: f64) -> Result<Matching> {
    check_threshold(iou_threshold)?;
    let mut pairs = Vec::new();
    let mut seen_pred = BTreeSet::new();
    let mut seen_gt = BTreeSet::new();
    for (&(p, g), &inter) in &t.pairs {
        let v = iou(inter, t.pred_sizes[&p], t.gt_sizes[&g]);
        if v >= iou_threshold {
            assert!(
                seen_pred.insert(p) && seen_gt.insert(g),
                "IoU above 0.5 matched an instance twice (pred {p}, gt {g})"
            );
            pairs.push(MatchedPair {
                pred: p,
                gt: g,
                iou: v,
            });
        }
    }
    Ok(Matching {
        iou_threshold,
        pairs,
        pred_sizes: t.pred_sizes.clone(),
        gt_sizes: t.gt_sizes.clone(),
    })
}

/// All-points interpolated AP over `(score, is_true_positive)` detections
/// against `n_gt` ground-truth instances.
///
/// Tied scores form a single operating point. With no ground truth the result
/// is 1.0 when there are also no detections and 0.0 otherwise.
pub fn average_precision(detections: &[(f64, bool)], n_gt: u64) -> f64 {
    if n_gt == 0 {
        return if detections.is_empty() { 1.0 } else { 0.0 };
    }
    let mut sorted = detections.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points: Vec<(f64, f64)> = Vec::new(); // (precision, recall)
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < sorted.len() {
        let score = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == score {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((tp as f64 / (tp + fp) as f64, tp as f64 / n_gt as f64));
    }

    let mut envelope = 0.0f64;
    let mut env: Vec<f64> = points
        .iter()
        .rev()
        .map(|&(p, _)| {
            envelope = envelope.max(p);
            envelope
        })
        .collect();
    env.reverse();

    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (&(_, r), &p) in points.iter().zip(&env) {
        ap += (r - prev_recall) * p;
        prev_recall = r;
    }
    ap
}

fn summarize(detections: &[(f64, bool)], n_gt: u64) -> BinReport {
    let tp = detections.iter().filter(|d| d.1).count() as u64;
    let fp = detections.len() as u64 - tp;
    let fn_ = n_gt - tp;
    let precision = if tp + fp == 0 {
        if fn_ == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if n_gt == 0 {
        if fp == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        tp as f64 / n_gt as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    BinReport {
        ap: average_precision(detections, n_gt),
        precision,
        recall,
        f1,
        tp,
        fp,
        fn_,
    }
}

/// Complete a [`Matching`] into per-bin AP, precision, recall and F1.
///
/// Matched predictions are binned by their ground-truth partner's size;
/// unmatched predictions and unmatched ground truth by their own size.
pub fn ap_at_threshold(
    pred_table: &InstanceTable,
    matching: &Matching,
    bins: SizeBins,
) -> Result<MatchReport> {
    let gt_of: BTreeMap<u64, u64> = matching.pairs.iter().map(|m| (m.pred, m.gt)).collect();
    let matched_gt: BTreeSet<u64> = matching.pairs.iter().map(|m| m.gt).collect();

    for m in &matching.pairs {
        if pred_table.get(m.pred).is_none() {
            return Err(Error::InvalidArgument(format!(
                "matched prediction {} is missing from the instance table",
                m.pred
            )));
        }
        if !matching.gt_sizes.contains_key(&m.gt) {
            return Err(Error::InvalidArgument(format!(
                "matched ground truth {} has no size",
                m.gt
            )));
        }
    }

    let mut per_bin: [Vec<(f64, bool)>; 3] = Default::default();
    let mut all = Vec::with_capacity(pred_table.len());
    let mut true_positives = Vec::new();
    let mut false_positives = Vec::new();
    for row in &pred_table.rows {
        let (bin, tp) = match gt_of.get(&row.label) {
            Some(g) => (bins.category(matching.gt_sizes[g]), true),
            None => (bins.category(row.voxels), false),
        };
        if tp {
            true_positives.push(row.label);
        } else {
            false_positives.push(row.label);
        }
        per_bin[bin as usize].push((row.score, tp));
        all.push((row.score, tp));
    }

    let mut gt_count = [0u64; 3];
    let mut false_negatives = Vec::new();
    for (&g, &n) in &matching.gt_sizes {
        gt_count[bins.category(n) as usize] += 1;
        if !matched_gt.contains(&g) {
            false_negatives.push(g);
        }
    }

    let report = BinReports {
        small: summarize(&per_bin[0], gt_count[0]),
        med: summarize(&per_bin[1], gt_count[1]),
        large: summarize(&per_bin[2], gt_count[2]),
        all: summarize(&all, matching.gt_sizes.len() as u64),
    };

    Ok(MatchReport {
        iou_threshold: matching.iou_threshold,
        bins: report,
        pairs: matching.pairs.clone(),
        true_positives,
        false_positives,
        false_negatives,
    })
}

/// Overlap, match and score in one call. Scores default to voxel counts when
/// `scores` is `None`.
pub fn evaluate_instances<P: Label, G: Label>(
    pred: &Volume<P>,
    gt: &Volume<G>,
    scores: Option<&Volume<f32>>,
    iou_threshold: f64,
    bins: SizeBins,
) -> Result<MatchReport> {
    check_threshold(iou_threshold)?;
    let table = overlap_table(pred, gt)?;
    let matching = match_instances(&table, iou_threshold)?;
    let pred_table = instance_table_with_bins(pred, scores, bins)?;
    ap_at_threshold(&pred_table, &matching, bins)
}
