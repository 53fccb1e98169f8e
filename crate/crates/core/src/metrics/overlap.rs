use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use crate::labeling::Label;
use crate::volume::Volume;
use crate::Result;

const BLOCK: usize = 1 << 16;

/// Sparse intersection counts between prediction and ground-truth labels.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OverlapTable {
    /// `(pred, gt)` → shared voxels, nonzero labels only.
    pub pairs: BTreeMap<(u64, u64), u64>,
    pub pred_sizes: BTreeMap<u64, u64>,
    pub gt_sizes: BTreeMap<u64, u64>,
}

impl OverlapTable {
    pub fn iou(&self, pred: u64, gt: u64) -> f64 {
        let inter = self.pairs.get(&(pred, gt)).copied().unwrap_or(0);
        iou(
            inter,
            self.pred_sizes.get(&pred).copied().unwrap_or(0),
            self.gt_sizes.get(&gt).copied().unwrap_or(0),
        )
    }
}

/// `inter / (pred + gt - inter)`; 0 when both sets are empty.
pub fn iou(inter: u64, pred: u64, gt: u64) -> f64 {
    let union = pred + gt - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Default)]
struct Partial {
    pairs: HashMap<(u64, u64), u64>,
    pred: HashMap<u64, u64>,
    gt: HashMap<u64, u64>,
}

pub fn overlap_table<P: Label, G: Label>(pred: &Volume<P>, gt: &Volume<G>) -> Result<OverlapTable> {
    pred.ensure_same_dims(gt)?;
    let partials: Vec<Partial> = pred
        .as_slice()
        .par_chunks(BLOCK)
        .zip(gt.as_slice().par_chunks(BLOCK))
        .map(|(p, g)| {
            let mut acc = Partial::default();
            let mut run = ((0u64, 0u64), 0u64);
            let flush = |acc: &mut Partial, (key, n): ((u64, u64), u64)| {
                if n == 0 {
                    return;
                }
                let (pl, gl) = key;
                if pl != 0 {
                    *acc.pred.entry(pl).or_default() += n;
                }
                if gl != 0 {
                    *acc.gt.entry(gl).or_default() += n;
                }
                if pl != 0 && gl != 0 {
                    *acc.pairs.entry(key).or_default() += n;
                }
            };
            for (&a, &b) in p.iter().zip(g) {
                let key = (a.id(), b.id());
                if key == run.0 {
                    run.1 += 1;
                } else {
                    flush(&mut acc, run);
                    run = (key, 1);
                }
            }
            flush(&mut acc, run);
            acc
        })
        .collect();

    let mut table = OverlapTable::default();
    for part in partials {
        for (k, n) in part.pairs {
            *table.pairs.entry(k).or_default() += n;
        }
        for (k, n) in part.pred {
            *table.pred_sizes.entry(k).or_default() += n;
        }
        for (k, n) in part.gt {
            *table.gt_sizes.entry(k).or_default() += n;
        }
    }
    Ok(table)
}
