//! Per-instance statistics over a label volume.

use std::collections::BTreeMap;
use std::hash::Hash;

use rayon::prelude::*;
use serde::Serialize;

use crate::metrics::{SizeBins, SizeCategory};
use crate::volume::{Volume, Voxel};
use crate::{Error, Result};

const BLOCK: usize = 1 << 16;

/// Integer voxel types usable as instance labels.
pub trait Label: Voxel + Eq + Hash + Ord {
    fn id(self) -> u64;
}

macro_rules! label {
    ($($t:ty),*) => {$(
        impl Label for $t {
            #[inline]
            fn id(self) -> u64 {
                self as u64
            }
        }
    )*};
}
label!(u8, u16, u32, u64);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceRow {
    pub label: u64,
    pub voxels: u64,
    pub category: SizeCategory,
    /// Mean of the score source over the instance, or the voxel count.
    pub score: f64,
}

/// One row per nonzero label present, ascending by label.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct InstanceTable {
    pub rows: Vec<InstanceRow>,
}

impl InstanceTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, label: u64) -> Option<&InstanceRow> {
        self.rows
            .binary_search_by_key(&label, |r| r.label)
            .ok()
            .map(|i| &self.rows[i])
    }

    pub fn count_by_category(&self) -> [usize; 3] {
        let mut n = [0; 3];
        for r in &self.rows {
            n[r.category as usize] += 1;
        }
        n
    }
}

pub fn instance_table<L: Label>(
    labels: &Volume<L>,
    score_source: Option<&Volume<f32>>,
) -> Result<InstanceTable> {
    instance_table_with_bins(labels, score_source, SizeBins::default())
}

pub fn instance_table_with_bins<L: Label>(
    labels: &Volume<L>,
    score_source: Option<&Volume<f32>>,
    bins: SizeBins,
) -> Result<InstanceTable> {
    if let Some(s) = score_source {
        labels.ensure_same_dims(s)?;
    }
    // Fixed-size blocks merged in order keep the f64 sums independent of the
    // worker count.
    let partials: Vec<BTreeMap<u64, (u64, f64)>> = labels
        .as_slice()
        .par_chunks(BLOCK)
        .enumerate()
        .map(|(b, block)| {
            let mut acc: BTreeMap<u64, (u64, f64)> = BTreeMap::new();
            let scores = score_source.map(|s| &s.as_slice()[b * BLOCK..b * BLOCK + block.len()]);
            let mut run: Option<(u64, u64, f64)> = None;
            for (i, &l) in block.iter().enumerate() {
                let id = l.id();
                if id == 0 {
                    continue;
                }
                let sc = scores.map_or(0.0, |s| f64::from(s[i]));
                match &mut run {
                    Some((cur, n, sum)) if *cur == id => {
                        *n += 1;
                        *sum += sc;
                    }
                    _ => {
                        if let Some((cur, n, sum)) = run.take() {
                            let e = acc.entry(cur).or_default();
                            e.0 += n;
                            e.1 += sum;
                        }
                        run = Some((id, 1, sc));
                    }
                }
            }
            if let Some((cur, n, sum)) = run {
                let e = acc.entry(cur).or_default();
                e.0 += n;
                e.1 += sum;
            }
            acc
        })
        .collect();

    let mut totals: BTreeMap<u64, (u64, f64)> = BTreeMap::new();
    for part in partials {
        for (id, (n, sum)) in part {
            let e = totals.entry(id).or_default();
            e.0 += n;
            e.1 += sum;
        }
    }

    let rows: Vec<InstanceRow> = totals
        .into_iter()
        .map(|(label, (voxels, sum))| InstanceRow {
            label,
            voxels,
            category: bins.category(voxels),
            score: if score_source.is_some() {
                sum / voxels as f64
            } else {
                voxels as f64
            },
        })
        .collect();
    if let Some(bad) = rows.iter().find(|r| !r.score.is_finite()) {
        return Err(Error::Domain(format!(
            "instance {} has non-finite score {}",
            bad.label, bad.score
        )));
    }
    Ok(InstanceTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_volume() {
        let t = instance_table(&Volume::<u32>::zeros([4, 4, 4]), None).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn just_under_five_thousand_is_small() {
        let mut v = Volume::<u32>::zeros([1, 100, 100]);
        for x in v.as_mut_slice().iter_mut().take(4999) {
            *x = 1;
        }
        let t = instance_table(&v, None).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].voxels, 4999);
        assert_eq!(t.rows[0].category, SizeCategory::Small);
        assert_eq!(t.rows[0].score, 4999.0);
    }

    #[test]
    fn mean_score() {
        let labels = Volume::new([1, 1, 4], vec![1u32, 1, 2, 0]).unwrap();
        let scores = Volume::new([1, 1, 4], vec![0.5f32, 1.0, 0.25, 0.9]).unwrap();
        let t = instance_table(&labels, Some(&scores)).unwrap();
        assert_eq!(t.get(1).unwrap().score, 0.75);
        assert_eq!(t.get(2).unwrap().score, 0.25);
        assert!(t.get(3).is_none());
    }

    #[test]
    fn score_dims_checked() {
        let labels = Volume::<u32>::zeros([1, 1, 4]);
        let scores = Volume::<f32>::zeros([1, 1, 3]);
        assert!(matches!(
            instance_table(&labels, Some(&scores)),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
