//! Seed-map synthesis from the semantic-mask and instance-boundary volumes.
//!
//! A voxel is a seed when the mask is confidently foreground and the boundary
//! is confidently absent: `mask > t1 && boundary < t2`. Both comparisons are
//! strict, so a voxel sitting exactly on either threshold is not a seed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::volume::Volume;
use crate::{Error, Result};

const PAR_BLOCK: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedParams {
    /// Threshold on the semantic mask.
    pub t1: f32,
    /// Threshold on the instance boundary.
    pub t2: f32,
}

impl Default for SeedParams {
    fn default() -> Self {
        Self { t1: 0.9, t2: 0.8 }
    }
}

impl SeedParams {
    pub fn new(t1: f32, t2: f32) -> Result<Self> {
        let p = Self { t1, t2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("t1", self.t1), ("t2", self.t2)] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidArgument(format!(
                    "{name} = {t} must lie in [0, 1]"
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn is_seed(&self, mask: f32, boundary: f32) -> bool {
        mask > self.t1 && boundary < self.t2
    }
}

/// Binary `u8` volume, 1 where the voxel is a seed.
pub type SeedMap = Volume<u8>;

pub fn make_seed_map(mask: &Volume<f32>, boundary: &Volume<f32>, p: SeedParams) -> Result<SeedMap> {
    p.validate()?;
    mask.ensure_same_dims(boundary)?;
    mask.check_probability()?;
    boundary.check_probability()?;

    let mut out = vec![0u8; mask.len()];
    out.par_chunks_mut(PAR_BLOCK)
        .zip(mask.as_slice().par_chunks(PAR_BLOCK))
        .zip(boundary.as_slice().par_chunks(PAR_BLOCK))
        .for_each(|((o, m), b)| {
            for ((o, &m), &b) in o.iter_mut().zip(m).zip(b) {
                *o = p.is_seed(m, b) as u8;
            }
        });
    Volume::new(mask.dims(), out)
}
