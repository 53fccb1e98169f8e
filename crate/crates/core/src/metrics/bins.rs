use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeCategory {
    Small = 0,
    Med = 1,
    Large = 2,
}

impl SizeCategory {
    pub const ALL: [SizeCategory; 3] =
        [SizeCategory::Small, SizeCategory::Med, SizeCategory::Large];
}

/// Voxel-count bin edges. Intervals are half-open:
/// small `< small_max`, med `[small_max, med_max)`, large `>= med_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeBins {
    pub small_max: u64,
    pub med_max: u64,
}

impl Default for SizeBins {
    fn default() -> Self {
        Self {
            small_max: 5_000,
            med_max: 15_000,
        }
    }
}

impl SizeBins {
    pub fn new(small_max: u64, med_max: u64) -> Result<Self> {
        if small_max == 0 || small_max >= med_max {
            return Err(Error::InvalidArgument(format!(
                "size bins need 0 < small_max < med_max, got ({small_max}, {med_max})"
            )));
        }
        Ok(Self { small_max, med_max })
    }

    pub fn category(&self, voxels: u64) -> SizeCategory {
        if voxels < self.small_max {
            SizeCategory::Small
        } else if voxels < self.med_max {
            SizeCategory::Med
        } else {
            SizeCategory::Large
        }
    }
}
