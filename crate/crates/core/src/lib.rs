//! Mitochondria instance extraction and evaluation for serial-section EM volumes.
//!
//! The pipeline turns a semantic-mask probability volume and an instance-boundary
//! probability volume into labeled instances:
//!
//! 1. [`seedmap::make_seed_map`] keeps voxels that are confidently inside an
//!    object and confidently away from its border.
//! 2. [`labeling::label_components_chunked`] runs chunk-parallel connected
//!    component labeling over the seed map.
//! 3. [`metrics`] scores the result with AP at an IoU threshold of 0.75 and
//!    the Jaccard / Dice overlap scores.
//!
//! [`loss`], [`nets`] and [`denoise`] hold the weighted BCE objective, a small
//! forward-only reference of the residual U-Net topologies, and the
//! kernel-application denoiser used as pre-processing.

pub mod cli;
pub mod denoise;
pub mod error;
pub mod labeling;
pub mod loss;
pub mod metrics;
pub mod nets;
pub mod parallel;
pub mod seedmap;
pub mod volume;

pub use error::{Error, Result};
pub use volume::{AnyVolume, ChunkGrid, DType, Volume, Voxel};
