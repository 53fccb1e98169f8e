//! Regular chunk grids with clamped halos.

use super::{Volume, Voxel};
use crate::{Error, Result};

/// A regular tiling of a volume into chunks of `chunk_dims`, each optionally
/// extended by `halo` voxels per axis on both sides.
///
/// Chunk dims larger than the volume are clamped to the volume, so a grid with
/// oversized chunks is a single chunk. Halos are clamped at volume borders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkGrid {
    chunk_dims: [usize; 3],
    halo: [usize; 3],
}

/// One chunk: its core region (owned voxels) and its halo-extended region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkRegion {
    /// Position in the grid, `(cz, cy, cx)`.
    pub grid_index: [usize; 3],
    pub origin: [usize; 3],
    pub dims: [usize; 3],
    pub halo_origin: [usize; 3],
    pub halo_dims: [usize; 3],
}

impl ChunkRegion {
    pub fn core_len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn halo_len(&self) -> usize {
        self.halo_dims.iter().product()
    }

    /// Offset of the core origin inside the halo-extended region.
    pub fn core_offset(&self) -> [usize; 3] {
        [
            self.origin[0] - self.halo_origin[0],
            self.origin[1] - self.halo_origin[1],
            self.origin[2] - self.halo_origin[2],
        ]
    }

    pub fn contains(&self, p: [usize; 3]) -> bool {
        (0..3).all(|a| p[a] >= self.origin[a] && p[a] < self.origin[a] + self.dims[a])
    }
}

impl ChunkGrid {
    pub fn new(chunk_dims: [usize; 3], halo: [usize; 3]) -> Result<Self> {
        if chunk_dims.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "chunk dims {chunk_dims:?} contain a zero axis"
            )));
        }
        Ok(Self { chunk_dims, halo })
    }

    /// One chunk covering `dims`, no halo.
    pub fn whole(dims: [usize; 3]) -> Self {
        Self {
            chunk_dims: dims.map(|d| d.max(1)),
            halo: [0; 3],
        }
    }

    pub fn chunk_dims(&self) -> [usize; 3] {
        self.chunk_dims
    }

    pub fn halo(&self) -> [usize; 3] {
        self.halo
    }

    /// Chunk dims actually used for a volume of `dims`.
    pub fn effective_chunk_dims(&self, dims: [usize; 3]) -> [usize; 3] {
        [0, 1, 2].map(|a| self.chunk_dims[a].min(dims[a]).max(1))
    }

    /// Number of chunks along each axis.
    pub fn grid_shape(&self, dims: [usize; 3]) -> [usize; 3] {
        let c = self.effective_chunk_dims(dims);
        [0, 1, 2].map(|a| dims[a].div_ceil(c[a]))
    }

    pub fn chunk_count(&self, dims: [usize; 3]) -> usize {
        self.grid_shape(dims).iter().product()
    }

    /// Linear chunk number of grid position `g`, z-major.
    pub fn linear_index(&self, dims: [usize; 3], g: [usize; 3]) -> usize {
        let s = self.grid_shape(dims);
        (g[0] * s[1] + g[1]) * s[2] + g[2]
    }

    /// Grid position of the chunk that owns voxel `p`.
    pub fn owner(&self, dims: [usize; 3], p: [usize; 3]) -> [usize; 3] {
        let c = self.effective_chunk_dims(dims);
        [0, 1, 2].map(|a| p[a] / c[a])
    }

    pub fn region(&self, dims: [usize; 3], g: [usize; 3]) -> ChunkRegion {
        let c = self.effective_chunk_dims(dims);
        let mut region = ChunkRegion {
            grid_index: g,
            origin: [0; 3],
            dims: [0; 3],
            halo_origin: [0; 3],
            halo_dims: [0; 3],
        };
        for a in 0..3 {
            let start = g[a] * c[a];
            let end = (start + c[a]).min(dims[a]);
            let h_start = start.saturating_sub(self.halo[a]);
            let h_end = (end + self.halo[a]).min(dims[a]);
            region.origin[a] = start;
            region.dims[a] = end - start;
            region.halo_origin[a] = h_start;
            region.halo_dims[a] = h_end - h_start;
        }
        region
    }

    /// All chunks in z-major grid order.
    pub fn regions(&self, dims: [usize; 3]) -> Vec<ChunkRegion> {
        let s = self.grid_shape(dims);
        let mut out = Vec::with_capacity(s.iter().product());
        for gz in 0..s[0] {
            for gy in 0..s[1] {
                for gx in 0..s[2] {
                    out.push(self.region(dims, [gz, gy, gx]));
                }
            }
        }
        out
    }
}

/// Read-only window onto a volume covering one chunk plus its halo.
/// Coordinates passed to [`VolumeView::get`] are relative to the halo origin.
#[derive(Debug, Clone, Copy)]
pub struct VolumeView<'a, T> {
    volume: &'a Volume<T>,
    region: ChunkRegion,
}

impl<'a, T: Voxel> VolumeView<'a, T> {
    pub fn new(volume: &'a Volume<T>, region: ChunkRegion) -> Self {
        Self { volume, region }
    }

    pub fn region(&self) -> &ChunkRegion {
        &self.region
    }

    /// Extent of the view, i.e. the halo-extended region.
    pub fn extent(&self) -> [usize; 3] {
        self.region.halo_dims
    }

    /// Dims of the underlying volume.
    pub fn volume_dims(&self) -> [usize; 3] {
        self.volume.dims()
    }

    #[inline]
    pub fn get(&self, z: usize, y: usize, x: usize) -> T {
        let o = self.region.halo_origin;
        self.volume.get(o[0] + z, o[1] + y, o[2] + x)
    }

    /// Row `(z, y)` of the halo-extended region as a contiguous slice.
    #[inline]
    pub fn row(&self, z: usize, y: usize) -> &'a [T] {
        let o = self.region.halo_origin;
        let start = self.volume.index(o[0] + z, o[1] + y, o[2]);
        &self.volume.as_slice()[start..start + self.region.halo_dims[2]]
    }

    pub fn is_core(&self, z: usize, y: usize, x: usize) -> bool {
        let off = self.region.core_offset();
        let d = self.region.dims;
        z >= off[0]
            && z < off[0] + d[0]
            && y >= off[1]
            && y < off[1] + d[1]
            && x >= off[2]
            && x < off[2] + d[2]
    }
}

pub fn iter_chunks<'a, T: Voxel>(
    volume: &'a Volume<T>,
    grid: &ChunkGrid,
) -> impl Iterator<Item = ([usize; 3], VolumeView<'a, T>)> + 'a {
    grid.regions(volume.dims())
        .into_iter()
        .map(move |r| (r.origin, VolumeView::new(volume, r)))
}
