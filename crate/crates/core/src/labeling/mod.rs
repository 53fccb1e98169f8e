//! Connected-component labeling of seed maps.
//!
//! The chunked labeler runs in three phases:
//!
//! 1. Every chunk labels its halo-extended region independently with a
//!    classic two-pass union-find scan.
//! 2. A single-owner merge walks the halo voxels of every chunk. A halo voxel
//!    is owned by a neighbouring chunk, so its label in both chunks names the
//!    same component and the two provisional ids are unioned.
//! 3. Components are filtered by size, renumbered `1..=K` by the flat index of
//!    their first voxel, and written out slice-parallel.
//!
//! Numbering only depends on the partition, so the output is bit-identical for
//! every chunk grid and worker count.

mod instances;
mod union_find;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use instances::{instance_table, instance_table_with_bins, InstanceRow, InstanceTable, Label};
pub use union_find::UnionFind;

use crate::seedmap::SeedMap;
use crate::volume::{ChunkGrid, ChunkRegion, Volume, VolumeView};
use crate::{Error, Result};

/// Label volume: 0 is background, instances are `1..=K`.
pub type LabelVolume = Volume<u32>;

/// Neighbor stencil in 3D.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Connectivity {
    /// Face neighbors only.
    #[default]
    Six,
    /// Face, edge and corner neighbors.
    TwentySix,
}

impl Connectivity {
    /// Neighbors already visited in a z, y, x raster scan.
    fn backward_offsets(self) -> &'static [[isize; 3]] {
        const SIX: [[isize; 3]; 3] = [[-1, 0, 0], [0, -1, 0], [0, 0, -1]];
        const TWENTY_SIX: [[isize; 3]; 13] = [
            [-1, -1, -1],
            [-1, -1, 0],
            [-1, -1, 1],
            [-1, 0, -1],
            [-1, 0, 0],
            [-1, 0, 1],
            [-1, 1, -1],
            [-1, 1, 0],
            [-1, 1, 1],
            [0, -1, -1],
            [0, -1, 0],
            [0, -1, 1],
            [0, 0, -1],
        ];
        match self {
            Connectivity::Six => &SIX,
            Connectivity::TwentySix => &TWENTY_SIX,
        }
    }

    /// All neighbors of a voxel.
    pub fn offsets(self) -> Vec<[isize; 3]> {
        let back = self.backward_offsets();
        back.iter()
            .copied()
            .chain(back.iter().map(|o| o.map(|c| -c)))
            .collect()
    }
}

impl TryFrom<u32> for Connectivity {
    type Error = Error;

    fn try_from(n: u32) -> Result<Self> {
        match n {
            6 => Ok(Connectivity::Six),
            26 => Ok(Connectivity::TwentySix),
            other => Err(Error::InvalidArgument(format!(
                "connectivity must be 6 or 26, got {other}"
            ))),
        }
    }
}

impl From<Connectivity> for u32 {
    fn from(c: Connectivity) -> u32 {
        match c {
            Connectivity::Six => 6,
            Connectivity::TwentySix => 26,
        }
    }
}

/// Label the whole volume as one chunk.
pub fn label_components(seed: &SeedMap, c: Connectivity, min_size: u64) -> Result<LabelVolume> {
    label_components_chunked(seed, &ChunkGrid::whole(seed.dims()), c, min_size)
}

/// Chunk-parallel labeling. Requires a halo of at least one voxel on every
/// axis that the grid splits.
pub fn label_components_chunked(
    seed: &SeedMap,
    grid: &ChunkGrid,
    c: Connectivity,
    min_size: u64,
) -> Result<LabelVolume> {
    let dims = seed.dims();
    let shape = grid.grid_shape(dims);
    for (axis, (&n, &halo)) in shape.iter().zip(&grid.halo()).enumerate() {
        if n > 1 && halo == 0 {
            return Err(Error::InvalidArgument(format!(
                "grid splits axis {axis} into {n} chunks but its halo is 0"
            )));
        }
    }

    let regions = grid.regions(dims);
    let chunks: Vec<ChunkLabels> = regions
        .par_iter()
        .map(|&r| label_chunk(VolumeView::new(seed, r), c))
        .collect::<Result<_>>()?;

    let maps = merge(seed, grid, &chunks, min_size)?;
    Ok(relabel(dims, grid, &chunks, &maps))
}

/// Per-chunk result of the local pass.
struct ChunkLabels {
    region: ChunkRegion,
    /// Local labels over the core region, x-fastest; 0 is background.
    core: Vec<u32>,
    /// Local labels are `1..=n_local` over the halo-extended region.
    n_local: u32,
    /// Core voxel count per local label (index 0 unused).
    sizes: Vec<u64>,
    /// Smallest global flat index per local label among core voxels.
    first: Vec<u64>,
    /// Foreground halo voxels: (global flat index, local label).
    halo_links: Vec<(u64, u32)>,
}

fn label_chunk(view: VolumeView<'_, u8>, c: Connectivity) -> Result<ChunkLabels> {
    let [ed, eh, ew] = view.extent();
    let offsets = c.backward_offsets();
    let mut prov = vec![0u32; ed * eh * ew];
    let mut uf = UnionFind::new(0);

    for z in 0..ed {
        for y in 0..eh {
            let row = view.row(z, y);
            let base = (z * eh + y) * ew;
            for (x, &s) in row.iter().enumerate() {
                match s {
                    0 => continue,
                    1 => {}
                    v => {
                        return Err(Error::Domain(format!(
                            "seed map holds value {v}, expected 0 or 1"
                        )))
                    }
                }
                let mut label = 0u32;
                for o in offsets {
                    let (nz, ny, nx) = (z as isize + o[0], y as isize + o[1], x as isize + o[2]);
                    if nz < 0 || ny < 0 || nx < 0 || ny >= eh as isize || nx >= ew as isize {
                        continue;
                    }
                    let n = prov[(nz as usize * eh + ny as usize) * ew + nx as usize];
                    if n == 0 {
                        continue;
                    }
                    if label == 0 {
                        label = n;
                    } else if n != label {
                        uf.union(label - 1, n - 1);
                    }
                }
                if label == 0 {
                    label = uf.make_set() + 1;
                }
                prov[base + x] = label;
            }
        }
    }

    // Compact provisional ids to 1..=n_local in scan order.
    let mut compact = vec![0u32; uf.len()];
    let mut n_local = 0u32;
    for p in prov.iter_mut().filter(|p| **p != 0) {
        let root = uf.find(*p - 1) as usize;
        if compact[root] == 0 {
            n_local += 1;
            compact[root] = n_local;
        }
        *p = compact[root];
    }
    drop(compact);

    let region = *view.region();
    let dims_total = view.volume_dims();
    let mut sizes = vec![0u64; n_local as usize + 1];
    let mut first = vec![u64::MAX; n_local as usize + 1];
    let mut halo_links = Vec::new();
    let off = region.core_offset();
    let [cd, ch, cw] = region.dims;

    let core = if region.halo_dims == region.dims {
        for (i, &l) in prov.iter().enumerate() {
            if l != 0 {
                let (z, y, x) = (i / (eh * ew), (i / ew) % eh, i % ew);
                let g = global_index(dims_total, region.halo_origin, [z, y, x]);
                sizes[l as usize] += 1;
                first[l as usize] = first[l as usize].min(g);
            }
        }
        prov
    } else {
        let mut core = vec![0u32; cd * ch * cw];
        for z in 0..ed {
            for y in 0..eh {
                for x in 0..ew {
                    let l = prov[(z * eh + y) * ew + x];
                    if l == 0 {
                        continue;
                    }
                    let g = global_index(dims_total, region.halo_origin, [z, y, x]);
                    let inside = z >= off[0]
                        && z < off[0] + cd
                        && y >= off[1]
                        && y < off[1] + ch
                        && x >= off[2]
                        && x < off[2] + cw;
                    if inside {
                        core[((z - off[0]) * ch + (y - off[1])) * cw + (x - off[2])] = l;
                        sizes[l as usize] += 1;
                        first[l as usize] = first[l as usize].min(g);
                    } else {
                        halo_links.push((g, l));
                    }
                }
            }
        }
        core
    };

    Ok(ChunkLabels {
        region,
        core,
        n_local,
        sizes,
        first,
        halo_links,
    })
}

#[inline]
fn global_index(dims: [usize; 3], origin: [usize; 3], p: [usize; 3]) -> u64 {
    (((origin[0] + p[0]) * dims[1] + origin[1] + p[1]) * dims[2] + origin[2] + p[2]) as u64
}

/// Resolve cross-chunk equivalences; returns per-chunk local → final label maps.
fn merge(
    seed: &SeedMap,
    grid: &ChunkGrid,
    chunks: &[ChunkLabels],
    min_size: u64,
) -> Result<Vec<Vec<u32>>> {
    let dims = seed.dims();
    let mut bases = Vec::with_capacity(chunks.len());
    let mut total = 0u64;
    for ch in chunks {
        bases.push(total);
        total += u64::from(ch.n_local);
    }
    if total > u64::from(u32::MAX) {
        return Err(Error::LabelOverflow(format!(
            "{total} provisional components exceed u32 ids"
        )));
    }
    let mut uf = UnionFind::new(total as usize);
    let plane = (dims[1] * dims[2]) as u64;

    for (a, ch) in chunks.iter().enumerate() {
        for &(g, la) in &ch.halo_links {
            let p = [
                (g / plane) as usize,
                ((g % plane) / dims[2] as u64) as usize,
                (g % dims[2] as u64) as usize,
            ];
            let b = grid.linear_index(dims, grid.owner(dims, p));
            let owner = &chunks[b];
            let r = &owner.region;
            let local = ((p[0] - r.origin[0]) * r.dims[1] + (p[1] - r.origin[1])) * r.dims[2]
                + (p[2] - r.origin[2]);
            let lb = owner.core[local];
            debug_assert!(lb != 0, "foreground halo voxel unlabeled in its owner");
            uf.union(
                (bases[a] + u64::from(la) - 1) as u32,
                (bases[b] + u64::from(lb) - 1) as u32,
            );
        }
    }

    let mut size = vec![0u64; total as usize];
    let mut first = vec![u64::MAX; total as usize];
    for (a, ch) in chunks.iter().enumerate() {
        for l in 1..=ch.n_local as usize {
            let root = uf.find((bases[a] + l as u64 - 1) as u32) as usize;
            size[root] += ch.sizes[l];
            first[root] = first[root].min(ch.first[l]);
        }
    }

    let mut survivors: Vec<(u64, usize)> = (0..total as usize)
        .filter(|&r| size[r] > 0 && size[r] >= min_size && uf.find(r as u32) as usize == r)
        .map(|r| (first[r], r))
        .collect();
    survivors.sort_unstable();
    if survivors.len() > u32::MAX as usize {
        return Err(Error::LabelOverflow(format!(
            "{} components exceed u32 labels",
            survivors.len()
        )));
    }
    let mut final_label = vec![0u32; total as usize];
    for (k, &(_, r)) in survivors.iter().enumerate() {
        final_label[r] = k as u32 + 1;
    }

    Ok(chunks
        .iter()
        .enumerate()
        .map(|(a, ch)| {
            let mut map = vec![0u32; ch.n_local as usize + 1];
            for (l, m) in map.iter_mut().enumerate().skip(1) {
                *m = final_label[uf.find((bases[a] + l as u64 - 1) as u32) as usize];
            }
            map
        })
        .collect())
}

fn relabel(
    dims: [usize; 3],
    grid: &ChunkGrid,
    chunks: &[ChunkLabels],
    maps: &[Vec<u32>],
) -> LabelVolume {
    let [_, h, w] = dims;
    let cdims = grid.effective_chunk_dims(dims);
    let shape = grid.grid_shape(dims);
    let mut out = vec![0u32; dims.iter().product()];
    if !out.is_empty() {
        out.par_chunks_mut(h * w)
            .enumerate()
            .for_each(|(z, plane)| {
                let gz = z / cdims[0];
                for y in 0..h {
                    let gy = y / cdims[1];
                    let row = &mut plane[y * w..(y + 1) * w];
                    for gx in 0..shape[2] {
                        let idx = (gz * shape[1] + gy) * shape[2] + gx;
                        let ch = &chunks[idx];
                        let map = &maps[idx];
                        let r = &ch.region;
                        let start = ((z - r.origin[0]) * r.dims[1] + (y - r.origin[1])) * r.dims[2];
                        let src = &ch.core[start..start + r.dims[2]];
                        let dst = &mut row[r.origin[2]..r.origin[2] + r.dims[2]];
                        for (d, &s) in dst.iter_mut().zip(src) {
                            *d = map[s as usize];
                        }
                    }
                }
            });
    }
    Volume::new(dims, out).expect("relabel output matches dims")
}
