//! Independent reference implementations used by the integration tests.
//!
//! Nothing here calls into the library's algorithms; the oracles only share
//! the `Volume` container and the plain data types.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use mitoseg::nets::{Conv3d, NetConfig, Tensor5};
use mitoseg::Volume;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_probability(dims: [usize; 3], rng: &mut impl Rng) -> Volume<f32> {
    Volume::from_fn(dims, |_, _, _| rng.random::<f32>())
}

/// Probabilities drawn from a handful of values, so ties with the thresholds
/// actually occur.
pub fn random_coarse_probability(dims: [usize; 3], rng: &mut impl Rng) -> Volume<f32> {
    const LEVELS: [f32; 9] = [0.0, 0.1, 0.5, 0.79, 0.8, 0.81, 0.9, 0.95, 1.0];
    Volume::from_fn(dims, |_, _, _| LEVELS[rng.random_range(0..LEVELS.len())])
}

pub fn random_binary(dims: [usize; 3], density: f64, rng: &mut impl Rng) -> Volume<u8> {
    Volume::from_fn(dims, |_, _, _| u8::from(rng.random_bool(density)))
}

/// Union of random axis-aligned boxes: large, irregular components that
/// cross chunk borders in many places.
pub fn random_boxes(
    dims: [usize; 3],
    boxes: usize,
    max_side: usize,
    rng: &mut impl Rng,
) -> Volume<u8> {
    let mut v = Volume::<u8>::zeros(dims);
    for _ in 0..boxes {
        let lo: Vec<usize> = dims.iter().map(|&d| rng.random_range(0..d)).collect();
        let side: Vec<usize> = (0..3).map(|_| rng.random_range(1..=max_side)).collect();
        for z in lo[0]..(lo[0] + side[0]).min(dims[0]) {
            for y in lo[1]..(lo[1] + side[1]).min(dims[1]) {
                for x in lo[2]..(lo[2] + side[2]).min(dims[2]) {
                    v.set(z, y, x, 1);
                }
            }
        }
    }
    v
}

/// Mixed-texture seed volume for labeling tests.
pub fn random_seed(dims: [usize; 3], case: usize, rng: &mut impl Rng) -> Volume<u8> {
    match case % 4 {
        0 => random_binary(dims, 0.12, rng),
        1 => random_binary(dims, 0.3, rng),
        2 => random_binary(dims, 0.5, rng),
        _ => {
            let mut v = random_boxes(dims, 40, 20, rng);
            // Knock holes into the boxes so they fragment.
            for x in v.as_mut_slice() {
                if *x == 1 && rng.random_bool(0.2) {
                    *x = 0;
                }
            }
            v
        }
    }
}

/// Per-voxel seed rule, one voxel at a time.
pub fn seed_oracle(mask: &Volume<f32>, boundary: &Volume<f32>, t1: f32, t2: f32) -> Volume<u8> {
    let [d, h, w] = mask.dims();
    let mut out = Volume::<u8>::zeros([d, h, w]);
    for z in 0..d {
        for y in 0..h {
            for x in 0..w {
                if mask.get(z, y, x) > t1 && boundary.get(z, y, x) < t2 {
                    out.set(z, y, x, 1);
                }
            }
        }
    }
    out
}

fn neighbor_offsets(connectivity: u32) -> Vec<[i64; 3]> {
    let mut out = Vec::new();
    for dz in -1i64..=1 {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let manhattan = dz.abs() + dy.abs() + dx.abs();
                let keep = match connectivity {
                    6 => manhattan == 1,
                    26 => manhattan > 0,
                    _ => panic!("connectivity {connectivity}"),
                };
                if keep {
                    out.push([dz, dy, dx]);
                }
            }
        }
    }
    out
}

/// Explicit-stack flood fill in raster order. Components smaller than
/// `min_size` are dropped; survivors are numbered `1..` in order of their
/// first voxel.
pub fn flood_fill_labels(seed: &Volume<u8>, connectivity: u32, min_size: u64) -> Volume<u32> {
    let [d, h, w] = seed.dims();
    let offsets = neighbor_offsets(connectivity);
    let mut comp = vec![0u32; seed.len()];
    let mut sizes = vec![0u64];
    let mut stack = Vec::new();
    for start in 0..seed.len() {
        if seed.as_slice()[start] == 0 || comp[start] != 0 {
            continue;
        }
        let id = sizes.len() as u32;
        sizes.push(0);
        comp[start] = id;
        stack.push(start);
        while let Some(i) = stack.pop() {
            sizes[id as usize] += 1;
            let (z, y, x) = ((i / (h * w)) as i64, ((i / w) % h) as i64, (i % w) as i64);
            for o in &offsets {
                let (nz, ny, nx) = (z + o[0], y + o[1], x + o[2]);
                if nz < 0 || ny < 0 || nx < 0 || nz >= d as i64 || ny >= h as i64 || nx >= w as i64
                {
                    continue;
                }
                let j = ((nz as usize) * h + ny as usize) * w + nx as usize;
                if seed.as_slice()[j] != 0 && comp[j] == 0 {
                    comp[j] = id;
                    stack.push(j);
                }
            }
        }
    }
    // Components were discovered in raster order, so ids already follow first
    // occurrence; only the size filter needs a remap.
    let mut remap = vec![0u32; sizes.len()];
    let mut next = 0;
    for (id, &s) in sizes.iter().enumerate().skip(1) {
        if s >= min_size {
            next += 1;
            remap[id] = next;
        }
    }
    Volume::new([d, h, w], comp.iter().map(|&c| remap[c as usize]).collect()).unwrap()
}

/// True when the two label volumes induce the same partition of the voxels.
pub fn same_partition(a: &[u32], b: &[u32]) -> bool {
    let mut fwd = HashMap::new();
    let mut back = HashMap::new();
    a.len() == b.len()
        && a.iter().zip(b).all(|(&x, &y)| {
            (x == 0) == (y == 0)
                && *fwd.entry(x).or_insert(y) == y
                && *back.entry(y).or_insert(x) == x
        })
}

/// Pairwise intersections by a voxel loop over every label pair.
pub fn overlap_oracle(pred: &[u64], gt: &[u64]) -> BTreeMap<(u64, u64), u64> {
    let mut plabels: Vec<u64> = pred.iter().copied().filter(|&l| l != 0).collect();
    let mut glabels: Vec<u64> = gt.iter().copied().filter(|&l| l != 0).collect();
    plabels.sort_unstable();
    plabels.dedup();
    glabels.sort_unstable();
    glabels.dedup();
    let mut out = BTreeMap::new();
    for &p in &plabels {
        for &g in &glabels {
            let n = pred
                .iter()
                .zip(gt)
                .filter(|&(&a, &b)| a == p && b == g)
                .count() as u64;
            if n > 0 {
                out.insert((p, g), n);
            }
        }
    }
    out
}

/// Random label volume with `k` labels drawn from arbitrary ids.
pub fn random_labels(dims: [usize; 3], k: u64, background: f64, rng: &mut impl Rng) -> Volume<u32> {
    let ids: Vec<u32> = (0..k).map(|_| rng.random_range(1..u32::MAX)).collect();
    Volume::from_fn(dims, |_, _, _| {
        if rng.random_bool(background) {
            0
        } else {
            ids[rng.random_range(0..ids.len())]
        }
    })
}

/// (jaccard, dsc) from raw counts.
pub fn semantic_oracle(a: &[u8], b: &[u8]) -> (f64, f64) {
    let (mut inter, mut na, mut nb) = (0u64, 0u64, 0u64);
    for (&x, &y) in a.iter().zip(b) {
        na += u64::from(x);
        nb += u64::from(y);
        inter += u64::from(x & y);
    }
    if na + nb == 0 {
        return (1.0, 1.0);
    }
    let union = na + nb - inter;
    (
        inter as f64 / union as f64,
        2.0 * inter as f64 / (na + nb) as f64,
    )
}

/// Unweighted mean binary cross-entropy.
pub fn mean_bce(x: &[f32], y: &[f32]) -> f64 {
    let n = x.len() as f64;
    x.iter()
        .zip(y)
        .map(|(&p, &t)| {
            let p = f64::from(p);
            let t = f64::from(t);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / n
}

/// Direct seven-deep loop convolution, zero padding, same-size rule.
pub fn naive_conv(x: &Tensor5, layer: &Conv3d) -> (Vec<usize>, Vec<f64>) {
    let [n, cin, d, h, w] = x.dims();
    let [kd, kh, kw] = layer.spec.kernel;
    let [sd, sh, sw] = layer.spec.stride;
    let (od, oh, ow) = (d.div_ceil(sd), h.div_ceil(sh), w.div_ceil(sw));
    let (pd, ph, pw) = ((kd / 2) as i64, (kh / 2) as i64, (kw / 2) as i64);
    let cout = layer.out_channels;
    let mut out = Vec::with_capacity(n * cout * od * oh * ow);
    for b in 0..n {
        for co in 0..cout {
            for oz in 0..od {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = f64::from(layer.bias[co]);
                        for ci in 0..cin {
                            for a in 0..kd {
                                for bb in 0..kh {
                                    for c in 0..kw {
                                        let iz = (oz * sd) as i64 + a as i64 - pd;
                                        let iy = (oy * sh) as i64 + bb as i64 - ph;
                                        let ix = (ox * sw) as i64 + c as i64 - pw;
                                        if iz < 0 || iy < 0 || ix < 0 {
                                            continue;
                                        }
                                        let (iz, iy, ix) = (iz as usize, iy as usize, ix as usize);
                                        if iz >= d || iy >= h || ix >= w {
                                            continue;
                                        }
                                        let wi = (((co * cin + ci) * kd + a) * kh + bb) * kw + c;
                                        acc += f64::from(layer.weight[wi])
                                            * f64::from(x.get(b, ci, iz, iy, ix));
                                    }
                                }
                            }
                        }
                        out.push(acc);
                    }
                }
            }
        }
    }
    (vec![n, cout, od, oh, ow], out)
}

/// Closed-form parameter count of a residual U-Net configuration.
pub fn closed_form_parameters(cfg: &NetConfig) -> usize {
    let conv = |cin: usize, cout: usize, taps: usize| cout * cin * taps + cout;
    let acb = |c: usize| conv(c, c, 9) + 2 * conv(c, c, 27);
    let c = &cfg.channels;
    let l = c.len();
    let embed = conv(cfg.in_channels, c[0], 25);
    let encoder: usize = c.iter().map(|&ci| acb(ci)).sum();
    let down: usize = (1..l).map(|i| conv(c[i - 1], c[i], 9)).sum();
    let out = if cfg.decoders == 1 { 2 } else { 1 };
    let decoder: usize = (0..l - 1)
        .map(|i| conv(c[i + 1], c[i], 1) + acb(c[i]))
        .sum::<usize>()
        + conv(c[0], out, 1);
    embed + encoder + down + cfg.decoders * decoder
}
