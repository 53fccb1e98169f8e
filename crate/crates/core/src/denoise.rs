//! Kernel-application denoising of damaged slices.
//!
//! A damaged slice `z` is resynthesized from its neighbors `z - 1` and
//! `z + 1`: every pixel gets its own pair of `k × k` kernels, one applied to
//! each neighbor, and the two responses are summed. Only pixels flagged in the
//! slice's noise mask are replaced. Kernel prediction itself happens upstream;
//! kernels arrive here as data.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::volume::{Volume, Voxel};
use crate::{Error, Result};

pub const DEFAULT_KERNEL_SIZE: usize = 13;

/// Per-pixel kernels must sum to one within this tolerance.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-4;

/// A single 2D frame, x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Frame {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::InvalidArgument(format!(
                "frame {height}x{width} needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, v: f32) -> Self {
        Self {
            height,
            width,
            data: vec![v; height * width],
        }
    }

    pub fn from_slice<T: Voxel>(volume: &Volume<T>, z: usize) -> Self {
        let [_, h, w] = volume.dims();
        Self {
            height: h,
            width: w,
            data: volume
                .slice_z(z)
                .iter()
                .map(|v| v.to_f64() as f32)
                .collect(),
        }
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.width + x]
    }
}

/// Two kernel stacks of shape `(H, W, k, k)`: `k1` for the previous frame,
/// `k2` for the next.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelField {
    k: usize,
    height: usize,
    width: usize,
    k1: Vec<f32>,
    k2: Vec<f32>,
}

/// JSON sidecar stored next to a kernel-field volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelSidecar {
    pub k: usize,
    pub slice_index: usize,
}

impl KernelField {
    pub fn new(k: usize, height: usize, width: usize, k1: Vec<f32>, k2: Vec<f32>) -> Result<Self> {
        if k.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "kernel size {k} must be odd"
            )));
        }
        let n = height * width * k * k;
        if k1.len() != n || k2.len() != n {
            return Err(Error::InvalidArgument(format!(
                "kernel stacks for {height}x{width} with k={k} need {n} values each, got {} and {}",
                k1.len(),
                k2.len()
            )));
        }
        let field = Self {
            k,
            height,
            width,
            k1,
            k2,
        };
        field.check_normalized()?;
        Ok(field)
    }

    fn check_normalized(&self) -> Result<()> {
        let kk = self.k * self.k;
        for p in 0..self.height * self.width {
            let s: f64 = self.k1[p * kk..(p + 1) * kk]
                .iter()
                .chain(&self.k2[p * kk..(p + 1) * kk])
                .map(|&v| f64::from(v))
                .sum();
            if s.is_nan() || (s - 1.0).abs() > NORMALIZATION_TOLERANCE {
                return Err(Error::Domain(format!(
                    "kernels at pixel ({}, {}) sum to {s}, expected 1",
                    p / self.width,
                    p % self.width
                )));
            }
        }
        Ok(())
    }

    /// Same kernel pair at every pixel.
    pub fn uniform(height: usize, width: usize, k1: &[f32], k2: &[f32]) -> Result<Self> {
        let kk = k1.len();
        let k = (kk as f64).sqrt() as usize;
        if k * k != kk || k2.len() != kk {
            return Err(Error::InvalidArgument(
                "kernels must be square and equal-sized".into(),
            ));
        }
        let rep = |src: &[f32]| src.repeat(height * width);
        Self::new(k, height, width, rep(k1), rep(k2))
    }

    /// Centered delta kernels scaled by `a` (previous) and `b` (next).
    pub fn delta(height: usize, width: usize, k: usize, a: f32, b: f32) -> Result<Self> {
        let mut k1 = vec![0.0; k * k];
        let mut k2 = vec![0.0; k * k];
        k1[k * k / 2] = a;
        k2[k * k / 2] = b;
        Self::uniform(height, width, &k1, &k2)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Kernel taps for pixel `(y, x)`, row-major `k × k`.
    pub fn kernels_at(&self, y: usize, x: usize) -> (&[f32], &[f32]) {
        let kk = self.k * self.k;
        let p = (y * self.width + x) * kk;
        (&self.k1[p..p + kk], &self.k2[p..p + kk])
    }

    /// Channel-major volume of dims `(2 k², H, W)`; channels `0..k²` hold `k1`.
    pub fn to_volume(&self) -> Volume<f32> {
        let kk = self.k * self.k;
        let plane = self.height * self.width;
        let mut data = vec![0.0f32; 2 * kk * plane];
        for p in 0..plane {
            for t in 0..kk {
                data[t * plane + p] = self.k1[p * kk + t];
                data[(kk + t) * plane + p] = self.k2[p * kk + t];
            }
        }
        Volume::new([2 * kk, self.height, self.width], data).expect("kernel volume dims")
    }

    pub fn from_volume(v: &Volume<f32>, k: usize) -> Result<Self> {
        let [c, h, w] = v.dims();
        let kk = k * k;
        if c != 2 * kk {
            return Err(Error::InvalidArgument(format!(
                "kernel volume has {c} channels, k={k} needs {}",
                2 * kk
            )));
        }
        let plane = h * w;
        let src = v.as_slice();
        let mut k1 = vec![0.0f32; plane * kk];
        let mut k2 = vec![0.0f32; plane * kk];
        for t in 0..kk {
            for p in 0..plane {
                k1[p * kk + t] = src[t * plane + p];
                k2[p * kk + t] = src[(kk + t) * plane + p];
            }
        }
        Self::new(k, h, w, k1, k2)
    }

    /// Writes `path` (EMV1) and `path` with a `.json` extension (sidecar).
    pub fn save(&self, path: impl AsRef<Path>, slice_index: usize) -> Result<()> {
        let path = path.as_ref();
        self.to_volume().save(path)?;
        let sidecar = KernelSidecar {
            k: self.k,
            slice_index,
        };
        fs::write(sidecar_path(path), serde_json::to_vec_pretty(&sidecar)?)?;
        Ok(())
    }

    /// Loads a field and the slice index it restores.
    pub fn load(path: impl AsRef<Path>) -> Result<(usize, Self)> {
        let path = path.as_ref();
        let sidecar: KernelSidecar = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
        let v = Volume::<f32>::load(path)?;
        Ok((sidecar.slice_index, Self::from_volume(&v, sidecar.k)?))
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Binary per-slice mask; 1 marks a pixel to restore.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseMask {
    pub height: usize,
    pub width: usize,
    pub data: Vec<u8>,
}

impl NoiseMask {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::InvalidArgument(format!(
                "mask {height}x{width} needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::Domain("noise mask must hold only 0 and 1".into()));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn full(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![1; height * width],
        }
    }

    /// From an EMV1 `u8` volume of dims `(1, H, W)`.
    pub fn from_volume(v: &Volume<u8>) -> Result<Self> {
        let [d, h, w] = v.dims();
        if d != 1 {
            return Err(Error::InvalidArgument(format!(
                "noise mask volume must have depth 1, got {d}"
            )));
        }
        Self::new(h, w, v.as_slice().to_vec())
    }

    pub fn to_volume(&self) -> Volume<u8> {
        Volume::new([1, self.height, self.width], self.data.clone()).expect("mask dims")
    }
}

/// `out(y, x) = Σ prev(y+u, x+v) k1(y, x, u, v) + Σ next(y+u, x+v) k2(y, x, u, v)`
/// over centered offsets, zero outside the frame.
pub fn apply_kernels(prev: &Frame, next: &Frame, kf: &KernelField) -> Result<Frame> {
    let (h, w) = kf.dims();
    for f in [prev, next] {
        if (f.height, f.width) != (h, w) {
            return Err(Error::InvalidArgument(format!(
                "frame {}x{} does not match kernel field {h}x{w}",
                f.height, f.width
            )));
        }
    }
    let k = kf.k;
    let r = (k / 2) as isize;
    let mut out = vec![0.0f32; h * w];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            let (k1, k2) = kf.kernels_at(y, x);
            let mut acc = 0.0f64;
            for u in 0..k {
                let sy = y as isize + u as isize - r;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for v in 0..k {
                    let sx = x as isize + v as isize - r;
                    if sx < 0 || sx >= w as isize {
                        continue;
                    }
                    let i = sy as usize * w + sx as usize;
                    let t = u * k + v;
                    acc += f64::from(prev.data[i]) * f64::from(k1[t])
                        + f64::from(next.data[i]) * f64::from(k2[t]);
                }
            }
            *o = acc as f32;
        }
    });
    Frame::new(h, w, out)
}

/// Replace the masked pixels of each masked slice with its kernel restoration.
///
/// Restorations read from the input volume only, so the result does not depend
/// on processing order.
pub fn restore_slices<T: Voxel>(
    volume: &Volume<T>,
    masks: &BTreeMap<usize, NoiseMask>,
    kernels: &BTreeMap<usize, KernelField>,
) -> Result<Volume<T>> {
    let [d, h, w] = volume.dims();
    for (&z, mask) in masks {
        if z == 0 || z + 1 >= d {
            return Err(Error::MissingNeighbor { slice: z, depth: d });
        }
        if (mask.height, mask.width) != (h, w) {
            return Err(Error::InvalidArgument(format!(
                "mask for slice {z} is {}x{}, volume slices are {h}x{w}",
                mask.height, mask.width
            )));
        }
        if !kernels.contains_key(&z) {
            return Err(Error::InvalidArgument(format!(
                "no kernel field for masked slice {z}"
            )));
        }
    }

    let restored: Vec<(usize, Frame)> = masks
        .par_iter()
        .map(|(&z, _)| {
            let prev = Frame::from_slice(volume, z - 1);
            let next = Frame::from_slice(volume, z + 1);
            Ok((z, apply_kernels(&prev, &next, &kernels[&z])?))
        })
        .collect::<Result<_>>()?;

    let mut out = volume.clone();
    for (z, frame) in restored {
        let mask = &masks[&z];
        for ((dst, &m), &v) in out
            .slice_z_mut(z)
            .iter_mut()
            .zip(&mask.data)
            .zip(&frame.data)
        {
            if m == 1 {
                *dst = T::from_f64_saturating(f64::from(v));
            }
        }
    }
    Ok(out)
}
