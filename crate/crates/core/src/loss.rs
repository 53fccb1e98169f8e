//! Class-balanced binary cross-entropy.
//!
//! With foreground ratio `wf = sum(y) / N`, the rarer class is up-weighted so
//! that both classes carry equal total weight:
//!
//! ```text
//! w = y + wf / (1 - wf) * (1 - y)      if wf > 0.5
//! w = (1 - wf) / wf * y + (1 - y)      otherwise
//! loss = 1/N * sum_j w_j * (-y_j ln x_j - (1 - y_j) ln(1 - x_j))
//! ```
//!
//! Predictions are clamped to `[EPS, 1 - EPS]`; the gradient is zero where the
//! clamp is active. All accumulation is in `f64`.

use rayon::prelude::*;

use crate::volume::Volume;
use crate::{Error, Result};

pub const EPS: f64 = 1e-7;

const BLOCK: usize = 1 << 14;

/// Fraction of voxels equal to 1. Fails if `y` is not binary.
pub fn foreground_ratio(y: &Volume<f32>) -> Result<f64> {
    let ys: Vec<f64> = y.as_slice().iter().map(|&v| f64::from(v)).collect();
    ratio(&ys)
}

fn ratio(y: &[f64]) -> Result<f64> {
    let mut ones = 0u64;
    for &v in y {
        if v == 1.0 {
            ones += 1;
        } else if v != 0.0 {
            return Err(Error::Domain(format!("target holds {v}, expected 0 or 1")));
        }
    }
    if y.is_empty() {
        return Err(Error::InvalidArgument("empty target".into()));
    }
    Ok(ones as f64 / y.len() as f64)
}

/// Per-class weights derived from a binary target.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap {
    pub foreground_ratio: f64,
    pub foreground_weight: f64,
    pub background_weight: f64,
    /// The weights materialized per voxel.
    pub weights: Volume<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ClassWeights {
    wf: f64,
    fg: f64,
    bg: f64,
}

impl ClassWeights {
    fn from_ratio(wf: f64) -> Result<Self> {
        if wf <= 0.0 || wf >= 1.0 {
            return Err(Error::DegenerateTarget(wf));
        }
        Ok(if wf > 0.5 {
            Self {
                wf,
                fg: 1.0,
                bg: wf / (1.0 - wf),
            }
        } else {
            Self {
                wf,
                fg: (1.0 - wf) / wf,
                bg: 1.0,
            }
        })
    }

    #[inline]
    fn weight(&self, y: f64) -> f64 {
        if y == 1.0 {
            self.fg
        } else {
            self.bg
        }
    }
}

pub fn weight_map(y: &Volume<f32>) -> Result<WeightMap> {
    let cw = ClassWeights::from_ratio(foreground_ratio(y)?)?;
    Ok(WeightMap {
        foreground_ratio: cw.wf,
        foreground_weight: cw.fg,
        background_weight: cw.bg,
        weights: y.map(|v| cw.weight(f64::from(v)) as f32),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Wbce {
    pub loss: f64,
    /// d loss / d x per voxel.
    pub gradient: Volume<f32>,
}

/// Weighted BCE of prediction `x` against binary target `y`.
pub fn wbce(x: &Volume<f32>, y: &Volume<f32>) -> Result<Wbce> {
    x.ensure_same_dims(y)?;
    let xs: Vec<f64> = x.as_slice().iter().map(|&v| f64::from(v)).collect();
    let ys: Vec<f64> = y.as_slice().iter().map(|&v| f64::from(v)).collect();
    let (loss, grad) = wbce_values(&xs, &ys)?;
    Ok(Wbce {
        loss,
        gradient: Volume::new(x.dims(), grad.into_iter().map(|g| g as f32).collect())?,
    })
}

/// Double-precision kernel behind [`wbce`]: returns the loss and its gradient.
pub fn wbce_values(x: &[f64], y: &[f64]) -> Result<(f64, Vec<f64>)> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "prediction has {} voxels, target {}",
            x.len(),
            y.len()
        )));
    }
    if let Some(i) = x.iter().position(|v| v.is_nan()) {
        return Err(Error::Domain(format!("prediction voxel {i} is NaN")));
    }
    let cw = ClassWeights::from_ratio(ratio(y)?)?;
    let n = x.len() as f64;

    let mut grad = vec![0.0f64; x.len()];
    let partials: Vec<f64> = grad
        .par_chunks_mut(BLOCK)
        .zip(x.par_chunks(BLOCK))
        .zip(y.par_chunks(BLOCK))
        .map(|((g, x), y)| {
            let mut sum = 0.0;
            for ((g, &xi), &yi) in g.iter_mut().zip(x).zip(y) {
                let w = cw.weight(yi);
                let clamped = !(EPS..=1.0 - EPS).contains(&xi);
                let p = xi.clamp(EPS, 1.0 - EPS);
                sum += w * (-yi * p.ln() - (1.0 - yi) * (1.0 - p).ln());
                *g = if clamped {
                    0.0
                } else {
                    w * (p - yi) / (p * (1.0 - p)) / n
                };
            }
            sum
        })
        .collect();
    // Summed in block order so the result does not depend on the worker count.
    let loss = partials.iter().sum::<f64>() / n;
    Ok((loss, grad))
}

/// Sum of the mask term and the boundary term.
pub fn total_loss(
    mask_pred: &Volume<f32>,
    mask_target: &Volume<f32>,
    boundary_pred: &Volume<f32>,
    boundary_target: &Volume<f32>,
) -> Result<f64> {
    Ok(wbce(mask_pred, mask_target)?.loss + wbce(boundary_pred, boundary_target)?.loss)
}
