use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Tensor5;
use crate::{Error, Result};

/// Kernel and stride of a same-padded 3D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
}

impl ConvSpec {
    pub fn new(kernel: [usize; 3], stride: [usize; 3]) -> Result<Self> {
        if kernel.iter().any(|&k| k % 2 == 0) {
            return Err(Error::InvalidArgument(format!(
                "kernel {kernel:?} must be odd on every axis"
            )));
        }
        if stride.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "stride {stride:?} contains 0"
            )));
        }
        Ok(Self { kernel, stride })
    }

    /// 1×5×5 input embedding.
    pub const EMBED: ConvSpec = ConvSpec {
        kernel: [1, 5, 5],
        stride: [1, 1, 1],
    };
    /// 1×3×3 lateral convolution.
    pub const LATERAL: ConvSpec = ConvSpec {
        kernel: [1, 3, 3],
        stride: [1, 1, 1],
    };
    /// 1×3×3 convolution halving H and W.
    pub const DOWN: ConvSpec = ConvSpec {
        kernel: [1, 3, 3],
        stride: [1, 2, 2],
    };
    pub const CUBIC: ConvSpec = ConvSpec {
        kernel: [3, 3, 3],
        stride: [1, 1, 1],
    };
    pub const POINTWISE: ConvSpec = ConvSpec {
        kernel: [1, 1, 1],
        stride: [1, 1, 1],
    };

    pub fn padding(&self) -> [usize; 3] {
        self.kernel.map(|k| (k - 1) / 2)
    }

    pub fn taps(&self) -> usize {
        self.kernel.iter().product()
    }

    pub fn output_spatial(&self, input: [usize; 3]) -> [usize; 3] {
        [0, 1, 2].map(|a| input[a].div_ceil(self.stride[a]))
    }
}

/// Convolution weights `(C_out, C_in, kd, kh, kw)` plus one bias per output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3d {
    pub spec: ConvSpec,
    pub in_channels: usize,
    pub out_channels: usize,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Conv3d {
    pub fn new(
        spec: ConvSpec,
        in_channels: usize,
        out_channels: usize,
        weight: Vec<f32>,
        bias: Vec<f32>,
    ) -> Result<Self> {
        let spec = ConvSpec::new(spec.kernel, spec.stride)?;
        let expected = out_channels * in_channels * spec.taps();
        if weight.len() != expected || bias.len() != out_channels {
            return Err(Error::InvalidArgument(format!(
                "conv {in_channels}->{out_channels} {:?} needs {expected} weights and \
                 {out_channels} biases, got {} and {}",
                spec.kernel,
                weight.len(),
                bias.len()
            )));
        }
        Ok(Self {
            spec,
            in_channels,
            out_channels,
            weight,
            bias,
        })
    }

    pub fn zeros(spec: ConvSpec, in_channels: usize, out_channels: usize) -> Self {
        Self {
            spec,
            in_channels,
            out_channels,
            weight: vec![0.0; out_channels * in_channels * spec.taps()],
            bias: vec![0.0; out_channels],
        }
    }

    /// Uniform in `[-b, b]` with `b = 1 / sqrt(fan_in)` for weights and biases.
    pub fn random(
        spec: ConvSpec,
        in_channels: usize,
        out_channels: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let bound = 1.0 / ((in_channels * spec.taps()) as f32).sqrt();
        let mut draw =
            |n: usize| -> Vec<f32> { (0..n).map(|_| rng.random_range(-bound..=bound)).collect() };
        let weight = draw(out_channels * in_channels * spec.taps());
        let bias = draw(out_channels);
        Self {
            spec,
            in_channels,
            out_channels,
            weight,
            bias,
        }
    }

    /// Channel identity for a pointwise or centered kernel: output channel `c`
    /// copies input channel `c` through the kernel's center tap.
    pub fn identity(spec: ConvSpec, channels: usize) -> Self {
        let mut conv = Self::zeros(spec, channels, channels);
        let taps = spec.taps();
        let center = taps / 2;
        for c in 0..channels {
            conv.weight[(c * channels + c) * taps + center] = 1.0;
        }
        conv
    }

    pub fn num_parameters(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    #[inline]
    fn w(&self, co: usize, ci: usize, tap: usize) -> f32 {
        self.weight[(co * self.in_channels + ci) * self.spec.taps() + tap]
    }
}

/// Zero-padded cross-correlation with same-size padding.
pub fn conv3d(x: &Tensor5, layer: &Conv3d) -> Result<Tensor5> {
    let [n, c_in, d, h, w] = x.dims();
    if c_in != layer.in_channels {
        return Err(Error::InvalidArgument(format!(
            "conv expects {} input channels, tensor has {c_in}",
            layer.in_channels
        )));
    }
    let spec = layer.spec;
    let [od, oh, ow] = spec.output_spatial([d, h, w]);
    let [kd, kh, kw] = spec.kernel;
    let [pd, ph, pw] = spec.padding();
    let [sd, sh, sw] = spec.stride;
    let c_out = layer.out_channels;
    let out_plane = od * oh * ow;
    let in_plane = d * h * w;
    let input = x.as_slice();

    let mut out = vec![0.0f32; n * c_out * out_plane];
    out.par_chunks_mut(out_plane)
        .enumerate()
        .for_each(|(nc, plane)| {
            let (b, co) = (nc / c_out, nc % c_out);
            plane.fill(layer.bias[co]);
            for ci in 0..c_in {
                let src = &input[(b * c_in + ci) * in_plane..(b * c_in + ci + 1) * in_plane];
                for tz in 0..kd {
                    for ty in 0..kh {
                        for tx in 0..kw {
                            let wt = layer.w(co, ci, (tz * kh + ty) * kw + tx);
                            // Output x range whose input tap stays in bounds.
                            let last = (w + pw) as isize - tx as isize - 1;
                            if last < 0 {
                                continue;
                            }
                            let lo = pw.saturating_sub(tx).div_ceil(sw);
                            let hi = (last as usize / sw + 1).min(ow);
                            if lo >= hi {
                                continue;
                            }
                            for oz in 0..od {
                                let iz = (oz * sd + tz) as isize - pd as isize;
                                if iz < 0 || iz >= d as isize {
                                    continue;
                                }
                                for oy in 0..oh {
                                    let iy = (oy * sh + ty) as isize - ph as isize;
                                    if iy < 0 || iy >= h as isize {
                                        continue;
                                    }
                                    let row = &src[(iz as usize * h + iy as usize) * w..][..w];
                                    let dst = &mut plane[(oz * oh + oy) * ow..][..ow];
                                    if sw == 1 {
                                        let off = lo + tx - pw;
                                        for (o, &v) in dst[lo..hi].iter_mut().zip(&row[off..]) {
                                            *o += wt * v;
                                        }
                                    } else {
                                        for (ox, o) in dst.iter_mut().enumerate().take(hi).skip(lo)
                                        {
                                            *o += wt * row[ox * sw + tx - pw];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        });
    Tensor5::new([n, c_out, od, oh, ow], out)
}

#[inline]
fn elu1(v: f32) -> f32 {
    if v > 0.0 {
        v
    } else {
        v.exp_m1()
    }
}

pub fn elu(mut x: Tensor5) -> Tensor5 {
    x.as_mut_slice().iter_mut().for_each(|v| *v = elu1(*v));
    x
}

/// Logistic sigmoid, kept strictly inside (0, 1) in f32.
pub fn sigmoid(mut x: Tensor5) -> Tensor5 {
    const LO: f32 = f32::MIN_POSITIVE;
    const HI: f32 = 1.0 - f32::EPSILON / 2.0;
    x.as_mut_slice().iter_mut().for_each(|v| {
        let s = 1.0 / (1.0 + (-f64::from(*v)).exp());
        *v = (s as f32).clamp(LO, HI);
    });
    x
}
