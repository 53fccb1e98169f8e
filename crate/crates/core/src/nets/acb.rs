use super::conv::{conv3d, elu, Conv3d, ConvSpec};
use super::Tensor5;
use crate::Result;

/// Anisotropic convolution block: a 1×3×3 convolution, then two 3×3×3
/// convolutions wrapped by a residual connection.
#[derive(Debug, Clone, PartialEq)]
pub struct AcbParams {
    pub lateral: Conv3d,
    pub cubic1: Conv3d,
    pub cubic2: Conv3d,
}

impl AcbParams {
    pub fn zeros(in_channels: usize, out_channels: usize) -> Self {
        Self {
            lateral: Conv3d::zeros(ConvSpec::LATERAL, in_channels, out_channels),
            cubic1: Conv3d::zeros(ConvSpec::CUBIC, out_channels, out_channels),
            cubic2: Conv3d::zeros(ConvSpec::CUBIC, out_channels, out_channels),
        }
    }

    pub fn random(in_channels: usize, out_channels: usize, rng: &mut impl rand::Rng) -> Self {
        Self {
            lateral: Conv3d::random(ConvSpec::LATERAL, in_channels, out_channels, rng),
            cubic1: Conv3d::random(ConvSpec::CUBIC, out_channels, out_channels, rng),
            cubic2: Conv3d::random(ConvSpec::CUBIC, out_channels, out_channels, rng),
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.lateral.num_parameters() + self.cubic1.num_parameters() + self.cubic2.num_parameters()
    }
}

/// `y0 = elu(lateral(x))`, `out = elu(y0 + cubic2(elu(cubic1(y0))))`.
pub fn acb_forward(x: &Tensor5, p: &AcbParams) -> Result<Tensor5> {
    let y0 = elu(conv3d(x, &p.lateral)?);
    let t = elu(conv3d(&y0, &p.cubic1)?);
    let mut out = conv3d(&t, &p.cubic2)?;
    out.add_assign(&y0)?;
    Ok(elu(out))
}
