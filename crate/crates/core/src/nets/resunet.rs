use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::acb::{acb_forward, AcbParams};
use super::conv::{conv3d, elu, sigmoid, Conv3d, ConvSpec};
use super::upsample::trilinear_upsample;
use super::Tensor5;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub in_channels: usize,
    /// Width per encoder level; its length is the number of levels.
    pub channels: Vec<usize>,
    /// 1 for the single-path variant (R), 2 for the dual-path variant (H).
    pub decoders: usize,
    pub seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            in_channels: 1,
            channels: vec![16, 32, 64, 128],
            decoders: 1,
            seed: 0,
        }
    }
}

impl NetConfig {
    pub fn res_unet_r() -> Self {
        Self::default()
    }

    pub fn res_unet_h() -> Self {
        Self {
            decoders: 2,
            ..Self::default()
        }
    }

    pub fn levels(&self) -> usize {
        self.channels.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() || self.channels.contains(&0) || self.in_channels == 0 {
            return Err(Error::InvalidArgument(format!(
                "invalid widths: in {} / levels {:?}",
                self.in_channels, self.channels
            )));
        }
        if !(1..=2).contains(&self.decoders) {
            return Err(Error::InvalidArgument(format!(
                "decoders must be 1 or 2, got {}",
                self.decoders
            )));
        }
        Ok(())
    }

    /// Output channels of each decoder head.
    pub fn head_channels(&self) -> usize {
        if self.decoders == 1 {
            2
        } else {
            1
        }
    }

    /// H and W must be divisible by this.
    pub fn lateral_divisor(&self) -> usize {
        1 << (self.levels() - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams {
    /// `reduce[i]`: 1×1×1, width of level `i + 1` to width of level `i`.
    pub reduce: Vec<Conv3d>,
    /// `blocks[i]`: ACB at level `i`.
    pub blocks: Vec<AcbParams>,
    pub head: Conv3d,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResUNetParams {
    pub config: NetConfig,
    pub embed: Conv3d,
    pub encoder: Vec<AcbParams>,
    /// `down[i]` feeds level `i + 1`.
    pub down: Vec<Conv3d>,
    pub decoders: Vec<DecoderParams>,
}

impl ResUNetParams {
    /// Seeded uniform initialization.
    pub fn init(config: &NetConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self::build(config, |spec, cin, cout| {
            Conv3d::random(spec, cin, cout, &mut rng)
        })
    }

    pub fn zeros(config: &NetConfig) -> Result<Self> {
        config.validate()?;
        Self::build(config, Conv3d::zeros)
    }

    fn build(
        config: &NetConfig,
        mut make: impl FnMut(ConvSpec, usize, usize) -> Conv3d,
    ) -> Result<Self> {
        let ch = &config.channels;
        let levels = ch.len();
        let acb = |make: &mut dyn FnMut(ConvSpec, usize, usize) -> Conv3d, c: usize| AcbParams {
            lateral: make(ConvSpec::LATERAL, c, c),
            cubic1: make(ConvSpec::CUBIC, c, c),
            cubic2: make(ConvSpec::CUBIC, c, c),
        };

        let embed = make(ConvSpec::EMBED, config.in_channels, ch[0]);
        let mut encoder = Vec::with_capacity(levels);
        let mut down = Vec::with_capacity(levels - 1);
        for i in 0..levels {
            if i > 0 {
                down.push(make(ConvSpec::DOWN, ch[i - 1], ch[i]));
            }
            encoder.push(acb(&mut make, ch[i]));
        }
        let mut decoders = Vec::with_capacity(config.decoders);
        for _ in 0..config.decoders {
            let mut reduce = Vec::with_capacity(levels - 1);
            let mut blocks = Vec::with_capacity(levels - 1);
            for i in 0..levels - 1 {
                reduce.push(make(ConvSpec::POINTWISE, ch[i + 1], ch[i]));
                blocks.push(acb(&mut make, ch[i]));
            }
            let head = make(ConvSpec::POINTWISE, ch[0], config.head_channels());
            decoders.push(DecoderParams {
                reduce,
                blocks,
                head,
            });
        }
        Ok(Self {
            config: config.clone(),
            embed,
            encoder,
            down,
            decoders,
        })
    }

    /// Every convolution with a stable dotted name, in initialization order.
    pub fn layers(&self) -> Vec<(String, &Conv3d)> {
        let mut out = vec![("embed".to_string(), &self.embed)];
        for (i, block) in self.encoder.iter().enumerate() {
            if i > 0 {
                out.push((format!("down{i}"), &self.down[i - 1]));
            }
            out.push((format!("enc{i}.lateral"), &block.lateral));
            out.push((format!("enc{i}.cubic1"), &block.cubic1));
            out.push((format!("enc{i}.cubic2"), &block.cubic2));
        }
        for (k, dec) in self.decoders.iter().enumerate() {
            for (i, (r, b)) in dec.reduce.iter().zip(&dec.blocks).enumerate() {
                out.push((format!("dec{k}.reduce{i}"), r));
                out.push((format!("dec{k}.block{i}.lateral"), &b.lateral));
                out.push((format!("dec{k}.block{i}.cubic1"), &b.cubic1));
                out.push((format!("dec{k}.block{i}.cubic2"), &b.cubic2));
            }
            out.push((format!("dec{k}.head"), &dec.head));
        }
        out
    }

    pub fn layer_mut(&mut self, name: &str) -> Option<&mut Conv3d> {
        let mut parts = name.split('.');
        let first = parts.next()?;
        if first == "embed" {
            return parts.next().is_none().then_some(&mut self.embed);
        }
        if let Some(i) = first.strip_prefix("down") {
            let i: usize = i.parse().ok()?;
            return self.down.get_mut(i.checked_sub(1)?);
        }
        if let Some(i) = first.strip_prefix("enc") {
            let block = self.encoder.get_mut(i.parse::<usize>().ok()?)?;
            return acb_field(block, parts.next()?);
        }
        if let Some(k) = first.strip_prefix("dec") {
            let dec = self.decoders.get_mut(k.parse::<usize>().ok()?)?;
            let second = parts.next()?;
            if second == "head" {
                return Some(&mut dec.head);
            }
            if let Some(i) = second.strip_prefix("reduce") {
                return dec.reduce.get_mut(i.parse::<usize>().ok()?);
            }
            if let Some(i) = second.strip_prefix("block") {
                let block = dec.blocks.get_mut(i.parse::<usize>().ok()?)?;
                return acb_field(block, parts.next()?);
            }
        }
        None
    }

    pub fn num_parameters(&self) -> usize {
        self.layers().iter().map(|(_, c)| c.num_parameters()).sum()
    }
}

fn acb_field<'a>(a: &'a mut AcbParams, field: &str) -> Option<&'a mut Conv3d> {
    match field {
        "lateral" => Some(&mut a.lateral),
        "cubic1" => Some(&mut a.cubic1),
        "cubic2" => Some(&mut a.cubic2),
        _ => None,
    }
}

/// Semantic mask and instance boundary, each `(N, 1, D, H, W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetOutput {
    pub mask: Tensor5,
    pub boundary: Tensor5,
}

pub fn resunet_forward(x: &Tensor5, params: &ResUNetParams) -> Result<NetOutput> {
    let cfg = &params.config;
    cfg.validate()?;
    let [_, c, _, h, w] = x.dims();
    if c != cfg.in_channels {
        return Err(Error::InvalidArgument(format!(
            "network expects {} input channels, got {c}",
            cfg.in_channels
        )));
    }
    let div = cfg.lateral_divisor();
    if h % div != 0 || w % div != 0 {
        return Err(Error::InvalidArgument(format!(
            "H={h} and W={w} must be divisible by {div} for {} levels",
            cfg.levels()
        )));
    }

    let levels = cfg.levels();
    let mut feats = Vec::with_capacity(levels);
    let mut cur = elu(conv3d(x, &params.embed)?);
    for i in 0..levels {
        if i > 0 {
            cur = elu(conv3d(&cur, &params.down[i - 1])?);
        }
        cur = acb_forward(&cur, &params.encoder[i])?;
        feats.push(cur.clone());
    }

    let decode = |dec: &DecoderParams| -> Result<Tensor5> {
        let mut d = feats[levels - 1].clone();
        for i in (0..levels - 1).rev() {
            d = elu(conv3d(&d, &dec.reduce[i])?);
            d = trilinear_upsample(&d, [1, 2, 2]);
            d.add_assign(&feats[i])?;
            d = acb_forward(&d, &dec.blocks[i])?;
        }
        Ok(sigmoid(conv3d(&d, &dec.head)?))
    };

    if params.decoders.len() == 1 {
        let both = decode(&params.decoders[0])?;
        Ok(NetOutput {
            mask: both.channel_range(0, 1),
            boundary: both.channel_range(1, 1),
        })
    } else {
        Ok(NetOutput {
            mask: decode(&params.decoders[0])?,
            boundary: decode(&params.decoders[1])?,
        })
    }
}
