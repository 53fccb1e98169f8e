//! Parameter store on disk: one EMV1 `f32` volume per weight tensor and per
//! bias vector, plus `manifest.json` describing every layer.
//!
//! Weights are stored with dims `(C_out, C_in, kd * kh * kw)`, biases with
//! dims `(1, 1, C_out)`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::conv::{Conv3d, ConvSpec};
use super::resunet::{NetConfig, ResUNetParams};
use crate::volume::Volume;
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub name: String,
    pub spec: ConvSpec,
    pub in_channels: usize,
    pub out_channels: usize,
    pub weight_file: String,
    pub bias_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: NetConfig,
    pub layers: Vec<LayerEntry>,
}

pub fn save_params(params: &ResUNetParams, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut layers = Vec::new();
    for (name, conv) in params.layers() {
        let weight_file = format!("{name}.weight.emv");
        let bias_file = format!("{name}.bias.emv");
        Volume::new(
            [conv.out_channels, conv.in_channels, conv.spec.taps()],
            conv.weight.clone(),
        )?
        .save(dir.join(&weight_file))?;
        Volume::new([1, 1, conv.out_channels], conv.bias.clone())?.save(dir.join(&bias_file))?;
        layers.push(LayerEntry {
            name,
            spec: conv.spec,
            in_channels: conv.in_channels,
            out_channels: conv.out_channels,
            weight_file,
            bias_file,
        });
    }
    let manifest = Manifest {
        config: params.config.clone(),
        layers,
    };
    fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_vec_pretty(&manifest)?,
    )?;
    Ok(())
}

pub fn load_params(dir: impl AsRef<Path>) -> Result<ResUNetParams> {
    let dir = dir.as_ref();
    let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?;
    let mut params = ResUNetParams::zeros(&manifest.config)?;
    let expected = params.layers().len();
    if manifest.layers.len() != expected {
        return Err(Error::Format(format!(
            "manifest lists {} layers, config needs {expected}",
            manifest.layers.len()
        )));
    }
    for entry in &manifest.layers {
        let slot = params
            .layer_mut(&entry.name)
            .ok_or_else(|| Error::Format(format!("unknown layer {}", entry.name)))?;
        if slot.spec != entry.spec
            || slot.in_channels != entry.in_channels
            || slot.out_channels != entry.out_channels
        {
            return Err(Error::Format(format!(
                "layer {} does not match the configured topology",
                entry.name
            )));
        }
        let weight = Volume::<f32>::load(dir.join(&entry.weight_file))?;
        let bias = Volume::<f32>::load(dir.join(&entry.bias_file))?;
        *slot = Conv3d::new(
            entry.spec,
            entry.in_channels,
            entry.out_channels,
            weight.into_data(),
            bias.into_data(),
        )?;
    }
    Ok(params)
}
