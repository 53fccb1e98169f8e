//! Forward-only reference of the anisotropic residual U-Nets.
//!
//! Everything here runs on small CPU tensors. It pins down shapes, value
//! ranges and the wiring of the blocks; it does not train.
//!
//! Wiring choices that the block diagram leaves open:
//!
//! * ELU follows every convolution except the second 3×3×3 convolution of an
//!   ACB, which is added to the block's skip path before its ELU.
//! * Encoder features are fused into the decoder by **addition**. Before each
//!   upsampling step a 1×1×1 convolution (plus ELU) maps the deeper level's
//!   channels to the shallower level's width.
//! * Heads are 1×1×1 convolutions followed by a sigmoid.

mod acb;
mod conv;
mod resunet;
mod store;
mod tensor;
mod upsample;

pub use acb::{acb_forward, AcbParams};
pub use conv::{conv3d, elu, sigmoid, Conv3d, ConvSpec};
pub use resunet::{resunet_forward, DecoderParams, NetConfig, NetOutput, ResUNetParams};
pub use store::{load_params, save_params, LayerEntry, Manifest, MANIFEST_FILE};
pub use tensor::Tensor5;
pub use upsample::trilinear_upsample;
