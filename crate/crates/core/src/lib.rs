//! Semi-supervised multi-frame HDR reconstruction at desk scale.
//!
//! The crate splits into six areas:
//!
//! - [`hdr`] / [`metrics`]: photographic math (gamma correction, network
//!   input assembly, mu-law tonemapping) and image quality metrics.
//! - [`model`]: a small attention-fusion reconstruction backbone behind a
//!   pluggable interface, plus the judge head that emits per-pixel
//!   uncertainty maps.
//! - [`losses`]: tonemapped reconstruction, perceptual, and
//!   uncertainty-aware loss terms and their weighted composition.
//! - [`semisup`]: teacher-student machinery — EMA updates, per-epoch
//!   pseudo-label pools, pool-wide score normalization, bi-level masking,
//!   and augmentation policies.
//! - [`data`]: dataset ingestion (bracketed TIFF bursts + Radiance HDR
//!   ground truths), split management, patch extraction, and a synthetic
//!   scene generator.
//! - [`train`] / [`infer`] / [`evaluate`] / [`ablate`] / [`viz`]: the
//!   two-stage training orchestration, tiled full-image inference,
//!   evaluation reports, the ablation harness, and mask visualization.

pub mod ablate;
pub mod config;
pub mod data;
pub mod error;
pub mod evaluate;
pub mod features;
pub mod hdr;
pub mod infer;
pub mod io;
pub mod losses;
pub mod mask;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod semisup;
pub mod tensor;
pub mod train;
pub mod viz;

pub use error::{Error, Result};
pub use hdr::{HdrImage, LdrBurst, NetworkInput, PhotometricConfig};
pub use mask::PixelMask;
pub use tensor::Tensor;
