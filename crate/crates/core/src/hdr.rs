//! Photographic math shared by the whole pipeline: domain types for
//! exposure-bracketed bursts and radiance maps, gamma correction into the
//! linear HDR domain, network input assembly, and mu-law tonemapping.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Index of the reference frame inside a burst (the middle exposure).
pub const REFERENCE_FRAME: usize = 1;

/// Gamma and mu-law parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotometricConfig {
    pub gamma: f64,
    pub mu: f64,
}

impl Default for PhotometricConfig {
    fn default() -> Self {
        PhotometricConfig {
            gamma: 2.2,
            mu: 5000.0,
        }
    }
}

impl PhotometricConfig {
    pub fn new(gamma: f64, mu: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
        }
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::InvalidInput(format!("mu must be positive, got {mu}")));
        }
        Ok(PhotometricConfig { gamma, mu })
    }
}

/// Three exposure-bracketed LDR frames plus their linear exposure times.
///
/// Frames are `H x W x 3` with values in [0, 1]; exposure times are linear
/// multipliers (`t = 2^EV`). Frame 1 is the reference.
#[derive(Debug, Clone, PartialEq)]
pub struct LdrBurst {
    frames: [Tensor; 3],
    exposure_times: [f64; 3],
}

impl LdrBurst {
    pub fn new(frames: [Tensor; 3], exposure_times: [f64; 3]) -> Result<Self> {
        let shape = frames[0].shape();
        for (i, f) in frames.iter().enumerate() {
            if f.shape() != shape {
                return Err(Error::shape(
                    "LdrBurst::new",
                    format!("{shape:?}"),
                    format!("frame {i}: {:?}", f.shape()),
                ));
            }
            if f.channels() != 3 {
                return Err(Error::shape("LdrBurst::new", "3 channels", f.channels()));
            }
            if !f.all_finite() || f.min() < 0.0 || f.max() > 1.0 {
                return Err(Error::InvalidInput(format!(
                    "frame {i} has values outside [0, 1]"
                )));
            }
        }
        for (i, &t) in exposure_times.iter().enumerate() {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "exposure time {i} must be strictly positive, got {t}"
                )));
            }
        }
        Ok(LdrBurst {
            frames,
            exposure_times,
        })
    }

    #[inline]
    pub fn frames(&self) -> &[Tensor; 3] {
        &self.frames
    }

    #[inline]
    pub fn frame(&self, i: usize) -> &Tensor {
        &self.frames[i]
    }

    #[inline]
    pub fn reference(&self) -> &Tensor {
        &self.frames[REFERENCE_FRAME]
    }

    #[inline]
    pub fn exposure_times(&self) -> [f64; 3] {
        self.exposure_times
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.frames[0].height()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    /// Aligned spatial crop of all three frames.
    pub fn crop(&self, y0: usize, x0: usize, ph: usize, pw: usize) -> Result<LdrBurst> {
        Ok(LdrBurst {
            frames: [
                self.frames[0].crop(y0, x0, ph, pw)?,
                self.frames[1].crop(y0, x0, ph, pw)?,
                self.frames[2].crop(y0, x0, ph, pw)?,
            ],
            exposure_times: self.exposure_times,
        })
    }

    /// Apply the same spatial transform to every frame.
    pub fn map_frames(&self, f: impl Fn(&Tensor) -> Tensor) -> Result<LdrBurst> {
        LdrBurst::new(
            [f(&self.frames[0]), f(&self.frames[1]), f(&self.frames[2])],
            self.exposure_times,
        )
    }
}

/// Linear-domain radiance map, `H x W x 3`, non-negative and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct HdrImage(Tensor);

impl HdrImage {
    pub fn new(data: Tensor) -> Result<Self> {
        if data.channels() != 3 {
            return Err(Error::shape("HdrImage::new", "3 channels", data.channels()));
        }
        if !data.all_finite() || data.min() < 0.0 {
            return Err(Error::InvalidInput(
                "HDR radiance must be finite and non-negative".into(),
            ));
        }
        Ok(HdrImage(data))
    }

    #[inline]
    pub fn data(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.0.height()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn crop(&self, y0: usize, x0: usize, ph: usize, pw: usize) -> Result<HdrImage> {
        Ok(HdrImage(self.0.crop(y0, x0, ph, pw)?))
    }
}

/// Stacked network input: per frame, the raw LDR (3 ch) followed by its
/// gamma-corrected HDR-domain version (3 ch), in frame order — 18 channels.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkInput(Tensor);

impl NetworkInput {
    pub const CHANNELS: usize = 18;

    #[inline]
    pub fn data(&self) -> &Tensor {
        &self.0
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.0.height()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.0.width()
    }

    /// Raw LDR channels of frame `i` (layout positions `6i .. 6i+3`).
    pub fn raw_frame(&self, i: usize) -> Result<Tensor> {
        self.0.slice_channels(6 * i, 3)
    }

    /// Gamma-corrected channels of frame `i` (layout positions `6i+3 .. 6i+6`).
    pub fn corrected_frame(&self, i: usize) -> Result<Tensor> {
        self.0.slice_channels(6 * i + 3, 3)
    }
}

/// Gamma-correct a scalar LDR value into the linear HDR domain: `x^gamma / t`.
#[inline]
pub fn gamma_correct_scalar(x: f64, exposure_time: f64, gamma: f64) -> f64 {
    x.powf(gamma) / exposure_time
}

/// Map each LDR frame into the linear HDR domain: `x_i^gamma / t_i`.
pub fn gamma_correct(burst: &LdrBurst, cfg: &PhotometricConfig) -> Result<[Tensor; 3]> {
    let t = burst.exposure_times();
    for (i, &ti) in t.iter().enumerate() {
        if !(ti > 0.0) {
            return Err(Error::InvalidInput(format!(
                "exposure time {i} must be strictly positive, got {ti}"
            )));
        }
    }
    Ok([
        burst.frame(0).map(|v| gamma_correct_scalar(v, t[0], cfg.gamma)),
        burst.frame(1).map(|v| gamma_correct_scalar(v, t[1], cfg.gamma)),
        burst.frame(2).map(|v| gamma_correct_scalar(v, t[2], cfg.gamma)),
    ])
}

/// Concatenate raw frames with their gamma-corrected versions into the
/// 18-channel network input.
pub fn assemble_input(burst: &LdrBurst, cfg: &PhotometricConfig) -> Result<NetworkInput> {
    let corrected = gamma_correct(burst, cfg)?;
    let stacked = Tensor::concat_channels(&[
        burst.frame(0),
        &corrected[0],
        burst.frame(1),
        &corrected[1],
        burst.frame(2),
        &corrected[2],
    ])?;
    Ok(NetworkInput(stacked))
}

/// Mu-law tonemapping of a scalar already in [0, 1]:
/// `T(I) = ln(1 + mu * I) / ln(1 + mu)`.
#[inline]
pub fn tonemap_scalar(v: f64, mu: f64) -> f64 {
    (mu * v).ln_1p() / mu.ln_1p()
}

/// Derivative of `tonemap_scalar` with respect to `v`.
#[inline]
pub fn tonemap_derivative(v: f64, mu: f64) -> f64 {
    mu / ((1.0 + mu * v) * mu.ln_1p())
}

/// Mu-law tonemap an HDR tensor into [0, 1]. Values are clamped to [0, 1]
/// first; network outputs and normalized ground truths live in that range,
/// and clamping pins `T(0) = 0`, `T(1) = 1`.
pub fn tonemap(img: &Tensor, cfg: &PhotometricConfig) -> Tensor {
    img.map(|v| tonemap_scalar(v.clamp(0.0, 1.0), cfg.mu))
}
