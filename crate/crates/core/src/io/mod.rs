//! File formats: Radiance RGBE radiance maps, 16-bit TIFF LDR frames, and
//! model checkpoints.

pub mod checkpoint;
pub mod rgbe;

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use std::path::Path;

const U16_MAX: f64 = 65535.0;

/// Snap a [0, 1] value onto the 16-bit grid the TIFF files store.
#[inline]
pub fn quantize_u16(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * U16_MAX).round() / U16_MAX
}

/// Read a 16-bit RGB TIFF into a [0, 1] tensor.
pub fn read_tiff16(path: &Path) -> Result<Tensor> {
    let img = image::open(path)
        .map_err(|e| Error::Ingestion(format!("{}: {e}", path.display())))?
        .into_rgb16();
    let (w, h) = img.dimensions();
    let mut out = Tensor::zeros(h as usize, w as usize, 3);
    for (x, y, px) in img.enumerate_pixels() {
        for c in 0..3 {
            out.set(y as usize, x as usize, c, f64::from(px[c]) / U16_MAX);
        }
    }
    Ok(out)
}

/// Write a [0, 1] tensor as a 16-bit RGB TIFF.
pub fn write_tiff16(path: &Path, img: &Tensor) -> Result<()> {
    if img.channels() != 3 {
        return Err(Error::shape("write_tiff16", "3 channels", img.channels()));
    }
    let (h, w, _) = img.shape();
    let mut buf = image::ImageBuffer::<image::Rgb<u16>, Vec<u16>>::new(w as u32, h as u32);
    for (x, y, px) in buf.enumerate_pixels_mut() {
        for c in 0..3 {
            px[c] = (img.at(y as usize, x as usize, c).clamp(0.0, 1.0) * U16_MAX).round() as u16;
        }
    }
    buf.save_with_format(path, image::ImageFormat::Tiff)
        .map_err(|e| Error::Codec(format!("{}: {e}", path.display())))
}

/// Write an 8-bit RGB PNG from a [0, 1] tensor.
pub fn write_png8(path: &Path, img: &Tensor) -> Result<()> {
    if img.channels() != 3 {
        return Err(Error::shape("write_png8", "3 channels", img.channels()));
    }
    let (h, w, _) = img.shape();
    let mut buf = image::ImageBuffer::<image::Rgb<u8>, Vec<u8>>::new(w as u32, h as u32);
    for (x, y, px) in buf.enumerate_pixels_mut() {
        for c in 0..3 {
            px[c] = (img.at(y as usize, x as usize, c).clamp(0.0, 1.0) * 255.0).round() as u8;
        }
    }
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Codec(format!("{}: {e}", path.display())))
}
