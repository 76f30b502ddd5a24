//! Full-image reconstruction by tiled patch inference with smooth overlap
//! blending.
//!
//! Tiles follow the training patch geometry (boundary-snapped grid) and
//! are blended with a separable raised-cosine window, offset by half a
//! pixel so every pixel keeps strictly positive weight. Images smaller
//! than a tile are reconstructed in one forward pass.

use crate::data::PatchGrid;
use crate::error::Result;
use crate::hdr::{assemble_input, HdrImage, LdrBurst, PhotometricConfig};
use crate::model::Backbone;
use crate::tensor::Tensor;

fn grid_positions(extent: usize, patch: usize, stride: usize) -> Vec<usize> {
    let mut pos = Vec::new();
    let last = extent.saturating_sub(patch);
    let mut p = 0usize;
    loop {
        pos.push(p.min(last));
        if p >= last {
            break;
        }
        p += stride;
    }
    pos.dedup();
    pos
}

/// Raised-cosine weight, strictly positive across the tile.
fn window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let s = (std::f64::consts::PI * (i as f64 + 0.5) / n as f64).sin();
            s * s
        })
        .collect()
}

/// Blend per-tile maps produced by `tile_fn` over the full image extent.
/// `channels` fixes the output depth.
pub fn blend_tiles(
    h: usize,
    w: usize,
    channels: usize,
    grid: &PatchGrid,
    mut tile_fn: impl FnMut(usize, usize, usize, usize) -> Result<Tensor>,
) -> Result<Tensor> {
    let ph = grid.patch_size.min(h);
    let pw = grid.patch_size.min(w);
    let ys = grid_positions(h, ph, grid.stride);
    let xs = grid_positions(w, pw, grid.stride);
    let wy = window(ph);
    let wx = window(pw);
    let mut acc = Tensor::zeros(h, w, channels);
    let mut weight = Tensor::zeros(h, w, 1);
    for &y0 in &ys {
        for &x0 in &xs {
            let tile = tile_fn(y0, x0, ph, pw)?;
            debug_assert_eq!(tile.shape(), (ph, pw, channels));
            for dy in 0..ph {
                for dx in 0..pw {
                    let wgt = wy[dy] * wx[dx];
                    let src = tile.pixel(dy, dx);
                    let dst = acc.pixel_mut(y0 + dy, x0 + dx);
                    for c in 0..channels {
                        dst[c] += wgt * src[c];
                    }
                    let wv = weight.at(y0 + dy, x0 + dx, 0);
                    weight.set(y0 + dy, x0 + dx, 0, wv + wgt);
                }
            }
        }
    }
    for y in 0..h {
        for x in 0..w {
            let wv = weight.at(y, x, 0);
            debug_assert!(wv > 0.0);
            let px = acc.pixel_mut(y, x);
            for c in 0..channels {
                px[c] /= wv;
            }
        }
    }
    Ok(acc)
}

/// Reconstruct a full radiance map from a burst with a model.
pub fn reconstruct_full(
    model: &dyn Backbone,
    burst: &LdrBurst,
    photometric: &PhotometricConfig,
    grid: &PatchGrid,
) -> Result<HdrImage> {
    let (h, w) = (burst.height(), burst.width());
    let out = blend_tiles(h, w, 3, grid, |y0, x0, ph, pw| {
        let crop = burst.crop(y0, x0, ph, pw)?;
        let input = assemble_input(&crop, photometric)?;
        let (pred, _, _) = model.forward_full(&input)?;
        Ok(pred.into_tensor())
    })?;
    HdrImage::new(out)
}
