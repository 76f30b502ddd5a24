//! Mask inspection renders: pseudo HDR, normalized uncertainty heatmap,
//! patch-keep overlay, and the pixel mask, as [0, 1] tensors ready for
//! 8-bit export.
//!
//! The pseudo-label pool is built from this scene's own patch grid, so the
//! normalization (and therefore the thresholds) is scene-local here.

use crate::data::{extract_patches, PatchGrid, PatchMode, SceneRecord};
use crate::error::Result;
use crate::hdr::{tonemap, PhotometricConfig};
use crate::infer::{blend_tiles, reconstruct_full};
use crate::model::ReferenceModel;
use crate::semisup::{generate_pseudo_pool, normalize_and_mask, MaskThresholds};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VizStats {
    pub pool_size: usize,
    pub kept_patches: usize,
    /// Range of normalized patch scores (min, max).
    pub patch_score_range: (f64, f64),
    /// Range of normalized pixel scores (min, max).
    pub pixel_score_range: (f64, f64),
    pub kept_pixel_fraction: f64,
}

pub struct MaskVizOutputs {
    /// Tonemapped teacher reconstruction.
    pub pseudo_tonemapped: Tensor,
    /// Colormapped normalized uncertainty.
    pub uncertainty_heatmap: Tensor,
    /// Reconstruction tinted green (kept) / red (rejected) per patch.
    pub patch_overlay: Tensor,
    /// Blended pixel mask (white keeps).
    pub pixel_mask: Tensor,
    pub stats: VizStats,
}

/// Blue-to-red ramp for scores in [0, 1].
fn colormap(v: f64) -> [f64; 3] {
    let v = v.clamp(0.0, 1.0);
    [v, 0.8 * 4.0 * v * (1.0 - v), 1.0 - v]
}

pub fn render_mask_viz(
    model: &ReferenceModel,
    scene: &SceneRecord,
    thresholds: &MaskThresholds,
    photometric: &PhotometricConfig,
    grid: &PatchGrid,
) -> Result<MaskVizOutputs> {
    let patches = extract_patches(scene, grid, PatchMode::Grid, 0)?;
    let pool = generate_pseudo_pool(model, &patches, photometric)?;
    let pool = normalize_and_mask(pool, thresholds);

    let (h, w) = (scene.burst.height(), scene.burst.width());
    let pseudo = reconstruct_full(model, &scene.burst, photometric, grid)?;
    let pseudo_tonemapped = tonemap(pseudo.data(), photometric);

    // Records are in grid order; blend_tiles visits positions in the same
    // order, so a cursor pairs each tile with its record.
    let mut cursor = 0usize;
    let heat_raw = blend_tiles(h, w, 1, grid, |_, _, _, _| {
        let t = pool[cursor].pixel_scores.clone();
        cursor += 1;
        Ok(t)
    })?;
    let uncertainty_heatmap = Tensor::from_fn(h, w, 3, |y, x, c| {
        colormap(heat_raw.at(y, x, 0))[c]
    });

    let mut cursor = 0usize;
    let flags = blend_tiles(h, w, 3, grid, |_, _, ph, pw| {
        let kept = pool[cursor].kept;
        cursor += 1;
        let color = if kept { [0.0, 1.0, 0.0] } else { [1.0, 0.0, 0.0] };
        Ok(Tensor::from_fn(ph, pw, 3, |_, _, c| color[c]))
    })?;
    let patch_overlay = pseudo_tonemapped.zip_map(&flags, |base, flag| 0.55 * base + 0.45 * flag)?;

    let mut cursor = 0usize;
    let mask_blend = blend_tiles(h, w, 1, grid, |_, _, ph, pw| {
        let m = &pool[cursor].pixel_mask;
        cursor += 1;
        Ok(Tensor::from_fn(ph, pw, 1, |y, x, _| {
            f64::from(m.get(y, x))
        }))
    })?;
    let pixel_mask = Tensor::from_fn(h, w, 3, |y, x, _| mask_blend.at(y, x, 0));

    let mut patch_range = (f64::INFINITY, f64::NEG_INFINITY);
    let mut pixel_range = (f64::INFINITY, f64::NEG_INFINITY);
    let mut kept_pixels = 0usize;
    let mut total_pixels = 0usize;
    for rec in &pool {
        patch_range.0 = patch_range.0.min(rec.patch_score);
        patch_range.1 = patch_range.1.max(rec.patch_score);
        for &v in rec.pixel_scores.as_slice() {
            pixel_range.0 = pixel_range.0.min(v);
            pixel_range.1 = pixel_range.1.max(v);
        }
        kept_pixels += rec.pixel_mask.count_kept();
        total_pixels += rec.pixel_mask.height() * rec.pixel_mask.width();
    }
    let stats = VizStats {
        pool_size: pool.len(),
        kept_patches: pool.iter().filter(|r| r.kept).count(),
        patch_score_range: patch_range,
        pixel_score_range: pixel_range,
        kept_pixel_fraction: kept_pixels as f64 / total_pixels.max(1) as f64,
    };
    Ok(MaskVizOutputs {
        pseudo_tonemapped,
        uncertainty_heatmap,
        patch_overlay,
        pixel_mask,
        stats,
    })
}

impl VizStats {
    pub fn to_text(&self) -> String {
        format!(
            "pool_size={}\nkept_patches={}\npatch_score_min={:.6}\npatch_score_max={:.6}\npixel_score_min={:.6}\npixel_score_max={:.6}\nkept_pixel_fraction={:.6}\n",
            self.pool_size,
            self.kept_patches,
            self.patch_score_range.0,
            self.patch_score_range.1,
            self.pixel_score_range.0,
            self.pixel_score_range.1,
            self.kept_pixel_fraction
        )
    }
}
