//! Dataset handling: bracketed-burst scene records, directory-layout
//! ingestion and writing, labeled/unlabeled split management, aligned patch
//! extraction, and a procedural exposure-bracketed scene generator.
//!
//! On-disk layout per scene:
//! `<root>/<scene_id>/{ldr_0.tif, ldr_1.tif, ldr_2.tif, exposure.txt, gt.hdr?}`
//! where `exposure.txt` holds three whitespace-separated stop values and
//! the ground truth is optional (absent for unlabeled captures).

use crate::error::{Error, Result};
use crate::hdr::{HdrImage, LdrBurst};
use crate::io::{self, rgbe};
use crate::mask::PixelMask;
use crate::semisup::{derive_seed, ScenePatch};
use crate::tensor::Tensor;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fs;
use std::path::Path;

/// One scene: a burst plus (for annotated captures) the ground truth
/// aligned to the reference frame.
#[derive(Debug, Clone)]
pub struct SceneRecord {
    pub scene_id: String,
    pub burst: LdrBurst,
    pub gt: Option<HdrImage>,
}

/// Labeled/unlabeled split selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitPolicy {
    /// First `n_labeled` scenes in input (lexicographic) order.
    FirstN,
    /// Seeded uniform choice of `n_labeled` scenes.
    Random,
}

#[derive(Debug, Clone, Copy)]
pub struct SplitSpec {
    pub n_labeled: usize,
    pub seed: u64,
    pub policy: SplitPolicy,
}

/// Patch extraction geometry.
#[derive(Debug, Clone, Copy)]
pub struct PatchGrid {
    pub patch_size: usize,
    pub stride: usize,
}

impl PatchGrid {
    pub fn new(patch_size: usize, stride: usize) -> Result<Self> {
        if patch_size == 0 {
            return Err(Error::InvalidInput("patch size must be positive".into()));
        }
        if stride == 0 || stride > patch_size {
            return Err(Error::InvalidInput(format!(
                "stride must be in 1..=patch_size, got {stride} for patch {patch_size}"
            )));
        }
        Ok(PatchGrid { patch_size, stride })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatchMode {
    Grid,
    Random,
}

/// Load one scene directory.
pub fn load_kalantari_scene(dir: &Path) -> Result<SceneRecord> {
    let scene_id = dir
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::Ingestion(format!("bad scene directory {}", dir.display())))?
        .to_string();
    let mut frames = Vec::with_capacity(3);
    for i in 0..3 {
        let path = dir.join(format!("ldr_{i}.tif"));
        if !path.exists() {
            return Err(Error::Ingestion(format!(
                "scene {scene_id}: missing frame {}",
                path.display()
            )));
        }
        frames.push(io::read_tiff16(&path)?);
    }
    let exposure_path = dir.join("exposure.txt");
    let text = fs::read_to_string(&exposure_path).map_err(|e| {
        Error::Ingestion(format!("scene {scene_id}: {}: {e}", exposure_path.display()))
    })?;
    let stops: Vec<f64> = text
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|_| {
                Error::Ingestion(format!("scene {scene_id}: bad stop value {tok:?}"))
            })
        })
        .collect::<Result<_>>()?;
    if stops.len() != 3 {
        return Err(Error::Ingestion(format!(
            "scene {scene_id}: expected 3 stop values, found {}",
            stops.len()
        )));
    }
    let exposure_times = [
        (2.0f64).powf(stops[0]),
        (2.0f64).powf(stops[1]),
        (2.0f64).powf(stops[2]),
    ];
    let burst = LdrBurst::new(
        [
            frames[0].clone(),
            frames[1].clone(),
            frames[2].clone(),
        ],
        exposure_times,
    )?;
    let gt_path = dir.join("gt.hdr");
    let gt = if gt_path.exists() {
        let file = fs::File::open(&gt_path)?;
        let raw = rgbe::read_hdr(std::io::BufReader::new(file))?;
        if raw.height() != burst.height() || raw.width() != burst.width() {
            return Err(Error::Ingestion(format!(
                "scene {scene_id}: ground truth {}x{} does not match frames {}x{}",
                raw.height(),
                raw.width(),
                burst.height(),
                burst.width()
            )));
        }
        Some(HdrImage::new(raw.clamp01())?)
    } else {
        None
    };
    Ok(SceneRecord {
        scene_id,
        burst,
        gt,
    })
}

/// Write one scene in the dataset layout.
pub fn write_scene(root: &Path, record: &SceneRecord) -> Result<()> {
    let dir = root.join(&record.scene_id);
    fs::create_dir_all(&dir)?;
    for i in 0..3 {
        io::write_tiff16(&dir.join(format!("ldr_{i}.tif")), record.burst.frame(i))?;
    }
    let stops: Vec<String> = record
        .burst
        .exposure_times()
        .iter()
        .map(|t| format!("{}", t.log2()))
        .collect();
    fs::write(dir.join("exposure.txt"), format!("{}\n", stops.join(" ")))?;
    if let Some(gt) = &record.gt {
        let file = fs::File::create(dir.join("gt.hdr"))?;
        rgbe::write_hdr(std::io::BufWriter::new(file), gt.data())?;
    }
    Ok(())
}

/// Load every scene under a dataset root, sorted by scene id.
pub fn load_dataset(root: &Path) -> Result<Vec<SceneRecord>> {
    let mut dirs: Vec<_> = fs::read_dir(root)
        .map_err(|e| Error::Ingestion(format!("{}: {e}", root.display())))?
        .filter_map(|entry| entry.ok())
        .filter(|entry| entry.path().is_dir())
        .map(|entry| entry.path())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Ingestion(format!(
            "no scene directories under {}",
            root.display()
        )));
    }
    dirs.iter().map(|d| load_kalantari_scene(d)).collect()
}

/// Partition scenes into labeled and unlabeled sets. Unlabeled scenes keep
/// their ground truth in the record for diagnostics only; the trainer
/// never reads it on the pseudo branch.
pub fn make_split(
    scenes: Vec<SceneRecord>,
    spec: &SplitSpec,
) -> Result<(Vec<SceneRecord>, Vec<SceneRecord>)> {
    if spec.n_labeled == 0 || spec.n_labeled > scenes.len() {
        return Err(Error::InvalidInput(format!(
            "n_labeled must be in 1..={}, got {}",
            scenes.len(),
            spec.n_labeled
        )));
    }
    let n = scenes.len();
    let labeled_idx: Vec<usize> = match spec.policy {
        SplitPolicy::FirstN => (0..spec.n_labeled).collect(),
        SplitPolicy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 0x53504C49));
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let mut chosen: Vec<usize> = idx.into_iter().take(spec.n_labeled).collect();
            chosen.sort_unstable();
            chosen
        }
    };
    let mut labeled = Vec::with_capacity(spec.n_labeled);
    let mut unlabeled = Vec::with_capacity(n - spec.n_labeled);
    let mut next_label = 0usize;
    for (i, scene) in scenes.into_iter().enumerate() {
        if next_label < labeled_idx.len() && labeled_idx[next_label] == i {
            if scene.gt.is_none() {
                return Err(Error::InvalidInput(format!(
                    "scene {} selected as labeled but has no ground truth",
                    scene.scene_id
                )));
            }
            labeled.push(scene);
            next_label += 1;
        } else {
            unlabeled.push(scene);
        }
    }
    Ok((labeled, unlabeled))
}

fn grid_positions(extent: usize, patch: usize, stride: usize) -> Vec<usize> {
    let mut pos = Vec::new();
    let last = extent - patch;
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

/// Extract aligned patches from every frame and the ground truth.
///
/// Grid mode tiles with the stride and snaps the final row/column to the
/// image boundary so the full image is covered; random mode samples the
/// same number of positions uniformly.
pub fn extract_patches(
    scene: &SceneRecord,
    grid: &PatchGrid,
    mode: PatchMode,
    seed: u64,
) -> Result<Vec<ScenePatch>> {
    let (h, w) = (scene.burst.height(), scene.burst.width());
    let p = grid.patch_size;
    if h < p || w < p {
        return Err(Error::InvalidInput(format!(
            "scene {} is {h}x{w}, smaller than patch {p}",
            scene.scene_id
        )));
    }
    let positions: Vec<(usize, usize)> = match mode {
        PatchMode::Grid => {
            let ys = grid_positions(h, p, grid.stride);
            let xs = grid_positions(w, p, grid.stride);
            ys.iter()
                .flat_map(|&y| xs.iter().map(move |&x| (y, x)))
                .collect()
        }
        PatchMode::Random => {
            let count =
                grid_positions(h, p, grid.stride).len() * grid_positions(w, p, grid.stride).len();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x50415443));
            (0..count)
                .map(|_| (rng.gen_range(0..=h - p), rng.gen_range(0..=w - p)))
                .collect()
        }
    };
    positions
        .into_iter()
        .map(|(y, x)| {
            Ok(ScenePatch {
                patch_id: format!("{}/{y}x{x}", scene.scene_id),
                burst: scene.burst.crop(y, x, p, p)?,
                gt: scene.gt.as_ref().map(|g| g.crop(y, x, p, p)).transpose()?,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Synthetic scenes
// ---------------------------------------------------------------------------

/// Generator knobs. `from_difficulty` maps a single dial in [0, 1] onto
/// motion amplitude and sensor noise.
#[derive(Debug, Clone, Copy)]
pub struct SynthOptions {
    pub height: usize,
    pub width: usize,
    /// Largest per-frame shape translation in pixels.
    pub motion_px: f64,
    /// Noise std on the reference frame; frame i gets `noise / t_i`.
    pub noise: f64,
    /// Snap frames to the 16-bit grid and the GT to the RGBE grid so disk
    /// round trips are bit-exact.
    pub quantize: bool,
    /// Inject a high-radiance region that clips in the long exposure.
    pub allow_clipping: bool,
    /// Exposure stops of the three frames.
    pub ev_stops: [f64; 3],
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions::from_difficulty(0.5, 64, 64)
    }
}

impl SynthOptions {
    pub fn from_difficulty(difficulty: f64, height: usize, width: usize) -> Self {
        let d = difficulty.clamp(0.0, 1.0);
        SynthOptions {
            height,
            width,
            motion_px: 8.0 * d,
            noise: 0.02 * d,
            quantize: true,
            allow_clipping: true,
            ev_stops: [-2.0, 0.0, 2.0],
        }
    }

    /// Static, noiseless, unclipped, unquantized variant: the simulated
    /// reference frame inverts exactly back onto the ground truth.
    pub fn clean(height: usize, width: usize) -> Self {
        SynthOptions {
            height,
            width,
            motion_px: 0.0,
            noise: 0.0,
            quantize: false,
            allow_clipping: false,
            ev_stops: [-2.0, 0.0, 2.0],
        }
    }
}

/// A generated scene plus generator-known diagnostic masks.
#[derive(Debug, Clone)]
pub struct SynthScene {
    pub record: SceneRecord,
    /// Pixels covered by any moving shape in any frame position (the ghost
    /// envelope).
    pub ghost_mask: PixelMask,
    /// Pixels whose radiance clips in the longest exposure.
    pub clip_mask: PixelMask,
}

#[derive(Clone, Copy)]
enum ShapeKind {
    Disk { r: f64 },
    Rect { rw: f64, rh: f64 },
}

#[derive(Clone, Copy)]
struct Shape {
    kind: ShapeKind,
    cx: f64,
    cy: f64,
    albedo: [f64; 3],
    moving: bool,
    motion: (f64, f64),
}

impl Shape {
    /// Soft-edged coverage in [0, 1] at (x, y) given a frame offset scale.
    fn coverage(&self, x: f64, y: f64, offset_scale: f64) -> f64 {
        let (dx, dy) = if self.moving {
            (self.motion.0 * offset_scale, self.motion.1 * offset_scale)
        } else {
            (0.0, 0.0)
        };
        let px = x - (self.cx + dx);
        let py = y - (self.cy + dy);
        match self.kind {
            ShapeKind::Disk { r } => {
                let dist = (px * px + py * py).sqrt();
                (r + 0.75 - dist).clamp(0.0, 1.0)
            }
            ShapeKind::Rect { rw, rh } => {
                let cov_x = (rw + 0.75 - px.abs()).clamp(0.0, 1.0);
                let cov_y = (rh + 0.75 - py.abs()).clamp(0.0, 1.0);
                cov_x * cov_y
            }
        }
    }
}

struct SceneModel {
    background: Tensor,
    shapes: Vec<Shape>,
    bright: Vec<Shape>,
}

impl SceneModel {
    /// Radiance field with moving shapes displaced by `offset_scale`
    /// (-1 for the short exposure, 0 for the reference, +1 for the long).
    fn render(&self, h: usize, w: usize, offset_scale: f64) -> Tensor {
        let mut img = self.background.clone();
        for y in 0..h {
            for x in 0..w {
                let px = img.pixel_mut(y, x);
                for shape in self.shapes.iter().chain(self.bright.iter()) {
                    let cov = shape.coverage(x as f64, y as f64, offset_scale);
                    if cov > 0.0 {
                        for c in 0..3 {
                            px[c] = px[c] * (1.0 - cov) + shape.albedo[c] * cov;
                        }
                    }
                }
            }
        }
        img
    }
}

fn build_scene_model<R: Rng>(rng: &mut R, opts: &SynthOptions) -> SceneModel {
    let (h, w) = (opts.height, opts.width);
    // Scene-level appearance dials: a brightness scale and a color cast.
    // These vary strongly between scenes so a handful of labeled captures
    // cannot span the distribution.
    let brightness = rng.gen_range(0.35..1.25);
    let cast_raw: [f64; 3] = [
        rng.gen_range(0.55..1.45),
        rng.gen_range(0.55..1.45),
        rng.gen_range(0.55..1.45),
    ];
    let cast_mean = (cast_raw[0] + cast_raw[1] + cast_raw[2]) / 3.0;
    let cast: [f64; 3] = [
        cast_raw[0] / cast_mean,
        cast_raw[1] / cast_mean,
        cast_raw[2] / cast_mean,
    ];
    let tint = |v: f64, c: usize| (v * brightness * cast[c]).clamp(0.015, 0.22);

    // Smooth multi-sinusoid background, per channel, inside [0.015, 0.22].
    let mut waves = Vec::new();
    for _ in 0..3 {
        let fy = rng.gen_range(0.3..2.0) * std::f64::consts::TAU / h as f64;
        let fx = rng.gen_range(0.3..2.0) * std::f64::consts::TAU / w as f64;
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        let amp = rng.gen_range(0.02..0.055);
        let gains: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
        waves.push((fy, fx, phase, amp, gains));
    }
    let base: [f64; 3] = [
        rng.gen_range(0.05..0.16),
        rng.gen_range(0.05..0.16),
        rng.gen_range(0.05..0.16),
    ];
    let background = Tensor::from_fn(h, w, 3, |y, x, c| {
        let mut v = base[c];
        for (fy, fx, phase, amp, gains) in &waves {
            v += amp * gains[c] * (fy * y as f64 + fx * x as f64 + phase).sin();
        }
        tint(v, c)
    });

    let n_shapes = rng.gen_range(5..=12);
    let mut shapes = Vec::with_capacity(n_shapes);
    for i in 0..n_shapes {
        let kind = if rng.gen::<bool>() {
            ShapeKind::Disk {
                r: rng.gen_range(3.0..(h.min(w) as f64 / 4.5).max(4.0)),
            }
        } else {
            ShapeKind::Rect {
                rw: rng.gen_range(2.5..(w as f64 / 5.0).max(3.5)),
                rh: rng.gen_range(2.5..(h as f64 / 5.0).max(3.5)),
            }
        };
        let moving = i % 2 == 0 && opts.motion_px > 0.0;
        let angle = rng.gen_range(0.0..std::f64::consts::TAU);
        let mag = opts.motion_px * rng.gen_range(0.5..1.0);
        shapes.push(Shape {
            kind,
            cx: rng.gen_range(0.0..w as f64),
            cy: rng.gen_range(0.0..h as f64),
            albedo: [
                tint(rng.gen_range(0.05..0.3), 0).max(0.03),
                tint(rng.gen_range(0.05..0.3), 1).max(0.03),
                tint(rng.gen_range(0.05..0.3), 2).max(0.03),
            ],
            moving,
            motion: (mag * angle.cos(), mag * angle.sin()),
        });
    }

    let mut bright = Vec::new();
    if opts.allow_clipping {
        for _ in 0..rng.gen_range(1..=2) {
            let level = rng.gen_range(0.45..0.9);
            bright.push(Shape {
                kind: ShapeKind::Disk {
                    r: rng.gen_range(3.0..(h.min(w) as f64 / 5.0).max(4.0)),
                },
                cx: rng.gen_range(0.15 * w as f64..0.85 * w as f64),
                cy: rng.gen_range(0.15 * h as f64..0.85 * h as f64),
                albedo: [level, level * rng.gen_range(0.85..1.0), level * rng.gen_range(0.8..1.0)],
                moving: false,
                motion: (0.0, 0.0),
            });
        }
    }
    SceneModel {
        background,
        shapes,
        bright,
    }
}

/// Generate one synthetic scene: a smooth radiance field with geometric
/// shapes (half of them translating across frames as a ghost source) and a
/// saturation region, simulated into three bracketed LDR frames with
/// exposure-scaled noise. The ground truth is aligned to the middle frame.
pub fn synth_scene(seed: u64, opts: &SynthOptions) -> Result<SynthScene> {
    let (h, w) = (opts.height, opts.width);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x53594E54));
    let model = build_scene_model(&mut rng, opts);

    let gamma = 2.2;
    let t: Vec<f64> = opts.ev_stops.iter().map(|ev| (2.0f64).powf(*ev)).collect();
    let offsets = [-1.0, 0.0, 1.0];

    let mut gt = model.render(h, w, 0.0);
    if opts.quantize {
        gt = rgbe::quantize_to_rgbe_grid(&gt);
    }

    let mut frames = Vec::with_capacity(3);
    let mut long_exposure_radiance = None;
    for i in 0..3 {
        // Reference-frame radiance comes from the (possibly quantized)
        // ground truth so the inverse pipeline is exact on static pixels.
        let radiance = if offsets[i] == 0.0 {
            gt.clone()
        } else {
            model.render(h, w, offsets[i])
        };
        if i == 2 {
            long_exposure_radiance = Some(radiance.clone());
        }
        let mut noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x4E4F4953 + i as u64));
        let sigma = if opts.noise > 0.0 { opts.noise / t[i] } else { 0.0 };
        let mut frame = radiance.map(|v| (v * t[i]).clamp(0.0, 1.0).powf(1.0 / gamma));
        if sigma > 0.0 {
            let normal = rand_distr::Normal::new(0.0, sigma).expect("valid sigma");
            frame.map_inplace(|v| {
                (v + rand_distr::Distribution::sample(&normal, &mut noise_rng)).clamp(0.0, 1.0)
            });
        }
        if opts.quantize {
            frame.map_inplace(io::quantize_u16);
        }
        frames.push(frame);
    }

    let ghost_mask = PixelMask::from_fn(h, w, |y, x| {
        model.shapes.iter().any(|s| {
            s.moving
                && offsets
                    .iter()
                    .any(|&o| s.coverage(x as f64, y as f64, o) > 0.01)
        })
    });
    let t_max = t[2];
    let long_rad = long_exposure_radiance.expect("three frames rendered");
    let clip_mask = PixelMask::from_fn(h, w, |y, x| {
        long_rad.pixel(y, x).iter().any(|&v| v * t_max >= 1.0)
    });

    let burst = LdrBurst::new(
        [frames[0].clone(), frames[1].clone(), frames[2].clone()],
        [t[0], t[1], t[2]],
    )?;
    Ok(SynthScene {
        record: SceneRecord {
            scene_id: format!("scene_{seed:04}"),
            burst,
            gt: Some(HdrImage::new(gt)?),
        },
        ghost_mask,
        clip_mask,
    })
}

/// Generate `count` scenes with consecutive seeds starting at `base_seed`.
pub fn synth_dataset(base_seed: u64, count: usize, opts: &SynthOptions) -> Result<Vec<SynthScene>> {
    (0..count)
        .map(|i| synth_scene(base_seed + i as u64, opts))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hdr::{gamma_correct, PhotometricConfig};
    use tempfile::tempdir;

    #[test]
    fn synth_is_deterministic() {
        let opts = SynthOptions::from_difficulty(0.6, 24, 24);
        let a = synth_scene(9, &opts).unwrap();
        let b = synth_scene(9, &opts).unwrap();
        assert_eq!(a.record.burst, b.record.burst);
        assert_eq!(
            a.record.gt.as_ref().unwrap().data(),
            b.record.gt.as_ref().unwrap().data()
        );
        let c = synth_scene(10, &opts).unwrap();
        assert_ne!(a.record.burst.frame(1), c.record.burst.frame(1));
    }

    #[test]
    fn clean_scene_reference_frame_inverts_to_gt() {
        let opts = SynthOptions::clean(24, 24);
        let scene = synth_scene(3, &opts).unwrap();
        let corrected =
            gamma_correct(&scene.record.burst, &PhotometricConfig::default()).unwrap();
        let gt = scene.record.gt.unwrap();
        for (a, b) in corrected[1].as_slice().iter().zip(gt.data().as_slice()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn clean_scene_all_exposures_recover_gt_radiance() {
        let opts = SynthOptions::clean(20, 20);
        let scene = synth_scene(5, &opts).unwrap();
        let corrected =
            gamma_correct(&scene.record.burst, &PhotometricConfig::default()).unwrap();
        let gt = scene.record.gt.unwrap();
        for frame in &corrected {
            for (a, b) in frame.as_slice().iter().zip(gt.data().as_slice()) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn noisy_scene_recovers_gt_within_noise_tolerance_off_ghosts() {
        let mut opts = SynthOptions::from_difficulty(0.5, 32, 32);
        opts.noise = 0.004;
        let scene = synth_scene(11, &opts).unwrap();
        let corrected =
            gamma_correct(&scene.record.burst, &PhotometricConfig::default()).unwrap();
        let gt = scene.record.gt.unwrap();
        let t = scene.record.burst.exposure_times();
        for (i, frame) in corrected.iter().enumerate() {
            let mut errs = Vec::new();
            for y in 0..32 {
                for x in 0..32 {
                    if scene.ghost_mask.get(y, x) == 1 {
                        continue;
                    }
                    for c in 0..3 {
                        let truth = gt.data().at(y, x, c);
                        if truth * t[i] >= 0.995 {
                            continue; // clipped in this exposure
                        }
                        errs.push((frame.at(y, x, c) - truth).abs());
                    }
                }
            }
            errs.sort_by(f64::total_cmp);
            let p95 = errs[(errs.len() as f64 * 0.95) as usize];
            // Radiance error from LDR noise scales with the local slope of
            // x^gamma / t; 0.1 is a generous envelope for sigma = 4e-3.
            assert!(p95 < 0.1, "frame {i}: p95 {p95}");
        }
    }

    #[test]
    fn long_exposure_clips_exactly_the_bright_region() {
        let mut opts = SynthOptions::from_difficulty(0.4, 32, 32);
        opts.noise = 0.0;
        opts.quantize = false;
        let scene = synth_scene(21, &opts).unwrap();
        let frame2 = scene.record.burst.frame(2);
        let mut clipped = 0;
        for y in 0..32 {
            for x in 0..32 {
                let any_one = (0..3).any(|c| frame2.at(y, x, c) == 1.0);
                assert_eq!(
                    any_one,
                    scene.clip_mask.get(y, x) == 1,
                    "clip mismatch at ({y},{x})"
                );
                clipped += scene.clip_mask.get(y, x) as usize;
            }
        }
        assert!(clipped > 0, "scene has no saturated region");
    }

    #[test]
    fn scene_roundtrip_through_disk_is_bit_exact() {
        let dir = tempdir().unwrap();
        let opts = SynthOptions::from_difficulty(0.7, 16, 16);
        let scene = synth_scene(13, &opts).unwrap();
        write_scene(dir.path(), &scene.record).unwrap();
        let loaded = load_kalantari_scene(&dir.path().join(&scene.record.scene_id)).unwrap();
        assert_eq!(loaded.burst, scene.record.burst);
        assert_eq!(
            loaded.gt.unwrap().data(),
            scene.record.gt.unwrap().data()
        );
    }

    #[test]
    fn exposure_stops_parse_to_linear_times() {
        let dir = tempdir().unwrap();
        let scene_dir = dir.path().join("s0");
        let opts = SynthOptions::from_difficulty(0.0, 16, 16);
        let scene = synth_scene(1, &opts).unwrap();
        write_scene(dir.path(), &scene.record).unwrap();
        std::fs::rename(dir.path().join(&scene.record.scene_id), &scene_dir).unwrap();
        std::fs::write(scene_dir.join("exposure.txt"), "-2 0 2\n").unwrap();
        let rec = load_kalantari_scene(&scene_dir).unwrap();
        assert_eq!(rec.burst.exposure_times(), [0.25, 1.0, 4.0]);
    }

    #[test]
    fn missing_gt_loads_as_unlabeled() {
        let dir = tempdir().unwrap();
        let opts = SynthOptions::from_difficulty(0.0, 16, 16);
        let scene = synth_scene(2, &opts).unwrap();
        write_scene(dir.path(), &scene.record).unwrap();
        let scene_dir = dir.path().join(&scene.record.scene_id);
        std::fs::remove_file(scene_dir.join("gt.hdr")).unwrap();
        let rec = load_kalantari_scene(&scene_dir).unwrap();
        assert!(rec.gt.is_none());
    }

    #[test]
    fn ingestion_errors_are_descriptive() {
        let dir = tempdir().unwrap();
        let opts = SynthOptions::from_difficulty(0.0, 16, 16);
        let scene = synth_scene(3, &opts).unwrap();
        write_scene(dir.path(), &scene.record).unwrap();
        let scene_dir = dir.path().join(&scene.record.scene_id);

        std::fs::write(scene_dir.join("exposure.txt"), "-2 0\n").unwrap();
        let err = load_kalantari_scene(&scene_dir).unwrap_err().to_string();
        assert!(err.contains("3 stop values"), "{err}");

        std::fs::remove_file(scene_dir.join("ldr_1.tif")).unwrap();
        let err = load_kalantari_scene(&scene_dir).unwrap_err().to_string();
        assert!(err.contains("ldr_1.tif"), "{err}");
    }

    fn dummy_scenes(n: usize) -> Vec<SceneRecord> {
        let opts = SynthOptions::from_difficulty(0.0, 16, 16);
        (0..n)
            .map(|i| {
                let mut s = synth_scene(i as u64, &opts).unwrap().record;
                s.scene_id = format!("scene_{i:04}");
                s
            })
            .collect()
    }

    #[test]
    fn split_first_n_is_a_stable_prefix() {
        let (l5, _) = make_split(
            dummy_scenes(12),
            &SplitSpec {
                n_labeled: 5,
                seed: 0,
                policy: SplitPolicy::FirstN,
            },
        )
        .unwrap();
        let (l10, _) = make_split(
            dummy_scenes(12),
            &SplitSpec {
                n_labeled: 10,
                seed: 0,
                policy: SplitPolicy::FirstN,
            },
        )
        .unwrap();
        for i in 0..5 {
            assert_eq!(l5[i].scene_id, l10[i].scene_id);
        }
    }

    #[test]
    fn split_counts_and_disjointness() {
        // The paper-scale shape: 5 labeled of 74 leaves 69 unlabeled.
        let (labeled, unlabeled) = make_split(
            dummy_scenes(74),
            &SplitSpec {
                n_labeled: 5,
                seed: 3,
                policy: SplitPolicy::Random,
            },
        )
        .unwrap();
        assert_eq!(labeled.len(), 5);
        assert_eq!(unlabeled.len(), 69);
        let mut all: Vec<String> = labeled
            .iter()
            .chain(&unlabeled)
            .map(|s| s.scene_id.clone())
            .collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 74);
    }

    #[test]
    fn split_random_is_seed_deterministic_and_all_labeled_allowed() {
        let spec = SplitSpec {
            n_labeled: 4,
            seed: 9,
            policy: SplitPolicy::Random,
        };
        let (a, _) = make_split(dummy_scenes(10), &spec).unwrap();
        let (b, _) = make_split(dummy_scenes(10), &spec).unwrap();
        let ids = |v: &[SceneRecord]| v.iter().map(|s| s.scene_id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&a), ids(&b));

        let (all, none) = make_split(
            dummy_scenes(6),
            &SplitSpec {
                n_labeled: 6,
                seed: 0,
                policy: SplitPolicy::FirstN,
            },
        )
        .unwrap();
        assert_eq!(all.len(), 6);
        assert!(none.is_empty());
        assert!(make_split(
            dummy_scenes(3),
            &SplitSpec {
                n_labeled: 4,
                seed: 0,
                policy: SplitPolicy::FirstN,
            }
        )
        .is_err());
    }

    #[test]
    fn grid_patch_counts() {
        let opts = SynthOptions::from_difficulty(0.0, 64, 64);
        let scene = synth_scene(7, &opts).unwrap().record;
        let grid = PatchGrid::new(64, 32).unwrap();
        let patches = extract_patches(&scene, &grid, PatchMode::Grid, 0).unwrap();
        assert_eq!(patches.len(), 1);

        let opts = SynthOptions::from_difficulty(0.0, 128, 128);
        let scene = synth_scene(8, &opts).unwrap().record;
        let grid = PatchGrid::new(64, 32).unwrap();
        let patches = extract_patches(&scene, &grid, PatchMode::Grid, 0).unwrap();
        assert_eq!(patches.len(), 9);
    }

    #[test]
    fn grid_snaps_trailing_patch_to_boundary() {
        let opts = SynthOptions::from_difficulty(0.0, 50, 70);
        let scene = synth_scene(9, &opts).unwrap().record;
        let grid = PatchGrid::new(32, 16).unwrap();
        let patches = extract_patches(&scene, &grid, PatchMode::Grid, 0).unwrap();
        // ys: 0, 16, 18(snap); xs: 0, 16, 32, 38(snap)
        assert_eq!(patches.len(), 3 * 4);
        assert!(patches.iter().any(|p| p.patch_id.ends_with("/18x38")));
    }

    #[test]
    fn random_patches_are_reproducible() {
        let opts = SynthOptions::from_difficulty(0.0, 40, 40);
        let scene = synth_scene(10, &opts).unwrap().record;
        let grid = PatchGrid::new(16, 16).unwrap();
        let a = extract_patches(&scene, &grid, PatchMode::Random, 5).unwrap();
        let b = extract_patches(&scene, &grid, PatchMode::Random, 5).unwrap();
        let ids = |v: &[ScenePatch]| v.iter().map(|p| p.patch_id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&a), ids(&b));
        let c = extract_patches(&scene, &grid, PatchMode::Random, 6).unwrap();
        assert_ne!(ids(&a), ids(&c));
    }

    #[test]
    fn patches_stay_aligned_across_frames_and_gt() {
        // Coordinate-ramp scene: every plane encodes (y, x) so any
        // misalignment between frames and ground truth is visible.
        let h = 40;
        let w = 30;
        let ramp = Tensor::from_fn(h, w, 3, |y, x, c| match c {
            0 => y as f64 / h as f64,
            1 => x as f64 / w as f64,
            _ => 0.25,
        });
        let burst = LdrBurst::new(
            [ramp.clone(), ramp.clone(), ramp.clone()],
            [0.25, 1.0, 4.0],
        )
        .unwrap();
        let scene = SceneRecord {
            scene_id: "ramp".into(),
            burst,
            gt: Some(HdrImage::new(ramp).unwrap()),
        };
        let grid = PatchGrid::new(16, 8).unwrap();
        for mode in [PatchMode::Grid, PatchMode::Random] {
            for patch in extract_patches(&scene, &grid, mode, 3).unwrap() {
                let gt = patch.gt.as_ref().unwrap();
                for i in 0..3 {
                    assert_eq!(patch.burst.frame(i), gt.data());
                }
            }
        }
    }

    #[test]
    fn patch_larger_than_scene_errors() {
        let opts = SynthOptions::from_difficulty(0.0, 16, 16);
        let scene = synth_scene(12, &opts).unwrap().record;
        let grid = PatchGrid::new(32, 16).unwrap();
        assert!(extract_patches(&scene, &grid, PatchMode::Grid, 0).is_err());
    }
}
