//! Teacher-student machinery: EMA weight averaging, per-epoch pseudo-label
//! pools, pool-wide score normalization with bi-level (patch + pixel)
//! masking, augmentation policies, and the per-epoch training step loop.
//!
//! Masking rule: normalized scores are compared strictly (`score < tau`
//! keeps). A score exactly equal to the threshold is rejected, so `tau = 0`
//! disables pseudo training entirely and `tau > 1` keeps everything.

use crate::error::{Error, Result};
use crate::features::FeatureExtractor;
use crate::hdr::{assemble_input, HdrImage, LdrBurst, PhotometricConfig};
use crate::losses::{
    perceptual_loss_grad, recon_loss_grad, total_loss, uncertainty_loss_grads, BranchTerms,
    LossWeights,
};
use crate::mask::PixelMask;
use crate::model::{Backbone, ReferenceModel};
use crate::nn::Adam;
use crate::tensor::Tensor;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Deterministic stream derivation (splitmix64 over a tagged base seed).
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Training stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Warmup,
    Semi,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Warmup => "warmup",
            Stage::Semi => "semi",
        }
    }
}

/// Which parts of the pipeline are active. The full method enables all.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AblationToggles {
    /// Mean-teacher branch (pseudo labels at all).
    pub enable_mt: bool,
    /// Uncertainty-aware loss term.
    pub enable_unc_loss: bool,
    /// Patch-level masking of pseudo labels.
    pub enable_patch_mask: bool,
    /// Pixel-level masking of pseudo labels.
    pub enable_pixel_mask: bool,
    /// Strong augmentation on the pseudo branch.
    pub enable_strong_aug: bool,
}

impl Default for AblationToggles {
    fn default() -> Self {
        AblationToggles::full()
    }
}

impl AblationToggles {
    pub fn full() -> Self {
        AblationToggles {
            enable_mt: true,
            enable_unc_loss: true,
            enable_patch_mask: true,
            enable_pixel_mask: true,
            enable_strong_aug: true,
        }
    }

    pub fn baseline() -> Self {
        AblationToggles {
            enable_mt: false,
            enable_unc_loss: false,
            enable_patch_mask: false,
            enable_pixel_mask: false,
            enable_strong_aug: false,
        }
    }

    /// Masks require the uncertainty loss; everything beyond the baseline
    /// requires the mean teacher.
    pub fn validate(&self) -> Result<()> {
        if (self.enable_patch_mask || self.enable_pixel_mask) && !self.enable_unc_loss {
            return Err(Error::Config(
                "patch/pixel masking requires the uncertainty loss".into(),
            ));
        }
        if (self.enable_unc_loss
            || self.enable_patch_mask
            || self.enable_pixel_mask
            || self.enable_strong_aug)
            && !self.enable_mt
        {
            return Err(Error::Config(
                "all modules beyond the baseline require the mean teacher".into(),
            ));
        }
        Ok(())
    }
}

/// Patch/pixel mask thresholds. Values above 1 keep everything; 0 rejects
/// everything (the comparison is strict).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskThresholds {
    pub tau_pa: f64,
    pub tau_pi: f64,
}

impl Default for MaskThresholds {
    fn default() -> Self {
        MaskThresholds {
            tau_pa: 0.4,
            tau_pi: 0.4,
        }
    }
}

impl MaskThresholds {
    pub fn new(tau_pa: f64, tau_pi: f64) -> Result<Self> {
        if !tau_pa.is_finite() || !tau_pi.is_finite() || tau_pa < 0.0 || tau_pi < 0.0 {
            return Err(Error::InvalidInput(format!(
                "thresholds must be finite and non-negative, got ({tau_pa}, {tau_pi})"
            )));
        }
        Ok(MaskThresholds { tau_pa, tau_pi })
    }
}

/// One aligned training patch: a burst crop plus (for labeled scenes) the
/// ground-truth crop. Unlabeled patches may still carry the ground truth
/// for diagnostics; the trainer never reads it on the pseudo branch.
#[derive(Debug, Clone)]
pub struct ScenePatch {
    pub patch_id: String,
    pub burst: LdrBurst,
    pub gt: Option<HdrImage>,
}

/// A teacher-produced pseudo ground truth with its uncertainty scores.
///
/// After [`generate_pseudo_pool`] the scores are raw (unnormalized); after
/// [`normalize_and_mask`] `patch_score` and `pixel_scores` hold
/// pool-normalized values in [0, 1], `kept` reflects the patch-level
/// threshold, and `pixel_mask` the pixel-level one.
#[derive(Debug, Clone)]
pub struct PseudoLabelRecord {
    /// Index into the unlabeled patch list this record was produced from.
    pub patch_index: usize,
    pub patch_id: String,
    /// Teacher HDR prediction for the patch.
    pub hdr: HdrImage,
    /// Teacher uncertainty map (`H x W x 3`).
    pub uncertainty: Tensor,
    /// Patch-level score: raw mean, then pool-normalized.
    pub patch_score: f64,
    /// Per-pixel channel means (`H x W x 1`): raw, then pool-normalized.
    pub pixel_scores: Tensor,
    pub pixel_mask: PixelMask,
    pub kept: bool,
}

/// Student + teacher parameters, optimizer state, and schedule counters.
pub struct TrainerState {
    pub student: ReferenceModel,
    pub teacher: Option<ReferenceModel>,
    pub optimizer: Adam,
    pub epoch: usize,
    pub step: u64,
    pub rng_seed: u64,
    pub stage: Stage,
}

impl TrainerState {
    pub fn new(student: ReferenceModel, optimizer: Adam, rng_seed: u64) -> Self {
        TrainerState {
            student,
            teacher: None,
            optimizer,
            epoch: 0,
            step: 0,
            rng_seed,
            stage: Stage::Warmup,
        }
    }
}

/// Elementwise EMA: `teacher <- alpha * teacher + (1 - alpha) * student`.
pub fn ema_update_params(teacher: &mut [f64], student: &[f64], alpha: f64) -> Result<()> {
    if teacher.len() != student.len() {
        return Err(Error::shape("ema_update", teacher.len(), student.len()));
    }
    for (t, &s) in teacher.iter_mut().zip(student) {
        *t = alpha * *t + (1.0 - alpha) * s;
    }
    Ok(())
}

/// EMA step on the trainer state; requires the semi stage with an
/// initialized teacher. Applied once per student optimizer step.
pub fn ema_update(state: &mut TrainerState, alpha: f64) -> Result<()> {
    if state.stage != Stage::Semi {
        return Err(Error::InvalidInput(
            "ema_update requires the semi-supervised stage".into(),
        ));
    }
    let teacher = state
        .teacher
        .as_mut()
        .ok_or_else(|| Error::InvalidInput("ema_update before init_teacher".into()))?;
    ema_update_params(teacher.parameters_mut(), state.student.parameters(), alpha)
}

/// Deep-copy the student into the teacher and enter the semi stage.
/// Erroring on a second call keeps the schedule single-shot.
pub fn init_teacher(state: &mut TrainerState) -> Result<()> {
    if state.teacher.is_some() {
        return Err(Error::InvalidInput("teacher already initialized".into()));
    }
    state.teacher = Some(state.student.clone());
    state.stage = Stage::Semi;
    Ok(())
}

/// Run the teacher over every unlabeled patch, collecting pseudo HDR
/// outputs and raw uncertainty scores. No parameters are mutated; the
/// fan-out is merged back in patch order.
pub fn generate_pseudo_pool(
    teacher: &ReferenceModel,
    unlabeled_patches: &[ScenePatch],
    photometric: &PhotometricConfig,
) -> Result<Vec<PseudoLabelRecord>> {
    unlabeled_patches
        .par_iter()
        .enumerate()
        .map(|(index, patch)| {
            let input = assemble_input(&patch.burst, photometric)?;
            let (pred, unc, _) = teacher.forward_full(&input)?;
            let unc = unc.into_tensor();
            let (h, w, _) = unc.shape();
            let mut pixel_scores = Tensor::zeros(h, w, 1);
            for y in 0..h {
                for x in 0..w {
                    let px = unc.pixel(y, x);
                    pixel_scores.set(y, x, 0, (px[0] + px[1] + px[2]) / 3.0);
                }
            }
            Ok(PseudoLabelRecord {
                patch_index: index,
                patch_id: patch.patch_id.clone(),
                hdr: pred,
                uncertainty: unc.clone(),
                patch_score: unc.mean(),
                pixel_scores,
                pixel_mask: PixelMask::ones(h, w),
                kept: false,
            })
        })
        .collect()
}

/// Pool-wide min-max normalization of patch and pixel scores, followed by
/// thresholding. Constant score pools normalize to all zeros (nothing can
/// be discriminated, so everything stays below any positive threshold).
pub fn normalize_and_mask(
    mut pool: Vec<PseudoLabelRecord>,
    thresholds: &MaskThresholds,
) -> Vec<PseudoLabelRecord> {
    if pool.is_empty() {
        return pool;
    }
    // Patch level.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for rec in &pool {
        lo = lo.min(rec.patch_score);
        hi = hi.max(rec.patch_score);
    }
    for rec in &mut pool {
        rec.patch_score = if hi > lo {
            (rec.patch_score - lo) / (hi - lo)
        } else {
            0.0
        };
        rec.kept = rec.patch_score < thresholds.tau_pa;
    }
    // Pixel level, min-max over all pixels of all records.
    let mut plo = f64::INFINITY;
    let mut phi = f64::NEG_INFINITY;
    for rec in &pool {
        for &v in rec.pixel_scores.as_slice() {
            plo = plo.min(v);
            phi = phi.max(v);
        }
    }
    for rec in &mut pool {
        let (h, w, _) = rec.pixel_scores.shape();
        let mut mask = PixelMask::zeros(h, w);
        rec.pixel_scores.map_inplace(|v| {
            if phi > plo {
                (v - plo) / (phi - plo)
            } else {
                0.0
            }
        });
        for y in 0..h {
            for x in 0..w {
                mask.set(y, x, rec.pixel_scores.at(y, x, 0) < thresholds.tau_pi);
            }
        }
        rec.pixel_mask = mask;
    }
    pool
}

/// One augmentation primitive. The same spatial op applies to every frame,
/// the target, and the mask; a channel shuffle applies to frames and
/// target only (masks are channel-agnostic).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugOp {
    HFlip,
    VFlip,
    Rot90Cw,
    Rot90Ccw,
    RgbShuffle([usize; 3]),
}

/// Policy family an op list was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugKind {
    WeakLabeled,
    StrongUnlabeled,
}

/// An ordered list of augmentation ops drawn from one policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentationSpec {
    pub kind: AugKind,
    pub ops: Vec<AugOp>,
}

impl AugmentationSpec {
    pub fn identity(kind: AugKind) -> Self {
        AugmentationSpec { kind, ops: vec![] }
    }

    pub fn new(kind: AugKind, ops: Vec<AugOp>) -> Result<Self> {
        for op in &ops {
            let allowed = match kind {
                AugKind::WeakLabeled => matches!(op, AugOp::VFlip | AugOp::Rot90Cw),
                AugKind::StrongUnlabeled => {
                    matches!(op, AugOp::HFlip | AugOp::Rot90Ccw | AugOp::RgbShuffle(_))
                }
            };
            if !allowed {
                return Err(Error::InvalidInput(format!(
                    "op {op:?} not in the {kind:?} op set"
                )));
            }
            if let AugOp::RgbShuffle(p) = op {
                let mut sorted = *p;
                sorted.sort_unstable();
                if sorted != [0, 1, 2] {
                    return Err(Error::InvalidInput(format!("{p:?} is not a permutation")));
                }
            }
        }
        Ok(AugmentationSpec { kind, ops })
    }
}

const RGB_PERMS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Weak policy for labeled data: vertical flip then 90-degree clockwise
/// rotation, each applied with probability 1/2.
pub fn sample_weak_spec<R: Rng>(rng: &mut R) -> AugmentationSpec {
    let mut ops = Vec::new();
    if rng.gen::<bool>() {
        ops.push(AugOp::VFlip);
    }
    if rng.gen::<bool>() {
        ops.push(AugOp::Rot90Cw);
    }
    AugmentationSpec {
        kind: AugKind::WeakLabeled,
        ops,
    }
}

/// Strong policy for pseudo-labeled data: horizontal flip (p = 1/2), then
/// 90-degree counterclockwise rotation (p = 1/2), then with p = 1/2 an RGB
/// shuffle drawn uniformly over all six permutations.
pub fn sample_strong_spec<R: Rng>(rng: &mut R) -> AugmentationSpec {
    let mut ops = Vec::new();
    if rng.gen::<bool>() {
        ops.push(AugOp::HFlip);
    }
    if rng.gen::<bool>() {
        ops.push(AugOp::Rot90Ccw);
    }
    if rng.gen::<bool>() {
        let perm = RGB_PERMS[rng.gen_range(0..RGB_PERMS.len())];
        ops.push(AugOp::RgbShuffle(perm));
    }
    AugmentationSpec {
        kind: AugKind::StrongUnlabeled,
        ops,
    }
}

/// Apply an augmentation spec consistently to a burst, its target, and an
/// optional pixel mask.
pub fn apply_augmentation(
    spec: &AugmentationSpec,
    burst: &LdrBurst,
    target: &HdrImage,
    mask: Option<&PixelMask>,
) -> Result<(LdrBurst, HdrImage, Option<PixelMask>)> {
    let mut burst = burst.clone();
    let mut target_t = target.data().clone();
    let mut mask = mask.cloned();
    for op in &spec.ops {
        match op {
            AugOp::HFlip => {
                burst = burst.map_frames(|f| f.hflip())?;
                target_t = target_t.hflip();
                mask = mask.map(|m| m.hflip());
            }
            AugOp::VFlip => {
                burst = burst.map_frames(|f| f.vflip())?;
                target_t = target_t.vflip();
                mask = mask.map(|m| m.vflip());
            }
            AugOp::Rot90Cw => {
                burst = burst.map_frames(|f| f.rot90_cw())?;
                target_t = target_t.rot90_cw();
                mask = mask.map(|m| m.rot90_cw());
            }
            AugOp::Rot90Ccw => {
                burst = burst.map_frames(|f| f.rot90_ccw())?;
                target_t = target_t.rot90_ccw();
                mask = mask.map(|m| m.rot90_ccw());
            }
            AugOp::RgbShuffle(perm) => {
                burst = burst.map_frames(|f| {
                    f.permute_channels(perm).expect("3-channel frames")
                })?;
                target_t = target_t.permute_channels(perm)?;
            }
        }
    }
    Ok((burst, HdrImage::new(target_t)?, mask))
}

/// Everything a training epoch needs beyond the data.
pub struct TrainContext<'a> {
    pub photometric: PhotometricConfig,
    pub weights: LossWeights,
    pub toggles: AblationToggles,
    pub extractor: &'a dyn FeatureExtractor,
    pub batch_size: usize,
    /// Override for the number of steps; defaults to one labeled pass.
    pub steps_per_epoch: Option<usize>,
    /// EMA coefficient.
    pub alpha: f64,
}

/// Per-epoch aggregate losses and pool statistics, in metrics-log order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub stage_semi: bool,
    pub ls_r: f64,
    pub ls_v: f64,
    pub ls_k: f64,
    pub lu_r: f64,
    pub lu_v: f64,
    pub lu_k: f64,
    pub kept_patch_fraction: f64,
    pub unmasked_pixel_fraction: f64,
    pub val_psnr_mu: f64,
}

struct SampleTask {
    burst: LdrBurst,
    target: HdrImage,
    mask: Option<PixelMask>,
    pseudo: bool,
}

struct SampleResult {
    terms: BranchTerms,
    grads: Vec<f64>,
}

fn run_sample(
    student: &ReferenceModel,
    ctx: &TrainContext,
    task: &SampleTask,
    batch: f64,
) -> Result<SampleResult> {
    let input = assemble_input(&task.burst, &ctx.photometric)?;
    let cache = student.forward_train(&input)?;
    let pred = cache.prediction();
    let target = task.target.data();
    let mask = task.mask.as_ref();

    let (l_r, g_r) = recon_loss_grad(pred, target, &ctx.photometric, mask)?;
    let (l_v, g_v) = perceptual_loss_grad(pred, target, &ctx.photometric, ctx.extractor)?;
    let mut terms = BranchTerms {
        recon: l_r,
        perceptual: l_v,
        uncertainty: 0.0,
    };

    let scale = if task.pseudo { ctx.weights.lambda_u } else { 1.0 } / batch;
    let mut d_pred = g_r.zip_map(&g_v, |a, b| (a + ctx.weights.lambda_v * b) * scale)?;
    let mut d_sigma = Tensor::zeros(pred.height(), pred.width(), pred.channels());

    if ctx.toggles.enable_unc_loss {
        // The residual is detached from the prediction path on pseudo data.
        let (l_k, g_p, g_s) = uncertainty_loss_grads(
            pred,
            target,
            cache.sigma(),
            &ctx.photometric,
            mask,
            task.pseudo,
        )?;
        terms.uncertainty = l_k;
        d_pred = d_pred.zip_map(&g_p, |a, b| a + b * scale)?;
        d_sigma = g_s.scale(scale);
    }

    let grads = student.backward(&cache, &d_pred, &d_sigma)?;
    Ok(SampleResult { terms, grads })
}

/// One epoch of student training: per step, a labeled batch (weak
/// augmentation) and — in the semi stage — a pseudo batch (kept records
/// only, pixel masks applied, strong augmentation when enabled), one Adam
/// step, one EMA update. Batches cycle through shuffled orders.
pub fn training_epoch(
    state: &mut TrainerState,
    labeled: &[ScenePatch],
    pseudo_pool: &[PseudoLabelRecord],
    unlabeled_patches: &[ScenePatch],
    ctx: &TrainContext,
) -> Result<EpochMetrics> {
    if labeled.is_empty() {
        return Err(Error::InvalidInput("no labeled patches".into()));
    }
    if state.stage == Stage::Warmup && !pseudo_pool.is_empty() {
        return Err(Error::InvalidInput(
            "pseudo loader must be empty during warm-up".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(state.rng_seed, 0x45504F43 + state.epoch as u64));

    let mut labeled_order: Vec<usize> = (0..labeled.len()).collect();
    labeled_order.shuffle(&mut rng);

    // Kept records only when patch masking is on; the whole pool otherwise.
    let active_records: Vec<&PseudoLabelRecord> = if ctx.toggles.enable_patch_mask {
        pseudo_pool.iter().filter(|r| r.kept).collect()
    } else {
        pseudo_pool.iter().collect()
    };
    let mut pseudo_order: Vec<usize> = (0..active_records.len()).collect();
    pseudo_order.shuffle(&mut rng);

    let use_pseudo =
        ctx.toggles.enable_mt && state.stage == Stage::Semi && !active_records.is_empty();
    let batch = ctx.batch_size.max(1);
    let steps = ctx
        .steps_per_epoch
        .unwrap_or_else(|| labeled.len().div_ceil(batch))
        .max(1);

    let mut sums = EpochMetrics {
        epoch: state.epoch,
        stage_semi: state.stage == Stage::Semi,
        ..EpochMetrics::default()
    };
    if !pseudo_pool.is_empty() {
        sums.kept_patch_fraction =
            pseudo_pool.iter().filter(|r| r.kept).count() as f64 / pseudo_pool.len() as f64;
        if !active_records.is_empty() {
            let mut total = 0.0;
            for r in &active_records {
                total += if ctx.toggles.enable_pixel_mask {
                    r.pixel_mask.kept_fraction()
                } else {
                    1.0
                };
            }
            sums.unmasked_pixel_fraction = total / active_records.len() as f64;
        }
    }

    let mut labeled_cursor = 0usize;
    let mut pseudo_cursor = 0usize;

    for _ in 0..steps {
        let mut tasks: Vec<SampleTask> = Vec::with_capacity(batch * 2);
        let mut n_labeled = 0usize;
        for _ in 0..batch {
            if labeled_cursor == labeled.len() {
                labeled_cursor = 0;
                labeled_order.shuffle(&mut rng);
            }
            let patch = &labeled[labeled_order[labeled_cursor]];
            labeled_cursor += 1;
            let gt = patch
                .gt
                .as_ref()
                .ok_or_else(|| Error::InvalidInput("labeled patch without ground truth".into()))?;
            let spec = sample_weak_spec(&mut rng);
            let (burst, target, _) = apply_augmentation(&spec, &patch.burst, gt, None)?;
            tasks.push(SampleTask {
                burst,
                target,
                mask: None,
                pseudo: false,
            });
            n_labeled += 1;
        }
        let mut n_pseudo = 0usize;
        if use_pseudo {
            for _ in 0..batch {
                if pseudo_cursor == active_records.len() {
                    pseudo_cursor = 0;
                    pseudo_order.shuffle(&mut rng);
                }
                let rec = active_records[pseudo_order[pseudo_cursor]];
                pseudo_cursor += 1;
                let patch = &unlabeled_patches[rec.patch_index];
                let mask = if ctx.toggles.enable_pixel_mask {
                    Some(rec.pixel_mask.clone())
                } else {
                    None
                };
                let spec = if ctx.toggles.enable_strong_aug {
                    sample_strong_spec(&mut rng)
                } else {
                    sample_weak_spec(&mut rng)
                };
                // Weak specs only contain label-consistent ops, so reuse of
                // the strong apply path is safe for both.
                let (burst, target, mask) =
                    apply_augmentation(&spec, &patch.burst, &rec.hdr, mask.as_ref())?;
                tasks.push(SampleTask {
                    burst,
                    target,
                    mask,
                    pseudo: true,
                });
                n_pseudo += 1;
            }
        }

        let results: Vec<Result<SampleResult>> = tasks
            .par_iter()
            .map(|t| {
                run_sample(
                    &state.student,
                    ctx,
                    t,
                    if t.pseudo { n_pseudo as f64 } else { n_labeled as f64 },
                )
            })
            .collect();

        let mut grads = vec![0.0; state.student.param_count()];
        let mut sup = BranchTerms::default();
        let mut uns = BranchTerms::default();
        for (task, result) in tasks.iter().zip(results) {
            let r = result?;
            for (g, s) in grads.iter_mut().zip(&r.grads) {
                *g += s;
            }
            let (branch, n) = if task.pseudo {
                (&mut uns, n_pseudo as f64)
            } else {
                (&mut sup, n_labeled as f64)
            };
            branch.recon += r.terms.recon / n;
            branch.perceptual += r.terms.perceptual / n;
            branch.uncertainty += r.terms.uncertainty / n;
        }

        // Aborts on a non-finite term, naming it.
        total_loss(
            &sup,
            if n_pseudo > 0 { Some(&uns) } else { None },
            &ctx.weights,
            state.step,
        )?;

        state.optimizer.step(state.student.parameters_mut(), &grads);
        state.step += 1;
        if state.stage == Stage::Semi {
            ema_update(state, ctx.alpha)?;
        }

        sums.ls_r += sup.recon;
        sums.ls_v += sup.perceptual;
        sums.ls_k += sup.uncertainty;
        sums.lu_r += uns.recon;
        sums.lu_v += uns.perceptual;
        sums.lu_k += uns.uncertainty;
    }

    let n = steps as f64;
    sums.ls_r /= n;
    sums.ls_v /= n;
    sums.ls_k /= n;
    sums.lu_r /= n;
    sums.lu_v /= n;
    sums.lu_k /= n;
    state.epoch += 1;
    Ok(sums)
}
