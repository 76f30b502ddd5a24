//! Two-stage training orchestration: warm-up on labeled patches, teacher
//! initialization, then semi-supervised epochs with per-epoch pseudo-label
//! regeneration. Writes the resolved config, an append-only metrics log
//! (one line per epoch), periodic checkpoints, and a final report.

use crate::config::RunConfig;
use crate::data::{
    extract_patches, load_dataset, make_split, PatchGrid, PatchMode, SceneRecord, SplitSpec,
};
use crate::error::{Error, Result};
use crate::evaluate::{evaluate_model, validation_psnr_mu, EvalReport};
use crate::features::ConvFeatureExtractor;
use crate::io::checkpoint;
use crate::model::ReferenceModel;
use crate::nn::Adam;
use crate::semisup::{
    derive_seed, generate_pseudo_pool, init_teacher, normalize_and_mask, training_epoch,
    EpochMetrics, ScenePatch, Stage, TrainContext, TrainerState,
};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

const TAG_MODEL: u64 = 0x4D4F_4445;
const TAG_SPLIT: u64 = 0x5350_4C49;
const TAG_TRAIN: u64 = 0x5452_4149;

/// Result of a full training run.
pub struct TrainOutcome {
    pub run_dir: PathBuf,
    pub metrics: Vec<EpochMetrics>,
    pub final_report: EvalReport,
    /// Manifest path of the final student checkpoint.
    pub student_checkpoint: PathBuf,
}

/// One metrics-log line, fixed field order and formatting.
pub fn format_log_line(m: &EpochMetrics) -> String {
    format!(
        "epoch={} stage={} ls_r={:.6} ls_v={:.6} ls_k={:.6} lu_r={:.6} lu_v={:.6} lu_k={:.6} kept_patch_fraction={:.6} unmasked_pixel_fraction={:.6} val_psnr_mu={:.6}",
        m.epoch + 1,
        if m.stage_semi { "semi" } else { "warmup" },
        m.ls_r,
        m.ls_v,
        m.ls_k,
        m.lu_r,
        m.lu_v,
        m.lu_k,
        m.kept_patch_fraction,
        m.unmasked_pixel_fraction,
        m.val_psnr_mu,
    )
}

fn patches_of(
    scenes: &[SceneRecord],
    grid: &PatchGrid,
    keep_gt: bool,
    seed: u64,
) -> Result<Vec<ScenePatch>> {
    let mut out = Vec::new();
    for scene in scenes {
        let mut patches = extract_patches(scene, grid, PatchMode::Grid, seed)?;
        if !keep_gt {
            // The trainer must never read ground truth on the pseudo
            // branch; strip it so misuse cannot compile in quietly.
            for p in &mut patches {
                p.gt = None;
            }
        }
        out.extend(patches);
    }
    Ok(out)
}

fn save_state(state: &TrainerState, dir: &Path) -> Result<PathBuf> {
    let student = dir.join("student.manifest");
    checkpoint::save(&state.student, state.step, &student)?;
    if let Some(teacher) = &state.teacher {
        checkpoint::save(teacher, state.step, &dir.join("teacher.manifest"))?;
    }
    Ok(student)
}

/// Train on in-memory scenes. `val_scenes` falls back to the labeled
/// subset when empty (diagnostic validation only).
pub fn run_training(
    cfg: &RunConfig,
    scenes: Vec<SceneRecord>,
    val_scenes: Vec<SceneRecord>,
    run_dir: &Path,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let seed = cfg.resolve_seed()?;
    let photometric = cfg.photometric();
    let grid = PatchGrid::new(cfg.patch.size, cfg.patch.stride)?;
    let toggles = cfg.toggles();

    let (labeled_scenes, unlabeled_scenes) = make_split(
        scenes,
        &SplitSpec {
            n_labeled: cfg.data.n_labeled,
            seed: derive_seed(seed, TAG_SPLIT),
            policy: cfg.split_policy(),
        },
    )?;
    let labeled_patches = patches_of(&labeled_scenes, &grid, true, seed)?;
    let unlabeled_patches = patches_of(&unlabeled_scenes, &grid, false, seed)?;
    let val_scenes = if val_scenes.is_empty() {
        labeled_scenes.clone()
    } else {
        val_scenes
    };

    fs::create_dir_all(run_dir)?;
    fs::write(run_dir.join("config.toml"), cfg.to_toml())?;
    let mut log = fs::File::create(run_dir.join("metrics.log"))?;

    let extractor = ConvFeatureExtractor::new(cfg.model.feature_seed, &cfg.model.feature_layers)?;
    let student = ReferenceModel::new(derive_seed(seed, TAG_MODEL), cfg.model.width);
    let optimizer = Adam::new(
        student.param_count(),
        cfg.train.lr,
        cfg.train.adam_beta1,
        cfg.train.adam_beta2,
        cfg.train.adam_eps,
    );
    let mut state = TrainerState::new(student, optimizer, derive_seed(seed, TAG_TRAIN));
    let ctx = TrainContext {
        photometric,
        weights: cfg.loss_weights(),
        toggles,
        extractor: &extractor,
        batch_size: cfg.train.batch_size,
        steps_per_epoch: cfg.train.steps_per_epoch,
        alpha: cfg.semisup.alpha,
    };

    let mut metrics = Vec::with_capacity(cfg.train.epochs);
    let mut last_val = 0.0f64;
    for epoch in 0..cfg.train.epochs {
        if toggles.enable_mt && epoch == cfg.train.warmup_epochs && state.teacher.is_none() {
            init_teacher(&mut state)?;
        }
        let pool = if state.stage == Stage::Semi && toggles.enable_mt {
            let teacher = state.teacher.as_ref().expect("semi stage has a teacher");
            let raw = generate_pseudo_pool(teacher, &unlabeled_patches, &photometric)?;
            normalize_and_mask(raw, &cfg.thresholds())
        } else {
            Vec::new()
        };

        // Snapshot for the abort path: the last finite state.
        let snapshot = state.student.clone();
        let snapshot_step = state.step;
        let mut m = match training_epoch(&mut state, &labeled_patches, &pool, &unlabeled_patches, &ctx)
        {
            Ok(m) => m,
            Err(e @ Error::NonFiniteLoss { .. }) => {
                let abort_dir = run_dir.join("checkpoints").join("abort");
                checkpoint::save(&snapshot, snapshot_step, &abort_dir.join("student.manifest"))?;
                return Err(e);
            }
            Err(e) => return Err(e),
        };

        let is_last = epoch + 1 == cfg.train.epochs;
        if (epoch + 1) % cfg.output.val_every == 0 || is_last {
            last_val = validation_psnr_mu(&state.student, &val_scenes, &photometric, &grid)?;
        }
        m.val_psnr_mu = last_val;
        writeln!(log, "{}", format_log_line(&m))?;
        log.flush()?;
        metrics.push(m);

        if (epoch + 1) % cfg.output.checkpoint_every == 0 && !is_last {
            save_state(
                &state,
                &run_dir.join("checkpoints").join(format!("epoch_{:04}", epoch + 1)),
            )?;
        }
    }

    let student_checkpoint = save_state(&state, &run_dir.join("checkpoints").join("final"))?;
    let final_report = evaluate_model(&state.student, &val_scenes, &photometric, &grid)?;
    fs::write(run_dir.join("report.txt"), final_report.to_text())?;
    Ok(TrainOutcome {
        run_dir: run_dir.to_path_buf(),
        metrics,
        final_report,
        student_checkpoint,
    })
}

/// Load datasets from the configured roots and train.
pub fn run_training_from_disk(cfg: &RunConfig) -> Result<TrainOutcome> {
    if cfg.data.root.is_empty() {
        return Err(Error::Config("data.root is not set".into()));
    }
    let scenes = load_dataset(Path::new(&cfg.data.root))?;
    let val_scenes = match &cfg.data.val_root {
        Some(root) => load_dataset(Path::new(root))?,
        None => Vec::new(),
    };
    let run_dir = PathBuf::from(&cfg.output.run_dir);
    run_training(cfg, scenes, val_scenes, &run_dir)
}
