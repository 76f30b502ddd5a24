//! `hdrssl` — train, evaluate, and inspect the semi-supervised HDR
//! reconstruction pipeline.
//!
//! Exit codes: 0 success, 2 invalid configuration or usage, 3 numerical
//! abort (non-finite loss), 1 any other failure.

use clap::{Args, Parser, Subcommand};
use hdrssl_core::ablate::run_ablation;
use hdrssl_core::config::RunConfig;
use hdrssl_core::data::{
    load_dataset, synth_dataset, write_scene, PatchGrid, PatchMode, SynthOptions,
};
use hdrssl_core::error::Error as CoreError;
use hdrssl_core::io::{checkpoint, write_png8};
use hdrssl_core::semisup::{generate_pseudo_pool, normalize_and_mask, AblationToggles, MaskThresholds};
use hdrssl_core::train::run_training_from_disk;
use hdrssl_core::viz::render_mask_viz;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "hdrssl",
    version,
    about = "Semi-supervised multi-exposure HDR reconstruction"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the two-stage training schedule.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset with ground truths.
    Eval(EvalArgs),
    /// Generate the pseudo-label pool of a checkpoint over a dataset.
    PseudoGen(PseudoGenArgs),
    /// Render pseudo-label masking visualizations for one scene.
    MaskViz(MaskVizArgs),
    /// Run the seven-row module ablation with a shared seed and budget.
    Ablate(AblateArgs),
    /// Generate a synthetic bracketed dataset.
    SynthGen(SynthGenArgs),
}

/// Hyperparameter overrides; every flag maps onto exactly one config field.
#[derive(Args, Clone, Default)]
struct Overrides {
    /// Dataset root (data.root)
    #[arg(long)]
    data: Option<String>,
    /// Validation dataset root (data.val_root)
    #[arg(long)]
    val_data: Option<String>,
    /// Run output directory (output.run_dir)
    #[arg(long)]
    out: Option<String>,
    /// Labeled scene count (data.n_labeled)
    #[arg(long)]
    n_labeled: Option<usize>,
    /// Split policy: first_n or random (data.split_policy)
    #[arg(long)]
    split_policy: Option<String>,
    /// Total epochs (train.epochs)
    #[arg(long)]
    epochs: Option<usize>,
    /// Warm-up epochs (train.warmup_epochs)
    #[arg(long)]
    warmup_epochs: Option<usize>,
    /// Batch size (train.batch_size)
    #[arg(long)]
    batch_size: Option<usize>,
    /// Learning rate (train.lr)
    #[arg(long)]
    lr: Option<f64>,
    /// Master seed (train.seed)
    #[arg(long)]
    seed: Option<u64>,
    /// Steps per epoch (train.steps_per_epoch)
    #[arg(long)]
    steps_per_epoch: Option<usize>,
    /// Backbone width (model.width)
    #[arg(long)]
    width: Option<usize>,
    /// Gamma correction exponent (photometric.gamma)
    #[arg(long)]
    gamma: Option<f64>,
    /// Mu-law compression (photometric.mu)
    #[arg(long)]
    mu: Option<f64>,
    /// EMA coefficient (semisup.alpha)
    #[arg(long)]
    alpha: Option<f64>,
    /// Unsupervised loss weight (semisup.lambda_u)
    #[arg(long)]
    lambda_u: Option<f64>,
    /// Perceptual loss weight (semisup.lambda_v)
    #[arg(long)]
    lambda_v: Option<f64>,
    /// Patch-level mask threshold (semisup.tau_pa)
    #[arg(long)]
    tau_pa: Option<f64>,
    /// Pixel-level mask threshold (semisup.tau_pi)
    #[arg(long)]
    tau_pi: Option<f64>,
    /// Training patch size (patch.size)
    #[arg(long)]
    patch: Option<usize>,
    /// Patch stride (patch.stride)
    #[arg(long)]
    stride: Option<usize>,
    /// Checkpoint cadence in epochs (output.checkpoint_every)
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Validation cadence in epochs (output.val_every)
    #[arg(long)]
    val_every: Option<usize>,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) {
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = &$value {
                    $field = v.clone();
                }
            };
        }
        set!(cfg.data.root, self.data);
        if self.val_data.is_some() {
            cfg.data.val_root = self.val_data.clone();
        }
        set!(cfg.output.run_dir, self.out);
        set!(cfg.data.n_labeled, self.n_labeled);
        set!(cfg.data.split_policy, self.split_policy);
        set!(cfg.train.epochs, self.epochs);
        set!(cfg.train.warmup_epochs, self.warmup_epochs);
        set!(cfg.train.batch_size, self.batch_size);
        set!(cfg.train.lr, self.lr);
        if self.seed.is_some() {
            cfg.train.seed = self.seed;
        }
        if self.steps_per_epoch.is_some() {
            cfg.train.steps_per_epoch = self.steps_per_epoch;
        }
        set!(cfg.model.width, self.width);
        set!(cfg.photometric.gamma, self.gamma);
        set!(cfg.photometric.mu, self.mu);
        set!(cfg.semisup.alpha, self.alpha);
        set!(cfg.semisup.lambda_u, self.lambda_u);
        set!(cfg.semisup.lambda_v, self.lambda_v);
        set!(cfg.semisup.tau_pa, self.tau_pa);
        set!(cfg.semisup.tau_pi, self.tau_pi);
        set!(cfg.patch.size, self.patch);
        set!(cfg.patch.stride, self.stride);
        set!(cfg.output.checkpoint_every, self.checkpoint_every);
        set!(cfg.output.val_every, self.val_every);
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Config file (TOML); defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Module preset: bl, mt, unc, pam, pim, both, full.
    #[arg(long)]
    ablation: Option<String>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint manifest path.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset root with ground truths.
    #[arg(long)]
    data: PathBuf,
    /// Optional report output path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    patch: usize,
    #[arg(long, default_value_t = 32)]
    stride: usize,
    #[arg(long, default_value_t = 2.2)]
    gamma: f64,
    #[arg(long, default_value_t = 5000.0)]
    mu: f64,
}

#[derive(Args)]
struct PseudoGenArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Output TSV path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.4)]
    tau_pa: f64,
    #[arg(long, default_value_t = 0.4)]
    tau_pi: f64,
    #[arg(long, default_value_t = 64)]
    patch: usize,
    #[arg(long, default_value_t = 32)]
    stride: usize,
    #[arg(long, default_value_t = 2.2)]
    gamma: f64,
    #[arg(long, default_value_t = 5000.0)]
    mu: f64,
}

#[derive(Args)]
struct MaskVizArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Scene id (directory name) to render.
    #[arg(long)]
    scene: String,
    /// Output directory for the PNGs and stats.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.4)]
    tau_pa: f64,
    #[arg(long, default_value_t = 0.4)]
    tau_pi: f64,
    #[arg(long, default_value_t = 64)]
    patch: usize,
    #[arg(long, default_value_t = 32)]
    stride: usize,
    #[arg(long, default_value_t = 2.2)]
    gamma: f64,
    #[arg(long, default_value_t = 5000.0)]
    mu: f64,
}

#[derive(Args)]
struct AblateArgs {
    /// Config file (TOML); the reduced ablation budget applies on top.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct SynthGenArgs {
    /// Output dataset root.
    #[arg(long)]
    out: PathBuf,
    /// Number of scenes.
    #[arg(long, default_value_t = 45)]
    scenes: usize,
    #[arg(long, default_value_t = 64)]
    height: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    /// Difficulty dial in [0, 1]: scales motion and noise.
    #[arg(long, default_value_t = 0.5)]
    difficulty: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn ablation_preset(name: &str) -> Result<AblationToggles, CoreError> {
    let mut t = AblationToggles::baseline();
    match name {
        "bl" => {}
        "mt" => t.enable_mt = true,
        "unc" => {
            t.enable_mt = true;
            t.enable_unc_loss = true;
        }
        "pam" => {
            t.enable_mt = true;
            t.enable_unc_loss = true;
            t.enable_patch_mask = true;
        }
        "pim" => {
            t.enable_mt = true;
            t.enable_unc_loss = true;
            t.enable_pixel_mask = true;
        }
        "both" => {
            t.enable_mt = true;
            t.enable_unc_loss = true;
            t.enable_patch_mask = true;
            t.enable_pixel_mask = true;
        }
        "full" => t = AblationToggles::full(),
        other => {
            return Err(CoreError::Config(format!(
                "unknown ablation preset {other:?} (expected bl|mt|unc|pam|pim|both|full)"
            )))
        }
    }
    Ok(t)
}

fn load_config(path: &Option<PathBuf>) -> anyhow::Result<RunConfig> {
    match path {
        Some(p) => Ok(RunConfig::load(p)?),
        None => Ok(RunConfig::default()),
    }
}

fn cmd_train(args: TrainArgs) -> anyhow::Result<()> {
    let mut cfg = load_config(&args.config)?;
    args.overrides.apply(&mut cfg);
    if let Some(preset) = &args.ablation {
        let toggles = ablation_preset(preset)?;
        cfg.set_toggles(toggles);
        if preset == "bl" {
            cfg.semisup.lambda_u = 0.0;
        }
    }
    cfg.validate()?;
    let outcome = run_training_from_disk(&cfg)?;
    println!("run dir: {}", outcome.run_dir.display());
    println!(
        "final validation: psnr_mu={:.4} psnr_l={:.4} ssim_mu={:.6} ssim_l={:.6}",
        outcome.final_report.mean_psnr_mu,
        outcome.final_report.mean_psnr_l,
        outcome.final_report.mean_ssim_mu,
        outcome.final_report.mean_ssim_l
    );
    println!("student checkpoint: {}", outcome.student_checkpoint.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> anyhow::Result<()> {
    let (model, _) = checkpoint::load(&args.checkpoint)?;
    let scenes = load_dataset(&args.data)?;
    let photometric = hdrssl_core::PhotometricConfig::new(args.gamma, args.mu)?;
    let grid = PatchGrid::new(args.patch, args.stride)?;
    let report = hdrssl_core::evaluate::evaluate_model(&model, &scenes, &photometric, &grid)?;
    let text = report.to_text();
    print!("{text}");
    if let Some(out) = &args.out {
        if let Some(dir) = out.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(out, &text)?;
    }
    Ok(())
}

fn cmd_pseudo_gen(args: PseudoGenArgs) -> anyhow::Result<()> {
    let (model, _) = checkpoint::load(&args.checkpoint)?;
    let scenes = load_dataset(&args.data)?;
    let photometric = hdrssl_core::PhotometricConfig::new(args.gamma, args.mu)?;
    let grid = PatchGrid::new(args.patch, args.stride)?;
    let thresholds = MaskThresholds::new(args.tau_pa, args.tau_pi)?;
    let mut patches = Vec::new();
    for scene in &scenes {
        patches.extend(hdrssl_core::data::extract_patches(
            scene,
            &grid,
            PatchMode::Grid,
            0,
        )?);
    }
    let pool = generate_pseudo_pool(&model, &patches, &photometric)?;
    let pool = normalize_and_mask(pool, &thresholds);
    let mut tsv = String::from("patch_id\tpatch_score\tkept\tunmasked_pixel_fraction\n");
    for rec in &pool {
        tsv.push_str(&format!(
            "{}\t{:.6}\t{}\t{:.6}\n",
            rec.patch_id,
            rec.patch_score,
            u8::from(rec.kept),
            rec.pixel_mask.kept_fraction()
        ));
    }
    if let Some(dir) = args.out.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(&args.out, tsv)?;
    let kept = pool.iter().filter(|r| r.kept).count();
    println!(
        "pool: {} patches, {} kept ({:.1}%), written to {}",
        pool.len(),
        kept,
        100.0 * kept as f64 / pool.len().max(1) as f64,
        args.out.display()
    );
    Ok(())
}

fn cmd_mask_viz(args: MaskVizArgs) -> anyhow::Result<()> {
    let (model, _) = checkpoint::load(&args.checkpoint)?;
    let scenes = load_dataset(&args.data)?;
    let scene = scenes
        .iter()
        .find(|s| s.scene_id == args.scene)
        .ok_or_else(|| {
            CoreError::InvalidInput(format!(
                "scene {:?} not found under {}",
                args.scene,
                args.data.display()
            ))
        })?;
    let photometric = hdrssl_core::PhotometricConfig::new(args.gamma, args.mu)?;
    let grid = PatchGrid::new(args.patch, args.stride)?;
    let thresholds = MaskThresholds::new(args.tau_pa, args.tau_pi)?;
    let out = render_mask_viz(&model, scene, &thresholds, &photometric, &grid)?;
    fs::create_dir_all(&args.out)?;
    write_png8(&args.out.join("pseudo_tonemapped.png"), &out.pseudo_tonemapped)?;
    write_png8(
        &args.out.join("uncertainty_heatmap.png"),
        &out.uncertainty_heatmap,
    )?;
    write_png8(&args.out.join("patch_overlay.png"), &out.patch_overlay)?;
    write_png8(&args.out.join("pixel_mask.png"), &out.pixel_mask)?;
    fs::write(args.out.join("stats.txt"), out.stats.to_text())?;
    println!(
        "wrote 4 images to {} (pool {}, kept {})",
        args.out.display(),
        out.stats.pool_size,
        out.stats.kept_patches
    );
    Ok(())
}

fn cmd_ablate(args: AblateArgs) -> anyhow::Result<()> {
    let mut cfg = load_config(&args.config)?;
    // Reduced default budget for the study; explicit flags still win.
    cfg.train.epochs = 40;
    cfg.train.warmup_epochs = 8;
    args.overrides.apply(&mut cfg);
    cfg.validate()?;
    if cfg.data.root.is_empty() {
        return Err(CoreError::Config("data.root is not set (use --data)".into()).into());
    }
    let scenes = load_dataset(Path::new(&cfg.data.root))?;
    let val_scenes = match &cfg.data.val_root {
        Some(root) => load_dataset(Path::new(root))?,
        None => Vec::new(),
    };
    let out_dir = PathBuf::from(&cfg.output.run_dir);
    let table = run_ablation(&cfg, &scenes, &val_scenes, &out_dir)?;
    let text = table.to_text();
    print!("{text}");
    fs::create_dir_all(&out_dir)?;
    fs::write(out_dir.join("ablation.txt"), &text)?;
    Ok(())
}

fn cmd_synth_gen(args: SynthGenArgs) -> anyhow::Result<()> {
    let opts = SynthOptions::from_difficulty(args.difficulty, args.height, args.width);
    let scenes = synth_dataset(args.seed, args.scenes, &opts)?;
    fs::create_dir_all(&args.out)?;
    for scene in &scenes {
        write_scene(&args.out, &scene.record)?;
    }
    println!(
        "wrote {} scenes ({}x{}, difficulty {}) to {}",
        scenes.len(),
        args.height,
        args.width,
        args.difficulty,
        args.out.display()
    );
    Ok(())
}

/// Exit code policy: invalid config or usage 2, numerical abort 3,
/// anything else 1.
fn exit_code_for(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<CoreError>() {
        Some(CoreError::Config(_)) => 2,
        Some(CoreError::NonFiniteLoss { .. }) => 3,
        _ => 1,
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Train(args) => cmd_train(args),
        Cmd::Eval(args) => cmd_eval(args),
        Cmd::PseudoGen(args) => cmd_pseudo_gen(args),
        Cmd::MaskViz(args) => cmd_mask_viz(args),
        Cmd::Ablate(args) => cmd_ablate(args),
        Cmd::SynthGen(args) => cmd_synth_gen(args),
    };
    match result {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(exit_code_for(&err));
        }
    }
}
