//! Run configuration: a sectioned key-value file (TOML) with every
//! hyperparameter defaulted, range-validated at parse time, and unknown
//! keys rejected. The resolved configuration can be re-serialized; feeding
//! it back reproduces the identical run.

use crate::data::SplitPolicy;
use crate::error::{Error, Result};
use crate::hdr::PhotometricConfig;
use crate::losses::LossWeights;
use crate::semisup::{AblationToggles, MaskThresholds};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Environment variable consulted for the seed when neither the CLI nor
/// the config file provides one.
pub const SEED_ENV_VAR: &str = "HDRSSL_SEED";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    /// Dataset root (scene directories).
    pub root: String,
    /// Optional held-out validation dataset root.
    pub val_root: Option<String>,
    /// Number of scenes whose ground truth the trainer may see.
    pub n_labeled: usize,
    /// "first_n" or "random".
    pub split_policy: String,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            root: String::new(),
            val_root: None,
            n_labeled: 5,
            split_policy: "first_n".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhotometricSection {
    pub gamma: f64,
    pub mu: f64,
}

impl Default for PhotometricSection {
    fn default() -> Self {
        PhotometricSection {
            gamma: 2.2,
            mu: 5000.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// Channel width of the reference backbone.
    pub width: usize,
    /// Seed offset of the frozen perceptual feature extractor.
    pub feature_seed: u64,
    /// Which extractor levels feed the perceptual loss.
    pub feature_layers: Vec<usize>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            width: 32,
            feature_seed: 9001,
            feature_layers: vec![0, 1, 2],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub warmup_epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: Option<u64>,
    /// Steps per epoch; absent means one pass over the labeled patches.
    pub steps_per_epoch: Option<usize>,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            epochs: 200,
            warmup_epochs: 30,
            batch_size: 64,
            lr: 2e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: None,
            steps_per_epoch: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SemisupSection {
    /// EMA coefficient.
    pub alpha: f64,
    pub lambda_u: f64,
    pub lambda_v: f64,
    pub tau_pa: f64,
    pub tau_pi: f64,
}

impl Default for SemisupSection {
    fn default() -> Self {
        SemisupSection {
            alpha: 0.999,
            lambda_u: 1.0,
            lambda_v: 0.01,
            tau_pa: 0.4,
            tau_pi: 0.4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PatchSection {
    pub size: usize,
    pub stride: usize,
}

impl Default for PatchSection {
    fn default() -> Self {
        PatchSection {
            size: 64,
            stride: 32,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub run_dir: String,
    /// Checkpoints are written every this many epochs (plus at the end).
    pub checkpoint_every: usize,
    /// Validation PSNR cadence in epochs.
    pub val_every: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            run_dir: "run".into(),
            checkpoint_every: 10,
            val_every: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationSection {
    pub enable_mt: bool,
    pub enable_unc_loss: bool,
    pub enable_patch_mask: bool,
    pub enable_pixel_mask: bool,
    pub enable_strong_aug: bool,
}

impl Default for AblationSection {
    fn default() -> Self {
        AblationSection {
            enable_mt: true,
            enable_unc_loss: true,
            enable_patch_mask: true,
            enable_pixel_mask: true,
            enable_strong_aug: true,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataSection,
    pub photometric: PhotometricSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub semisup: SemisupSection,
    pub patch: PatchSection,
    pub output: OutputSection,
    pub ablation: AblationSection,
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        check(self.data.n_labeled >= 1, || "n_labeled must be >= 1".into())?;
        check(
            self.data.split_policy == "first_n" || self.data.split_policy == "random",
            || format!("split_policy must be first_n or random, got {:?}", self.data.split_policy),
        )?;
        check(self.photometric.gamma > 0.0 && self.photometric.gamma.is_finite(), || {
            format!("gamma must be positive, got {}", self.photometric.gamma)
        })?;
        check(self.photometric.mu > 0.0 && self.photometric.mu.is_finite(), || {
            format!("mu must be positive, got {}", self.photometric.mu)
        })?;
        check(self.model.width >= 2, || "model width must be >= 2".into())?;
        check(
            !self.model.feature_layers.is_empty()
                && self.model.feature_layers.iter().all(|&l| l < 3),
            || "feature_layers must be a non-empty subset of 0..3".into(),
        )?;
        check(self.train.epochs >= 1, || "epochs must be >= 1".into())?;
        check(self.train.warmup_epochs <= self.train.epochs, || {
            format!(
                "warmup_epochs ({}) cannot exceed epochs ({})",
                self.train.warmup_epochs, self.train.epochs
            )
        })?;
        check(self.train.batch_size >= 1, || "batch_size must be >= 1".into())?;
        check(self.train.lr > 0.0 && self.train.lr.is_finite(), || {
            format!("lr must be positive, got {}", self.train.lr)
        })?;
        check(
            (0.0..1.0).contains(&self.train.adam_beta1)
                && (0.0..1.0).contains(&self.train.adam_beta2),
            || "adam betas must lie in [0, 1)".into(),
        )?;
        check(self.train.adam_eps > 0.0, || "adam_eps must be positive".into())?;
        check(
            (0.0..=1.0).contains(&self.semisup.alpha),
            || format!("alpha must lie in [0, 1], got {}", self.semisup.alpha),
        )?;
        check(
            self.semisup.lambda_u >= 0.0 && self.semisup.lambda_v >= 0.0,
            || "lambda weights must be non-negative".into(),
        )?;
        check(
            (0.0..=1.0).contains(&self.semisup.tau_pa)
                && (0.0..=1.0).contains(&self.semisup.tau_pi),
            || "mask thresholds must lie in [0, 1]".into(),
        )?;
        check(self.patch.size > 0, || "patch size must be positive".into())?;
        check(
            self.patch.stride >= 1 && self.patch.stride <= self.patch.size,
            || "stride must lie in 1..=patch_size".into(),
        )?;
        check(self.output.checkpoint_every >= 1, || {
            "checkpoint_every must be >= 1".into()
        })?;
        check(self.output.val_every >= 1, || "val_every must be >= 1".into())?;
        self.toggles().validate()?;
        Ok(())
    }

    /// Master seed: config value, else the HDRSSL_SEED environment
    /// variable, else 0.
    pub fn resolve_seed(&self) -> Result<u64> {
        if let Some(seed) = self.train.seed {
            return Ok(seed);
        }
        match std::env::var(SEED_ENV_VAR) {
            Ok(v) => v
                .trim()
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("{SEED_ENV_VAR}={v:?} is not a u64"))),
            Err(_) => Ok(0),
        }
    }

    pub fn split_policy(&self) -> SplitPolicy {
        if self.data.split_policy == "random" {
            SplitPolicy::Random
        } else {
            SplitPolicy::FirstN
        }
    }

    pub fn photometric(&self) -> PhotometricConfig {
        PhotometricConfig {
            gamma: self.photometric.gamma,
            mu: self.photometric.mu,
        }
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            lambda_u: self.semisup.lambda_u,
            lambda_v: self.semisup.lambda_v,
        }
    }

    pub fn thresholds(&self) -> MaskThresholds {
        MaskThresholds {
            tau_pa: self.semisup.tau_pa,
            tau_pi: self.semisup.tau_pi,
        }
    }

    pub fn toggles(&self) -> AblationToggles {
        AblationToggles {
            enable_mt: self.ablation.enable_mt,
            enable_unc_loss: self.ablation.enable_unc_loss,
            enable_patch_mask: self.ablation.enable_patch_mask,
            enable_pixel_mask: self.ablation.enable_pixel_mask,
            enable_strong_aug: self.ablation.enable_strong_aug,
        }
    }

    pub fn set_toggles(&mut self, t: AblationToggles) {
        self.ablation = AblationSection {
            enable_mt: t.enable_mt,
            enable_unc_loss: t.enable_unc_loss,
            enable_patch_mask: t.enable_patch_mask,
            enable_pixel_mask: t.enable_pixel_mask,
            enable_strong_aug: t.enable_strong_aug,
        };
    }
}
