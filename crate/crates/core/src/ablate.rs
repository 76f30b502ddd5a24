//! Ablation harness: the seven-row module study (baseline through the full
//! method) run with a shared seed and budget, reporting validation
//! PSNR-mu / SSIM-mu per row.

use crate::config::RunConfig;
use crate::data::SceneRecord;
use crate::error::Result;
use crate::semisup::AblationToggles;
use crate::train::run_training;
use std::path::Path;

/// Row labels and their module stacks, in study order.
pub const ROW_LABELS: [(&str, &str); 7] = [
    ("i", "BL"),
    ("ii", "BL+MT"),
    ("iii", "BL+MT+Lk"),
    ("iv", "BL+MT+Lk+PaM"),
    ("v", "BL+MT+Lk+PiM"),
    ("vi", "BL+MT+Lk+PaM+PiM"),
    ("vii", "BL+MT+Lk+PaM+PiM+SAug"),
];

/// Toggle stack of ablation row `idx` (0-based).
pub fn row_toggles(idx: usize) -> AblationToggles {
    let mut t = AblationToggles::baseline();
    if idx >= 1 {
        t.enable_mt = true;
    }
    if idx >= 2 {
        t.enable_unc_loss = true;
    }
    match idx {
        3 => t.enable_patch_mask = true,
        4 => t.enable_pixel_mask = true,
        5 | 6 => {
            t.enable_patch_mask = true;
            t.enable_pixel_mask = true;
        }
        _ => {}
    }
    if idx == 6 {
        t.enable_strong_aug = true;
    }
    t
}

#[derive(Debug, Clone)]
pub struct AblationRow {
    pub label: String,
    pub modules: String,
    pub psnr_mu: f64,
    pub ssim_mu: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<5} {:<24} {:>9} {:>9}\n",
            "row", "modules", "psnr_mu", "ssim_mu"
        ));
        for r in &self.rows {
            match &r.error {
                Some(e) => {
                    out.push_str(&format!("{:<5} {:<24} failed: {e}\n", r.label, r.modules))
                }
                None => out.push_str(&format!(
                    "{:<5} {:<24} {:9.4} {:9.6}\n",
                    r.label, r.modules, r.psnr_mu, r.ssim_mu
                )),
            }
        }
        out
    }

    pub fn psnr_of(&self, label: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.label == label && r.error.is_none())
            .map(|r| r.psnr_mu)
    }
}

/// Run all seven rows with the shared seed and budget from `cfg`.
/// Per-row failures are recorded and the remaining rows still run.
pub fn run_ablation(
    cfg: &RunConfig,
    scenes: &[SceneRecord],
    val_scenes: &[SceneRecord],
    out_dir: &Path,
) -> Result<AblationTable> {
    let mut rows = Vec::with_capacity(ROW_LABELS.len());
    for (idx, (label, modules)) in ROW_LABELS.iter().enumerate() {
        let mut row_cfg = cfg.clone();
        row_cfg.set_toggles(row_toggles(idx));
        let run_dir = out_dir.join(format!("row_{label}"));
        match run_training(&row_cfg, scenes.to_vec(), val_scenes.to_vec(), &run_dir) {
            Ok(outcome) => rows.push(AblationRow {
                label: (*label).into(),
                modules: (*modules).into(),
                psnr_mu: outcome.final_report.mean_psnr_mu,
                ssim_mu: outcome.final_report.mean_ssim_mu,
                error: None,
            }),
            Err(e) => rows.push(AblationRow {
                label: (*label).into(),
                modules: (*modules).into(),
                psnr_mu: f64::NAN,
                ssim_mu: f64::NAN,
                error: Some(e.to_string()),
            }),
        }
    }
    Ok(AblationTable { rows })
}
