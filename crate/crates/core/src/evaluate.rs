//! Evaluation reports: per-scene and mean PSNR/SSIM in both domains.
//!
//! Scenes with infinite PSNR (bit-identical reconstruction) are excluded
//! from the PSNR means and listed separately; averaging infinities is
//! undefined.

use crate::data::{PatchGrid, SceneRecord};
use crate::error::{Error, Result};
use crate::hdr::{HdrImage, PhotometricConfig};
use crate::infer::reconstruct_full;
use crate::metrics::{psnr_linear, psnr_mu, ssim_linear, ssim_mu};
use crate::model::Backbone;
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneScores {
    pub scene_id: String,
    pub psnr_mu: f64,
    pub psnr_l: f64,
    pub ssim_mu: f64,
    pub ssim_l: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<SceneScores>,
    /// Means over scenes with finite PSNR.
    pub mean_psnr_mu: f64,
    pub mean_psnr_l: f64,
    pub mean_ssim_mu: f64,
    pub mean_ssim_l: f64,
    /// Scenes whose reconstruction matched the ground truth exactly.
    pub infinite_psnr_scenes: Vec<String>,
}

/// Score a list of (scene id, prediction, ground truth) triples.
pub fn score_predictions(
    preds: &[(String, HdrImage, HdrImage)],
    photometric: &PhotometricConfig,
) -> Result<EvalReport> {
    if preds.is_empty() {
        return Err(Error::InvalidInput("nothing to evaluate".into()));
    }
    let mut rows = Vec::with_capacity(preds.len());
    for (scene_id, pred, gt) in preds {
        rows.push(SceneScores {
            scene_id: scene_id.clone(),
            psnr_mu: psnr_mu(pred.data(), gt.data(), photometric)?,
            psnr_l: psnr_linear(pred.data(), gt.data())?,
            ssim_mu: ssim_mu(pred.data(), gt.data(), photometric)?,
            ssim_l: ssim_linear(pred.data(), gt.data())?,
        });
    }
    rows.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));

    let finite: Vec<&SceneScores> = rows.iter().filter(|r| r.psnr_mu.is_finite()).collect();
    let infinite_psnr_scenes: Vec<String> = rows
        .iter()
        .filter(|r| !r.psnr_mu.is_finite())
        .map(|r| r.scene_id.clone())
        .collect();
    let n = finite.len().max(1) as f64;
    let mean = |f: fn(&SceneScores) -> f64| finite.iter().map(|r| f(r)).sum::<f64>() / n;
    Ok(EvalReport {
        mean_psnr_mu: mean(|r| r.psnr_mu),
        mean_psnr_l: mean(|r| r.psnr_l),
        mean_ssim_mu: mean(|r| r.ssim_mu),
        mean_ssim_l: mean(|r| r.ssim_l),
        rows,
        infinite_psnr_scenes,
    })
}

/// Tiled full-image evaluation of a model over scenes with ground truth.
pub fn evaluate_model(
    model: &dyn Backbone,
    scenes: &[SceneRecord],
    photometric: &PhotometricConfig,
    grid: &PatchGrid,
) -> Result<EvalReport> {
    let preds: Vec<(String, HdrImage, HdrImage)> = scenes
        .par_iter()
        .filter_map(|scene| scene.gt.as_ref().map(|gt| (scene, gt)))
        .map(|(scene, gt)| {
            let pred = reconstruct_full(model, &scene.burst, photometric, grid)?;
            Ok((scene.scene_id.clone(), pred, gt.clone()))
        })
        .collect::<Result<_>>()?;
    score_predictions(&preds, photometric)
}

/// Mean validation PSNR-mu only (the per-epoch metric).
pub fn validation_psnr_mu(
    model: &dyn Backbone,
    scenes: &[SceneRecord],
    photometric: &PhotometricConfig,
    grid: &PatchGrid,
) -> Result<f64> {
    Ok(evaluate_model(model, scenes, photometric, grid)?.mean_psnr_mu)
}

fn fmt_db(v: f64) -> String {
    if v.is_finite() {
        format!("{v:9.4}")
    } else {
        format!("{:>9}", "inf")
    }
}

impl EvalReport {
    /// Fixed-width text table, one row per scene plus the mean row.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<24} {:>9} {:>9} {:>9} {:>9}\n",
            "scene", "psnr_mu", "psnr_l", "ssim_mu", "ssim_l"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<24} {} {} {:9.6} {:9.6}\n",
                r.scene_id,
                fmt_db(r.psnr_mu),
                fmt_db(r.psnr_l),
                r.ssim_mu,
                r.ssim_l
            ));
        }
        out.push_str(&format!(
            "{:<24} {:9.4} {:9.4} {:9.6} {:9.6}\n",
            "mean", self.mean_psnr_mu, self.mean_psnr_l, self.mean_ssim_mu, self.mean_ssim_l
        ));
        if self.infinite_psnr_scenes.is_empty() {
            out.push_str("exact-match scenes excluded from psnr means: none\n");
        } else {
            out.push_str(&format!(
                "exact-match scenes excluded from psnr means: {}\n",
                self.infinite_psnr_scenes.join(", ")
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_scene, SynthOptions};
    use crate::model::ReferenceModel;
    use crate::tensor::Tensor;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_hdr(seed: u64) -> HdrImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        HdrImage::new(Tensor::from_fn(16, 16, 3, |_, _, _| rng.gen())).unwrap()
    }

    #[test]
    fn identical_prediction_reports_sentinel_and_unit_ssim() {
        let gt = random_hdr(1);
        let report = score_predictions(
            &[("s0".into(), gt.clone(), gt.clone())],
            &PhotometricConfig::default(),
        )
        .unwrap();
        assert!(report.rows[0].psnr_mu.is_infinite());
        assert!((report.rows[0].ssim_mu - 1.0).abs() < 1e-12);
        assert_eq!(report.infinite_psnr_scenes, vec!["s0".to_string()]);
        let text = report.to_text();
        assert!(text.contains("inf"), "{text}");
        assert!(text.contains("excluded from psnr means: s0"), "{text}");
    }

    #[test]
    fn mean_is_arithmetic_mean_of_finite_rows() {
        let gt0 = random_hdr(2);
        let gt1 = random_hdr(3);
        let pred0 = HdrImage::new(gt0.data().map(|v| (v + 0.05).clamp(0.0, 1.0))).unwrap();
        let pred1 = HdrImage::new(gt1.data().map(|v| (v + 0.1).clamp(0.0, 1.0))).unwrap();
        let cfg = PhotometricConfig::default();
        let report = score_predictions(
            &[
                ("a".into(), pred0, gt0.clone()),
                ("b".into(), pred1, gt1.clone()),
                ("c".into(), gt1.clone(), gt1),
            ],
            &cfg,
        )
        .unwrap();
        let finite: Vec<&SceneScores> = report
            .rows
            .iter()
            .filter(|r| r.psnr_mu.is_finite())
            .collect();
        assert_eq!(finite.len(), 2);
        let expect = (finite[0].psnr_mu + finite[1].psnr_mu) / 2.0;
        assert!((report.mean_psnr_mu - expect).abs() < 1e-12);
    }

    #[test]
    fn evaluate_model_is_deterministic_over_scenes() {
        let model = ReferenceModel::new(3, 4);
        let opts = SynthOptions::from_difficulty(0.4, 16, 16);
        let scenes: Vec<SceneRecord> = (0..3)
            .map(|i| synth_scene(40 + i, &opts).unwrap().record)
            .collect();
        let grid = PatchGrid::new(16, 8).unwrap();
        let cfg = PhotometricConfig::default();
        let a = evaluate_model(&model, &scenes, &cfg, &grid).unwrap();
        let b = evaluate_model(&model, &scenes, &cfg, &grid).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 3);
    }
}
