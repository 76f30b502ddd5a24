//! Loss terms and their composition.
//!
//! All pixel losses operate in the tonemapped domain: predictions and
//! targets are mu-law mapped before differencing. The uncertainty-aware
//! term is a Gaussian negative-log-likelihood over the same tonemapped
//! residuals, with the score floored at [`SIGMA_FLOOR`] so the log term
//! stays bounded.
//!
//! A pixel mask, when supplied, is broadcast over channels and the loss is
//! normalized by `3 * (mask sum)`; an all-zero mask yields exactly 0. The
//! perceptual term never takes a pixel mask: feature maps lose pixel
//! correspondence after striding.

use crate::error::{Error, Result};
use crate::features::FeatureExtractor;
use crate::hdr::{tonemap_derivative, tonemap_scalar, PhotometricConfig};
use crate::mask::PixelMask;
use crate::tensor::Tensor;

/// Lower bound applied to uncertainty scores before the NLL term.
pub const SIGMA_FLOOR: f64 = 1e-3;

/// Weights of the composite objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Trade-off between supervised and unsupervised groups.
    pub lambda_u: f64,
    /// Weight of the perceptual term inside each group.
    pub lambda_v: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_u: 1.0,
            lambda_v: 0.01,
        }
    }
}

impl LossWeights {
    pub fn new(lambda_u: f64, lambda_v: f64) -> Result<Self> {
        if lambda_u < 0.0 || !lambda_u.is_finite() || lambda_v < 0.0 || !lambda_v.is_finite() {
            return Err(Error::InvalidInput(format!(
                "loss weights must be non-negative, got lambda_u={lambda_u}, lambda_v={lambda_v}"
            )));
        }
        Ok(LossWeights { lambda_u, lambda_v })
    }
}

fn check_shapes(pred: &Tensor, target: &Tensor, mask: Option<&PixelMask>, ctx: &'static str) -> Result<()> {
    if !pred.same_shape(target) {
        return Err(Error::shape(
            ctx,
            format!("{:?}", pred.shape()),
            format!("{:?}", target.shape()),
        ));
    }
    if let Some(m) = mask {
        if m.height() != pred.height() || m.width() != pred.width() {
            return Err(Error::shape(
                ctx,
                format!("{}x{}", pred.height(), pred.width()),
                format!("mask {}x{}", m.height(), m.width()),
            ));
        }
    }
    Ok(())
}

#[inline]
fn mask_weight(mask: Option<&PixelMask>, y: usize, x: usize) -> f64 {
    match mask {
        Some(m) => f64::from(m.get(y, x)),
        None => 1.0,
    }
}

fn mask_normalizer(mask: Option<&PixelMask>, h: usize, w: usize, c: usize) -> f64 {
    match mask {
        Some(m) => c as f64 * m.count_kept() as f64,
        None => (h * w * c) as f64,
    }
}

/// Mean absolute difference of tonemapped images (optionally pixel-masked).
pub fn recon_loss(
    pred: &Tensor,
    target: &Tensor,
    cfg: &PhotometricConfig,
    mask: Option<&PixelMask>,
) -> Result<f64> {
    Ok(recon_loss_grad(pred, target, cfg, mask)?.0)
}

/// Reconstruction loss plus its gradient with respect to `pred`.
pub fn recon_loss_grad(
    pred: &Tensor,
    target: &Tensor,
    cfg: &PhotometricConfig,
    mask: Option<&PixelMask>,
) -> Result<(f64, Tensor)> {
    check_shapes(pred, target, mask, "recon_loss")?;
    let (h, w, c) = pred.shape();
    let norm = mask_normalizer(mask, h, w, c);
    let mut grad = Tensor::zeros(h, w, c);
    if norm == 0.0 {
        return Ok((0.0, grad));
    }
    let mut total = 0.0;
    for y in 0..h {
        for x in 0..w {
            let mw = mask_weight(mask, y, x);
            if mw == 0.0 {
                continue;
            }
            for ch in 0..c {
                let p = pred.at(y, x, ch);
                let t = target.at(y, x, ch);
                let pc = p.clamp(0.0, 1.0);
                let tc = t.clamp(0.0, 1.0);
                let e = tonemap_scalar(pc, cfg.mu) - tonemap_scalar(tc, cfg.mu);
                total += mw * e.abs();
                // Clamp kills the gradient outside (0, 1).
                let d_clamp = if p > 0.0 && p < 1.0 { 1.0 } else { 0.0 };
                grad.set(
                    y,
                    x,
                    ch,
                    mw * e.signum() * tonemap_derivative(pc, cfg.mu) * d_clamp / norm,
                );
            }
        }
    }
    Ok((total / norm, grad))
}

/// Sum over selected layers of the mean absolute feature difference of the
/// tonemapped images.
pub fn perceptual_loss(
    pred: &Tensor,
    target: &Tensor,
    cfg: &PhotometricConfig,
    fx: &dyn FeatureExtractor,
) -> Result<f64> {
    Ok(perceptual_loss_grad(pred, target, cfg, fx)?.0)
}

/// Perceptual loss plus its gradient with respect to `pred`.
pub fn perceptual_loss_grad(
    pred: &Tensor,
    target: &Tensor,
    cfg: &PhotometricConfig,
    fx: &dyn FeatureExtractor,
) -> Result<(f64, Tensor)> {
    check_shapes(pred, target, None, "perceptual_loss")?;
    let tm_pred = pred.map(|v| tonemap_scalar(v.clamp(0.0, 1.0), cfg.mu));
    let tm_target = target.map(|v| tonemap_scalar(v.clamp(0.0, 1.0), cfg.mu));
    let feats_p = fx.features(&tm_pred)?;
    let feats_t = fx.features(&tm_target)?;
    let mut total = 0.0;
    let mut upstream = Vec::with_capacity(feats_p.len());
    for (fp, ft) in feats_p.iter().zip(&feats_t) {
        let n = fp.len() as f64;
        let mut layer_sum = 0.0;
        let g = fp.zip_map(ft, |a, b| {
            let d = a - b;
            layer_sum += d.abs();
            d.signum() / n
        })?;
        total += layer_sum / n;
        upstream.push(g);
    }
    let d_tm = fx.backward(&tm_pred, &upstream)?;
    // Chain through the tonemap (and its clamp).
    let mut grad = Tensor::zeros(pred.height(), pred.width(), pred.channels());
    for (i, gv) in grad.as_mut_slice().iter_mut().enumerate() {
        let p = pred.as_slice()[i];
        let d_clamp = if p > 0.0 && p < 1.0 { 1.0 } else { 0.0 };
        *gv = d_tm.as_slice()[i] * tonemap_derivative(p.clamp(0.0, 1.0), cfg.mu) * d_clamp;
    }
    Ok((total, grad))
}

/// Gaussian-NLL uncertainty loss over tonemapped residuals:
/// mean of `(T(pred) - T(target))^2 / (2 sigma^2) + log(sigma^2) / 2`.
/// Can be negative through the log term.
pub fn uncertainty_loss(
    pred: &Tensor,
    target: &Tensor,
    sigma: &Tensor,
    cfg: &PhotometricConfig,
    mask: Option<&PixelMask>,
) -> Result<f64> {
    Ok(uncertainty_loss_grads(pred, target, sigma, cfg, mask, false)?.0)
}

/// Uncertainty loss plus gradients with respect to `pred` and `sigma`.
///
/// With `detach_pred` the residual numerator is treated as a constant in
/// `pred` (the gradient flows into `sigma` only) — used on pseudo-labeled
/// batches so the judge cannot drag the reconstruction toward unreliable
/// targets through this term.
pub fn uncertainty_loss_grads(
    pred: &Tensor,
    target: &Tensor,
    sigma: &Tensor,
    cfg: &PhotometricConfig,
    mask: Option<&PixelMask>,
    detach_pred: bool,
) -> Result<(f64, Tensor, Tensor)> {
    check_shapes(pred, target, mask, "uncertainty_loss")?;
    if !pred.same_shape(sigma) {
        return Err(Error::shape(
            "uncertainty_loss",
            format!("{:?}", pred.shape()),
            format!("sigma {:?}", sigma.shape()),
        ));
    }
    let (h, w, c) = pred.shape();
    let norm = mask_normalizer(mask, h, w, c);
    let mut d_pred = Tensor::zeros(h, w, c);
    let mut d_sigma = Tensor::zeros(h, w, c);
    if norm == 0.0 {
        return Ok((0.0, d_pred, d_sigma));
    }
    let mut total = 0.0;
    for y in 0..h {
        for x in 0..w {
            let mw = mask_weight(mask, y, x);
            if mw == 0.0 {
                continue;
            }
            for ch in 0..c {
                let p = pred.at(y, x, ch);
                let t = target.at(y, x, ch);
                let s_raw = sigma.at(y, x, ch);
                let s = s_raw.max(SIGMA_FLOOR);
                let pc = p.clamp(0.0, 1.0);
                let r = tonemap_scalar(pc, cfg.mu) - tonemap_scalar(t.clamp(0.0, 1.0), cfg.mu);
                total += mw * (r * r / (2.0 * s * s) + s.ln());
                if !detach_pred {
                    let d_clamp = if p > 0.0 && p < 1.0 { 1.0 } else { 0.0 };
                    d_pred.set(
                        y,
                        x,
                        ch,
                        mw * (r / (s * s)) * tonemap_derivative(pc, cfg.mu) * d_clamp / norm,
                    );
                }
                // Below the floor the score has no influence.
                let d_s = if s_raw > SIGMA_FLOOR {
                    -r * r / (s * s * s) + 1.0 / s
                } else {
                    0.0
                };
                d_sigma.set(y, x, ch, mw * d_s / norm);
            }
        }
    }
    Ok((total / norm, d_pred, d_sigma))
}

/// The scalar loss terms of one branch (supervised or unsupervised).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BranchTerms {
    pub recon: f64,
    pub perceptual: f64,
    pub uncertainty: f64,
}

impl BranchTerms {
    fn weighted(&self, w: &LossWeights) -> f64 {
        self.recon + w.lambda_v * self.perceptual + self.uncertainty
    }

    fn check_finite(&self, branch: &'static str, step: u64) -> Result<()> {
        for (name, v) in [
            ("recon", self.recon),
            ("perceptual", self.perceptual),
            ("uncertainty", self.uncertainty),
        ] {
            if !v.is_finite() {
                let term: &'static str = match (branch, name) {
                    ("supervised", "recon") => "supervised/recon",
                    ("supervised", "perceptual") => "supervised/perceptual",
                    ("supervised", "uncertainty") => "supervised/uncertainty",
                    (_, "recon") => "unsupervised/recon",
                    (_, "perceptual") => "unsupervised/perceptual",
                    _ => "unsupervised/uncertainty",
                };
                return Err(Error::NonFiniteLoss { term, step });
            }
        }
        Ok(())
    }
}

/// Total objective: supervised branch plus `lambda_u` times the
/// unsupervised branch (0 when no pseudo batch exists). Non-finite terms
/// abort with the offending term named.
pub fn total_loss(
    labeled: &BranchTerms,
    unlabeled: Option<&BranchTerms>,
    w: &LossWeights,
    step: u64,
) -> Result<f64> {
    labeled.check_finite("supervised", step)?;
    let mut total = labeled.weighted(w);
    if let Some(u) = unlabeled {
        u.check_finite("unsupervised", step)?;
        total += w.lambda_u * u.weighted(w);
    }
    if !total.is_finite() {
        return Err(Error::NonFiniteLoss { term: "total", step });
    }
    Ok(total)
}
