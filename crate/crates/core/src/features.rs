//! Frozen multi-scale feature extractors for the perceptual loss.
//!
//! The default extractor is a fixed-seed, three-level strided convolution
//! stack. Its weights never train; random frozen features still carry
//! multi-scale structure. The trait accepts any pretrained replacement
//! with the same surface.

use crate::error::{Error, Result};
use crate::nn::{
    conv3x3_backward_strided_input, conv3x3_forward_strided, leaky_relu, leaky_relu_grad,
    ConvSpec,
};
use crate::tensor::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Frozen feature pyramid: image -> activation maps of the selected layers.
/// Implementations must be deterministic and immutable during training.
pub trait FeatureExtractor: Send + Sync {
    /// Smallest accepted input side length.
    fn min_input(&self) -> usize;

    /// Activation maps, one per selected layer, in layer order.
    fn features(&self, img: &Tensor) -> Result<Vec<Tensor>>;

    /// Gradient of `sum_j <features_j, grad_feats_j>` with respect to the
    /// input image. `grad_feats` pairs with [`Self::features`] output.
    fn backward(&self, img: &Tensor, grad_feats: &[Tensor]) -> Result<Tensor>;
}

/// Channel widths of the three levels.
const LEVEL_WIDTHS: [usize; 3] = [8, 16, 32];
const STRIDE: usize = 2;

/// Fixed-seed strided convolution stack (3 -> 8 -> 16 -> 32, stride 2,
/// leaky ReLU after each level).
pub struct ConvFeatureExtractor {
    specs: [ConvSpec; 3],
    params: Vec<f64>,
    /// Indices of the levels whose activations feed the loss.
    selected: Vec<usize>,
}

impl ConvFeatureExtractor {
    pub fn new(seed: u64, selected_layers: &[usize]) -> Result<Self> {
        if selected_layers.is_empty() || selected_layers.iter().any(|&l| l >= 3) {
            return Err(Error::Config(format!(
                "feature layers must be a non-empty subset of 0..3, got {selected_layers:?}"
            )));
        }
        let mut off = 0usize;
        let mut make = |name: &str, c_in: usize, c_out: usize| {
            let spec = ConvSpec {
                name: name.to_string(),
                c_in,
                c_out,
                w_off: off,
                b_off: off + 9 * c_in * c_out,
            };
            off += 9 * c_in * c_out + c_out;
            spec
        };
        let specs = [
            make("level0", 3, LEVEL_WIDTHS[0]),
            make("level1", LEVEL_WIDTHS[0], LEVEL_WIDTHS[1]),
            make("level2", LEVEL_WIDTHS[1], LEVEL_WIDTHS[2]),
        ];
        let mut params = vec![0.0; off];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for spec in &specs {
            spec.init(&mut params, &mut rng);
        }
        Ok(ConvFeatureExtractor {
            specs,
            params,
            selected: selected_layers.to_vec(),
        })
    }

    /// All three levels selected.
    pub fn with_default_layers(seed: u64) -> Self {
        Self::new(seed, &[0, 1, 2]).expect("default layers are valid")
    }

    fn check_size(&self, img: &Tensor) -> Result<()> {
        let (h, w, c) = img.shape();
        if c != 3 {
            return Err(Error::shape("ConvFeatureExtractor", "3 channels", c));
        }
        if h < self.min_input() || w < self.min_input() {
            return Err(Error::InvalidInput(format!(
                "patch {h}x{w} below extractor minimum {}",
                self.min_input()
            )));
        }
        Ok(())
    }

    /// Pre-activations and activations of every level, in order.
    fn run_levels(&self, img: &Tensor) -> (Vec<Tensor>, Vec<Tensor>) {
        let mut pres = Vec::with_capacity(3);
        let mut acts = Vec::with_capacity(3);
        let mut cur = img.clone();
        for spec in &self.specs {
            let pre = conv3x3_forward_strided(&cur, &self.params, spec, STRIDE);
            let act = pre.map(leaky_relu);
            cur = act.clone();
            pres.push(pre);
            acts.push(act);
        }
        (pres, acts)
    }
}

impl FeatureExtractor for ConvFeatureExtractor {
    fn min_input(&self) -> usize {
        8
    }

    fn features(&self, img: &Tensor) -> Result<Vec<Tensor>> {
        self.check_size(img)?;
        let (_, acts) = self.run_levels(img);
        Ok(self.selected.iter().map(|&l| acts[l].clone()).collect())
    }

    fn backward(&self, img: &Tensor, grad_feats: &[Tensor]) -> Result<Tensor> {
        self.check_size(img)?;
        if grad_feats.len() != self.selected.len() {
            return Err(Error::shape(
                "ConvFeatureExtractor::backward",
                self.selected.len(),
                grad_feats.len(),
            ));
        }
        let (pres, acts) = self.run_levels(img);
        // Upstream gradient per level activation (zero where unselected).
        let mut d_act: Vec<Option<Tensor>> = vec![None; 3];
        for (slot, &level) in self.selected.iter().enumerate() {
            let g = grad_feats[slot].clone();
            d_act[level] = Some(match d_act[level].take() {
                Some(acc) => acc.zip_map(&g, |a, b| a + b)?,
                None => g,
            });
        }
        // Walk levels backward, chaining into the level input.
        let mut d_input: Option<Tensor> = None;
        for level in (0..3).rev() {
            let mut g = match (d_act[level].take(), d_input.take()) {
                (Some(a), Some(b)) => a.zip_map(&b, |x, y| x + y)?,
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => continue,
            };
            g = g.zip_map(&pres[level], |gv, pre| gv * leaky_relu_grad(pre))?;
            let level_input = if level == 0 { img } else { &acts[level - 1] };
            d_input = Some(conv3x3_backward_strided_input(
                level_input,
                &g,
                &self.params,
                &self.specs[level],
                STRIDE,
            ));
        }
        Ok(d_input.unwrap_or_else(|| Tensor::zeros(img.height(), img.width(), 3)))
    }
}
