//! Minimal fixed-architecture network kernels: zero-padded 3x3 convolution
//! with hand-written backward passes, pointwise activations, and Adam.
//!
//! Parameters for a whole model live in one flat `Vec<f64>`; each layer
//! holds offsets into it. That makes EMA averaging, optimizer state, and
//! checkpoint serialization uniform over a single buffer.

use crate::tensor::Tensor;
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub const LEAKY_SLOPE: f64 = 0.1;

#[inline]
pub fn leaky_relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

#[inline]
pub fn leaky_relu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Derivative of sigmoid expressed through its output value.
#[inline]
pub fn sigmoid_grad_from_output(s: f64) -> f64 {
    s * (1.0 - s)
}

/// A 3x3 same-padding convolution layer described as offsets into a flat
/// parameter buffer. Weight layout: `w[((tap * c_in) + ci) * c_out + co]`
/// with `tap = (dy + 1) * 3 + (dx + 1)`; biases follow separately.
#[derive(Debug, Clone)]
pub struct ConvSpec {
    pub name: String,
    pub c_in: usize,
    pub c_out: usize,
    pub w_off: usize,
    pub b_off: usize,
}

impl ConvSpec {
    pub fn weight_len(&self) -> usize {
        9 * self.c_in * self.c_out
    }

    pub fn bias_len(&self) -> usize {
        self.c_out
    }

    /// He-normal initialization of this layer's slice of `params`.
    pub fn init<R: Rng>(&self, params: &mut [f64], rng: &mut R) {
        let std = (2.0 / (9 * self.c_in) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("valid normal");
        for v in &mut params[self.w_off..self.w_off + self.weight_len()] {
            *v = normal.sample(rng);
        }
        for v in &mut params[self.b_off..self.b_off + self.bias_len()] {
            *v = 0.0;
        }
    }
}

/// Forward pass of a zero-padded 3x3 convolution.
pub fn conv3x3_forward(input: &Tensor, params: &[f64], spec: &ConvSpec) -> Tensor {
    let (h, w, c_in) = input.shape();
    debug_assert_eq!(c_in, spec.c_in);
    let c_out = spec.c_out;
    let weights = &params[spec.w_off..spec.w_off + spec.weight_len()];
    let biases = &params[spec.b_off..spec.b_off + spec.bias_len()];
    let mut out = Tensor::zeros(h, w, c_out);
    let in_data = input.as_slice();
    for y in 0..h {
        for x in 0..w {
            let acc = out.pixel_mut(y, x);
            acc.copy_from_slice(biases);
            for dy in -1i64..=1 {
                let yy = y as i64 + dy;
                if yy < 0 || yy >= h as i64 {
                    continue;
                }
                for dx in -1i64..=1 {
                    let xx = x as i64 + dx;
                    if xx < 0 || xx >= w as i64 {
                        continue;
                    }
                    let tap = ((dy + 1) * 3 + (dx + 1)) as usize;
                    let in_base = ((yy as usize) * w + xx as usize) * c_in;
                    let w_base = tap * c_in * c_out;
                    for ci in 0..c_in {
                        let v = in_data[in_base + ci];
                        let wrow = &weights[w_base + ci * c_out..w_base + (ci + 1) * c_out];
                        for (a, &wv) in acc.iter_mut().zip(wrow) {
                            *a += v * wv;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Backward pass of the 3x3 convolution. Accumulates weight and bias
/// gradients into `grads` (same layout as `params`) and returns the
/// gradient with respect to the input.
pub fn conv3x3_backward(
    input: &Tensor,
    grad_out: &Tensor,
    params: &[f64],
    grads: &mut [f64],
    spec: &ConvSpec,
) -> Tensor {
    let (h, w, c_in) = input.shape();
    let c_out = spec.c_out;
    debug_assert_eq!(grad_out.shape(), (h, w, c_out));
    let weights = &params[spec.w_off..spec.w_off + spec.weight_len()];
    let mut grad_in = Tensor::zeros(h, w, c_in);
    let in_data = input.as_slice();
    let g_data = grad_out.as_slice();
    {
        let (gw, gb) = {
            // Split mutable borrows of the weight and bias regions.
            let (lo, hi) = if spec.w_off < spec.b_off {
                let (a, b) = grads.split_at_mut(spec.b_off);
                (&mut a[spec.w_off..spec.w_off + spec.weight_len()], &mut b[..spec.bias_len()])
            } else {
                let (a, b) = grads.split_at_mut(spec.w_off);
                let bias = &mut a[spec.b_off..spec.b_off + spec.bias_len()];
                (&mut b[..spec.weight_len()], bias)
            };
            (lo, hi)
        };
        let gi_data = grad_in.as_mut_slice();
        for y in 0..h {
            for x in 0..w {
                let g_base = (y * w + x) * c_out;
                let g = &g_data[g_base..g_base + c_out];
                for (b, &gv) in gb.iter_mut().zip(g) {
                    *b += gv;
                }
                for dy in -1i64..=1 {
                    let yy = y as i64 + dy;
                    if yy < 0 || yy >= h as i64 {
                        continue;
                    }
                    for dx in -1i64..=1 {
                        let xx = x as i64 + dx;
                        if xx < 0 || xx >= w as i64 {
                            continue;
                        }
                        let tap = ((dy + 1) * 3 + (dx + 1)) as usize;
                        let in_base = ((yy as usize) * w + xx as usize) * c_in;
                        let w_base = tap * c_in * c_out;
                        for ci in 0..c_in {
                            let v = in_data[in_base + ci];
                            let wrow = &weights[w_base + ci * c_out..w_base + (ci + 1) * c_out];
                            let gwrow = &mut gw[w_base + ci * c_out..w_base + (ci + 1) * c_out];
                            let mut di = 0.0;
                            for k in 0..c_out {
                                let gv = g[k];
                                gwrow[k] += v * gv;
                                di += wrow[k] * gv;
                            }
                            gi_data[in_base + ci] += di;
                        }
                    }
                }
            }
        }
    }
    grad_in
}

/// Strided variant used by the frozen feature extractor. `stride >= 1`,
/// zero padding of 1, output is `ceil(h / stride) x ceil(w / stride)`.
pub fn conv3x3_forward_strided(
    input: &Tensor,
    params: &[f64],
    spec: &ConvSpec,
    stride: usize,
) -> Tensor {
    let (h, w, c_in) = input.shape();
    let c_out = spec.c_out;
    let oh = h.div_ceil(stride);
    let ow = w.div_ceil(stride);
    let weights = &params[spec.w_off..spec.w_off + spec.weight_len()];
    let biases = &params[spec.b_off..spec.b_off + spec.bias_len()];
    let mut out = Tensor::zeros(oh, ow, c_out);
    let in_data = input.as_slice();
    for oy in 0..oh {
        for ox in 0..ow {
            let y = oy * stride;
            let x = ox * stride;
            let acc = out.pixel_mut(oy, ox);
            acc.copy_from_slice(biases);
            for dy in -1i64..=1 {
                let yy = y as i64 + dy;
                if yy < 0 || yy >= h as i64 {
                    continue;
                }
                for dx in -1i64..=1 {
                    let xx = x as i64 + dx;
                    if xx < 0 || xx >= w as i64 {
                        continue;
                    }
                    let tap = ((dy + 1) * 3 + (dx + 1)) as usize;
                    let in_base = ((yy as usize) * w + xx as usize) * c_in;
                    let w_base = tap * c_in * c_out;
                    for ci in 0..c_in {
                        let v = in_data[in_base + ci];
                        let wrow = &weights[w_base + ci * c_out..w_base + (ci + 1) * c_out];
                        for (a, &wv) in acc.iter_mut().zip(wrow) {
                            *a += v * wv;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Input gradient of the strided convolution (weights are frozen in the
/// feature extractor, so no parameter gradients are produced).
pub fn conv3x3_backward_strided_input(
    input: &Tensor,
    grad_out: &Tensor,
    params: &[f64],
    spec: &ConvSpec,
    stride: usize,
) -> Tensor {
    let (h, w, c_in) = input.shape();
    let c_out = spec.c_out;
    let (oh, ow, _) = grad_out.shape();
    let weights = &params[spec.w_off..spec.w_off + spec.weight_len()];
    let mut grad_in = Tensor::zeros(h, w, c_in);
    let gi = grad_in.as_mut_slice();
    let g_data = grad_out.as_slice();
    for oy in 0..oh {
        for ox in 0..ow {
            let y = oy * stride;
            let x = ox * stride;
            let g_base = (oy * ow + ox) * c_out;
            let g = &g_data[g_base..g_base + c_out];
            for dy in -1i64..=1 {
                let yy = y as i64 + dy;
                if yy < 0 || yy >= h as i64 {
                    continue;
                }
                for dx in -1i64..=1 {
                    let xx = x as i64 + dx;
                    if xx < 0 || xx >= w as i64 {
                        continue;
                    }
                    let tap = ((dy + 1) * 3 + (dx + 1)) as usize;
                    let in_base = ((yy as usize) * w + xx as usize) * c_in;
                    let w_base = tap * c_in * c_out;
                    for ci in 0..c_in {
                        let wrow = &weights[w_base + ci * c_out..w_base + (ci + 1) * c_out];
                        let mut di = 0.0;
                        for k in 0..c_out {
                            di += wrow[k] * g[k];
                        }
                        gi[in_base + ci] += di;
                    }
                }
            }
        }
    }
    grad_in
}

/// Adam optimizer over one flat parameter buffer.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}
