//! Dense row-major `H x W x C` float tensor.
//!
//! Everything in this crate (LDR frames, HDR radiance, feature maps,
//! uncertainty maps) is stored in this one container. Layout is row-major
//! with the channel index fastest: `data[(y * w + x) * c + ch]`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    h: usize,
    w: usize,
    c: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(h: usize, w: usize, c: usize) -> Self {
        Tensor {
            h,
            w,
            c,
            data: vec![0.0; h * w * c],
        }
    }

    pub fn filled(h: usize, w: usize, c: usize, value: f64) -> Self {
        Tensor {
            h,
            w,
            c,
            data: vec![value; h * w * c],
        }
    }

    pub fn from_vec(h: usize, w: usize, c: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != h * w * c {
            return Err(Error::shape(
                "Tensor::from_vec",
                format!("{} elements for {h}x{w}x{c}", h * w * c),
                data.len(),
            ));
        }
        Ok(Tensor { h, w, c, data })
    }

    pub fn from_fn(h: usize, w: usize, c: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Tensor::zeros(h, w, c);
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    t.data[(y * w + x) * c + ch] = f(y, x, ch);
                }
            }
        }
        t
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.h
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.w
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.c
    }

    /// `(height, width, channels)`.
    #[inline]
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.h, self.w, self.c)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize, ch: usize) -> f64 {
        debug_assert!(y < self.h && x < self.w && ch < self.c);
        self.data[(y * self.w + x) * self.c + ch]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, ch: usize, v: f64) {
        debug_assert!(y < self.h && x < self.w && ch < self.c);
        self.data[(y * self.w + x) * self.c + ch] = v;
    }

    /// Pixel slice (all channels at `(y, x)`).
    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> &[f64] {
        let base = (y * self.w + x) * self.c;
        &self.data[base..base + self.c]
    }

    #[inline]
    pub fn pixel_mut(&mut self, y: usize, x: usize) -> &mut [f64] {
        let base = (y * self.w + x) * self.c;
        &mut self.data[base..base + self.c]
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.shape() == other.shape()
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Tensor {
        Tensor {
            h: self.h,
            w: self.w,
            c: self.c,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn map_inplace(&mut self, mut f: impl FnMut(f64) -> f64) {
        for v in &mut self.data {
            *v = f(*v);
        }
    }

    pub fn zip_map(&self, other: &Tensor, mut f: impl FnMut(f64, f64) -> f64) -> Result<Tensor> {
        if !self.same_shape(other) {
            return Err(Error::shape(
                "Tensor::zip_map",
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ));
        }
        Ok(Tensor {
            h: self.h,
            w: self.w,
            c: self.c,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn clamp01(&self) -> Tensor {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    pub fn scale(&self, k: f64) -> Tensor {
        self.map(|v| v * k)
    }

    /// Sum of all elements, accumulated in storage order.
    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Mean over all elements, accumulated in storage order.
    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.sum() / self.data.len() as f64
        }
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Concatenate along the channel axis. All inputs must share `H x W`.
    pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
        let (h, w) = match parts.first() {
            Some(t) => (t.h, t.w),
            None => return Err(Error::InvalidInput("concat_channels on empty list".into())),
        };
        let c_total: usize = parts.iter().map(|t| t.c).sum();
        for t in parts {
            if t.h != h || t.w != w {
                return Err(Error::shape(
                    "Tensor::concat_channels",
                    format!("{h}x{w}"),
                    format!("{}x{}", t.h, t.w),
                ));
            }
        }
        let mut out = Tensor::zeros(h, w, c_total);
        for y in 0..h {
            for x in 0..w {
                let dst = out.pixel_mut(y, x);
                let mut off = 0;
                for t in parts {
                    dst[off..off + t.c].copy_from_slice(t.pixel(y, x));
                    off += t.c;
                }
            }
        }
        Ok(out)
    }

    /// Copy of channels `[start, start + count)`.
    pub fn slice_channels(&self, start: usize, count: usize) -> Result<Tensor> {
        if start + count > self.c {
            return Err(Error::shape(
                "Tensor::slice_channels",
                format!("<= {} channels", self.c),
                start + count,
            ));
        }
        let mut out = Tensor::zeros(self.h, self.w, count);
        for y in 0..self.h {
            for x in 0..self.w {
                out.pixel_mut(y, x)
                    .copy_from_slice(&self.pixel(y, x)[start..start + count]);
            }
        }
        Ok(out)
    }

    /// Crop of size `ph x pw` with top-left corner `(y0, x0)`.
    pub fn crop(&self, y0: usize, x0: usize, ph: usize, pw: usize) -> Result<Tensor> {
        if y0 + ph > self.h || x0 + pw > self.w {
            return Err(Error::shape(
                "Tensor::crop",
                format!("crop within {}x{}", self.h, self.w),
                format!("({y0}+{ph}, {x0}+{pw})"),
            ));
        }
        let mut out = Tensor::zeros(ph, pw, self.c);
        for y in 0..ph {
            for x in 0..pw {
                out.pixel_mut(y, x)
                    .copy_from_slice(self.pixel(y0 + y, x0 + x));
            }
        }
        Ok(out)
    }

    pub fn hflip(&self) -> Tensor {
        Tensor::from_fn(self.h, self.w, self.c, |y, x, ch| {
            self.at(y, self.w - 1 - x, ch)
        })
    }

    pub fn vflip(&self) -> Tensor {
        Tensor::from_fn(self.h, self.w, self.c, |y, x, ch| {
            self.at(self.h - 1 - y, x, ch)
        })
    }

    /// 90-degree clockwise rotation; output is `W x H`.
    pub fn rot90_cw(&self) -> Tensor {
        Tensor::from_fn(self.w, self.h, self.c, |y, x, ch| {
            self.at(self.h - 1 - x, y, ch)
        })
    }

    /// 90-degree counterclockwise rotation; output is `W x H`.
    pub fn rot90_ccw(&self) -> Tensor {
        Tensor::from_fn(self.w, self.h, self.c, |y, x, ch| {
            self.at(x, self.w - 1 - y, ch)
        })
    }

    /// Channel permutation: output channel `i` reads input channel `perm[i]`.
    pub fn permute_channels(&self, perm: &[usize]) -> Result<Tensor> {
        if perm.len() != self.c {
            return Err(Error::shape("Tensor::permute_channels", self.c, perm.len()));
        }
        if perm.iter().any(|&p| p >= self.c) {
            return Err(Error::InvalidInput(format!(
                "permutation {perm:?} out of range for {} channels",
                self.c
            )));
        }
        Ok(Tensor::from_fn(self.h, self.w, self.c, |y, x, ch| {
            self.at(y, x, perm[ch])
        }))
    }
}
