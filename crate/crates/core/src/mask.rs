//! Binary per-pixel masks.

use crate::error::{Error, Result};

/// `H x W` binary mask. 1 keeps a pixel, 0 drops it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelMask {
    h: usize,
    w: usize,
    data: Vec<u8>,
}

impl PixelMask {
    pub fn ones(h: usize, w: usize) -> Self {
        PixelMask {
            h,
            w,
            data: vec![1; h * w],
        }
    }

    pub fn zeros(h: usize, w: usize) -> Self {
        PixelMask {
            h,
            w,
            data: vec![0; h * w],
        }
    }

    pub fn from_fn(h: usize, w: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = PixelMask::zeros(h, w);
        for y in 0..h {
            for x in 0..w {
                m.data[y * w + x] = u8::from(f(y, x));
            }
        }
        m
    }

    pub fn from_bits(h: usize, w: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != h * w {
            return Err(Error::shape("PixelMask::from_bits", h * w, data.len()));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::InvalidInput("mask values must be 0 or 1".into()));
        }
        Ok(PixelMask { h, w, data })
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
    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.data[y * self.w + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, keep: bool) {
        self.data[y * self.w + x] = u8::from(keep);
    }

    pub fn as_bits(&self) -> &[u8] {
        &self.data
    }

    /// Number of kept (1) pixels.
    pub fn count_kept(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    /// Fraction of kept pixels in [0, 1].
    pub fn kept_fraction(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.count_kept() as f64 / self.data.len() as f64
        }
    }

    pub fn hflip(&self) -> PixelMask {
        PixelMask::from_fn(self.h, self.w, |y, x| self.get(y, self.w - 1 - x) == 1)
    }

    pub fn vflip(&self) -> PixelMask {
        PixelMask::from_fn(self.h, self.w, |y, x| self.get(self.h - 1 - y, x) == 1)
    }

    pub fn rot90_cw(&self) -> PixelMask {
        PixelMask::from_fn(self.w, self.h, |y, x| self.get(self.h - 1 - x, y) == 1)
    }

    pub fn rot90_ccw(&self) -> PixelMask {
        PixelMask::from_fn(self.w, self.h, |y, x| self.get(x, self.w - 1 - y) == 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kept_fraction_counts_ones() {
        let mut m = PixelMask::zeros(2, 2);
        m.set(0, 0, true);
        m.set(1, 1, true);
        assert_eq!(m.count_kept(), 2);
        assert!((m.kept_fraction() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn spatial_ops_match_tensor_conventions() {
        let m = PixelMask::from_fn(2, 3, |y, x| (y + x) % 2 == 0);
        assert_eq!(m.hflip().hflip(), m);
        assert_eq!(m.rot90_cw().rot90_ccw(), m);
    }

    #[test]
    fn from_bits_rejects_non_binary() {
        assert!(PixelMask::from_bits(1, 2, vec![0, 2]).is_err());
    }
}
