//! Radiance RGBE (.hdr) reader and writer.
//!
//! Decoding follows the shared-exponent convention `v = m * 2^(e - 136)`
//! and accepts flat scanlines, old-style run markers, and adaptive
//! new-style RLE. Encoding emits flat scanlines with floor-quantized
//! mantissas, which makes decode(encode(decode(x))) == decode(x): values
//! already on the RGBE grid survive a write/read cycle bit-exactly.

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use std::io::{BufRead, Write};

/// Decode one RGBE quadruple.
#[inline]
pub fn rgbe_to_f64(r: u8, g: u8, b: u8, e: u8) -> [f64; 3] {
    if e == 0 {
        return [0.0, 0.0, 0.0];
    }
    let scale = (2.0f64).powi(i32::from(e) - 136);
    [
        f64::from(r) * scale,
        f64::from(g) * scale,
        f64::from(b) * scale,
    ]
}

/// Encode a non-negative RGB triple into RGBE with floor quantization.
#[inline]
pub fn f64_to_rgbe(rgb: [f64; 3]) -> [u8; 4] {
    let max = rgb[0].max(rgb[1]).max(rgb[2]);
    if !(max > 1e-38) {
        return [0, 0, 0, 0];
    }
    // frexp: max = mant * 2^exp2 with mant in [0.5, 1).
    let mut exp2 = max.log2().floor() as i32 + 1;
    let mut mant = max * (2.0f64).powi(-exp2);
    if mant >= 1.0 {
        exp2 += 1;
        mant = max * (2.0f64).powi(-exp2);
    } else if mant < 0.5 {
        exp2 -= 1;
        mant = max * (2.0f64).powi(-exp2);
    }
    debug_assert!((0.5..1.0).contains(&mant));
    let e = exp2 + 128;
    if e <= 0 {
        return [0, 0, 0, 0];
    }
    if e > 255 {
        // Saturate at the brightest representable value.
        return [255, 255, 255, 255];
    }
    let scale = (2.0f64).powi(8 - exp2);
    let q = |v: f64| -> u8 { ((v * scale).floor().min(255.0)) as u8 };
    [q(rgb[0]), q(rgb[1]), q(rgb[2]), e as u8]
}

/// Snap a radiance tensor onto the RGBE-representable grid
/// (decode of encode, pixelwise).
pub fn quantize_to_rgbe_grid(img: &Tensor) -> Tensor {
    let mut out = img.clone();
    for y in 0..img.height() {
        for x in 0..img.width() {
            let p = img.pixel(y, x);
            let [r, g, b, e] = f64_to_rgbe([p[0], p[1], p[2]]);
            let v = rgbe_to_f64(r, g, b, e);
            out.pixel_mut(y, x).copy_from_slice(&v);
        }
    }
    out
}

/// Write a radiance map as an uncompressed Radiance HDR file.
pub fn write_hdr<W: Write>(mut w: W, img: &Tensor) -> Result<()> {
    if img.channels() != 3 {
        return Err(Error::shape("write_hdr", "3 channels", img.channels()));
    }
    write!(
        w,
        "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y {} +X {}\n",
        img.height(),
        img.width()
    )?;
    let mut buf = Vec::with_capacity(img.width() * 4);
    for y in 0..img.height() {
        buf.clear();
        for x in 0..img.width() {
            let p = img.pixel(y, x);
            buf.extend_from_slice(&f64_to_rgbe([p[0], p[1], p[2]]));
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

fn read_line<R: BufRead>(r: &mut R) -> Result<String> {
    let mut line = String::new();
    let n = r.read_line(&mut line)?;
    if n == 0 {
        return Err(Error::Ingestion("unexpected end of HDR header".into()));
    }
    Ok(line.trim_end_matches(['\n', '\r']).to_string())
}

fn read_exact<R: BufRead>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::Ingestion(format!("HDR pixel data truncated: {e}")))
}

/// Read a Radiance HDR file into an `H x W x 3` radiance tensor.
pub fn read_hdr<R: BufRead>(mut r: R) -> Result<Tensor> {
    let magic = read_line(&mut r)?;
    if !magic.starts_with("#?") {
        return Err(Error::Ingestion(format!(
            "not a Radiance HDR file (magic {magic:?})"
        )));
    }
    // Header lines until the blank separator.
    loop {
        let line = read_line(&mut r)?;
        if line.is_empty() {
            break;
        }
        if let Some(fmt) = line.strip_prefix("FORMAT=") {
            if fmt.trim() != "32-bit_rle_rgbe" {
                return Err(Error::Ingestion(format!("unsupported HDR format {fmt}")));
            }
        }
    }
    let res = read_line(&mut r)?;
    let parts: Vec<&str> = res.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "-Y" || parts[2] != "+X" {
        return Err(Error::Ingestion(format!(
            "unsupported HDR orientation {res:?} (expected \"-Y h +X w\")"
        )));
    }
    let h: usize = parts[1]
        .parse()
        .map_err(|_| Error::Ingestion("bad HDR height".into()))?;
    let w: usize = parts[3]
        .parse()
        .map_err(|_| Error::Ingestion("bad HDR width".into()))?;
    if h == 0 || w == 0 {
        return Err(Error::Ingestion("empty HDR image".into()));
    }

    let mut img = Tensor::zeros(h, w, 3);
    let mut scanline = vec![[0u8; 4]; w];
    for y in 0..h {
        read_scanline(&mut r, &mut scanline)?;
        for (x, [cr, cg, cb, ce]) in scanline.iter().enumerate() {
            let v = rgbe_to_f64(*cr, *cg, *cb, *ce);
            img.pixel_mut(y, x).copy_from_slice(&v);
        }
    }
    Ok(img)
}

fn read_scanline<R: BufRead>(r: &mut R, line: &mut [[u8; 4]]) -> Result<()> {
    let w = line.len();
    let mut first = [0u8; 4];
    read_exact(r, &mut first)?;
    let is_new_rle = first[0] == 2
        && first[1] == 2
        && first[2] & 0x80 == 0
        && ((usize::from(first[2]) << 8) | usize::from(first[3])) == w
        && (8..=0x7fff).contains(&w);
    if is_new_rle {
        // Four separately run-length-coded component streams.
        let mut plane = vec![0u8; w];
        for comp in 0..4 {
            let mut x = 0usize;
            while x < w {
                let mut hdr = [0u8; 1];
                read_exact(r, &mut hdr)?;
                let count = usize::from(hdr[0]);
                if count > 128 {
                    let run = count - 128;
                    if x + run > w {
                        return Err(Error::Ingestion("HDR RLE run overflows scanline".into()));
                    }
                    let mut val = [0u8; 1];
                    read_exact(r, &mut val)?;
                    for v in &mut plane[x..x + run] {
                        *v = val[0];
                    }
                    x += run;
                } else {
                    if count == 0 || x + count > w {
                        return Err(Error::Ingestion("bad HDR RLE literal length".into()));
                    }
                    read_exact(r, &mut plane[x..x + count])?;
                    x += count;
                }
            }
            for (px, &v) in line.iter_mut().zip(plane.iter()) {
                px[comp] = v;
            }
        }
        return Ok(());
    }

    // Flat or old-style RLE scanline; `first` is already pixel 0.
    line[0] = first;
    let mut x = 1usize;
    let mut shift = 0u32;
    while x < w {
        let mut px = [0u8; 4];
        read_exact(r, &mut px)?;
        if px[0] == 1 && px[1] == 1 && px[2] == 1 {
            // Old-style run: repeat previous pixel.
            let run = usize::from(px[3]) << shift;
            if x == 0 || x + run > w {
                return Err(Error::Ingestion("bad old-style HDR run".into()));
            }
            let prev = line[x - 1];
            for p in &mut line[x..x + run] {
                *p = prev;
            }
            x += run;
            shift += 8;
        } else {
            line[x] = px;
            x += 1;
            shift = 0;
        }
    }
    Ok(())
}
