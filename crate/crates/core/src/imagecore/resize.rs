use serde::{Deserialize, Serialize};

use super::RasterImage;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResizeMode {
    Bilinear,
    Nearest,
}

pub(super) fn resize_raster(
    img: &RasterImage,
    width: usize,
    height: usize,
    mode: ResizeMode,
) -> Result<RasterImage> {
    let (sw, sh, c) = (img.width(), img.height(), img.channels());
    let data = match mode {
        ResizeMode::Nearest => nearest(img.data(), sw, sh, c, width, height)?,
        ResizeMode::Bilinear => bilinear(img.data(), sw, sh, c, width, height)?,
    };
    RasterImage::new(width, height, c, data)
}

fn check_target(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParam(format!(
            "resize target must be positive, got {width}x{height}"
        )));
    }
    Ok(())
}

// Pixel-center alignment: destination pixel d samples source coordinate
// (d + 0.5) * src / dst - 0.5, so equal sizes map every pixel onto itself.
fn source_coord(d: usize, src: usize, dst: usize) -> f64 {
    ((d as f64 + 0.5) * src as f64 / dst as f64 - 0.5).clamp(0.0, (src - 1) as f64)
}

pub(super) fn nearest(
    data: &[u8],
    sw: usize,
    sh: usize,
    c: usize,
    dw: usize,
    dh: usize,
) -> Result<Vec<u8>> {
    check_target(dw, dh)?;
    let xs: Vec<usize> = (0..dw)
        .map(|x| ((x * 2 + 1) * sw / (2 * dw)).min(sw - 1))
        .collect();
    let mut out = Vec::with_capacity(dw * dh * c);
    for y in 0..dh {
        let sy = ((y * 2 + 1) * sh / (2 * dh)).min(sh - 1);
        let row = &data[sy * sw * c..(sy + 1) * sw * c];
        for &sx in &xs {
            out.extend_from_slice(&row[sx * c..(sx + 1) * c]);
        }
    }
    Ok(out)
}

fn bilinear(data: &[u8], sw: usize, sh: usize, c: usize, dw: usize, dh: usize) -> Result<Vec<u8>> {
    check_target(dw, dh)?;
    let taps = |d: usize, src: usize, dst: usize| {
        let s = source_coord(d, src, dst);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(src - 1);
        (i0, i1, s - i0 as f64)
    };
    let xtaps: Vec<_> = (0..dw).map(|x| taps(x, sw, dw)).collect();
    let mut out = Vec::with_capacity(dw * dh * c);
    for y in 0..dh {
        let (y0, y1, fy) = taps(y, sh, dh);
        for &(x0, x1, fx) in &xtaps {
            for k in 0..c {
                let at = |xx: usize, yy: usize| data[(yy * sw + xx) * c + k] as f64;
                let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
                let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                out.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Ok(out)
}
