use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use super::ClassField;
use crate::error::{Error, Result};
use crate::imagecore::{LabelMap, RasterImage, NUM_CLASSES};
use crate::sampler::tile;

pub const DEFAULT_WINDOW: usize = 7;
pub const PARAMS_MAGIC: &[u8; 6] = b"FOLIO1";

/// A trainable per-pixel classifier over grayscale patches.
///
/// Parameters live in one flat vector so a generic optimizer can update them.
pub trait Backbone: Clone + Send + Sync {
    fn params(&self) -> &[f64];

    fn params_mut(&mut self) -> &mut [f64];

    /// Per-pixel class logits for a grayscale patch.
    fn logits(&self, patch: &RasterImage) -> Result<ClassField>;

    /// Add the parameter gradient implied by `dlogits` (the loss gradient
    /// with respect to this patch's logits) into `grad`.
    fn backward(&self, patch: &RasterImage, dlogits: &ClassField, grad: &mut [f64]) -> Result<()>;

    fn forward(&self, patch: &RasterImage) -> Result<ClassField> {
        Ok(self.logits(patch)?.softmax())
    }
}

/// Reference backbone: one linear layer over the clamped `s x s` intensity
/// window around each pixel, intensities scaled to `[0, 1]`.
///
/// Parameter layout is one row per class: `s * s` window weights in row-major
/// window order, then the bias.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowClassifier {
    window: usize,
    params: Vec<f64>,
}

impl WindowClassifier {
    pub fn zeros(window: usize) -> Result<Self> {
        Self::from_params(window, vec![0.0; NUM_CLASSES * (window * window + 1)])
    }

    pub fn from_params(window: usize, params: Vec<f64>) -> Result<Self> {
        if window == 0 || window.is_multiple_of(2) {
            return Err(Error::InvalidParam(format!(
                "window side must be odd, got {window}"
            )));
        }
        if params.len() != NUM_CLASSES * (window * window + 1) {
            return Err(Error::InvalidParam(format!(
                "expected {} parameters for window {window}, got {}",
                NUM_CLASSES * (window * window + 1),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numeric("non-finite backbone parameter".into()));
        }
        Ok(WindowClassifier { window, params })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    fn row_len(&self) -> usize {
        self.window * self.window + 1
    }

    pub fn weights(&self, class: usize) -> &[f64] {
        let r = self.row_len();
        &self.params[class * r..class * r + r - 1]
    }

    pub fn bias(&self, class: usize) -> f64 {
        self.params[class * self.row_len() + self.row_len() - 1]
    }

    pub fn set_bias(&mut self, class: usize, v: f64) {
        let r = self.row_len();
        self.params[class * r + r - 1] = v;
    }

    /// Edge-replicated copy of the patch, scaled to [0, 1], padded by s/2.
    fn padded(&self, patch: &RasterImage) -> Result<(Vec<f64>, usize)> {
        patch.expect_channels(1)?;
        let (w, h) = patch.dims();
        let half = self.window / 2;
        let pw = w + 2 * half;
        let mut out = Vec::with_capacity(pw * (h + 2 * half));
        for py in 0..h + 2 * half {
            let y = py.saturating_sub(half).min(h - 1);
            let row = &patch.data()[y * w..(y + 1) * w];
            for px in 0..pw {
                let x = px.saturating_sub(half).min(w - 1);
                out.push(row[x] as f64 / 255.0);
            }
        }
        Ok((out, pw))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(14 + 8 * self.params.len());
        out.extend_from_slice(PARAMS_MAGIC);
        out.extend_from_slice(&(self.window as u32).to_le_bytes());
        out.extend_from_slice(&(NUM_CLASSES as u32).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Data(format!("parameter file: {m}"));
        if bytes.len() < 14 || &bytes[..6] != PARAMS_MAGIC {
            return Err(bad("missing FOLIO1 header"));
        }
        let window = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let classes = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
        if classes != NUM_CLASSES {
            return Err(bad(&format!(
                "expected {NUM_CLASSES} classes, found {classes}"
            )));
        }
        let body = &bytes[14..];
        if !body.len().is_multiple_of(8) {
            return Err(bad("truncated parameter data"));
        }
        let params = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_params(window, params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&self.to_bytes()))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| e.at(path))
    }
}

impl Backbone for WindowClassifier {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn logits(&self, patch: &RasterImage) -> Result<ClassField> {
        let (padded, pw) = self.padded(patch)?;
        let (w, h) = patch.dims();
        let s = self.window;
        let mut field = ClassField::zeros(w, h);
        for c in 0..NUM_CLASSES {
            let weights = self.weights(c);
            let bias = self.bias(c);
            let plane = field.plane_mut(c);
            plane.iter_mut().for_each(|v| *v = bias);
            for dy in 0..s {
                for dx in 0..s {
                    let wk = weights[dy * s + dx];
                    for y in 0..h {
                        let src = &padded[(y + dy) * pw + dx..(y + dy) * pw + dx + w];
                        let dst = &mut plane[y * w..(y + 1) * w];
                        for (d, &v) in dst.iter_mut().zip(src) {
                            *d += wk * v;
                        }
                    }
                }
            }
        }
        Ok(field)
    }

    fn backward(&self, patch: &RasterImage, dlogits: &ClassField, grad: &mut [f64]) -> Result<()> {
        if dlogits.dims() != patch.dims() {
            return Err(Error::dims(patch.dims(), dlogits.dims()));
        }
        if grad.len() != self.params.len() {
            return Err(Error::InvalidParam(
                "gradient buffer has wrong length".into(),
            ));
        }
        let (padded, pw) = self.padded(patch)?;
        let (w, h) = patch.dims();
        let s = self.window;
        let r = self.row_len();
        for c in 0..NUM_CLASSES {
            let g = dlogits.plane(c);
            let row = &mut grad[c * r..(c + 1) * r];
            for dy in 0..s {
                for dx in 0..s {
                    let mut acc = 0.0;
                    for y in 0..h {
                        let src = &padded[(y + dy) * pw + dx..(y + dy) * pw + dx + w];
                        acc += g[y * w..(y + 1) * w]
                            .iter()
                            .zip(src)
                            .map(|(a, b)| a * b)
                            .sum::<f64>();
                    }
                    row[dy * s + dx] += acc;
                }
            }
            row[r - 1] += g.iter().sum::<f64>();
        }
        Ok(())
    }
}

/// Predict a full page patch by patch and stitch the argmax labels.
///
/// Patches are evaluated in parallel and written back by position, so the
/// result is independent of the thread count.
pub fn predict_page<B: Backbone>(
    backbone: &B,
    page: &RasterImage,
    side: usize,
) -> Result<LabelMap> {
    let gray = page.ensure_gray();
    let (w, h) = gray.dims();
    let tiles = tile(w, h, side)?;
    let predictions: Vec<LabelMap> = tiles
        .specs
        .par_iter()
        .map(|s| {
            backbone
                .logits(&gray.crop(s.x, s.y, s.side, s.side))
                .map(|z| z.argmax())
        })
        .collect::<Result<_>>()?;
    let mut labels = vec![0u8; w * h];
    for (spec, pred) in tiles.specs.iter().zip(&predictions) {
        for dy in 0..side {
            let dst = (spec.y + dy) * w + spec.x;
            labels[dst..dst + side].copy_from_slice(&pred.labels()[dy * side..(dy + 1) * side]);
        }
    }
    LabelMap::new(w, h, labels)
}
