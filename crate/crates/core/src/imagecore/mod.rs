//! Raster containers, the ground-truth color codec, grayscale conversion,
//! resizing and PNG I/O.

mod io;
mod palette;
mod resize;

pub use io::{load_gray, load_labels, load_rgb, save_labels, save_raster};
pub use palette::{ClassPalette, SNAP_TOLERANCE};
pub use resize::ResizeMode;

use crate::error::{Error, Result};

/// Number of layout classes: background, main text, comment, decoration.
pub const NUM_CLASSES: usize = 4;

pub const CLASS_NAMES: [&str; NUM_CLASSES] = ["background", "main_text", "comment", "decoration"];

/// Row-major 8-bit raster with one (gray) or three (RGB) channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParam(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidParam(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidParam(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(RasterImage {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(
            width,
            height,
            channels,
            vec![value; width * height * channels],
        )
    }

    pub fn gray(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, 1, data)
    }

    pub fn rgb(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, 3, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    /// Samples of pixel `(x, y)`, `channels` bytes long.
    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn is_gray(&self) -> bool {
        self.channels == 1
    }

    pub(crate) fn expect_channels(&self, expected: usize) -> Result<()> {
        if self.channels != expected {
            return Err(Error::Channels {
                expected,
                actual: self.channels,
            });
        }
        Ok(())
    }

    /// Rec.601 luminance, rounded half up.
    pub fn to_grayscale(&self) -> Result<RasterImage> {
        self.expect_channels(3)?;
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| luminance(p[0], p[1], p[2]))
            .collect();
        RasterImage::gray(self.width, self.height, data)
    }

    /// Returns a grayscale view, converting RGB input if needed.
    pub fn ensure_gray(&self) -> RasterImage {
        if self.is_gray() {
            self.clone()
        } else {
            self.to_grayscale().expect("three channels checked")
        }
    }

    /// Copy of the `w`x`h` region at `(x, y)`. The region must be in bounds.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> RasterImage {
        assert!(x + w <= self.width && y + h <= self.height && w > 0 && h > 0);
        let c = self.channels;
        let mut data = Vec::with_capacity(w * h * c);
        for row in y..y + h {
            let start = (row * self.width + x) * c;
            data.extend_from_slice(&self.data[start..start + w * c]);
        }
        RasterImage {
            width: w,
            height: h,
            channels: c,
            data,
        }
    }

    pub fn resize(&self, width: usize, height: usize, mode: ResizeMode) -> Result<RasterImage> {
        resize::resize_raster(self, width, height, mode)
    }
}

#[inline]
pub fn luminance(r: u8, g: u8, b: u8) -> u8 {
    let acc = 299 * r as u32 + 587 * g as u32 + 114 * b as u32;
    ((acc + 500) / 1000).min(255) as u8
}

/// Row-major per-pixel class indices in `0..NUM_CLASSES`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParam(format!(
                "label map dimensions must be positive, got {width}x{height}"
            )));
        }
        if labels.len() != width * height {
            return Err(Error::InvalidParam(format!(
                "label count {} does not match {width}x{height}",
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l as usize >= NUM_CLASSES) {
            return Err(Error::InvalidParam(format!("label {bad} out of range")));
        }
        Ok(LabelMap {
            width,
            height,
            labels,
        })
    }

    pub fn filled(width: usize, height: usize, class: u8) -> Result<Self> {
        Self::new(width, height, vec![class; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<u8> {
        self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> LabelMap {
        assert!(x + w <= self.width && y + h <= self.height && w > 0 && h > 0);
        let mut labels = Vec::with_capacity(w * h);
        for row in y..y + h {
            let start = row * self.width + x;
            labels.extend_from_slice(&self.labels[start..start + w]);
        }
        LabelMap {
            width: w,
            height: h,
            labels,
        }
    }

    /// Nearest-neighbor resize; never introduces a class absent from the input.
    pub fn resize_nearest(&self, width: usize, height: usize) -> Result<LabelMap> {
        let labels = resize::nearest(&self.labels, self.width, self.height, 1, width, height)?;
        Ok(LabelMap {
            width,
            height,
            labels,
        })
    }

    /// Per-class pixel counts.
    pub fn class_counts(&self) -> [u64; NUM_CLASSES] {
        let mut counts = [0u64; NUM_CLASSES];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }
}
