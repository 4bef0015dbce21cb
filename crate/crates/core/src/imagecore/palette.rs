use serde::{Deserialize, Serialize};

use super::{LabelMap, RasterImage, CLASS_NAMES, NUM_CLASSES};
use crate::error::{Error, Result};

/// Ground-truth pixels farther than this (L-infinity, per channel) from every
/// palette color are rejected.
pub const SNAP_TOLERANCE: u8 = 32;

/// Class index to RGB mapping used for ground-truth and prediction images.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassPalette {
    colors: [[u8; 3]; NUM_CLASSES],
}

impl Default for ClassPalette {
    fn default() -> Self {
        ClassPalette {
            colors: [
                [0, 0, 0],     // background
                [255, 0, 255], // main text
                [255, 255, 0], // comment
                [0, 255, 255], // decoration
            ],
        }
    }
}

impl ClassPalette {
    pub fn new(colors: [[u8; 3]; NUM_CLASSES]) -> Result<Self> {
        for i in 0..NUM_CLASSES {
            for j in i + 1..NUM_CLASSES {
                if colors[i] == colors[j] {
                    return Err(Error::Config(format!(
                        "palette colors for {} and {} coincide",
                        CLASS_NAMES[i], CLASS_NAMES[j]
                    )));
                }
            }
        }
        Ok(ClassPalette { colors })
    }

    /// Parse `#rrggbb` (or `rrggbb`) strings in class order.
    pub fn from_hex(hex: [&str; NUM_CLASSES]) -> Result<Self> {
        let mut colors = [[0u8; 3]; NUM_CLASSES];
        for (slot, s) in colors.iter_mut().zip(hex) {
            *slot = parse_hex(s)?;
        }
        Self::new(colors)
    }

    pub fn to_hex(&self) -> [String; NUM_CLASSES] {
        self.colors
            .map(|[r, g, b]| format!("#{r:02x}{g:02x}{b:02x}"))
    }

    pub fn color(&self, class: u8) -> [u8; 3] {
        self.colors[class as usize]
    }

    pub fn colors(&self) -> &[[u8; 3]; NUM_CLASSES] {
        &self.colors
    }

    /// Nearest palette class under L-infinity distance, or `None` beyond tolerance.
    /// Ties resolve to the lower class index.
    pub fn snap(&self, rgb: [u8; 3]) -> Option<u8> {
        let (class, dist) = self
            .colors
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let d = (0..3).map(|k| c[k].abs_diff(rgb[k])).max().unwrap();
                (i, d)
            })
            .min_by_key(|&(i, d)| (d, i))
            .unwrap();
        (dist <= SNAP_TOLERANCE).then_some(class as u8)
    }

    pub fn decode_labels(&self, gt: &RasterImage) -> Result<LabelMap> {
        gt.expect_channels(3)?;
        let w = gt.width();
        let labels = gt
            .data()
            .chunks_exact(3)
            .enumerate()
            .map(|(i, p)| {
                let rgb = [p[0], p[1], p[2]];
                self.snap(rgb).ok_or(Error::UnknownColor {
                    x: i % w,
                    y: i / w,
                    rgb,
                })
            })
            .collect::<Result<Vec<u8>>>()?;
        LabelMap::new(w, gt.height(), labels)
    }

    pub fn encode_labels(&self, map: &LabelMap) -> RasterImage {
        let data = map
            .labels()
            .iter()
            .flat_map(|&l| self.colors[l as usize])
            .collect();
        RasterImage::rgb(map.width(), map.height(), data).expect("label map dims are valid")
    }
}

fn parse_hex(s: &str) -> Result<[u8; 3]> {
    let t = s.trim().trim_start_matches('#');
    let bad = || Error::Config(format!("invalid hex color {s:?}"));
    if t.len() != 6 || !t.is_ascii() {
        return Err(bad());
    }
    let mut out = [0u8; 3];
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = u8::from_str_radix(&t[2 * k..2 * k + 2], 16).map_err(|_| bad())?;
    }
    Ok(out)
}
