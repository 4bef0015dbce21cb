use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};

use super::{ClassPalette, LabelMap, RasterImage};
use crate::error::{Error, Result};

fn open(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Load any PNG as 8-bit RGB (grayscale input is replicated across channels).
pub fn load_rgb(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let img = open(path)?.into_rgb8();
    let (w, h) = img.dimensions();
    RasterImage::rgb(w as usize, h as usize, img.into_raw()).map_err(|e| e.at(path))
}

/// Load a PNG as 8-bit grayscale; color input goes through Rec.601 luminance.
pub fn load_gray(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let dynamic = open(path)?;
    if matches!(dynamic, DynamicImage::ImageLuma8(_)) {
        let img = dynamic.into_luma8();
        let (w, h) = img.dimensions();
        return RasterImage::gray(w as usize, h as usize, img.into_raw()).map_err(|e| e.at(path));
    }
    let img = dynamic.into_rgb8();
    let (w, h) = img.dimensions();
    RasterImage::rgb(w as usize, h as usize, img.into_raw())
        .and_then(|rgb| rgb.to_grayscale())
        .map_err(|e| e.at(path))
}

pub fn load_labels(path: impl AsRef<Path>, palette: &ClassPalette) -> Result<LabelMap> {
    let path = path.as_ref();
    let rgb = load_rgb(path)?;
    palette.decode_labels(&rgb).map_err(|e| e.at(path))
}

pub fn save_raster(img: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let data = img.data().to_vec();
    let result = if img.is_gray() {
        GrayImage::from_raw(w, h, data)
            .expect("buffer length validated")
            .save_with_format(path, ImageFormat::Png)
    } else {
        RgbImage::from_raw(w, h, data)
            .expect("buffer length validated")
            .save_with_format(path, ImageFormat::Png)
    };
    result.map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

pub fn save_labels(map: &LabelMap, palette: &ClassPalette, path: impl AsRef<Path>) -> Result<()> {
    save_raster(&palette.encode_labels(map), path)
}
