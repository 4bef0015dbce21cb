//! Baseline tiling and per-epoch random crops.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{LabelMap, RasterImage};

/// Portable, explicitly seeded generator used for every sampling decision.
pub type SamplerRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SamplerRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Square region with top-left corner `(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropSpec {
    pub x: usize,
    pub y: usize,
    pub side: usize,
}

impl CropSpec {
    pub fn new(x: usize, y: usize, side: usize) -> Self {
        CropSpec { x, y, side }
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.side > 0 && self.x + self.side <= width && self.y + self.side <= height
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatchKind {
    Baseline,
    Dynamic,
}

impl PatchKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PatchKind::Baseline => "baseline",
            PatchKind::Dynamic => "dynamic",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSet {
    pub image_id: usize,
    pub kind: PatchKind,
    pub specs: Vec<CropSpec>,
}

impl PatchSet {
    pub fn for_image(mut self, image_id: usize) -> Self {
        self.image_id = image_id;
        self
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }
}

/// Non-overlapping `side` x `side` tiles covering the image, row-major.
pub fn tile(width: usize, height: usize, side: usize) -> Result<PatchSet> {
    if side == 0 || !width.is_multiple_of(side) || !height.is_multiple_of(side) {
        return Err(Error::NotDivisible {
            width,
            height,
            side,
        });
    }
    let specs = (0..height / side)
        .flat_map(|row| {
            (0..width / side).map(move |col| CropSpec::new(col * side, row * side, side))
        })
        .collect();
    Ok(PatchSet {
        image_id: 0,
        kind: PatchKind::Baseline,
        specs,
    })
}

/// `count` crops with offsets drawn uniformly from `[0, dim - side]`.
pub fn random_crops<R: Rng + ?Sized>(
    width: usize,
    height: usize,
    side: usize,
    count: usize,
    rng: &mut R,
) -> Result<PatchSet> {
    if side == 0 || side > width || side > height {
        return Err(Error::CropTooLarge {
            width,
            height,
            side,
        });
    }
    let specs = (0..count)
        .map(|_| {
            let x = rng.gen_range(0..=width - side);
            let y = rng.gen_range(0..=height - side);
            CropSpec::new(x, y, side)
        })
        .collect();
    Ok(PatchSet {
        image_id: 0,
        kind: PatchKind::Dynamic,
        specs,
    })
}

/// Copy the region under `spec` out of both the image and its ground truth.
pub fn extract(
    img: &RasterImage,
    gt: &LabelMap,
    spec: &CropSpec,
) -> Result<(RasterImage, LabelMap)> {
    if img.dims() != gt.dims() {
        return Err(Error::dims(img.dims(), gt.dims()));
    }
    if !spec.fits(img.width(), img.height()) {
        return Err(Error::CropTooLarge {
            width: img.width(),
            height: img.height(),
            side: spec.side,
        });
    }
    Ok((
        img.crop(spec.x, spec.y, spec.side, spec.side),
        gt.crop(spec.x, spec.y, spec.side, spec.side),
    ))
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub image_id: usize,
    pub kind: PatchKind,
    pub spec: CropSpec,
    pub image: RasterImage,
    pub labels: LabelMap,
}

/// Baseline patches for every image followed by `crops_per_image` fresh
/// random crops per image.
///
/// One child seed per image is drawn from `rng` in image order, so the crop
/// sequence does not depend on how images are scheduled across threads.
pub fn epoch_dataset(
    baseline: &[PatchSet],
    images: &[RasterImage],
    gts: &[LabelMap],
    crops_per_image: usize,
    rng: &mut SamplerRng,
) -> Result<Vec<Instance>> {
    if images.len() != gts.len() {
        return Err(Error::Data(format!(
            "{} images but {} ground-truth maps",
            images.len(),
            gts.len()
        )));
    }
    let side = |i: usize| {
        baseline
            .iter()
            .find(|p| p.image_id == i)
            .and_then(|p| p.specs.first())
            .map(|s| s.side)
    };
    let child_seeds: Vec<u64> = (0..images.len()).map(|_| rng.next_u64()).collect();
    let dynamic: Vec<PatchSet> = if crops_per_image == 0 {
        Vec::new()
    } else {
        child_seeds
            .iter()
            .enumerate()
            .map(|(i, &seed)| {
                let side = side(i)
                    .ok_or_else(|| Error::Data(format!("no baseline patches for image {i}")))?;
                let mut child = seeded_rng(seed);
                Ok(random_crops(
                    images[i].width(),
                    images[i].height(),
                    side,
                    crops_per_image,
                    &mut child,
                )?
                .for_image(i))
            })
            .collect::<Result<_>>()?
    };

    let jobs: Vec<(usize, PatchKind, CropSpec)> = baseline
        .iter()
        .chain(&dynamic)
        .flat_map(|set| set.specs.iter().map(move |s| (set.image_id, set.kind, *s)))
        .collect();
    jobs.par_iter()
        .map(|&(id, kind, spec)| {
            let img = images
                .get(id)
                .ok_or_else(|| Error::Data(format!("patch set refers to missing image {id}")))?;
            let (image, labels) = extract(img, &gts[id], &spec)?;
            Ok(Instance {
                image_id: id,
                kind,
                spec,
                image,
                labels,
            })
        })
        .collect()
}
