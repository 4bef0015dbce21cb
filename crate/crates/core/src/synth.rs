//! Seeded synthetic manuscript pages with exact ground truth.
//!
//! A page is parchment with uniform additive noise, a main-text block of
//! horizontal random-walk strokes, shorter strokes in the margin comment
//! regions and small filled elliptical decoration blobs. Ink never receives
//! noise, so every class keeps its own intensity band.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{LabelMap, RasterImage};
use crate::sampler::{seeded_rng, SamplerRng};

/// Minimum gap between the brightest ink and the parchment base.
pub const INK_MARGIN: u8 = 40;

pub const TEXT: u8 = 1;
pub const COMMENT: u8 = 2;
pub const DECORATION: u8 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Rect { x, y, w, h }
    }

    fn within(&self, width: usize, height: usize) -> bool {
        self.w > 0 && self.h > 0 && self.x + self.w <= width && self.y + self.h <= height
    }
}

/// Inclusive intensity range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InkRange {
    pub lo: u8,
    pub hi: u8,
}

impl InkRange {
    pub fn new(lo: u8, hi: u8) -> Self {
        InkRange { lo, hi }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PageRecipe {
    pub width: usize,
    pub height: usize,
    pub parchment: u8,
    pub noise: u8,
    pub text_block: Option<Rect>,
    pub text_line_pitch: usize,
    pub comment_regions: Vec<Rect>,
    pub comment_line_pitch: usize,
    pub decoration_blobs: usize,
    pub blob_radius: (usize, usize),
    pub stroke_thickness: usize,
    pub text_ink: InkRange,
    pub comment_ink: InkRange,
    pub decoration_ink: InkRange,
    pub seed: u64,
}

impl Default for PageRecipe {
    fn default() -> Self {
        PageRecipe {
            width: 280,
            height: 336,
            parchment: 200,
            noise: 12,
            text_block: Some(Rect::new(60, 24, 160, 288)),
            text_line_pitch: 10,
            comment_regions: vec![Rect::new(6, 24, 46, 288), Rect::new(228, 24, 46, 288)],
            comment_line_pitch: 12,
            decoration_blobs: 16,
            blob_radius: (4, 6),
            stroke_thickness: 2,
            text_ink: InkRange::new(30, 60),
            comment_ink: InkRange::new(85, 110),
            decoration_ink: InkRange::new(130, 150),
            seed: 0,
        }
    }
}

impl PageRecipe {
    /// A recipe that stamps no ink at all.
    pub fn blank(&self) -> Self {
        PageRecipe {
            text_block: None,
            comment_regions: Vec::new(),
            decoration_blobs: 0,
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        PageRecipe {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        if self.width == 0 || self.height == 0 {
            return bad("page size must be positive".into());
        }
        let regions = self.text_block.iter().chain(&self.comment_regions);
        if let Some(r) = regions.clone().find(|r| !r.within(self.width, self.height)) {
            return bad(format!(
                "region {r:?} leaves the {}x{} page",
                self.width, self.height
            ));
        }
        for (name, ink) in [
            ("text", self.text_ink),
            ("comment", self.comment_ink),
            ("decoration", self.decoration_ink),
        ] {
            if ink.lo > ink.hi {
                return bad(format!("{name} ink range is empty"));
            }
            if ink.hi as i32 >= self.parchment as i32 - INK_MARGIN as i32 {
                return bad(format!(
                    "{name} ink {} must stay below parchment {} minus {INK_MARGIN}",
                    ink.hi, self.parchment
                ));
            }
        }
        if self.parchment as u16 + self.noise as u16 > 255 {
            return bad("parchment plus noise exceeds 255".into());
        }
        if self.stroke_thickness == 0 || self.text_line_pitch == 0 || self.comment_line_pitch == 0 {
            return bad("stroke thickness and line pitches must be positive".into());
        }
        let (rlo, rhi) = self.blob_radius;
        if rlo == 0 || rlo > rhi || 2 * rhi + 1 > self.width.min(self.height) {
            return bad(format!("invalid blob radius range {:?}", self.blob_radius));
        }
        Ok(())
    }
}

/// Strokes never enter this distance around a decoration blob, and blobs keep
/// it from each other, so a default-size binarization window around any
/// decoration pixel sees only that blob and parchment.
pub const DECORATION_CLEARANCE: usize = 8;

struct Canvas {
    width: usize,
    height: usize,
    gray: Vec<u8>,
    labels: Vec<u8>,
    keep_out: Vec<bool>,
}

impl Canvas {
    fn stamp(&mut self, x: isize, y: isize, size: usize, value: u8, class: u8) {
        let half = (size / 2) as isize;
        for yy in y - half..y - half + size as isize {
            for xx in x - half..x - half + size as isize {
                if xx >= 0 && yy >= 0 && (xx as usize) < self.width && (yy as usize) < self.height {
                    let i = yy as usize * self.width + xx as usize;
                    if class != DECORATION && self.keep_out[i] {
                        continue;
                    }
                    self.gray[i] = value;
                    self.labels[i] = class;
                }
            }
        }
    }

    /// Horizontal random-walk stroke starting at `(x, y)`, confined to `band`.
    #[allow(clippy::too_many_arguments)]
    fn stroke(
        &mut self,
        rng: &mut SamplerRng,
        x: usize,
        y: usize,
        len: usize,
        band: (isize, isize),
        thickness: usize,
        value: u8,
        class: u8,
    ) {
        let mut cy = y as isize;
        for step in 0..len {
            self.stamp((x + step) as isize, cy, thickness, value, class);
            match rng.gen_range(0..6) {
                0 => cy -= 1,
                1 => cy += 1,
                _ => {}
            }
            cy = cy.clamp(band.0, band.1);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn lines(
    canvas: &mut Canvas,
    rng: &mut SamplerRng,
    region: &Rect,
    pitch: usize,
    word_len: (usize, usize),
    density: f64,
    thickness: usize,
    ink: InkRange,
    class: u8,
) {
    let jitter = (pitch / 4) as isize;
    let mut base = region.y + pitch / 2;
    while base + thickness / 2 < region.y + region.h {
        let band = (
            (base as isize - jitter).max(region.y as isize),
            (base as isize + jitter).min((region.y + region.h - 1) as isize),
        );
        let mut x = region.x + rng.gen_range(0..=pitch / 2);
        let end = region.x + region.w;
        while x < end {
            let len = rng.gen_range(word_len.0..=word_len.1).min(end - x);
            if rng.gen_bool(density) {
                let value = rng.gen_range(ink.lo..=ink.hi);
                canvas.stroke(rng, x, base, len, band, thickness, value, class);
            }
            x += len + rng.gen_range(3..=7);
        }
        base += pitch;
    }
}

/// Render one page and its ground truth. Deterministic in `recipe.seed`.
pub fn generate_page(recipe: &PageRecipe) -> Result<(RasterImage, LabelMap)> {
    recipe.validate()?;
    let mut rng = seeded_rng(recipe.seed);
    let (w, h) = (recipe.width, recipe.height);
    let a = recipe.noise as i16;
    let gray = (0..w * h)
        .map(|_| {
            let n = if a == 0 { 0 } else { rng.gen_range(-a..=a) };
            (recipe.parchment as i16 + n).clamp(0, 255) as u8
        })
        .collect();
    let mut canvas = Canvas {
        width: w,
        height: h,
        gray,
        labels: vec![0; w * h],
        keep_out: vec![false; w * h],
    };

    let (rlo, rhi) = recipe.blob_radius;
    let clear = DECORATION_CLEARANCE;
    let mut placed: Vec<(usize, usize, usize, usize)> = Vec::new();
    for _ in 0..recipe.decoration_blobs {
        let rx = rng.gen_range(rlo..=rhi);
        let ry = rng.gen_range(rlo..=rhi);
        let value = rng.gen_range(recipe.decoration_ink.lo..=recipe.decoration_ink.hi);
        // rejection-sample a spot clear of earlier blobs; give up after a few tries
        let spot = (0..50).find_map(|_| {
            let cx = rng.gen_range(rx..w - rx);
            let cy = rng.gen_range(ry..h - ry);
            let free = placed.iter().all(|&(px, py, prx, pry)| {
                cx.abs_diff(px) > rx + prx + clear || cy.abs_diff(py) > ry + pry + clear
            });
            free.then_some((cx, cy))
        });
        let Some((cx, cy)) = spot else { continue };
        placed.push((cx, cy, rx, ry));
        for yy in cy.saturating_sub(ry + clear)..(cy + ry + clear + 1).min(h) {
            for xx in cx.saturating_sub(rx + clear)..(cx + rx + clear + 1).min(w) {
                canvas.keep_out[yy * w + xx] = true;
            }
        }
        let (cx, cy) = (cx as isize, cy as isize);
        let (rx2, ry2) = ((rx * rx) as f64, (ry * ry) as f64);
        for dy in -(ry as isize)..=ry as isize {
            for dx in -(rx as isize)..=rx as isize {
                if (dx * dx) as f64 / rx2 + (dy * dy) as f64 / ry2 <= 1.0 {
                    canvas.stamp(cx + dx, cy + dy, 1, value, DECORATION);
                }
            }
        }
    }
    for region in &recipe.comment_regions {
        lines(
            &mut canvas,
            &mut rng,
            region,
            recipe.comment_line_pitch,
            (4, 16),
            0.7,
            recipe.stroke_thickness,
            recipe.comment_ink,
            COMMENT,
        );
    }
    if let Some(block) = &recipe.text_block {
        lines(
            &mut canvas,
            &mut rng,
            block,
            recipe.text_line_pitch,
            (6, 28),
            0.85,
            recipe.stroke_thickness,
            recipe.text_ink,
            TEXT,
        );
    }

    debug_assert!(canvas
        .gray
        .iter()
        .zip(&canvas.labels)
        .all(|(&v, &l)| (l != 0) == ((v as i16) < recipe.parchment as i16 - a)));

    // warm parchment tint; luminance stays within one level of the gray value
    let rgb = canvas
        .gray
        .iter()
        .flat_map(|&v| [v.saturating_add(10), v, v.saturating_sub(25)])
        .collect();
    Ok((
        RasterImage::rgb(w, h, rgb)?,
        LabelMap::new(w, h, canvas.labels)?,
    ))
}

/// SplitMix64 finalizer, used to derive independent per-page seeds.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct SynthPage {
    pub recipe: PageRecipe,
    pub image: RasterImage,
    pub gt: LabelMap,
}

/// `n_pages` pages from `base`, page `i` seeded with `mix_seed(seed, i)`.
pub fn generate_corpus(n_pages: usize, base: &PageRecipe, seed: u64) -> Result<Vec<SynthPage>> {
    if n_pages == 0 {
        return Err(Error::InvalidParam("corpus needs at least one page".into()));
    }
    use rayon::prelude::*;
    (0..n_pages as u64)
        .into_par_iter()
        .map(|i| {
            let recipe = base.with_seed(mix_seed(seed, i));
            let (image, gt) = generate_page(&recipe)?;
            Ok(SynthPage { recipe, image, gt })
        })
        .collect()
}

/// Three synthetic "manuscripts" with distinct parchment, noise and ink
/// character, standing in for a multi-manuscript benchmark.
pub fn manuscript_recipes() -> Vec<(String, PageRecipe)> {
    let base = PageRecipe::default();
    vec![
        ("synth-a".to_string(), base.clone()),
        (
            "synth-b".to_string(),
            PageRecipe {
                parchment: 214,
                noise: 8,
                text_line_pitch: 12,
                stroke_thickness: 3,
                decoration_blobs: 18,
                text_ink: InkRange::new(40, 70),
                comment_ink: InkRange::new(95, 120),
                decoration_ink: InkRange::new(140, 165),
                ..base.clone()
            },
        ),
        (
            "synth-c".to_string(),
            PageRecipe {
                parchment: 190,
                noise: 14,
                text_block: Some(Rect::new(56, 20, 168, 300)),
                text_line_pitch: 9,
                decoration_blobs: 20,
                blob_radius: (3, 6),
                text_ink: InkRange::new(25, 55),
                comment_ink: InkRange::new(80, 100),
                decoration_ink: InkRange::new(120, 140),
                ..base
            },
        ),
    ]
}
