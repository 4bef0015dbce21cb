#![allow(dead_code)]

use folio::imagecore::{LabelMap, RasterImage};
use rand::Rng;

/// Grow every foreground region by `radius` pixels (8-connected). A
/// background pixel next to several classes takes the smallest label.
pub fn dilate(map: &LabelMap, radius: usize) -> LabelMap {
    let (w, h) = map.dims();
    let mut cur = map.labels().to_vec();
    for _ in 0..radius {
        let prev = cur.clone();
        for y in 0..h {
            for x in 0..w {
                if prev[y * w + x] != 0 {
                    continue;
                }
                let mut best = 0u8;
                for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                    for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                        let l = prev[ny * w + nx];
                        if l != 0 && (best == 0 || l < best) {
                            best = l;
                        }
                    }
                }
                cur[y * w + x] = best;
            }
        }
    }
    LabelMap::new(w, h, cur).unwrap()
}

pub fn random_gray<R: Rng>(w: usize, h: usize, rng: &mut R) -> RasterImage {
    RasterImage::gray(w, h, (0..w * h).map(|_| rng.gen()).collect()).unwrap()
}

pub fn random_labels<R: Rng>(w: usize, h: usize, rng: &mut R) -> LabelMap {
    LabelMap::new(w, h, (0..w * h).map(|_| rng.gen_range(0..4)).collect()).unwrap()
}
