use serde::{Deserialize, Serialize};

use super::ClassField;
use crate::error::{Error, Result};
use crate::imagecore::{LabelMap, NUM_CLASSES};

/// Lower clamp on the true-class probability before taking its log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Published per-manuscript class distributions as fractions, in class index
/// order (background, main text, comment, decoration).
pub const REFERENCE_CLASS_DISTRIBUTION: [(&str, [f64; NUM_CLASSES]); 3] = [
    ("CB55", [0.8241, 0.0868, 0.0836, 0.0055]),
    ("CSG18", [0.8516, 0.0659, 0.0678, 0.0147]),
    ("CSG863", [0.7782, 0.1400, 0.0635, 0.0183]),
];

/// Fraction of pixels carrying each class across all maps.
pub fn class_frequencies(gts: &[LabelMap]) -> Result<[f64; NUM_CLASSES]> {
    let counts = class_counts(gts);
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::Data("no ground-truth pixels".into()));
    }
    Ok(counts.map(|c| c as f64 / total as f64))
}

pub fn class_counts(gts: &[LabelMap]) -> [u64; NUM_CLASSES] {
    gts.iter().fold([0u64; NUM_CLASSES], |mut acc, g| {
        for (a, c) in acc.iter_mut().zip(g.class_counts()) {
            *a += c;
        }
        acc
    })
}

/// Inverse-square-root class weights, `w_i = sqrt(1 / F_i)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights(pub [f64; NUM_CLASSES]);

impl ClassWeights {
    pub fn uniform() -> Self {
        ClassWeights([1.0; NUM_CLASSES])
    }

    pub fn get(&self, class: usize) -> f64 {
        self.0[class]
    }
}

pub fn class_weights(freqs: &[f64; NUM_CLASSES]) -> Result<ClassWeights> {
    let mut w = [0.0; NUM_CLASSES];
    for (class, (slot, &f)) in w.iter_mut().zip(freqs).enumerate() {
        if f <= 0.0 || !f.is_finite() {
            return Err(Error::ZeroFrequency { class });
        }
        *slot = (1.0 / f).sqrt();
    }
    Ok(ClassWeights(w))
}

/// Mean weighted cross-entropy over a patch and its gradient with respect to
/// the logits, `(w_y / N) * (p - onehot(y))` per pixel.
pub fn weighted_ce_loss(
    probs: &ClassField,
    gt: &LabelMap,
    weights: &ClassWeights,
) -> Result<(f64, ClassField)> {
    if probs.dims() != gt.dims() {
        return Err(Error::dims(probs.dims(), gt.dims()));
    }
    let n = probs.pixels() as f64;
    let mut grad = probs.clone();
    let mut loss = 0.0;
    for (p, &y) in gt.labels().iter().enumerate() {
        let y = y as usize;
        let w = weights.get(y);
        loss += w * -probs.get(p, y).max(PROB_FLOOR).ln();
        for c in 0..NUM_CLASSES {
            let onehot = if c == y { 1.0 } else { 0.0 };
            grad.set(p, c, w / n * (probs.get(p, c) - onehot));
        }
    }
    Ok((loss / n, grad))
}
