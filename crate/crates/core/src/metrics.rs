//! Pixel-level confusion matrix, per-class precision / recall / IoU / F1 and
//! their class-frequency weighted averages.

use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{LabelMap, NUM_CLASSES};

/// Entry `(g, p)` counts pixels of ground-truth class `g` predicted as `p`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt][pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn tp(&self, c: usize) -> u64 {
        self.counts[c][c]
    }

    pub fn fp(&self, c: usize) -> u64 {
        (0..NUM_CLASSES)
            .filter(|&g| g != c)
            .map(|g| self.counts[g][c])
            .sum()
    }

    pub fn fn_(&self, c: usize) -> u64 {
        (0..NUM_CLASSES)
            .filter(|&p| p != c)
            .map(|p| self.counts[c][p])
            .sum()
    }

    /// Ground-truth pixel count of class `c` (row sum).
    pub fn support(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|c| self.counts[c][c]).sum()
    }

    pub fn pixel_accuracy(&self) -> f64 {
        ratio(self.trace(), self.total())
    }
}

impl AddAssign for ConfusionMatrix {
    fn add_assign(&mut self, rhs: Self) {
        for g in 0..NUM_CLASSES {
            for p in 0..NUM_CLASSES {
                self.counts[g][p] += rhs.counts[g][p];
            }
        }
    }
}

pub fn confusion(gt: &LabelMap, pred: &LabelMap) -> Result<ConfusionMatrix> {
    if gt.dims() != pred.dims() {
        return Err(Error::dims(gt.dims(), pred.dims()));
    }
    let mut m = ConfusionMatrix::default();
    for (&g, &p) in gt.labels().iter().zip(pred.labels()) {
        m.counts[g as usize][p as usize] += 1;
    }
    Ok(m)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub iou: f64,
    pub f1: f64,
}

impl Scores {
    pub fn as_array(&self) -> [f64; 4] {
        [self.precision, self.recall, self.iou, self.f1]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Scores {
            precision: a[0],
            recall: a[1],
            iou: a[2],
            f1: a[3],
        }
    }

    /// Element-wise arithmetic mean; zero for an empty input.
    pub fn mean<'a>(rows: impl IntoIterator<Item = &'a Scores>) -> Scores {
        let mut acc = [0.0; 4];
        let mut n = 0usize;
        for r in rows {
            for (a, v) in acc.iter_mut().zip(r.as_array()) {
                *a += v;
            }
            n += 1;
        }
        if n == 0 {
            return Scores::default();
        }
        Scores::from_array(acc.map(|v| v / n as f64))
    }
}

/// Precision, recall, IoU and F1 for one class; zero denominators give 0.
/// F1 is the harmonic mean of precision and recall.
pub fn class_metrics(m: &ConfusionMatrix, c: usize) -> Scores {
    let (tp, fp, fn_) = (m.tp(c), m.fp(c), m.fn_(c));
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let iou = ratio(tp, tp + fp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Scores {
        precision,
        recall,
        iou,
        f1,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub class: String,
    /// Ground-truth frequency of the class.
    pub frequency: f64,
    /// False when the class never occurs in either ground truth or prediction.
    pub present: bool,
    #[serde(flatten)]
    pub scores: Scores,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub classes: Vec<ClassEntry>,
    /// Weighted by ground-truth frequency over every class, background included.
    pub weighted_all: Scores,
    /// Same, restricted to the foreground classes.
    pub weighted_foreground: Scores,
    pub pixel_accuracy: f64,
}

fn weighted(m: &ConfusionMatrix, classes: impl Iterator<Item = usize> + Clone) -> Scores {
    let support: u64 = classes
        .clone()
        .filter(|&c| m.tp(c) + m.fp(c) + m.fn_(c) > 0)
        .map(|c| m.support(c))
        .sum();
    if support == 0 {
        return Scores::default();
    }
    let mut acc = [0.0; 4];
    for c in classes {
        if m.tp(c) + m.fp(c) + m.fn_(c) == 0 {
            continue;
        }
        let f = m.support(c) as f64 / support as f64;
        for (a, v) in acc.iter_mut().zip(class_metrics(m, c).as_array()) {
            *a += f * v;
        }
    }
    Scores::from_array(acc)
}

pub fn weighted_metrics(m: &ConfusionMatrix) -> MetricRow {
    let total = m.total();
    let classes = (0..NUM_CLASSES)
        .map(|c| ClassEntry {
            class: crate::imagecore::CLASS_NAMES[c].to_string(),
            frequency: ratio(m.support(c), total),
            present: m.tp(c) + m.fp(c) + m.fn_(c) > 0,
            scores: class_metrics(m, c),
        })
        .collect();
    MetricRow {
        classes,
        weighted_all: weighted(m, 0..NUM_CLASSES),
        weighted_foreground: weighted(m, 1..NUM_CLASSES),
        pixel_accuracy: m.pixel_accuracy(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn from_tp_fp_fn(tp: u64, fp: u64, fn_: u64) -> ConfusionMatrix {
        let mut m = ConfusionMatrix::default();
        m.counts[1][1] = tp;
        m.counts[0][1] = fp;
        m.counts[1][0] = fn_;
        m
    }

    #[test]
    fn confusion_examples() {
        let gt = LabelMap::new(2, 2, vec![0, 1, 1, 2]).unwrap();
        let pred = LabelMap::new(2, 2, vec![0, 1, 0, 2]).unwrap();
        let m = confusion(&gt, &pred).unwrap();
        let mut want = ConfusionMatrix::default();
        want.counts[0][0] = 1;
        want.counts[1][1] = 1;
        want.counts[1][0] = 1;
        want.counts[2][2] = 1;
        assert_eq!(m, want);

        let same = confusion(&gt, &gt).unwrap();
        assert_eq!(same.trace(), 4);

        let ones = LabelMap::filled(3, 2, 1).unwrap();
        let zeros = LabelMap::filled(3, 2, 0).unwrap();
        let m = confusion(&ones, &zeros).unwrap();
        assert_eq!(m.get(1, 0), 6);
        assert_eq!(m.total(), 6);
        assert!(confusion(&ones, &LabelMap::filled(2, 3, 0).unwrap()).is_err());
    }

    #[test]
    fn class_metric_examples() {
        let s = class_metrics(&from_tp_fp_fn(1, 0, 0), 1);
        assert_eq!(s.as_array(), [1.0, 1.0, 1.0, 1.0]);
        let s = class_metrics(&from_tp_fp_fn(1, 1, 1), 1);
        assert_eq!((s.precision, s.recall, s.f1), (0.5, 0.5, 0.5));
        assert!((s.iou - 1.0 / 3.0).abs() < 1e-15);
        let s = class_metrics(&from_tp_fp_fn(0, 0, 5), 1);
        assert_eq!(s.as_array(), [0.0; 4]);
    }

    #[test]
    fn weighted_examples() {
        let gt = LabelMap::new(2, 2, vec![0, 1, 2, 3]).unwrap();
        let row = weighted_metrics(&confusion(&gt, &gt).unwrap());
        assert_eq!(row.weighted_all.as_array(), [1.0; 4]);
        assert_eq!(row.weighted_foreground.as_array(), [1.0; 4]);

        // class 0 perfect on 3 pixels, class 1 (1 pixel) entirely missed as class 2
        let gt = LabelMap::new(4, 1, vec![0, 0, 0, 1]).unwrap();
        let pred = LabelMap::new(4, 1, vec![0, 0, 0, 2]).unwrap();
        let row = weighted_metrics(&confusion(&gt, &pred).unwrap());
        assert_eq!(row.classes[0].scores.iou, 1.0);
        assert_eq!(row.classes[1].scores.iou, 0.0);
        // class 2 has no support, class 3 is absent entirely
        assert!(row.classes[2].present && !row.classes[3].present);
        assert!((row.weighted_all.iou - 0.75).abs() < 1e-15);
        assert_eq!(row.weighted_foreground.iou, 0.0);
    }

    fn map_pair() -> impl Strategy<Value = (LabelMap, LabelMap)> {
        (1usize..33, 1usize..33).prop_flat_map(|(w, h)| {
            (
                proptest::collection::vec(0u8..4, w * h),
                proptest::collection::vec(0u8..4, w * h),
            )
                .prop_map(move |(a, b)| {
                    (
                        LabelMap::new(w, h, a).unwrap(),
                        LabelMap::new(w, h, b).unwrap(),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn confusion_matches_double_loop((gt, pred) in map_pair()) {
            let m = confusion(&gt, &pred).unwrap();
            for g in 0..4u8 {
                for p in 0..4u8 {
                    let mut n = 0u64;
                    for y in 0..gt.height() {
                        for x in 0..gt.width() {
                            if gt.get(x, y) == g && pred.get(x, y) == p {
                                n += 1;
                            }
                        }
                    }
                    prop_assert_eq!(m.get(g as usize, p as usize), n);
                }
            }
        }

        #[test]
        fn per_class_identities((gt, pred) in map_pair()) {
            let m = confusion(&gt, &pred).unwrap();
            for c in 0..4 {
                let s = class_metrics(&m, c);
                let (tp, fp, fn_) = (m.tp(c) as f64, m.fp(c) as f64, m.fn_(c) as f64);
                let direct = if tp == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fn_) };
                prop_assert!((s.f1 - direct).abs() < 1e-12);
                prop_assert!(s.iou <= s.f1 + 1e-15);
                prop_assert!(s.f1 <= 1.0);
            }
        }

        #[test]
        fn weighted_within_class_extremes((gt, pred) in map_pair()) {
            let row = weighted_metrics(&confusion(&gt, &pred).unwrap());
            let present: Vec<_> = row.classes.iter().filter(|c| c.present && c.frequency > 0.0).collect();
            for k in 0..4 {
                let vals: Vec<f64> = present.iter().map(|c| c.scores.as_array()[k]).collect();
                let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let w = row.weighted_all.as_array()[k];
                prop_assert!(w >= lo - 1e-12 && w <= hi + 1e-12);
            }
        }

        #[test]
        fn label_permutation_invariance((gt, pred) in map_pair(), perm in Just([0u8, 1, 2, 3]).prop_shuffle()) {
            let apply = |m: &LabelMap| {
                LabelMap::new(m.width(), m.height(), m.labels().iter().map(|&l| perm[l as usize]).collect()).unwrap()
            };
            let a = weighted_metrics(&confusion(&gt, &pred).unwrap());
            let b = weighted_metrics(&confusion(&apply(&gt), &apply(&pred)).unwrap());
            for c in 0..4 {
                prop_assert_eq!(a.classes[c].scores, b.classes[perm[c] as usize].scores);
            }
            for k in 0..4 {
                prop_assert!((a.weighted_all.as_array()[k] - b.weighted_all.as_array()[k]).abs() < 1e-12);
            }
        }
    }
}
