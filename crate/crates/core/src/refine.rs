//! Segmentation refinement: the coarse label map multiplied pixel-wise by the
//! binary ink mask, so foreground survives only on dark pixels.

use serde::{Deserialize, Serialize};

use crate::binarize::BinaryMask;
use crate::error::{Error, Result};
use crate::imagecore::{LabelMap, NUM_CLASSES};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementReport {
    /// Foreground pixels turned into background.
    pub flipped: u64,
    /// Flips broken down by the coarse class; entry 0 is always zero.
    pub flipped_per_class: [u64; NUM_CLASSES],
    pub coarse_foreground: u64,
}

pub fn refine(coarse: &LabelMap, mask: &BinaryMask) -> Result<(LabelMap, RefinementReport)> {
    if coarse.dims() != mask.dims() {
        return Err(Error::dims(coarse.dims(), mask.dims()));
    }
    let mut report = RefinementReport::default();
    let labels = coarse
        .labels()
        .iter()
        .zip(mask.bits())
        .map(|(&l, &m)| {
            if l != 0 {
                report.coarse_foreground += 1;
                if m == 0 {
                    report.flipped += 1;
                    report.flipped_per_class[l as usize] += 1;
                }
            }
            l * m
        })
        .collect();
    Ok((
        LabelMap::new(coarse.width(), coarse.height(), labels)?,
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn checker(w: usize, h: usize) -> BinaryMask {
        BinaryMask::new(
            w,
            h,
            (0..w * h).map(|i| ((i % w + i / w) % 2) as u8).collect(),
        )
        .unwrap()
    }

    #[test]
    fn background_stays_background() {
        let coarse = LabelMap::filled(6, 4, 0).unwrap();
        let (out, rep) = refine(&coarse, &checker(6, 4)).unwrap();
        assert_eq!(out, coarse);
        assert_eq!(rep.flipped, 0);
    }

    #[test]
    fn full_mask_is_identity() {
        let coarse = LabelMap::new(2, 2, vec![0, 1, 2, 3]).unwrap();
        let (out, rep) = refine(&coarse, &BinaryMask::filled(2, 2, true).unwrap()).unwrap();
        assert_eq!(out, coarse);
        assert_eq!(rep.flipped, 0);
        assert_eq!(rep.coarse_foreground, 3);
    }

    #[test]
    fn checkerboard_halves_a_solid_class() {
        let coarse = LabelMap::filled(6, 4, 1).unwrap();
        let mask = checker(6, 4);
        let (out, rep) = refine(&coarse, &mask).unwrap();
        assert_eq!(out.labels(), mask.bits());
        assert_eq!(rep.flipped, 12);
        assert_eq!(rep.flipped_per_class, [0, 12, 0, 0]);
    }

    #[test]
    fn dimension_mismatch() {
        let coarse = LabelMap::filled(3, 3, 1).unwrap();
        assert!(matches!(
            refine(&coarse, &checker(3, 2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn refinement_properties(
            (w, h, labels, bits) in (1usize..24, 1usize..24).prop_flat_map(|(w, h)| {
                (
                    Just(w),
                    Just(h),
                    proptest::collection::vec(0u8..4, w * h),
                    proptest::collection::vec(0u8..2, w * h),
                )
            }),
        ) {
            let coarse = LabelMap::new(w, h, labels).unwrap();
            let mask = BinaryMask::new(w, h, bits).unwrap();
            let (out, rep) = refine(&coarse, &mask).unwrap();
            for (o, c) in out.labels().iter().zip(coarse.labels()) {
                prop_assert!(*o == 0 || *o == *c);
            }
            prop_assert!(rep.flipped <= rep.coarse_foreground);
            prop_assert_eq!(rep.flipped_per_class.iter().sum::<u64>(), rep.flipped);
            let (again, _) = refine(&out, &mask).unwrap();
            prop_assert_eq!(again, out);
        }
    }
}
