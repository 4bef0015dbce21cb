use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{
    adam_step, class_counts, class_weights, weighted_ce_loss, AdamState, Backbone, ClassWeights,
    WindowClassifier,
};
use crate::error::{Error, Result};
use crate::imagecore::{LabelMap, RasterImage, NUM_CLASSES};
use crate::sampler::{epoch_dataset, seeded_rng, tile, PatchKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub early_stop_start: usize,
    pub patience: usize,
    pub crops_per_image: usize,
    pub seed: u64,
    pub patch_side: usize,
    pub window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            weight_decay: 1e-5,
            max_epochs: 200,
            early_stop_start: 50,
            patience: 20,
            crops_per_image: 10,
            seed: 0,
            patch_side: 224,
            window: super::backbone::DEFAULT_WINDOW,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            ));
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be >= 1".into());
        }
        if self.patch_side == 0 {
            return bad("patch_side must be >= 1".into());
        }
        if self.window == 0 || self.window.is_multiple_of(2) {
            return bad(format!("window must be odd, got {}", self.window));
        }
        Ok(())
    }
}

/// Early-stop rule: active from epoch `start` on, fires once `patience`
/// epochs have passed without improving on the best epoch.
pub fn should_stop(epoch: usize, best_epoch: usize, start: usize, patience: usize) -> bool {
    epoch >= start && epoch.saturating_sub(best_epoch) >= patience
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean weighted loss over the baseline patches of this epoch.
    pub loss: f64,
    pub lr: f64,
    pub stop: bool,
    pub best_epoch: usize,
    pub instances: usize,
    pub dynamic_instances: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub frequency_units: String,
    pub loss_normalization: String,
    pub frequencies: [f64; NUM_CLASSES],
    pub frequency_smoothing: bool,
    pub class_weights: ClassWeights,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_loss: f64,
    pub total_dynamic_instances: usize,
}

impl TrainLog {
    pub fn initial_loss(&self) -> Option<f64> {
        self.epochs.first().map(|e| e.loss)
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.loss)
    }

    /// JSON lines: one setup record, then one record per epoch.
    pub fn to_jsonl(&self) -> String {
        let setup = serde_json::json!({
            "event": "setup",
            "frequency_units": self.frequency_units,
            "loss_normalization": self.loss_normalization,
            "frequencies": self.frequencies,
            "frequency_smoothing": self.frequency_smoothing,
            "class_weights": self.class_weights.0,
        });
        let mut out = setup.to_string();
        out.push('\n');
        for e in &self.epochs {
            out.push_str(&serde_json::to_string(e).expect("epoch record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(self.to_jsonl().as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}

/// Class weights for a training set. Absent classes get one pseudo-pixel
/// each so every weight stays finite.
fn training_weights(gts: &[LabelMap]) -> Result<([f64; NUM_CLASSES], bool, ClassWeights)> {
    let counts = class_counts(gts);
    let smoothing = counts.contains(&0);
    let pseudo = if smoothing { 1 } else { 0 };
    let total: u64 = counts.iter().map(|c| c + pseudo).sum();
    let freqs = counts.map(|c| (c + pseudo) as f64 / total as f64);
    Ok((freqs, smoothing, class_weights(&freqs)?))
}

/// Train the reference backbone from zero-initialized parameters.
pub fn train(
    images: &[RasterImage],
    gts: &[LabelMap],
    cfg: &TrainConfig,
) -> Result<(WindowClassifier, TrainLog)> {
    cfg.validate()?;
    train_backbone(WindowClassifier::zeros(cfg.window)?, images, gts, cfg)
}

/// Single-threaded training loop: per epoch, every baseline patch plus fresh
/// random crops, one Adam step per patch. Returns the parameters from the
/// epoch with the lowest baseline loss.
pub fn train_backbone<B: Backbone>(
    mut model: B,
    images: &[RasterImage],
    gts: &[LabelMap],
    cfg: &TrainConfig,
) -> Result<(B, TrainLog)> {
    cfg.validate()?;
    if images.is_empty() {
        return Err(Error::Data("training needs at least one image".into()));
    }
    if images.len() != gts.len() {
        return Err(Error::Data(format!(
            "{} images but {} ground-truth maps",
            images.len(),
            gts.len()
        )));
    }
    let grays: Vec<RasterImage> = images.iter().map(RasterImage::ensure_gray).collect();
    let mut baseline = Vec::with_capacity(grays.len());
    for (i, (img, gt)) in grays.iter().zip(gts).enumerate() {
        if img.dims() != gt.dims() {
            return Err(Error::dims(img.dims(), gt.dims()));
        }
        baseline.push(tile(img.width(), img.height(), cfg.patch_side)?.for_image(i));
    }
    let (frequencies, frequency_smoothing, weights) = training_weights(gts)?;

    let mut rng = seeded_rng(cfg.seed);
    let mut adam = AdamState::new(model.params().len());
    let mut grad = vec![0.0; model.params().len()];
    let mut best_model = model.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut epochs = Vec::new();
    let mut total_dynamic = 0;

    for epoch in 1..=cfg.max_epochs {
        let mut instances = epoch_dataset(&baseline, &grays, gts, cfg.crops_per_image, &mut rng)?;
        instances.shuffle(&mut rng);
        let (mut base_loss, mut base_count, mut dynamic) = (0.0, 0usize, 0usize);
        for inst in &instances {
            let probs = model.forward(&inst.image)?;
            let (loss, dlogits) = weighted_ce_loss(&probs, &inst.labels, &weights)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "loss became {loss} in epoch {epoch}"
                )));
            }
            match inst.kind {
                PatchKind::Baseline => {
                    base_loss += loss;
                    base_count += 1;
                }
                PatchKind::Dynamic => dynamic += 1,
            }
            grad.iter_mut().for_each(|g| *g = 0.0);
            model.backward(&inst.image, &dlogits, &mut grad)?;
            adam_step(
                model.params_mut(),
                &grad,
                &mut adam,
                cfg.learning_rate,
                cfg.weight_decay,
            )?;
        }
        if model.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Numeric(format!(
                "parameters diverged in epoch {epoch}"
            )));
        }
        total_dynamic += dynamic;
        let epoch_loss = base_loss / base_count as f64;
        if epoch_loss < best_loss {
            best_loss = epoch_loss;
            best_epoch = epoch;
            best_model = model.clone();
        }
        let stop = should_stop(epoch, best_epoch, cfg.early_stop_start, cfg.patience);
        epochs.push(EpochRecord {
            epoch,
            loss: epoch_loss,
            lr: cfg.learning_rate,
            stop,
            best_epoch,
            instances: instances.len(),
            dynamic_instances: dynamic,
        });
        if stop {
            break;
        }
    }

    let log = TrainLog {
        frequency_units: "fraction".into(),
        loss_normalization: "per_patch_mean".into(),
        frequencies,
        frequency_smoothing,
        class_weights: weights,
        epochs,
        best_epoch,
        best_loss,
        total_dynamic_instances: total_dynamic,
    };
    Ok((best_model, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stop_rule_examples() {
        for best in 0..=49 {
            assert!(!should_stop(49, best, 50, 20));
        }
        assert!(should_stop(70, 50, 50, 20));
        assert!(!should_stop(69, 50, 50, 20));
        assert!(!should_stop(70, 65, 50, 20));
    }

    #[test]
    fn stop_rule_is_monotone_in_epoch() {
        for best in 0..120 {
            let mut fired = false;
            for epoch in best..200 {
                let s = should_stop(epoch, best, 50, 20);
                assert!(!fired || s);
                fired |= s;
            }
        }
    }

    #[test]
    fn defaults() {
        let c = TrainConfig::default();
        assert_eq!((c.learning_rate, c.weight_decay), (1e-3, 1e-5));
        assert_eq!(
            (
                c.max_epochs,
                c.early_stop_start,
                c.patience,
                c.crops_per_image
            ),
            (200, 50, 20, 10)
        );
        assert_eq!((c.patch_side, c.window), (224, 7));
        c.validate().unwrap();
        assert!(TrainConfig {
            window: 4,
            ..c.clone()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            learning_rate: 0.0,
            ..c
        }
        .validate()
        .is_err());
    }

    #[test]
    fn absent_classes_get_smoothed_weights() {
        let gt = LabelMap::new(2, 2, vec![0, 0, 0, 1]).unwrap();
        let (f, smoothed, w) = training_weights(&[gt]).unwrap();
        assert!(smoothed);
        assert_eq!(f, [4.0 / 8.0, 2.0 / 8.0, 1.0 / 8.0, 1.0 / 8.0]);
        assert!(w.0.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn input_validation() {
        let img = RasterImage::filled(8, 8, 1, 9).unwrap();
        let gt = LabelMap::filled(8, 8, 0).unwrap();
        let cfg = TrainConfig {
            patch_side: 3,
            max_epochs: 1,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(std::slice::from_ref(&img), std::slice::from_ref(&gt), &cfg),
            Err(Error::NotDivisible { .. })
        ));
        assert!(train(&[], &[], &cfg).is_err());
        let small = LabelMap::filled(4, 4, 0).unwrap();
        assert!(train(
            &[img],
            &[small],
            &TrainConfig {
                patch_side: 4,
                ..cfg
            }
        )
        .is_err());
    }

    #[test]
    fn jsonl_has_setup_and_epoch_lines() {
        let img = RasterImage::gray(
            8,
            8,
            (0..64).map(|i| if i % 3 == 0 { 20 } else { 220 }).collect(),
        )
        .unwrap();
        let gt = LabelMap::new(
            8,
            8,
            (0..64).map(|i| if i % 3 == 0 { 1 } else { 0 }).collect(),
        )
        .unwrap();
        let cfg = TrainConfig {
            patch_side: 4,
            max_epochs: 3,
            crops_per_image: 2,
            window: 3,
            ..TrainConfig::default()
        };
        let (_, log) = train(&[img], &[gt], &cfg).unwrap();
        let text = log.to_jsonl();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        let setup: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(setup["frequency_units"], "fraction");
        let e: EpochRecord = serde_json::from_str(lines[3]).unwrap();
        assert_eq!((e.epoch, e.instances, e.dynamic_instances), (3, 6, 2));
        assert_eq!(log.total_dynamic_instances, 6);
    }
}
