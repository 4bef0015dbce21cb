mod common;

use folio::imagecore::{ClassPalette, LabelMap, RasterImage};
use folio::metrics::{confusion, weighted_metrics};
use folio::model::{train, TrainConfig};
use folio::pipeline::{run_pipeline, write_synthetic_corpus, ModelSource, PipelineConfig};
use folio::sampler::seeded_rng;
use folio::synth::{generate_page, manuscript_recipes};
use rand::Rng;

fn quick_config(dir: &std::path::Path, refinement: bool) -> PipelineConfig {
    PipelineConfig {
        max_epochs: 4,
        crops_per_image: 2,
        refinement,
        ..PipelineConfig::synthetic(
            dir.join("corpus/manifest.json"),
            dir.join(if refinement { "on" } else { "off" }),
        )
    }
}

#[test]
fn refinement_off_keeps_coarse_maps() {
    let dir = tempfile::tempdir().unwrap();
    write_synthetic_corpus(dir.path().join("corpus"), 5, 1, 1, &ClassPalette::default()).unwrap();
    let cfg = quick_config(dir.path(), false);
    let metrics = run_pipeline(&cfg, &ModelSource::Train).unwrap();
    assert_eq!(metrics.result.config, "w/ dynamic crop gen.");
    for corpus in ["synth-a", "synth-b", "synth-c"] {
        let pred = std::fs::read(cfg.output_dir.join(format!("{corpus}-test-0-pred.png"))).unwrap();
        let coarse =
            std::fs::read(cfg.output_dir.join(format!("{corpus}-test-0-coarse.png"))).unwrap();
        assert_eq!(pred, coarse);
    }
}

#[test]
fn rerun_and_reload_give_identical_metrics() {
    let dir = tempfile::tempdir().unwrap();
    write_synthetic_corpus(dir.path().join("corpus"), 6, 1, 1, &ClassPalette::default()).unwrap();
    let cfg = quick_config(dir.path(), true);
    run_pipeline(&cfg, &ModelSource::Train).unwrap();
    let first = std::fs::read(cfg.output_dir.join("metrics.json")).unwrap();
    let models = dir.path().join("models");
    std::fs::rename(&cfg.output_dir, &models).unwrap();

    run_pipeline(&cfg, &ModelSource::Train).unwrap();
    assert_eq!(
        std::fs::read(cfg.output_dir.join("metrics.json")).unwrap(),
        first
    );
    std::fs::remove_dir_all(&cfg.output_dir).unwrap();

    run_pipeline(&cfg, &ModelSource::Load(models)).unwrap();
    assert_eq!(
        std::fs::read(cfg.output_dir.join("metrics.json")).unwrap(),
        first
    );
    let csv = std::fs::read_to_string(cfg.output_dir.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 6 + 2);
}

/// Blocks of four flat tones, one per class.
fn pure_tone_page(seed: u64) -> (RasterImage, LabelMap) {
    let (w, h) = (64, 64);
    let tones = [220u8, 30, 90, 150];
    let mut rng = seeded_rng(seed);
    let mut labels = vec![0u8; w * h];
    for by in 0..8 {
        for bx in 0..8 {
            let class = if rng.gen_bool(0.5) {
                0
            } else {
                rng.gen_range(1..4)
            };
            for y in by * 8..by * 8 + 8 {
                for x in bx * 8..bx * 8 + 8 {
                    labels[y * w + x] = class;
                }
            }
        }
    }
    let pixels = labels.iter().map(|&l| tones[l as usize]).collect();
    (
        RasterImage::gray(w, h, pixels).unwrap(),
        LabelMap::new(w, h, labels).unwrap(),
    )
}

#[test]
fn separable_tones_are_learned() {
    let pages: Vec<_> = (0..2).map(pure_tone_page).collect();
    let images: Vec<_> = pages.iter().map(|p| p.0.clone()).collect();
    let gts: Vec<_> = pages.iter().map(|p| p.1.clone()).collect();
    let cfg = TrainConfig {
        learning_rate: 0.05,
        max_epochs: 40,
        patch_side: 32,
        window: 3,
        crops_per_image: 2,
        ..TrainConfig::default()
    };
    let (model, _) = train(&images, &gts, &cfg).unwrap();
    let (page, gt) = pure_tone_page(9);
    let pred = folio::model::predict_page(&model, &page, 32).unwrap();
    let accuracy = weighted_metrics(&confusion(&gt, &pred).unwrap()).pixel_accuracy;
    assert!(accuracy > 0.95, "pixel accuracy {accuracy}");
}

#[test]
fn loss_decreases_over_fifty_epochs() {
    let (_, recipe) = manuscript_recipes().remove(0);
    let (image, gt) = generate_page(&recipe.with_seed(11)).unwrap();
    let cfg = TrainConfig {
        max_epochs: 50,
        patch_side: 56,
        crops_per_image: 2,
        ..TrainConfig::default()
    };
    let (_, log) = train(&[image], &[gt], &cfg).unwrap();
    assert_eq!(log.epochs.len(), 50);
    let (first, last) = (log.initial_loss().unwrap(), log.final_loss().unwrap());
    assert!(last < 0.5 * first, "loss {first} -> {last}");
    assert!(log.best_loss <= last);
}

#[test]
fn training_is_deterministic() {
    let (_, recipe) = manuscript_recipes().remove(1);
    let (image, gt) = generate_page(&recipe.with_seed(2)).unwrap();
    let cfg = TrainConfig {
        max_epochs: 5,
        patch_side: 56,
        seed: 17,
        ..TrainConfig::default()
    };
    let (a, log_a) = train(
        std::slice::from_ref(&image),
        std::slice::from_ref(&gt),
        &cfg,
    )
    .unwrap();
    let (b, log_b) = train(
        std::slice::from_ref(&image),
        std::slice::from_ref(&gt),
        &cfg,
    )
    .unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
    assert_eq!(log_a.to_jsonl(), log_b.to_jsonl());

    let other = TrainConfig { seed: 18, ..cfg };
    let (c, _) = train(&[image], &[gt], &other).unwrap();
    assert_ne!(a.to_bytes(), c.to_bytes());
}

#[test]
fn refinement_lifts_dilated_ground_truth() {
    let (_, recipe) = manuscript_recipes().remove(2);
    let (image, gt) = generate_page(&recipe.with_seed(4)).unwrap();
    let coarse = common::dilate(&gt, 2);
    let mask = folio::binarize::sauvola_mask(
        &image.ensure_gray(),
        &Default::default(),
        folio::binarize::StatsPath::Integral,
    )
    .unwrap();
    let (refined, report) = folio::refine::refine(&coarse, &mask).unwrap();
    let before = weighted_metrics(&confusion(&gt, &coarse).unwrap())
        .weighted_all
        .iou;
    let after = weighted_metrics(&confusion(&gt, &refined).unwrap())
        .weighted_all
        .iou;
    assert!(after > before + 0.1, "{before} -> {after}");
    assert!(report.flipped > 0);
}
