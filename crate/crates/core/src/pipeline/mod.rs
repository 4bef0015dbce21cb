//! End-to-end orchestration: train per manuscript, stitch page predictions,
//! refine, evaluate, and the four-way ablation.

mod config;
mod corpus;

pub use config::PipelineConfig;
pub use corpus::{
    load_corpus, write_synthetic_corpus, Manifest, ManifestEntry, Manuscript, Page, Split,
    MANIFEST_SCHEMA,
};

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binarize::{sauvola_mask, SauvolaParams, StatsPath};
use crate::error::{Error, Result};
use crate::imagecore::{save_labels, save_raster, ClassPalette, LabelMap, RasterImage};
use crate::metrics::{confusion, weighted_metrics, ConfusionMatrix, MetricRow, Scores};
use crate::model::{predict_page, train, TrainConfig, TrainLog, WindowClassifier};
use crate::refine::refine;
use crate::report::{csv_mean_rows, csv_rows, render_ablation, TableRow, CSV_HEADER};

pub const METRICS_SCHEMA: u32 = 1;

/// The four ablation configurations in table order: (name, dynamic crops,
/// refinement).
pub const ABLATION_CONFIGS: [(&str, bool, bool); 4] = [
    ("baseline", false, false),
    ("w/ seg. refinement", false, true),
    ("w/ dynamic crop gen.", true, false),
    ("w/ both", true, true),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusResult {
    pub corpus: String,
    pub test_pages: usize,
    pub metrics: MetricRow,
}

/// Scores of one configuration: one entry per manuscript plus the mean of
/// their weighted averages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigResult {
    pub config: String,
    pub dynamic_crops: bool,
    pub refinement: bool,
    pub corpora: Vec<CorpusResult>,
    pub mean_weighted_all: Scores,
    pub mean_weighted_foreground: Scores,
}

impl ConfigResult {
    fn new(
        config: &str,
        dynamic_crops: bool,
        refinement: bool,
        corpora: Vec<CorpusResult>,
    ) -> Self {
        let mean_weighted_all = Scores::mean(corpora.iter().map(|c| &c.metrics.weighted_all));
        let mean_weighted_foreground =
            Scores::mean(corpora.iter().map(|c| &c.metrics.weighted_foreground));
        ConfigResult {
            config: config.to_string(),
            dynamic_crops,
            refinement,
            corpora,
            mean_weighted_all,
            mean_weighted_foreground,
        }
    }

    pub fn csv(&self) -> String {
        let mut out = String::new();
        for c in &self.corpora {
            out.push_str(&csv_rows(&c.corpus, &self.config, &c.metrics));
        }
        out.push_str(&csv_mean_rows(
            &self.config,
            &self.mean_weighted_all,
            &self.mean_weighted_foreground,
        ));
        out
    }

    pub fn table_row(&self) -> TableRow {
        TableRow {
            config: self.config.clone(),
            corpora: self
                .corpora
                .iter()
                .map(|c| c.metrics.weighted_all)
                .collect(),
            mean: self.mean_weighted_all,
        }
    }
}

/// Contents of `metrics.json` for a single pipeline run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineMetrics {
    pub schema: u32,
    pub seed: u64,
    #[serde(flatten)]
    pub result: ConfigResult,
}

/// Contents of `ablation.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationMetrics {
    pub schema: u32,
    pub seed: u64,
    pub configs: Vec<ConfigResult>,
}

impl AblationMetrics {
    pub fn csv(&self) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        for c in &self.configs {
            out.push_str(&c.csv());
        }
        out
    }

    pub fn table(&self) -> String {
        let names: Vec<String> = self
            .configs
            .first()
            .map(|c| c.corpora.iter().map(|r| r.corpus.clone()).collect())
            .unwrap_or_default();
        let rows: Vec<TableRow> = self.configs.iter().map(ConfigResult::table_row).collect();
        render_ablation(&names, &rows)
    }

    pub fn config(&self, name: &str) -> Option<&ConfigResult> {
        self.configs.iter().find(|c| c.config == name)
    }
}

/// Maps produced for one test page.
#[derive(Clone, Debug)]
pub struct PagePrediction {
    pub id: String,
    pub coarse: LabelMap,
    pub refined: LabelMap,
}

/// Coarse prediction plus its refinement by the page's ink mask.
pub fn predict(
    model: &WindowClassifier,
    page: &RasterImage,
    side: usize,
    sauvola: &SauvolaParams,
) -> Result<(LabelMap, LabelMap)> {
    let gray = page.ensure_gray();
    let coarse = predict_page(model, &gray, side)?;
    let mask = sauvola_mask(&gray, sauvola, StatsPath::Integral)?;
    let (refined, _) = refine(&coarse, &mask)?;
    Ok((coarse, refined))
}

/// Palette colour blended at 50% over the grayscale page on predicted
/// foreground; background pixels keep the page intensity.
pub fn overlay(page: &RasterImage, pred: &LabelMap, palette: &ClassPalette) -> Result<RasterImage> {
    let gray = page.ensure_gray();
    if gray.dims() != pred.dims() {
        return Err(Error::dims(gray.dims(), pred.dims()));
    }
    let mut data = Vec::with_capacity(gray.data().len() * 3);
    for (&g, &l) in gray.data().iter().zip(pred.labels()) {
        if l == 0 {
            data.extend_from_slice(&[g, g, g]);
        } else {
            for c in palette.color(l) {
                data.push((g as u16 + c as u16).div_ceil(2) as u8);
            }
        }
    }
    RasterImage::rgb(gray.width(), gray.height(), data)
}

fn train_manuscript(m: &Manuscript, cfg: &TrainConfig) -> Result<(WindowClassifier, TrainLog)> {
    let images: Vec<RasterImage> = m.train.iter().map(|p| p.image.clone()).collect();
    let gts: Vec<LabelMap> = m.train.iter().map(|p| p.gt.clone()).collect();
    train(&images, &gts, cfg).map_err(|e| match e {
        Error::Numeric(msg) => Error::Numeric(format!("training {}: {msg}", m.name)),
        other => other,
    })
}

fn evaluate_manuscript(
    m: &Manuscript,
    model: &WindowClassifier,
    cfg: &PipelineConfig,
) -> Result<(Vec<PagePrediction>, ConfusionMatrix, ConfusionMatrix)> {
    let sauvola = cfg.sauvola()?;
    let preds = m
        .test
        .par_iter()
        .map(|p| {
            let (coarse, refined) = predict(model, &p.image, cfg.patch_side, &sauvola)?;
            Ok(PagePrediction {
                id: p.id.clone(),
                coarse,
                refined,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut coarse_m = ConfusionMatrix::default();
    let mut refined_m = ConfusionMatrix::default();
    for (page, pred) in m.test.iter().zip(&preds) {
        coarse_m += confusion(&page.gt, &pred.coarse)?;
        refined_m += confusion(&page.gt, &pred.refined)?;
    }
    Ok((preds, coarse_m, refined_m))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("metrics serialize") + "\n"
}

/// Where `run_pipeline` gets its models.
#[derive(Clone, Debug, Default)]
pub enum ModelSource {
    /// Train one model per manuscript; save `{corpus}.folio` and
    /// `{corpus}-train.jsonl` into the output directory.
    #[default]
    Train,
    /// Load `{corpus}.folio` from this directory.
    Load(PathBuf),
}

/// Train (or load), predict, optionally refine and evaluate every
/// manuscript of the corpus. Writes predicted maps, coarse maps, overlays,
/// `metrics.json` and `metrics.csv` into `cfg.output_dir`.
pub fn run_pipeline(cfg: &PipelineConfig, models: &ModelSource) -> Result<PipelineMetrics> {
    cfg.validate()?;
    let palette = cfg.palette()?;
    let corpus = load_corpus(&cfg.corpus, &palette, (cfg.resize_width, cfg.resize_height))?;
    let out = &cfg.output_dir;
    create_dir(out)?;
    let train_cfg = cfg.train_config();

    let results = corpus
        .par_iter()
        .map(|m| {
            let model = match models {
                ModelSource::Train => {
                    let (model, log) = train_manuscript(m, &train_cfg)?;
                    model.save(out.join(format!("{}.folio", m.name)))?;
                    log.write_jsonl(out.join(format!("{}-train.jsonl", m.name)))?;
                    model
                }
                ModelSource::Load(dir) => {
                    WindowClassifier::load(dir.join(format!("{}.folio", m.name)))?
                }
            };
            let (preds, coarse_m, refined_m) = evaluate_manuscript(m, &model, cfg)?;
            for (page, pred) in m.test.iter().zip(&preds) {
                let final_map = if cfg.refinement {
                    &pred.refined
                } else {
                    &pred.coarse
                };
                save_labels(
                    &pred.coarse,
                    &palette,
                    out.join(format!("{}-coarse.png", pred.id)),
                )?;
                save_labels(
                    final_map,
                    &palette,
                    out.join(format!("{}-pred.png", pred.id)),
                )?;
                save_raster(
                    &overlay(&page.image, final_map, &palette)?,
                    out.join(format!("{}-overlay.png", pred.id)),
                )?;
            }
            let matrix = if cfg.refinement { refined_m } else { coarse_m };
            Ok(CorpusResult {
                corpus: m.name.clone(),
                test_pages: m.test.len(),
                metrics: weighted_metrics(&matrix),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let metrics = PipelineMetrics {
        schema: METRICS_SCHEMA,
        seed: cfg.seed,
        result: ConfigResult::new(cfg.variant(), cfg.dynamic_crops, cfg.refinement, results),
    };
    write_text(&out.join("metrics.json"), &to_json(&metrics))?;
    write_text(
        &out.join("metrics.csv"),
        &format!("{CSV_HEADER}\n{}", metrics.result.csv()),
    )?;
    Ok(metrics)
}

/// Run all four configurations with the shared seed. One model is trained
/// per (manuscript, crops flag); the refinement toggle reuses it. Writes
/// `ablation.json`, `ablation.csv` and `ablation.txt` into `cfg.output_dir`.
pub fn run_ablation(cfg: &PipelineConfig) -> Result<AblationMetrics> {
    cfg.validate()?;
    let palette = cfg.palette()?;
    let corpus = load_corpus(&cfg.corpus, &palette, (cfg.resize_width, cfg.resize_height))?;

    let jobs: Vec<(usize, bool)> = [false, true]
        .iter()
        .flat_map(|&crops| (0..corpus.len()).map(move |i| (i, crops)))
        .collect();
    // (corpus index, crops) -> (coarse, refined) confusion matrices
    let evaluated = jobs
        .par_iter()
        .map(|&(i, crops)| {
            let variant = PipelineConfig {
                dynamic_crops: crops,
                ..cfg.clone()
            };
            let (model, _) = train_manuscript(&corpus[i], &variant.train_config())?;
            let (_, coarse_m, refined_m) = evaluate_manuscript(&corpus[i], &model, &variant)?;
            Ok((coarse_m, refined_m))
        })
        .collect::<Result<Vec<_>>>()?;

    let configs = ABLATION_CONFIGS
        .iter()
        .map(|&(name, crops, refinement)| {
            let offset = if crops { corpus.len() } else { 0 };
            let corpora = corpus
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    let (coarse_m, refined_m) = &evaluated[offset + i];
                    CorpusResult {
                        corpus: m.name.clone(),
                        test_pages: m.test.len(),
                        metrics: weighted_metrics(if refinement { refined_m } else { coarse_m }),
                    }
                })
                .collect();
            ConfigResult::new(name, crops, refinement, corpora)
        })
        .collect();
    let ablation = AblationMetrics {
        schema: METRICS_SCHEMA,
        seed: cfg.seed,
        configs,
    };

    let out = &cfg.output_dir;
    create_dir(out)?;
    write_text(&out.join("ablation.json"), &to_json(&ablation))?;
    write_text(&out.join("ablation.csv"), &ablation.csv())?;
    write_text(&out.join("ablation.txt"), &ablation.table())?;
    Ok(ablation)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlay_keeps_background_and_blends_foreground() {
        let page = RasterImage::gray(2, 1, vec![100, 200]).unwrap();
        let pred = LabelMap::new(2, 1, vec![0, 1]).unwrap();
        let o = overlay(&page, &pred, &ClassPalette::default()).unwrap();
        assert_eq!(o.data(), &[100, 100, 100, 228, 100, 228]);
    }

    #[test]
    fn ablation_configs_cover_all_toggles() {
        let mut seen: Vec<(bool, bool)> = ABLATION_CONFIGS.iter().map(|c| (c.1, c.2)).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 4);
        for (name, crops, refinement) in ABLATION_CONFIGS {
            let cfg = PipelineConfig {
                dynamic_crops: crops,
                refinement,
                ..PipelineConfig::default()
            };
            assert_eq!(cfg.variant(), name);
        }
    }
}
