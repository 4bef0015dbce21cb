use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::binarize::{SauvolaParams, DEFAULT_K, DEFAULT_R, DEFAULT_WINDOW};
use crate::error::{Error, Result};
use crate::imagecore::ClassPalette;
use crate::model::TrainConfig;

/// Flat key/value pipeline configuration (TOML syntax, one key per line).
///
/// Every key is optional; missing keys take the defaults below.
///
/// | key | default |
/// |-----|---------|
/// | `corpus` | `corpus/manifest.json` |
/// | `output_dir` | `out` |
/// | `palette_background` / `_main_text` / `_comment` / `_decoration` | `#000000` / `#ff00ff` / `#ffff00` / `#00ffff` |
/// | `resize_width`, `resize_height` | 1120, 1344 |
/// | `patch_side` | 224 |
/// | `sauvola_window`, `sauvola_k`, `sauvola_r` | 15, 0.1, 128 |
/// | `learning_rate`, `weight_decay` | 0.001, 0.00001 |
/// | `max_epochs`, `early_stop_start`, `patience` | 200, 50, 20 |
/// | `crops_per_image` | 10 |
/// | `seed` | 0 |
/// | `backbone_window` | 7 |
/// | `dynamic_crops`, `refinement` | true, true |
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub output_dir: PathBuf,
    pub palette_background: String,
    pub palette_main_text: String,
    pub palette_comment: String,
    pub palette_decoration: String,
    pub resize_width: usize,
    pub resize_height: usize,
    pub patch_side: usize,
    pub sauvola_window: usize,
    pub sauvola_k: f64,
    pub sauvola_r: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub early_stop_start: usize,
    pub patience: usize,
    pub crops_per_image: usize,
    pub seed: u64,
    pub backbone_window: usize,
    pub dynamic_crops: bool,
    pub refinement: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let palette = ClassPalette::default().to_hex();
        let train = TrainConfig::default();
        let [bg, text, comment, decoration] = palette;
        PipelineConfig {
            corpus: PathBuf::from("corpus/manifest.json"),
            output_dir: PathBuf::from("out"),
            palette_background: bg,
            palette_main_text: text,
            palette_comment: comment,
            palette_decoration: decoration,
            resize_width: 1120,
            resize_height: 1344,
            patch_side: 224,
            sauvola_window: DEFAULT_WINDOW,
            sauvola_k: DEFAULT_K,
            sauvola_r: DEFAULT_R,
            learning_rate: train.learning_rate,
            weight_decay: train.weight_decay,
            max_epochs: train.max_epochs,
            early_stop_start: train.early_stop_start,
            patience: train.patience,
            crops_per_image: train.crops_per_image,
            seed: train.seed,
            backbone_window: train.window,
            dynamic_crops: true,
            refinement: true,
        }
    }
}

impl PipelineConfig {
    /// Geometry for the bundled synthetic corpus: 280x336 pages cut into
    /// 56-pixel patches, i.e. 30 patches per page.
    pub fn synthetic(corpus: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            corpus: corpus.into(),
            output_dir: output_dir.into(),
            resize_width: 280,
            resize_height: 336,
            patch_side: 56,
            ..PipelineConfig::default()
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    /// Load from a file; relative `corpus` and `output_dir` resolve against
    /// the config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| e.at(path))?;
        if let Some(dir) = path.parent() {
            if cfg.corpus.is_relative() {
                cfg.corpus = dir.join(&cfg.corpus);
            }
            if cfg.output_dir.is_relative() {
                cfg.output_dir = dir.join(&cfg.output_dir);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_side == 0
            || !self.resize_width.is_multiple_of(self.patch_side)
            || !self.resize_height.is_multiple_of(self.patch_side)
        {
            return Err(Error::Config(format!(
                "resize target {}x{} must be divisible by patch_side {}",
                self.resize_width, self.resize_height, self.patch_side
            )));
        }
        self.palette()?;
        self.sauvola().map_err(|e| Error::Config(e.to_string()))?;
        self.train_config().validate()
    }

    pub fn palette(&self) -> Result<ClassPalette> {
        ClassPalette::from_hex([
            &self.palette_background,
            &self.palette_main_text,
            &self.palette_comment,
            &self.palette_decoration,
        ])
    }

    pub fn sauvola(&self) -> Result<SauvolaParams> {
        SauvolaParams::new(self.sauvola_window, self.sauvola_k, self.sauvola_r)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            max_epochs: self.max_epochs,
            early_stop_start: self.early_stop_start,
            patience: self.patience,
            crops_per_image: if self.dynamic_crops {
                self.crops_per_image
            } else {
                0
            },
            seed: self.seed,
            patch_side: self.patch_side,
            window: self.backbone_window,
        }
    }

    /// Short name of the ablation configuration selected by the toggles.
    pub fn variant(&self) -> &'static str {
        match (self.dynamic_crops, self.refinement) {
            (false, false) => "baseline",
            (false, true) => "w/ seg. refinement",
            (true, false) => "w/ dynamic crop gen.",
            (true, true) => "w/ both",
        }
    }
}
