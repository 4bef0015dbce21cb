use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{
    load_labels, load_rgb, save_labels, save_raster, ClassPalette, LabelMap, RasterImage,
    ResizeMode,
};
use crate::synth::{generate_page, manuscript_recipes, mix_seed, PageRecipe};

pub const MANIFEST_SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One page of a corpus manifest. Paths are relative to the manifest file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    /// Manuscript (sub-corpus) the page belongs to; one model per manuscript.
    pub corpus: String,
    pub split: Split,
    pub image: PathBuf,
    pub gt: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recipe: Option<PageRecipe>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub pages: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Context {
            path: path.to_path_buf(),
            message: format!("invalid data: {e}"),
        })?;
        if m.schema != MANIFEST_SCHEMA {
            return Err(Error::Data(format!("unsupported manifest schema {}", m.schema)).at(path));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug)]
pub struct Page {
    pub id: String,
    pub image: RasterImage,
    pub gt: LabelMap,
}

#[derive(Clone, Debug)]
pub struct Manuscript {
    pub name: String,
    pub train: Vec<Page>,
    pub test: Vec<Page>,
}

/// Load every page, resize images (bilinear) and ground truth (nearest) to
/// the working size, and group pages by manuscript in manifest order.
pub fn load_corpus(
    manifest_path: impl AsRef<Path>,
    palette: &ClassPalette,
    size: (usize, usize),
) -> Result<Vec<Manuscript>> {
    let manifest_path = manifest_path.as_ref();
    let manifest = Manifest::load(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let pages: Vec<(String, Split, Page)> = manifest
        .pages
        .par_iter()
        .map(|e| {
            let image_path = root.join(&e.image);
            let gt_path = root.join(&e.gt);
            let image = load_rgb(&image_path)?;
            let gt = load_labels(&gt_path, palette)?;
            if image.dims() != gt.dims() {
                return Err(Error::dims(image.dims(), gt.dims()).at(&gt_path));
            }
            let image = if image.dims() == size {
                image
            } else {
                image.resize(size.0, size.1, ResizeMode::Bilinear)?
            };
            let gt = if gt.dims() == size {
                gt
            } else {
                gt.resize_nearest(size.0, size.1)?
            };
            Ok((
                e.corpus.clone(),
                e.split,
                Page {
                    id: e.id.clone(),
                    image,
                    gt,
                },
            ))
        })
        .collect::<Result<_>>()?;

    let mut out: Vec<Manuscript> = Vec::new();
    for (corpus, split, page) in pages {
        let idx = match out.iter().position(|m| m.name == corpus) {
            Some(i) => i,
            None => {
                out.push(Manuscript {
                    name: corpus,
                    train: Vec::new(),
                    test: Vec::new(),
                });
                out.len() - 1
            }
        };
        match split {
            Split::Train => out[idx].train.push(page),
            Split::Test => out[idx].test.push(page),
        }
    }
    if out.is_empty() {
        return Err(Error::Data("manifest lists no pages".into()).at(manifest_path));
    }
    for m in &out {
        if m.train.is_empty() || m.test.is_empty() {
            return Err(Error::Data(format!(
                "manuscript {} needs both train and test pages",
                m.name
            ))
            .at(manifest_path));
        }
    }
    Ok(out)
}

/// Write the synthetic corpus: every bundled manuscript recipe with
/// `train_pages` + `test_pages` pages, PNGs plus `manifest.json`.
pub fn write_synthetic_corpus(
    dir: impl AsRef<Path>,
    seed: u64,
    train_pages: usize,
    test_pages: usize,
    palette: &ClassPalette,
) -> Result<Manifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut jobs = Vec::new();
    for (m, (name, recipe)) in manuscript_recipes().into_iter().enumerate() {
        let manuscript_seed = mix_seed(seed, m as u64);
        for i in 0..train_pages + test_pages {
            let (split, tag, k) = if i < train_pages {
                (Split::Train, "train", i)
            } else {
                (Split::Test, "test", i - train_pages)
            };
            let recipe = recipe.with_seed(mix_seed(manuscript_seed, i as u64));
            jobs.push((format!("{name}-{tag}-{k}"), name.clone(), split, recipe));
        }
    }
    let pages = jobs
        .into_par_iter()
        .map(|(id, corpus, split, recipe)| {
            let (image, gt) = generate_page(&recipe)?;
            let image_rel = PathBuf::from(format!("{id}.png"));
            let gt_rel = PathBuf::from(format!("{id}-gt.png"));
            save_raster(&image, dir.join(&image_rel))?;
            save_labels(&gt, palette, dir.join(&gt_rel))?;
            Ok(ManifestEntry {
                id,
                corpus,
                split,
                image: image_rel,
                gt: gt_rel,
                recipe: Some(recipe),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA,
        seed: Some(seed),
        pages,
    };
    manifest.save(dir.join("manifest.json"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_corpus_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let palette = ClassPalette::default();
        let manifest = write_synthetic_corpus(dir.path(), 4, 2, 1, &palette).unwrap();
        assert_eq!(manifest.pages.len(), 9);
        let loaded = Manifest::load(dir.path().join("manifest.json")).unwrap();
        assert_eq!(loaded, manifest);

        let corpus = load_corpus(dir.path().join("manifest.json"), &palette, (280, 336)).unwrap();
        assert_eq!(corpus.len(), 3);
        assert_eq!((corpus[0].train.len(), corpus[0].test.len()), (2, 1));
        let recipe = manifest.pages[0].recipe.clone().unwrap();
        let (img, gt) = generate_page(&recipe).unwrap();
        assert_eq!(corpus[0].train[0].image, img);
        assert_eq!(corpus[0].train[0].gt, gt);

        let half = load_corpus(dir.path().join("manifest.json"), &palette, (140, 168)).unwrap();
        assert_eq!(half[1].test[0].image.dims(), (140, 168));
        assert_eq!(half[1].test[0].gt.dims(), (140, 168));
    }

    #[test]
    fn missing_split_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let palette = ClassPalette::default();
        let mut manifest = write_synthetic_corpus(dir.path(), 1, 1, 1, &palette).unwrap();
        manifest.pages.retain(|p| p.split == Split::Train);
        manifest.save(dir.path().join("manifest.json")).unwrap();
        let err = load_corpus(dir.path().join("manifest.json"), &palette, (280, 336)).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
