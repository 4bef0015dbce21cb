use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use folio::binarize::{
    threshold_mask, Method, SauvolaParams, StatsPath, DEFAULT_K, DEFAULT_NIBLACK_K, DEFAULT_R,
    DEFAULT_WINDOW,
};
use folio::imagecore::{load_gray, load_labels, load_rgb, save_labels, save_raster, ClassPalette};
use folio::metrics::{confusion, weighted_metrics};
use folio::model::{predict_page, WindowClassifier};
use folio::pipeline::{
    load_corpus, overlay, run_ablation, run_pipeline, write_synthetic_corpus, AblationMetrics,
    ModelSource, PipelineConfig, PipelineMetrics,
};
use folio::refine::refine;
use folio::report::{csv_rows, render_comparison, CSV_HEADER};
use folio::sampler::{random_crops, seeded_rng, tile};
use folio::{Error, Result};

#[derive(Parser)]
#[command(
    name = "folio",
    version,
    about = "Few-shot layout segmentation for manuscript pages"
)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algorithm {
    Sauvola,
    Niblack,
}

#[derive(Clone, Copy, ValueEnum)]
enum PathArg {
    Integral,
    Naive,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus: pages, ground truth, manifest.json and
    /// a ready-to-use folio.toml.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        train_pages: usize,
        #[arg(long, default_value_t = 2)]
        test_pages: usize,
    },
    /// Binarize a page; ink is written white, background black.
    Binarize {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
        /// Defaults to 0.1 for Sauvola and -0.2 for Niblack.
        #[arg(long, allow_hyphen_values = true)]
        k: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_R)]
        r: f64,
        #[arg(long, value_enum, default_value_t = Algorithm::Sauvola)]
        algorithm: Algorithm,
        #[arg(long, value_enum, default_value_t = PathArg::Integral)]
        path: PathArg,
    },
    /// Cut pages into patches and write them with a manifest.csv.
    Tile {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 224)]
        side: usize,
        /// Extra random crops per image.
        #[arg(long, default_value_t = 0)]
        crops: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train one model per manuscript on the train split.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Predict a page with a trained model.
    Infer {
        #[arg(long)]
        model: PathBuf,
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 224)]
        side: usize,
        /// Multiply the prediction by the Sauvola ink mask.
        #[arg(long)]
        refine: bool,
        #[arg(long)]
        overlay: Option<PathBuf>,
        /// Config file supplying palette and Sauvola parameters.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Refine a coarse label map with the page's Sauvola mask.
    Refine {
        coarse: PathBuf,
        page: PathBuf,
        output: PathBuf,
        /// Write the refinement report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score a predicted map against ground truth.
    Evaluate {
        gt: PathBuf,
        pred: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value = "page")]
        corpus: String,
        #[arg(long, default_value = "eval")]
        label: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the full pipeline with the toggles from the config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Load `{corpus}.folio` models from this directory instead of training.
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Run all four ablation configurations.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a result against published competitor scores.
    Compare {
        /// metrics.json or ablation.json; defaults to the "w/ both" row.
        metrics: PathBuf,
        #[arg(long)]
        config_name: Option<String>,
    },
}

fn palette_and_sauvola(config: Option<&Path>) -> Result<(ClassPalette, SauvolaParams)> {
    let cfg = match config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    Ok((cfg.palette()?, cfg.sauvola()?))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            out,
            seed,
            train_pages,
            test_pages,
        } => {
            if train_pages == 0 || test_pages == 0 {
                return Err(Error::Config(
                    "need at least one train and one test page".into(),
                ));
            }
            let palette = ClassPalette::default();
            let manifest = write_synthetic_corpus(&out, seed, train_pages, test_pages, &palette)?;
            let cfg = PipelineConfig {
                seed,
                ..PipelineConfig::synthetic("manifest.json", "out")
            };
            write_text(&out.join("folio.toml"), &cfg.to_text())?;
            println!("wrote {} pages to {}", manifest.pages.len(), out.display());
        }
        Command::Binarize {
            input,
            output,
            window,
            k,
            r,
            algorithm,
            path,
        } => {
            let method = match algorithm {
                Algorithm::Sauvola => {
                    Method::Sauvola(SauvolaParams::new(window, k.unwrap_or(DEFAULT_K), r)?)
                }
                Algorithm::Niblack => Method::Niblack {
                    window,
                    k: k.unwrap_or(DEFAULT_NIBLACK_K),
                },
            };
            let path = match path {
                PathArg::Integral => StatsPath::Integral,
                PathArg::Naive => StatsPath::Naive,
            };
            let img = load_gray(&input)?;
            let mask = threshold_mask(&img, &method, path).map_err(|e| e.at(&input))?;
            save_raster(&mask.to_raster(), &output)?;
        }
        Command::Tile {
            inputs,
            out,
            side,
            crops,
            seed,
        } => {
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let mut rng = seeded_rng(seed);
            let mut manifest = String::from("image_id,x,y,side,kind\n");
            for (i, input) in inputs.iter().enumerate() {
                let img = load_rgb(input)?;
                let id = input
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or("page")
                    .to_string();
                let (w, h) = img.dims();
                let baseline = tile(w, h, side).map_err(|e| e.at(input))?.for_image(i);
                let dynamic = random_crops(w, h, side, crops, &mut rng)
                    .map_err(|e| e.at(input))?
                    .for_image(i);
                for set in [&baseline, &dynamic] {
                    for (n, s) in set.specs.iter().enumerate() {
                        let kind = set.kind.as_str();
                        save_raster(
                            &img.crop(s.x, s.y, s.side, s.side),
                            out.join(format!("{id}-{kind}-{n}.png")),
                        )?;
                        manifest.push_str(&format!("{id},{},{},{},{kind}\n", s.x, s.y, s.side));
                    }
                }
            }
            write_text(&out.join("manifest.csv"), &manifest)?;
        }
        Command::Train { config } => {
            let cfg = PipelineConfig::load(&config)?;
            let corpus = load_corpus(
                &cfg.corpus,
                &cfg.palette()?,
                (cfg.resize_width, cfg.resize_height),
            )?;
            std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
            let train_cfg = cfg.train_config();
            for m in &corpus {
                let images: Vec<_> = m.train.iter().map(|p| p.image.clone()).collect();
                let gts: Vec<_> = m.train.iter().map(|p| p.gt.clone()).collect();
                let (model, log) = folio::model::train(&images, &gts, &train_cfg)?;
                model.save(cfg.output_dir.join(format!("{}.folio", m.name)))?;
                log.write_jsonl(cfg.output_dir.join(format!("{}-train.jsonl", m.name)))?;
                println!(
                    "{}: {} epochs, best epoch {} loss {:.6}",
                    m.name,
                    log.epochs.len(),
                    log.best_epoch,
                    log.best_loss
                );
            }
        }
        Command::Infer {
            model,
            input,
            output,
            side,
            refine: do_refine,
            overlay: overlay_path,
            config,
        } => {
            let (palette, sauvola) = palette_and_sauvola(config.as_deref())?;
            let model = WindowClassifier::load(&model)?;
            let page = load_rgb(&input)?;
            let gray = page.ensure_gray();
            let mut pred = predict_page(&model, &gray, side).map_err(|e| e.at(&input))?;
            if do_refine {
                let mask = folio::binarize::sauvola_mask(&gray, &sauvola, StatsPath::Integral)?;
                pred = refine(&pred, &mask)?.0;
            }
            save_labels(&pred, &palette, &output)?;
            if let Some(p) = overlay_path {
                save_raster(&overlay(&page, &pred, &palette)?, &p)?;
            }
        }
        Command::Refine {
            coarse,
            page,
            output,
            report,
            config,
        } => {
            let (palette, sauvola) = palette_and_sauvola(config.as_deref())?;
            let coarse_map = load_labels(&coarse, &palette)?;
            let gray = load_gray(&page)?;
            let mask = folio::binarize::sauvola_mask(&gray, &sauvola, StatsPath::Integral)?;
            let (refined, rep) = refine(&coarse_map, &mask).map_err(|e| e.at(&page))?;
            save_labels(&refined, &palette, &output)?;
            let text = to_json(&rep);
            match report {
                Some(p) => write_text(&p, &text)?,
                None => print!("{text}"),
            }
        }
        Command::Evaluate {
            gt,
            pred,
            json,
            csv,
            corpus,
            label,
            config,
        } => {
            let (palette, _) = palette_and_sauvola(config.as_deref())?;
            let g = load_labels(&gt, &palette)?;
            let p = load_labels(&pred, &palette)?;
            let row = weighted_metrics(&confusion(&g, &p).map_err(|e| e.at(&pred))?);
            let doc = serde_json::json!({ "schema": 1, "corpus": corpus, "config": label, "metrics": row });
            let text = to_json(&doc);
            match json {
                Some(path) => write_text(&path, &text)?,
                None => print!("{text}"),
            }
            if let Some(path) = csv {
                write_text(
                    &path,
                    &format!("{CSV_HEADER}\n{}", csv_rows(&corpus, &label, &row)),
                )?;
            }
        }
        Command::Run { config, models } => {
            let cfg = PipelineConfig::load(&config)?;
            let source = models.map_or(ModelSource::Train, ModelSource::Load);
            let m = run_pipeline(&cfg, &source)?;
            let s = m.result.mean_weighted_all;
            println!(
                "{}: mean Prec {:.3} Rec {:.3} IoU {:.3} F1 {:.3}",
                m.result.config, s.precision, s.recall, s.iou, s.f1
            );
        }
        Command::Ablate { config, seed, out } => {
            let mut cfg = PipelineConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            let ablation = run_ablation(&cfg)?;
            print!("{}", ablation.table());
        }
        Command::Compare {
            metrics,
            config_name,
        } => {
            let text = std::fs::read_to_string(&metrics).map_err(|e| Error::io(&metrics, e))?;
            let bad = |e: serde_json::Error| Error::Data(e.to_string()).at(&metrics);
            let value: serde_json::Value = serde_json::from_str(&text).map_err(bad)?;
            let scores = if value.get("configs").is_some() {
                let ablation: AblationMetrics = serde_json::from_value(value).map_err(bad)?;
                let name = config_name.as_deref().unwrap_or("w/ both");
                ablation
                    .config(name)
                    .ok_or_else(|| {
                        Error::Data(format!("no configuration named {name:?}")).at(&metrics)
                    })?
                    .mean_weighted_all
            } else {
                let single: PipelineMetrics = serde_json::from_value(value).map_err(bad)?;
                single.result.mean_weighted_all
            };
            print!("{}", render_comparison(&scores));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
