//! Command-line front end for the monogenic wavelet scattering pipeline.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mwsn::classifier::{accuracy, cross_validate, predict, train};
use mwsn::config::RunConfig;
use mwsn::dataset::{
    center_crop, load_grayscale, save_png8, synth_textures, DatasetManifest, SynthParams,
};
use mwsn::features::pca_fit;
use mwsn::pipeline::{path_table, read_labels, scatter_manifest, write_labels};
use mwsn::scattering::{scatter, ScatteringConfig};
use mwsn::tensor::{load_features, load_linear, load_pca, save_features, save_linear, save_pca};
use mwsn::viz::{layer1_mosaic, layer2_mosaic, Normalization};
use mwsn::{Error, Result};

#[derive(Parser)]
#[command(
    name = "mwsn",
    version,
    about = "Monogenic wavelet scattering features and texture classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Pipeline settings. Flags override values read from `--config`.
#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// key = value configuration file
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Number of scales J
    #[arg(long, value_name = "J")]
    scales: Option<usize>,
    #[arg(long)]
    rate_u: Option<usize>,
    #[arg(long)]
    rate_s: Option<usize>,
    /// Side of the central crop
    #[arg(long)]
    crop: Option<usize>,
    #[arg(long)]
    pca_k: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    /// SVM regularization C
    #[arg(long)]
    c_reg: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores)
    #[arg(long)]
    workers: Option<usize>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        take!(scales, rate_u, rate_s, crop, pca_k, folds, repeats, c_reg, seed);
        if let Some(n) = self.workers {
            cfg.workers = (n > 0).then_some(n);
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Scatter every manifest image into OUT/features.mwsf, paths.csv and labels.txt
    Scatter {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Fit PCA on a feature file
    PcaFit {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Project a feature file onto a fitted PCA model
    PcaApply {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the linear classifier on (usually PCA-projected) features
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Predict labels with a trained model
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Reference labels; prints accuracy when given
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeated stratified cross-validation with PCA fitted inside each training fold
    Evaluate {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// CSV destination for `repeat,fold,accuracy` rows (stdout when absent)
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Generate the synthetic oriented-texture dataset
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long, default_value_t = 40)]
        per_class: usize,
        #[arg(long, default_value_t = 160)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Render layer-2 and layer-1 coefficient mosaics of one image
    Viz {
        #[arg(long)]
        image: PathBuf,
        /// Layer-2 mosaic PNG; the layer-1 mosaic goes next to it with a `_layer1` suffix
        #[arg(long)]
        out: PathBuf,
        /// One intensity range for the whole mosaic instead of per block
        #[arg(long)]
        global: bool,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Scatter { manifest, out, cfg } => {
            let cfg = cfg.resolve()?;
            cfg.thread_pool()?
                .install(|| cmd_scatter(&manifest, &out, &cfg))
        }
        Command::PcaFit { features, out, cfg } => {
            let cfg = cfg.resolve()?;
            let x = load_features(&features)?;
            let model = cfg.thread_pool()?.install(|| pca_fit(&x, cfg.pca_k))?;
            save_pca(&out, &model)?;
            println!(
                "fitted {} components on {} x {} features",
                model.n_components(),
                x.rows(),
                x.cols()
            );
            Ok(())
        }
        Command::PcaApply {
            model,
            features,
            out,
        } => {
            let model = load_pca(&model)?;
            let projected = model.transform(&load_features(&features)?)?;
            save_features(&out, &projected)
        }
        Command::Train {
            features,
            labels,
            out,
            cfg,
        } => {
            let cfg = cfg.resolve()?;
            let x = load_features(&features)?;
            let y = checked_labels(&labels, x.rows())?;
            let model = cfg
                .thread_pool()?
                .install(|| train(&x, &y, &cfg.train_params()))?;
            save_linear(&out, &model)?;
            println!(
                "trained {} classes, training accuracy {:.4}",
                model.classes().len(),
                accuracy(&model, &x, &y)?
            );
            Ok(())
        }
        Command::Predict {
            model,
            features,
            labels,
            out,
        } => {
            let model = load_linear(&model)?;
            let x = load_features(&features)?;
            let predicted = predict(&model, &x)?;
            let refs: Vec<&str> = predicted.iter().map(String::as_str).collect();
            match out {
                Some(path) => write_labels(path, &refs)?,
                None => refs.iter().for_each(|l| println!("{l}")),
            }
            if let Some(path) = labels {
                let y = checked_labels(&path, x.rows())?;
                println!("accuracy {:.4}", accuracy(&model, &x, &y)?);
            }
            Ok(())
        }
        Command::Evaluate {
            features,
            labels,
            out,
            cfg,
        } => {
            let cfg = cfg.resolve()?;
            let x = load_features(&features)?;
            let y = checked_labels(&labels, x.rows())?;
            let report = cfg
                .thread_pool()?
                .install(|| cross_validate(&x, &y, &cfg.cv_params()))?;
            println!("{}", report.summary());
            match out {
                Some(path) => fs::write(path, report.to_csv())?,
                None => print!("{}", report.to_csv()),
            }
            Ok(())
        }
        Command::Synth {
            out,
            classes,
            per_class,
            size,
            seed,
        } => {
            let set = synth_textures(&SynthParams {
                n_classes: classes,
                n_per_class: per_class,
                size,
                seed,
            })?;
            let manifest = set.write(&out)?;
            println!("wrote {} images to {}", manifest.len(), out.display());
            Ok(())
        }
        Command::Viz {
            image,
            out,
            global,
            cfg,
        } => {
            let cfg = cfg.resolve()?;
            let norm = if global {
                Normalization::Global
            } else {
                Normalization::PerBlock
            };
            cfg.thread_pool()?
                .install(|| cmd_viz(&image, &out, &cfg, norm))
        }
    }
}

fn checked_labels(path: &Path, rows: usize) -> Result<Vec<String>> {
    let labels = read_labels(path)?;
    if labels.len() != rows {
        return Err(Error::InvalidInput(format!(
            "{} labels in {} for {rows} feature rows",
            labels.len(),
            path.display()
        )));
    }
    Ok(labels)
}

const SCATTER_OUTPUTS: [&str; 3] = ["features.mwsf", "paths.csv", "labels.txt"];

fn cmd_scatter(manifest: &Path, out: &Path, cfg: &RunConfig) -> Result<()> {
    let manifest = DatasetManifest::read(manifest)?;
    let x = scatter_manifest(&manifest, cfg)?;
    let created_dir = !out.exists();
    let written = fs::create_dir_all(out)
        .map_err(Error::from)
        .and_then(|_| write_scatter_outputs(out, &x, &manifest, &cfg.scattering(), cfg.crop));
    if let Err(e) = written {
        for name in SCATTER_OUTPUTS {
            let _ = fs::remove_file(out.join(name));
        }
        if created_dir {
            let _ = fs::remove_dir(out);
        }
        return Err(e);
    }
    println!(
        "wrote {} rows of {} features to {}",
        x.rows(),
        x.cols(),
        out.display()
    );
    Ok(())
}

fn write_scatter_outputs(
    out: &Path,
    x: &mwsn::features::FeatureMatrix,
    manifest: &DatasetManifest,
    scfg: &ScatteringConfig,
    size: usize,
) -> Result<()> {
    save_features(out.join(SCATTER_OUTPUTS[0]), x)?;
    fs::write(out.join(SCATTER_OUTPUTS[1]), path_table(scfg, size)?)?;
    write_labels(out.join(SCATTER_OUTPUTS[2]), &manifest.labels())
}

fn layer1_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("mosaic");
    out.with_file_name(format!("{stem}_layer1.png"))
}

fn cmd_viz(image: &Path, out: &Path, cfg: &RunConfig, norm: Normalization) -> Result<()> {
    let img = center_crop(&load_grayscale(image)?, cfg.crop)?;
    let scfg = cfg.scattering();
    let result = scatter(&img, &scfg)?;
    save_png8(&layer2_mosaic(&result, norm)?, out)?;
    let companion = layer1_path(out);
    save_png8(&layer1_mosaic(&result, norm)?, &companion)?;
    println!("wrote {} and {}", out.display(), companion.display());
    Ok(())
}
