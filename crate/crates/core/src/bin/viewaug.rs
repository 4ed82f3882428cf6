use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use viewaug::heatmap::{mixup, render_heatmap, Heatmap, HeatmapConfig, HeatmapSample};
use viewaug::metrics::compare_dirs;
use viewaug::pipeline::{
    self, load_annotations, load_poses, parse_palette, AugmentOptions, DepthMode, ViewPolicy,
};
use viewaug::{Raster, TransferThresholds};

#[derive(Parser)]
#[command(
    name = "viewaug",
    version,
    about = "Novel-view augmentation for detection datasets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render new views of every image and regenerate their boxes.
    Augment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Pose list file, or `paper-presets` for the four built-in views.
        #[arg(long, default_value = "paper-presets")]
        poses: String,
        #[arg(long, default_value = "all")]
        view_policy: String,
        #[arg(long, default_value = "constant:1")]
        depth_mode: String,
        #[arg(long)]
        depth_dir: Option<PathBuf>,
        /// Target size as `<W>x<H>`; defaults to each source image's size.
        #[arg(long)]
        palette: Option<String>,
        #[arg(long, default_value_t = 128)]
        k_nearest: usize,
        #[arg(long, default_value_t = 4.0)]
        radius: f64,
        #[arg(long, default_value_t = 0.25)]
        min_visibility: f64,
        #[arg(long, default_value_t = 4.0)]
        min_area: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Record per-image wall time in the manifest (breaks byte-identical reruns).
        #[arg(long)]
        timing: bool,
    },
    /// PSNR / SSIM (and optional feature distance) between two image folders.
    Metrics {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Folder with `ref/<stem>.feat` and `test/<stem>.feat` feature stacks.
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Blend two `<image>,<heatmap>` pairs with a shared weight.
    Mixup {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value = ".")]
        output: PathBuf,
    },
    /// Write one center heatmap per image of a COCO file.
    Heatmap {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 4)]
        stride: usize,
        #[arg(long, default_value_t = 0.7)]
        iou_t: f64,
        #[arg(long, default_value_t = 3.0)]
        sigma_divisor: f64,
        #[arg(long, default_value = ".")]
        output: PathBuf,
    },
}

fn load_pair(arg: &str) -> viewaug::Result<HeatmapSample> {
    let (image, heat) = arg
        .split_once(',')
        .ok_or_else(|| viewaug::Error::InvalidArgument(format!("expected <image>,<heatmap>, got {arg:?}")))?;
    Ok(HeatmapSample {
        image: Raster::load_rgb(image)?,
        heatmap: Heatmap::load(heat)?,
    })
}

fn run(cli: Cli) -> viewaug::Result<bool> {
    match cli.command {
        Command::Augment {
            input,
            images,
            output,
            poses,
            view_policy,
            depth_mode,
            depth_dir,
            palette,
            k_nearest,
            radius,
            min_visibility,
            min_area,
            seed,
            workers,
            timing,
        } => {
            let mut options = AugmentOptions::new(load_poses(&poses)?, depth_mode.parse::<DepthMode>()?);
            options.view_policy = view_policy.parse::<ViewPolicy>()?;
            options.depth.dir = depth_dir;
            options.palette = palette.as_deref().map(parse_palette).transpose()?;
            options.k_nearest = k_nearest;
            options.radius = radius;
            options.thresholds = TransferThresholds {
                min_visibility,
                min_area,
            };
            options.seed = seed;
            options.workers = workers;
            options.record_timing = timing;

            let manifest = pipeline::run(&input, &images, &output, &options)?;
            let t = &manifest.totals;
            eprintln!(
                "{} sources -> {} samples, {} boxes kept, {} dropped, {} failures",
                t.sources, t.samples, t.boxes_kept, t.boxes_dropped, t.failures
            );
            Ok(t.failures == 0)
        }
        Command::Metrics {
            reference,
            test,
            features,
        } => {
            let report = compare_dirs(&reference, &test, features.as_deref())?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            Ok(true)
        }
        Command::Mixup { a, b, lambda, output } => {
            let mixed = mixup(&load_pair(&a)?, &load_pair(&b)?, lambda)?;
            create_dir(&output)?;
            mixed.image.save_png(output.join("mixed.png"))?;
            mixed.heatmap.save(output.join("mixed.heat"))?;
            Ok(true)
        }
        Command::Heatmap {
            input,
            stride,
            iou_t,
            sigma_divisor,
            output,
        } => {
            let dataset = load_annotations(&input, Path::new("."))?;
            let cfg = HeatmapConfig {
                stride,
                iou_threshold: iou_t,
                sigma_divisor,
            };
            create_dir(&output)?;
            let mut summary = Vec::new();
            for img in &dataset.images {
                let (heatmap, warnings) =
                    render_heatmap(&img.boxes, img.width, img.height, &dataset.categories, &cfg)?;
                let name = format!("{}.heat", img.id);
                heatmap.save(output.join(&name))?;
                summary.push(json!({
                    "image_id": img.id,
                    "file": name,
                    "width": heatmap.width(),
                    "height": heatmap.height(),
                    "warnings": warnings.iter().map(|w| json!({"box": w.index, "reason": w.reason})).collect::<Vec<_>>(),
                }));
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("summary serializes")
            );
            Ok(true)
        }
    }
}

fn create_dir(path: &Path) -> viewaug::Result<()> {
    std::fs::create_dir_all(path).map_err(|source| viewaug::Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
