//! Per-image orchestration: lift, mark, then render and re-annotate every
//! selected view.

use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::coco::{Dataset, DatasetImage};
use super::depth::{load_depth, DepthMode};
use super::poses::PoseSpec;
use crate::annotate::{recover_boxes, DropReason, ProjectedMarkSet, TransferThresholds};
use crate::camera::{CameraIntrinsics, RigidPose};
use crate::cloud::{lift_image, BoundingBox, SampleGrid};
use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::splat::{splat, SplatConfig};

/// Recovered box coordinates are snapped to multiples of this, so that
/// `[x, y, w, h]` and corner forms convert exactly.
pub const BOX_QUANTUM: f64 = 1.0 / 1024.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViewPolicy {
    /// Every pose for every image.
    All,
    /// One pose per image, drawn from a generator keyed by seed and image id.
    RandomOne,
}

impl FromStr for ViewPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(ViewPolicy::All),
            "random-one" | "random_one" => Ok(ViewPolicy::RandomOne),
            _ => Err(Error::invalid(format!("unknown view policy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthSource {
    pub mode: DepthMode,
    /// Directory holding `<image stem>.png` (file16) or `<image stem>.f32`
    /// (file32) next to the image's relative path.
    pub dir: Option<PathBuf>,
}

impl DepthSource {
    fn path_for(&self, image: &DatasetImage) -> Option<PathBuf> {
        let ext = self.mode.extension()?;
        let dir = self.dir.as_ref()?;
        Some(dir.join(&image.file_name).with_extension(ext))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentOptions {
    pub poses: Vec<PoseSpec>,
    pub view_policy: ViewPolicy,
    pub depth: DepthSource,
    /// Target palette size; defaults to each source image's size.
    pub palette: Option<(usize, usize)>,
    pub k_nearest: usize,
    pub radius: f64,
    pub falloff_exponent: f64,
    pub alpha_eps: f64,
    pub thresholds: TransferThresholds,
    pub seed: u64,
    /// Fill for pixels no point reached, one value per channel.
    pub background: [f64; 3],
    pub workers: usize,
    pub record_timing: bool,
}

impl AugmentOptions {
    pub fn new(poses: Vec<PoseSpec>, depth: DepthMode) -> Self {
        AugmentOptions {
            poses,
            view_policy: ViewPolicy::All,
            depth: DepthSource {
                mode: depth,
                dir: None,
            },
            palette: None,
            k_nearest: 128,
            radius: 4.0,
            falloff_exponent: 1.0,
            alpha_eps: 1e-4,
            thresholds: TransferThresholds::default(),
            seed: 0,
            background: [128.0; 3],
            workers: 1,
            record_timing: false,
        }
    }

    fn splat_config(&self, width: usize, height: usize) -> SplatConfig {
        let (palette_w, palette_h) = self.palette.unwrap_or((width, height));
        SplatConfig {
            k_nearest: self.k_nearest,
            radius: self.radius,
            palette_w,
            palette_h,
            falloff_exponent: self.falloff_exponent,
            alpha_eps: self.alpha_eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_id: u64,
    pub source_file: String,
    pub pose_label: String,
    pub pose_index: usize,
    pub seed: u64,
    pub background: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSample {
    /// Output path relative to the image root.
    pub file_name: String,
    pub image: Raster,
    pub alpha: Vec<f64>,
    pub boxes: Vec<BoundingBox>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedBox {
    pub pose_label: String,
    pub box_index: u32,
    pub annotation_id: u64,
    pub reason: DropReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub source_id: u64,
    pub file_name: String,
    pub poses_applied: Vec<String>,
    pub samples: Vec<String>,
    pub boxes_in: usize,
    pub boxes_kept: usize,
    pub dropped: Vec<DroppedBox>,
    /// Boxes for which no cloud point could be marked.
    pub unmarkable: Vec<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub sources: usize,
    pub samples: usize,
    pub boxes_kept: usize,
    pub boxes_dropped: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationManifest {
    pub seed: u64,
    pub view_policy: ViewPolicy,
    pub poses: Vec<PoseSpec>,
    pub images: Vec<ImageRecord>,
    pub totals: Totals,
}

/// Pose indices to render for `image_id`.
pub fn select_views(policy: ViewPolicy, pose_count: usize, seed: u64, image_id: u64) -> Vec<usize> {
    match policy {
        ViewPolicy::All => (0..pose_count).collect(),
        ViewPolicy::RandomOne => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(image_id);
            vec![rng.gen_range(0..pose_count)]
        }
    }
}

fn quantize(v: f64) -> f64 {
    (v / BOX_QUANTUM).round() * BOX_QUANTUM
}

/// Renders the selected views of every image.
///
/// Failures are recorded per image and do not stop the run.
pub fn augment_dataset(
    dataset: &Dataset,
    options: &AugmentOptions,
) -> Result<(Vec<AugmentedSample>, AugmentationManifest)> {
    if options.poses.is_empty() {
        return Err(Error::invalid("at least one pose is required"));
    }
    let poses: Vec<RigidPose> = options
        .poses
        .iter()
        .map(PoseSpec::to_pose)
        .collect::<Result<_>>()?;
    options.splat_config(1, 1).validate()?;
    if let Some((w, h)) = options.palette {
        if w == 0 || h == 0 {
            return Err(Error::invalid("palette must be at least 1x1"));
        }
    }
    if options.depth.mode.extension().is_some() && options.depth.dir.is_none() {
        return Err(Error::invalid(format!(
            "depth mode {} needs a depth directory",
            options.depth.mode
        )));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;

    let results: Vec<(Vec<AugmentedSample>, ImageRecord)> = pool.install(|| {
        dataset
            .images
            .par_iter()
            .map(|image| {
                let started = Instant::now();
                let mut record = ImageRecord {
                    source_id: image.id,
                    file_name: image.file_name.clone(),
                    poses_applied: Vec::new(),
                    samples: Vec::new(),
                    boxes_in: image.boxes.len(),
                    boxes_kept: 0,
                    dropped: Vec::new(),
                    unmarkable: Vec::new(),
                    error: None,
                    timing_ms: None,
                };
                let samples = match augment_image(image, &poses, options, &mut record) {
                    Ok(samples) => samples,
                    Err(e) => {
                        log::warn!("image {} ({}): {e}", image.id, image.file_name);
                        record.poses_applied.clear();
                        record.samples.clear();
                        record.boxes_kept = 0;
                        record.dropped.clear();
                        record.error = Some(e.to_string());
                        Vec::new()
                    }
                };
                if options.record_timing {
                    record.timing_ms = Some(started.elapsed().as_secs_f64() * 1e3);
                }
                (samples, record)
            })
            .collect()
    });

    let mut samples = Vec::new();
    let mut records = Vec::with_capacity(results.len());
    for (s, r) in results {
        samples.extend(s);
        records.push(r);
    }
    let totals = Totals {
        sources: records.len(),
        samples: samples.len(),
        boxes_kept: records.iter().map(|r| r.boxes_kept).sum(),
        boxes_dropped: records.iter().map(|r| r.dropped.len()).sum(),
        failures: records.iter().filter(|r| r.error.is_some()).count(),
    };
    let manifest = AugmentationManifest {
        seed: options.seed,
        view_policy: options.view_policy,
        poses: options.poses.clone(),
        images: records,
        totals,
    };
    Ok((samples, manifest))
}

fn augment_image(
    image: &DatasetImage,
    poses: &[RigidPose],
    options: &AugmentOptions,
    record: &mut ImageRecord,
) -> Result<Vec<AugmentedSample>> {
    let raster = Raster::load_rgb(&image.path)?;
    let (w, h) = (raster.width(), raster.height());
    if (w, h) != (image.width, image.height) {
        return Err(Error::mismatch(
            format!("{}x{} from annotations", image.width, image.height),
            format!("{w}x{h} on disk"),
        ));
    }
    let depth_path = options.depth.path_for(image);
    let depth = load_depth(depth_path.as_deref(), options.depth.mode, w, h)?;

    let source_k = CameraIntrinsics::normalized(w, h);
    let mut cloud = lift_image(&raster, &depth, &source_k, SampleGrid::dense(w, h))?;
    let marking = cloud.mark_boxes(&image.boxes)?;
    record.unmarkable = marking.unmarkable;

    let cfg = options.splat_config(w, h);
    let target_k = CameraIntrinsics::normalized(cfg.palette_w, cfg.palette_h);
    let stem = std::path::Path::new(&image.file_name)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("image");

    let mut samples = Vec::new();
    for pose_index in select_views(options.view_policy, poses.len(), options.seed, image.id) {
        let spec = &options.poses[pose_index];
        let pose = &poses[pose_index];
        let palette = splat(&cloud, pose, &target_k, &cfg)?;
        let marks = ProjectedMarkSet::project(&cloud, &image.boxes, pose, &target_k);
        let report = recover_boxes(&marks, cfg.palette_w, cfg.palette_h, &options.thresholds)?;

        let boxes: Vec<BoundingBox> = report
            .kept
            .iter()
            .map(|b| BoundingBox {
                x_min: quantize(b.x_min),
                y_min: quantize(b.y_min),
                x_max: quantize(b.x_max),
                y_max: quantize(b.y_max),
                ..*b
            })
            .collect();
        record.boxes_kept += boxes.len();
        for &(box_index, reason) in &report.dropped {
            record.dropped.push(DroppedBox {
                pose_label: spec.label.clone(),
                box_index,
                annotation_id: image.annotation_ids[box_index as usize],
                reason,
            });
        }

        let file_name = format!("aug/{}_{}_{}.png", image.id, stem, spec.label);
        record.poses_applied.push(spec.label.clone());
        record.samples.push(file_name.clone());
        samples.push(AugmentedSample {
            file_name,
            image: palette.fill_holes(cfg.alpha_eps, &options.background),
            alpha: palette.alpha,
            boxes,
            provenance: Provenance {
                source_id: image.id,
                source_file: image.file_name.clone(),
                pose_label: spec.label.clone(),
                pose_index,
                seed: options.seed,
                background: options.background,
            },
        });
    }
    Ok(samples)
}
