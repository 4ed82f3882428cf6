//! Offline dataset augmentation: load a COCO dataset, render every image from
//! new viewpoints, carry the boxes along, and write the result back out.

pub mod augment;
pub mod coco;
pub mod depth;
pub mod poses;
pub mod write;

use std::path::Path;

pub use augment::{
    augment_dataset, select_views, AugmentOptions, AugmentationManifest, AugmentedSample, DepthSource,
    ViewPolicy,
};
pub use coco::{load_annotations, load_dataset, Dataset, DatasetImage};
pub use depth::{load_depth, save_depth16, DepthMode};
pub use poses::{baseline_presets, load_poses, PoseSpec};
pub use write::{write_dataset, ANNOTATIONS_FILE, IMAGES_DIR, MANIFEST_FILE};

use crate::error::{Error, Result};

/// Parses `<W>x<H>`.
pub fn parse_palette(s: &str) -> Result<(usize, usize)> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::invalid(format!("palette must look like 256x256, got {s:?}")))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::invalid(format!("bad palette dimension {v:?}")))
    };
    Ok((parse(w)?, parse(h)?))
}

/// Loads, augments and writes a dataset in one go. Returns the manifest;
/// per-image failures are listed there rather than returned as errors.
pub fn run(
    annotation_file: &Path,
    image_root: &Path,
    output_root: &Path,
    options: &AugmentOptions,
) -> Result<AugmentationManifest> {
    let dataset = load_dataset(annotation_file, image_root)?;
    let (samples, manifest) = augment_dataset(&dataset, options)?;
    write_dataset(&dataset, &samples, &manifest, output_root)?;
    Ok(manifest)
}
