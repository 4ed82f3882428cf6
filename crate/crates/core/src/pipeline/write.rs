//! Emitting an augmented dataset: images, merged annotations and manifest.
//!
//! Layout under the output root:
//!
//! ```text
//! images/<original file_name>      copied sources
//! images/aug/<id>_<stem>_<pose>.png rendered views
//! annotations.json                  sources + augmented entries
//! manifest.json
//! ```

use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use super::augment::{AugmentationManifest, AugmentedSample};
use super::coco::{CocoAnnotation, CocoFile, CocoImage, Dataset};
use crate::error::{Error, Result};

pub const IMAGES_DIR: &str = "images";
pub const ANNOTATIONS_FILE: &str = "annotations.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Builds the merged annotation file. Augmented images and annotations take
/// ids following the largest ids in the source file, in sample order.
pub fn merged_annotations(dataset: &Dataset, samples: &[AugmentedSample]) -> CocoFile {
    let mut merged = dataset.source.clone();
    let first_image = merged.images.iter().map(|i| i.id).max().map_or(1, |m| m + 1);
    let mut next_ann = merged.annotations.iter().map(|a| a.id).max().map_or(1, |m| m + 1);

    for (image_id, s) in (first_image..).zip(samples) {
        let p = &s.provenance;
        let mut extra = Map::new();
        extra.insert("source_id".into(), Value::from(p.source_id));
        extra.insert("source_file".into(), Value::from(p.source_file.clone()));
        extra.insert("pose_label".into(), Value::from(p.pose_label.clone()));
        extra.insert("pose_index".into(), Value::from(p.pose_index));
        extra.insert("seed".into(), Value::from(p.seed));
        extra.insert(
            "background".into(),
            Value::from(p.background.iter().map(|&v| Value::from(v)).collect::<Vec<_>>()),
        );
        merged.images.push(CocoImage {
            id: image_id,
            file_name: s.file_name.clone(),
            width: s.image.width() as u32,
            height: s.image.height() as u32,
            extra,
        });
        for b in &s.boxes {
            let (w, h) = (b.x_max - b.x_min, b.y_max - b.y_min);
            merged.annotations.push(CocoAnnotation {
                id: next_ann,
                image_id,
                category_id: b.category,
                bbox: [b.x_min, b.y_min, w, h],
                area: Some(w * h),
                iscrowd: Some(0),
                extra: Map::new(),
            });
            next_ann += 1;
        }
    }
    merged
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes the output tree and returns the path of the merged annotations.
///
/// Sources whose augmentation failed are still copied, so the merged file
/// stays loadable.
pub fn write_dataset(
    dataset: &Dataset,
    samples: &[AugmentedSample],
    manifest: &AugmentationManifest,
    output_root: &Path,
) -> Result<PathBuf> {
    let images_dir = output_root.join(IMAGES_DIR);
    create_dir(&images_dir)?;

    for img in &dataset.images {
        let dst = images_dir.join(&img.file_name);
        if let Some(parent) = dst.parent() {
            create_dir(parent)?;
        }
        std::fs::copy(&img.path, &dst).map_err(|e| Error::io(&img.path, e))?;
    }
    for s in samples {
        let dst = images_dir.join(&s.file_name);
        if let Some(parent) = dst.parent() {
            create_dir(parent)?;
        }
        s.image.save_png(&dst)?;
    }

    let annotations = output_root.join(ANNOTATIONS_FILE);
    write_json(&annotations, &merged_annotations(dataset, samples))?;
    write_json(&output_root.join(MANIFEST_FILE), manifest)?;
    Ok(annotations)
}
