//! COCO-style annotation files.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::cloud::BoundingBox;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub info: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub licenses: Option<Value>,
    pub images: Vec<CocoImage>,
    #[serde(default)]
    pub annotations: Vec<CocoAnnotation>,
    #[serde(default)]
    pub categories: Vec<CocoCategory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoImage {
    pub id: u64,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u32,
    /// `[x, y, width, height]`.
    pub bbox: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iscrowd: Option<u8>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoCategory {
    pub id: u32,
    pub name: String,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

/// One source image with its boxes in corner form.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetImage {
    pub id: u64,
    pub file_name: String,
    pub path: PathBuf,
    pub width: usize,
    pub height: usize,
    /// Box `i` has `index == i`.
    pub boxes: Vec<BoundingBox>,
    /// COCO annotation id of each box.
    pub annotation_ids: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub images: Vec<DatasetImage>,
    /// Category ids in file order.
    pub categories: Vec<u32>,
    /// The file as read, used when merging augmented entries back in.
    pub source: CocoFile,
}

/// Converts a COCO `[x, y, w, h]` box to corners.
pub fn bbox_to_corners(bbox: [f64; 4]) -> [f64; 4] {
    let [x, y, w, h] = bbox;
    [x, y, x + w, y + h]
}

pub fn read_coco(path: &Path) -> Result<CocoFile> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses and validates an annotation file without touching image files.
pub fn load_annotations(annotation_file: &Path, image_root: &Path) -> Result<Dataset> {
    let source = read_coco(annotation_file)?;
    let record = |what: String, reason: String| Error::Load { record: what, reason };

    let categories: Vec<u32> = source.categories.iter().map(|c| c.id).collect();
    let mut images: Vec<DatasetImage> = Vec::with_capacity(source.images.len());
    let mut by_id: HashMap<u64, usize> = HashMap::new();
    for img in &source.images {
        if by_id.insert(img.id, images.len()).is_some() {
            return Err(record(format!("image {}", img.id), "duplicate image id".into()));
        }
        images.push(DatasetImage {
            id: img.id,
            file_name: img.file_name.clone(),
            path: image_root.join(&img.file_name),
            width: img.width as usize,
            height: img.height as usize,
            boxes: Vec::new(),
            annotation_ids: Vec::new(),
        });
    }

    for ann in &source.annotations {
        let name = format!("annotation {}", ann.id);
        let Some(&slot) = by_id.get(&ann.image_id) else {
            return Err(record(
                name,
                format!("references missing image id {}", ann.image_id),
            ));
        };
        if ann.bbox.iter().any(|v| !v.is_finite()) {
            return Err(record(name, "bbox has non-finite values".into()));
        }
        if ann.bbox[2] < 0.0 || ann.bbox[3] < 0.0 {
            return Err(record(name, format!("negative bbox size {:?}", ann.bbox)));
        }
        if !categories.is_empty() && !categories.contains(&ann.category_id) {
            return Err(record(name, format!("unknown category {}", ann.category_id)));
        }
        let [x0, y0, x1, y1] = bbox_to_corners(ann.bbox);
        let image = &mut images[slot];
        let index = image.boxes.len() as u32;
        image
            .boxes
            .push(BoundingBox::new(x0, y0, x1, y1, ann.category_id, index));
        image.annotation_ids.push(ann.id);
    }

    Ok(Dataset {
        images,
        categories,
        source,
    })
}

/// Loads an annotation file and checks that every referenced image exists
/// under `image_root`.
pub fn load_dataset(annotation_file: &Path, image_root: &Path) -> Result<Dataset> {
    let dataset = load_annotations(annotation_file, image_root)?;
    for img in &dataset.images {
        if !img.path.is_file() {
            return Err(Error::Load {
                record: format!("image {} ({})", img.id, img.file_name),
                reason: format!("missing file {}", img.path.display()),
            });
        }
    }
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, json: &str) -> PathBuf {
        let p = dir.join("ann.json");
        std::fs::write(&p, json).unwrap();
        p
    }

    const MINIMAL: &str = r#"{
        "images": [{"id": 7, "file_name": "a.png", "width": 64, "height": 48}],
        "annotations": [{"id": 1, "image_id": 7, "category_id": 3, "bbox": [10, 20, 30, 40]}],
        "categories": [{"id": 3, "name": "mug"}]
    }"#;

    #[test]
    fn minimal_file_loads_one_box() {
        let dir = tempfile::tempdir().unwrap();
        let ann = write(dir.path(), MINIMAL);
        std::fs::write(dir.path().join("a.png"), b"").unwrap();
        let ds = load_dataset(&ann, dir.path()).unwrap();
        assert_eq!(ds.images.len(), 1);
        let b = ds.images[0].boxes[0];
        assert_eq!([b.x_min, b.y_min, b.x_max, b.y_max], [10.0, 20.0, 40.0, 60.0]);
        assert_eq!((b.category, b.index), (3, 0));
        assert_eq!(ds.images[0].annotation_ids, vec![1]);
    }

    #[test]
    fn missing_image_file_is_a_load_error() {
        let dir = tempfile::tempdir().unwrap();
        let ann = write(dir.path(), MINIMAL);
        match load_dataset(&ann, dir.path()) {
            Err(Error::Load { record, .. }) => assert!(record.contains("a.png")),
            other => panic!("unexpected {other:?}"),
        }
        // annotation-only loading does not need the file
        assert!(load_annotations(&ann, dir.path()).is_ok());
    }

    #[test]
    fn dangling_image_id_is_a_load_error() {
        let dir = tempfile::tempdir().unwrap();
        let ann = write(dir.path(), &MINIMAL.replace("\"image_id\": 7", "\"image_id\": 8"));
        match load_annotations(&ann, dir.path()) {
            Err(Error::Load { record, reason }) => {
                assert_eq!(record, "annotation 1");
                assert!(reason.contains('8'));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_size_and_bad_json_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let ann = write(
            dir.path(),
            &MINIMAL.replace("[10, 20, 30, 40]", "[10, 20, -30, 40]"),
        );
        assert!(matches!(
            load_annotations(&ann, dir.path()),
            Err(Error::Load { .. })
        ));
        let ann = write(dir.path(), "{\"images\": [");
        assert!(matches!(
            load_annotations(&ann, dir.path()),
            Err(Error::Json { .. })
        ));
    }

    #[test]
    fn extra_fields_survive_roundtrip() {
        let json = MINIMAL.replace("\"height\": 48}", "\"height\": 48, \"license\": 2}");
        let file: CocoFile = serde_json::from_str(&json).unwrap();
        assert_eq!(file.images[0].extra["license"], Value::from(2));
        let back: CocoFile = serde_json::from_str(&serde_json::to_string(&file).unwrap()).unwrap();
        assert_eq!(back, file);
    }
}
