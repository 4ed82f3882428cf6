//! End-to-end: writes a tiny COCO dataset, augments it with the preset views
//! and prints the manifest summary.
//!
//! cargo run -p viewaug --example augment_dataset [output_dir]

use std::path::PathBuf;

use serde_json::json;
use viewaug::pipeline::{self, baseline_presets, AugmentOptions, DepthMode};
use viewaug::Raster;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| "target/examples/dataset".into());
    let src = root.join("source");
    std::fs::create_dir_all(&src)?;

    let (w, h) = (96, 72);
    let mut images = Vec::new();
    let mut annotations = Vec::new();
    for id in 1..=3u64 {
        let name = format!("scene_{id}.png");
        let data = (0..w * h)
            .flat_map(|i| {
                let (x, y) = (i % w, i / w);
                [
                    ((x * 3 + id as usize * 40) % 256) as f64,
                    ((y * 3) % 256) as f64,
                    90.0,
                ]
            })
            .collect();
        Raster::new(w, h, 3, data)?.save_png(src.join(&name))?;
        images.push(json!({"id": id, "file_name": name, "width": w, "height": h}));
        annotations
            .push(json!({"id": id * 10, "image_id": id, "category_id": 1, "bbox": [20.0, 15.0, 40.0, 30.0]}));
        annotations.push(
            json!({"id": id * 10 + 1, "image_id": id, "category_id": 2, "bbox": [80.0, 2.0, 15.0, 12.0]}),
        );
    }
    let coco = json!({"images": images, "annotations": annotations, "categories": [{"id": 1, "name": "thing"}, {"id": 2, "name": "corner"}]});
    let ann = root.join("source.json");
    std::fs::write(&ann, serde_json::to_vec_pretty(&coco).expect("json"))?;

    let mut options = AugmentOptions::new(
        baseline_presets(),
        DepthMode::Plane {
            a: 0.0,
            b: 0.004,
            c: 1.0,
        },
    );
    options.workers = 4;
    let out = root.join("augmented");
    let manifest = pipeline::run(&ann, &src, &out, &options)?;

    let t = &manifest.totals;
    println!(
        "{} sources -> {} new images, {} boxes kept, {} dropped",
        t.sources, t.samples, t.boxes_kept, t.boxes_dropped
    );
    for rec in &manifest.images {
        for d in &rec.dropped {
            println!(
                "  {} / {}: annotation {} dropped ({})",
                rec.file_name, d.pose_label, d.annotation_id, d.reason
            );
        }
    }
    println!("output in {}", out.display());
    Ok(())
}
