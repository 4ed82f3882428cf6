//! Carries bounding boxes into new views and shows which survive.
//!
//! cargo run -p viewaug --example transfer_boxes

use viewaug::pipeline::{baseline_presets, PoseSpec};
use viewaug::{
    lift_image, recover_boxes, BoundingBox, CameraIntrinsics, DepthMap, ProjectedMarkSet, Raster, SampleGrid,
    TransferThresholds,
};

fn main() -> viewaug::Result<()> {
    let (w, h) = (96, 64);
    let image = Raster::filled(w, h, 3, 100.0);
    let depth = DepthMap::constant(w, h, 1.0)?;
    let k = CameraIntrinsics::normalized(w, h);

    let boxes = [
        BoundingBox::new(30.0, 20.0, 60.0, 44.0, 1, 0),
        BoundingBox::new(0.0, 0.0, 12.0, 10.0, 2, 1),
        BoundingBox::new(88.0, 50.0, 96.0, 64.0, 1, 2),
        BoundingBox::new(47.2, 31.0, 47.9, 31.5, 3, 3),
    ];

    // a sparse grid: one sample every 4 px
    let mut cloud = lift_image(&image, &depth, &k, SampleGrid::square(24, w, h))?;
    let report = cloud.mark_boxes(&boxes)?;
    for (index, count) in &report.marked {
        println!("box {index}: {count} marked samples");
    }

    let mut poses = baseline_presets();
    poses.push(PoseSpec {
        label: "hard-right".into(),
        rotation: [0.0, 0.6, 0.0],
        translation: [0.0, 0.0, 0.0],
    });
    let thresholds = TransferThresholds::default();
    for spec in &poses {
        let marks = ProjectedMarkSet::project(&cloud, &boxes, &spec.to_pose()?, &k);
        let result = recover_boxes(&marks, w, h, &thresholds)?;
        println!("\n{}:", spec.label);
        for b in &result.kept {
            println!(
                "  keep box {} [{:.2}, {:.2}, {:.2}, {:.2}]",
                b.index, b.x_min, b.y_min, b.x_max, b.y_max
            );
        }
        for (index, reason) in &result.dropped {
            println!("  drop box {index}: {reason}");
        }
    }
    Ok(())
}
