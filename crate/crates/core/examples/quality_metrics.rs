//! Scores a rendered view against its source with PSNR, SSIM and a
//! feature-space distance.
//!
//! cargo run -p viewaug --example quality_metrics

use viewaug::metrics::{perceptual_distance, psnr, ssim, FeatureLayer, FeatureStack};
use viewaug::{lift_image, splat, CameraIntrinsics, DepthMap, Raster, RigidPose, SampleGrid, SplatConfig};

fn card(w: usize, h: usize) -> Raster {
    let data = (0..w * h)
        .flat_map(|i| {
            let (x, y) = (i % w, i / w);
            let v = if (x / 6 + y / 6) % 2 == 0 { 40.0 } else { 210.0 };
            [v, (x * 4 % 256) as f64, (y * 4 % 256) as f64]
        })
        .collect();
    Raster::new(w, h, 3, data).expect("sizes match")
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn main() -> viewaug::Result<()> {
    let (w, h) = (64, 64);
    let source = card(w, h);
    let k = CameraIntrinsics::normalized(w, h);
    let cloud = lift_image(
        &source,
        &DepthMap::constant(w, h, 1.0)?,
        &k,
        SampleGrid::dense(w, h),
    )?;

    for radius in [0.5, 1.0, 2.0, 4.0] {
        let cfg = SplatConfig {
            k_nearest: 16,
            radius,
            ..SplatConfig::desk(w, h)
        };
        let view = splat(&cloud, &RigidPose::identity(), &k, &cfg)?.payload;
        let p = psnr(&source, &view, 255.0)?;
        println!(
            "radius {radius}: PSNR {:>8} dB  SSIM {:.4}",
            format!("{p:.2}"),
            ssim(&source, &view)?
        );
    }

    // two single-layer feature stacks, 2x2 locations with 3 channels
    let a: Vec<f64> = [[1.0, 0.0, 0.0], [0.6, 0.8, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0]]
        .iter()
        .flat_map(|v| normalized(v))
        .collect();
    let b: Vec<f64> = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 1.0, 1.0], [1.0, 1.0, 0.9]]
        .iter()
        .flat_map(|v| normalized(v))
        .collect();
    let stack = |v: Vec<f64>, wts: Vec<f64>| -> viewaug::Result<FeatureStack> {
        FeatureStack::new(vec![FeatureLayer::new(2, 2, 3, v, wts)?])
    };
    let plain = perceptual_distance(&stack(a.clone(), vec![1.0; 3])?, &stack(b.clone(), vec![1.0; 3])?)?;
    let weighted = perceptual_distance(&stack(a, vec![0.2, 1.0, 0.5])?, &stack(b, vec![0.2, 1.0, 0.5])?)?;
    println!("feature distance: unit weights {plain:.4}, learned-style weights {weighted:.4}");
    Ok(())
}
