//! Renders a synthetic scene from the four preset viewpoints and writes the
//! views as PNGs.
//!
//! cargo run -p viewaug --example render_novel_view [output_dir]

use std::path::PathBuf;

use viewaug::pipeline::{baseline_presets, load_depth, DepthMode};
use viewaug::{lift_image, splat, CameraIntrinsics, Raster, SampleGrid, SplatConfig};

fn scene(w: usize, h: usize) -> Raster {
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let ring = (((x as f64 - w as f64 / 2.0).hypot(y as f64 - h as f64 / 2.0) / 12.0) as usize) % 2;
            data.extend_from_slice(&[
                (x * 255 / w) as f64,
                (y * 255 / h) as f64,
                60.0 + 150.0 * ring as f64,
            ]);
        }
    }
    Raster::new(w, h, 3, data).expect("sizes match")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| "target/examples/render".into());
    std::fs::create_dir_all(&out)?;

    let (w, h) = (160, 120);
    let image = scene(w, h);
    // a floor tilting away from the camera
    let depth = load_depth(None, "plane:0,0.01,1.0".parse::<DepthMode>()?, w, h)?;
    let k = CameraIntrinsics::normalized(w, h);
    let cloud = lift_image(&image, &depth, &k, SampleGrid::dense(w, h))?;
    image.save_png(out.join("source.png"))?;

    let cfg = SplatConfig::production(w, h);
    for spec in baseline_presets() {
        let palette = splat(&cloud, &spec.to_pose()?, &k, &cfg)?;
        let holes = palette.alpha.iter().filter(|&&a| a < cfg.alpha_eps).count();
        let path = out.join(format!("{}.png", spec.label));
        palette.fill_holes(cfg.alpha_eps, &[128.0]).save_png(&path)?;
        println!(
            "{:<9} {} uncovered pixels -> {}",
            spec.label,
            holes,
            path.display()
        );
    }
    Ok(())
}
