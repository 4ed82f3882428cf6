//! Builds center heatmaps for two annotated images and blends the pairs.
//!
//! cargo run -p viewaug --example heatmap_mixup [output_dir]

use std::path::PathBuf;

use viewaug::heatmap::{gaussian_radius, mixup, render_heatmap, HeatmapConfig, HeatmapSample};
use viewaug::{BoundingBox, Raster};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| "target/examples/mixup".into());
    std::fs::create_dir_all(&out)?;

    let (w, h) = (128, 96);
    let cfg = HeatmapConfig::default();
    let categories = [1, 2];

    let first = [
        BoundingBox::new(10.0, 10.0, 58.0, 50.0, 1, 0),
        BoundingBox::new(70.0, 40.0, 90.0, 90.0, 2, 1),
    ];
    let second = [BoundingBox::new(40.0, 20.0, 120.0, 80.0, 1, 0)];
    for b in first.iter().chain(&second) {
        let r = gaussian_radius(
            b.width() / cfg.stride as f64,
            b.height() / cfg.stride as f64,
            cfg.iou_threshold,
        )?;
        println!("box {:>4.0}x{:<4.0} radius {:.3} cells", b.width(), b.height(), r);
    }

    let (ha, _) = render_heatmap(&first, w, h, &categories, &cfg)?;
    let (hb, _) = render_heatmap(&second, w, h, &categories, &cfg)?;
    let a = HeatmapSample {
        image: Raster::filled(w, h, 3, 220.0),
        heatmap: ha,
    };
    let b = HeatmapSample {
        image: Raster::filled(w, h, 3, 20.0),
        heatmap: hb,
    };

    for lambda in [0.0, 0.3, 1.0] {
        let m = mixup(&a, &b, lambda)?;
        let peak = m.heatmap.grid.data().iter().cloned().fold(0.0, f64::max);
        println!(
            "lambda {lambda}: image value {:.1}, heatmap peak {:.3}",
            m.image.data()[0],
            peak
        );
        m.heatmap.save(out.join(format!("mixed_{lambda}.heat")))?;
    }

    // channel 0 of the first heatmap as a grayscale preview
    let hm = &a.heatmap;
    let preview: Vec<f64> = (0..hm.height())
        .flat_map(|y| (0..hm.width()).map(move |x| (x, y)))
        .map(|(x, y)| hm.at(x, y, 0) * 255.0)
        .collect();
    Raster::new(hm.width(), hm.height(), 1, preview)?.save_png(out.join("heat_c0.png"))?;
    println!("wrote {}", out.display());
    Ok(())
}
