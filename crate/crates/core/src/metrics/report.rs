use std::path::Path;

use serde::Serialize;

use super::{perceptual_distance, psnr, ssim, FeatureStack};
use crate::error::{Error, Result};
use crate::raster::Raster;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairMetrics {
    pub name: String,
    /// `None` when the images are identical (infinite PSNR).
    pub psnr: Option<f64>,
    pub ssim: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perceptual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub pairs: usize,
    /// Mean over pairs with finite PSNR.
    pub psnr_mean: Option<f64>,
    pub identical_pairs: usize,
    pub ssim_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perceptual_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub pairs: Vec<PairMetrics>,
    pub aggregate: Aggregate,
}

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg"];

fn image_names(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if path.is_file() && is_image {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                names.push(name.to_string());
            }
        }
    }
    names.sort();
    Ok(names)
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Scores every image in `test_dir` against the same-named image in
/// `ref_dir`.
///
/// With `features`, the directory must hold `ref/<stem>.feat` and
/// `test/<stem>.feat` for every pair.
pub fn compare_dirs(ref_dir: &Path, test_dir: &Path, features: Option<&Path>) -> Result<MetricsReport> {
    let ref_names = image_names(ref_dir)?;
    let mut pairs = Vec::new();
    for name in image_names(test_dir)? {
        if ref_names.binary_search(&name).is_err() {
            continue;
        }
        let a = Raster::load_rgb(ref_dir.join(&name))?;
        let b = Raster::load_rgb(test_dir.join(&name))?;
        let p = psnr(&a, &b, 255.0)?;
        let s = ssim(&a, &b)?;
        let perceptual = match features {
            Some(dir) => {
                let stem = Path::new(&name)
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or(&name);
                let fr = FeatureStack::load(dir.join("ref").join(format!("{stem}.feat")))?;
                let ft = FeatureStack::load(dir.join("test").join(format!("{stem}.feat")))?;
                Some(perceptual_distance(&fr, &ft)?)
            }
            None => None,
        };
        pairs.push(PairMetrics {
            name,
            psnr: p.is_finite().then_some(p),
            ssim: s,
            perceptual,
        });
    }

    let aggregate = Aggregate {
        pairs: pairs.len(),
        psnr_mean: mean(pairs.iter().filter_map(|p| p.psnr)),
        identical_pairs: pairs.iter().filter(|p| p.psnr.is_none()).count(),
        ssim_mean: mean(pairs.iter().map(|p| p.ssim)),
        perceptual_mean: mean(pairs.iter().filter_map(|p| p.perceptual)),
    };
    Ok(MetricsReport { pairs, aggregate })
}
