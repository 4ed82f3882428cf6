//! Synthesis quality metrics: PSNR, SSIM and a layer-weighted feature
//! distance.

mod features;
mod report;

pub use features::{perceptual_distance, FeatureLayer, FeatureStack};
pub use report::{compare_dirs, MetricsReport, PairMetrics};

use crate::error::{Error, Result};
use crate::raster::Raster;

fn check_shapes(a: &Raster, b: &Raster) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::mismatch(a.shape_string(), b.shape_string()));
    }
    if a.is_empty() {
        return Err(Error::invalid("cannot compare empty rasters"));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB. Identical inputs give `f64::INFINITY`.
pub fn psnr(a: &Raster, b: &Raster, peak: f64) -> Result<f64> {
    check_shapes(a, b)?;
    if !(peak.is_finite() && peak > 0.0) {
        return Err(Error::invalid("peak must be positive"));
    }
    let n = a.data().len() as f64;
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimConfig {
    /// Side of the square Gaussian window.
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        SsimConfig {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 255.0,
        }
    }
}

/// Mean SSIM with the default 11x11, sigma 1.5 Gaussian window.
pub fn ssim(a: &Raster, b: &Raster) -> Result<f64> {
    ssim_with(a, b, &SsimConfig::default())
}

/// Mean local SSIM over every full window position, averaged across channels.
pub fn ssim_with(a: &Raster, b: &Raster, cfg: &SsimConfig) -> Result<f64> {
    check_shapes(a, b)?;
    let win = cfg.window;
    if win == 0 || a.width() < win || a.height() < win {
        return Err(Error::invalid(format!(
            "image {}x{} is smaller than the {win}x{win} SSIM window",
            a.width(),
            a.height()
        )));
    }

    let kernel = gaussian_kernel(win, cfg.sigma);
    let c1 = (cfg.k1 * cfg.dynamic_range).powi(2);
    let c2 = (cfg.k2 * cfg.dynamic_range).powi(2);
    let (w, h, channels) = (a.width(), a.height(), a.channels());

    let mut total = 0.0;
    for ch in 0..channels {
        let plane_a: Vec<f64> = a.data().iter().skip(ch).step_by(channels).copied().collect();
        let plane_b: Vec<f64> = b.data().iter().skip(ch).step_by(channels).copied().collect();
        let sq_a: Vec<f64> = plane_a.iter().map(|v| v * v).collect();
        let sq_b: Vec<f64> = plane_b.iter().map(|v| v * v).collect();
        let prod: Vec<f64> = plane_a.iter().zip(&plane_b).map(|(x, y)| x * y).collect();

        let mu_a = filter_valid(&plane_a, w, h, &kernel);
        let mu_b = filter_valid(&plane_b, w, h, &kernel);
        let e_aa = filter_valid(&sq_a, w, h, &kernel);
        let e_bb = filter_valid(&sq_b, w, h, &kernel);
        let e_ab = filter_valid(&prod, w, h, &kernel);

        let mut sum = 0.0;
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = e_aa[i] - ma * ma;
            let var_b = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
            let den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
            sum += num / den;
        }
        total += sum / mu_a.len() as f64;
    }
    Ok(total / channels as f64)
}

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let mid = (size as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - mid;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let norm: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / norm).collect()
}

/// Separable correlation keeping only positions where the window fits.
fn filter_valid(plane: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let k = kernel.len();
    let (ow, oh) = (w - k + 1, h - k + 1);
    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            horiz[y * ow + x] = kernel.iter().zip(&row[x..x + k]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = kernel
                .iter()
                .enumerate()
                .map(|(i, kv)| kv * horiz[(y + i) * ow + x])
                .sum();
        }
    }
    out
}
