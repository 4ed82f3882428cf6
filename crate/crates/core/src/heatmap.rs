//! Gaussian center heatmaps and keypoint-aware mixup.

use std::io::{Read, Write};
use std::path::Path;

use crate::cloud::BoundingBox;
use crate::error::{Error, Result};
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapConfig {
    /// Image pixels per heatmap cell.
    pub stride: usize,
    /// IoU a displaced box must keep with the original; sets the radius.
    pub iou_threshold: f64,
    /// `sigma = radius / sigma_divisor`.
    pub sigma_divisor: f64,
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        HeatmapConfig {
            stride: 4,
            iou_threshold: 0.7,
            sigma_divisor: 3.0,
        }
    }
}

impl HeatmapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 {
            return Err(Error::invalid("stride must be at least 1"));
        }
        if !(self.iou_threshold > 0.0 && self.iou_threshold < 1.0) {
            return Err(Error::invalid("IoU threshold must lie in (0, 1)"));
        }
        if !(self.sigma_divisor > 0.0 && self.sigma_divisor.is_finite()) {
            return Err(Error::invalid("sigma divisor must be positive"));
        }
        Ok(())
    }
}

/// Per-category grid of center responses in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub grid: Raster,
    pub stride: usize,
}

impl Heatmap {
    /// Zero heatmap covering an `image_w x image_h` image.
    pub fn zeros(image_w: usize, image_h: usize, categories: usize, stride: usize) -> Self {
        Heatmap {
            grid: Raster::filled(
                image_w.div_ceil(stride),
                image_h.div_ceil(stride),
                categories,
                0.0,
            ),
            stride,
        }
    }

    pub fn width(&self) -> usize {
        self.grid.width()
    }

    pub fn height(&self) -> usize {
        self.grid.height()
    }

    pub fn categories(&self) -> usize {
        self.grid.channels()
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, c: usize) -> f64 {
        self.grid.pixel(x, y)[c]
    }

    /// Writes the little-endian container: `u32` width, height, categories and
    /// stride, then `f32` values in row-major `H x W x C` order.
    pub fn write_to(&self, mut out: impl Write) -> std::io::Result<()> {
        for v in [self.width(), self.height(), self.categories(), self.stride] {
            out.write_all(&(v as u32).to_le_bytes())?;
        }
        for &v in self.grid.data() {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut input: impl Read) -> Result<Self> {
        let mut header = [0u8; 16];
        input
            .read_exact(&mut header)
            .map_err(|e| Error::invalid(format!("truncated heatmap header: {e}")))?;
        let field = |i: usize| u32::from_le_bytes(header[i * 4..i * 4 + 4].try_into().unwrap()) as usize;
        let (w, h, c, stride) = (field(0), field(1), field(2), field(3));
        if c == 0 || stride == 0 {
            return Err(Error::invalid("heatmap header has zero categories or stride"));
        }
        let mut bytes = vec![0u8; w * h * c * 4];
        input
            .read_exact(&mut bytes)
            .map_err(|e| Error::invalid(format!("truncated heatmap values: {e}")))?;
        let data = bytes
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap())))
            .collect();
        Ok(Heatmap {
            grid: Raster::new(w, h, c, data)?,
            stride,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Heatmap::read_from(std::io::BufReader::new(file))
    }
}

/// Largest displacement radius that keeps IoU >= `t` with the original box.
///
/// Three perturbations are considered and the most restrictive wins: both
/// corners shifted the same way (a translated box), both moved inwards (a
/// shrunk box), and both moved outwards (a grown box). Each case reduces to a
/// quadratic in the radius.
pub fn gaussian_radius(box_w: f64, box_h: f64, t: f64) -> Result<f64> {
    if !(box_w > 0.0 && box_h > 0.0 && box_w.is_finite() && box_h.is_finite()) {
        return Err(Error::invalid(format!("degenerate box {box_w}x{box_h}")));
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::invalid(format!("IoU threshold {t} outside (0, 1)")));
    }
    let (w, h) = (box_w, box_h);
    let sum = w + h;
    let area = w * h;

    // translated: (w-r)(h-r) / (2wh - (w-r)(h-r)) = t
    let c1 = area * (1.0 - t) / (1.0 + t);
    let r1 = (sum - (sum * sum - 4.0 * c1).sqrt()) / 2.0;

    // shrunk: (w-2r)(h-2r) = t wh
    let r2 = (2.0 * sum - (4.0 * sum * sum - 16.0 * (1.0 - t) * area).sqrt()) / 8.0;

    // grown: wh = t (w+2r)(h+2r)
    let r3 = (-2.0 * t * sum + (4.0 * t * t * sum * sum + 16.0 * t * (1.0 - t) * area).sqrt()) / (8.0 * t);

    Ok(r1.min(r2).min(r3))
}

/// Gaussian response at offset `(dx, dy)` from a peak.
#[inline]
pub fn gaussian_value(dx: f64, dy: f64, sigma: f64) -> f64 {
    (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
}

/// Max-combines a Gaussian peak centered on cell `(cx, cy)` into channel `c`,
/// touching cells within `window` of the center.
pub fn draw_gaussian(heatmap: &mut Heatmap, c: usize, cx: usize, cy: usize, sigma: f64, window: usize) {
    let (w, h) = (heatmap.width(), heatmap.height());
    let (x0, x1) = (cx.saturating_sub(window), (cx + window).min(w - 1));
    let (y0, y1) = (cy.saturating_sub(window), (cy + window).min(h - 1));
    for y in y0..=y1 {
        for x in x0..=x1 {
            let g = gaussian_value(x as f64 - cx as f64, y as f64 - cy as f64, sigma);
            let cell = &mut heatmap.grid.pixel_mut(x, y)[c];
            if g > *cell {
                *cell = g;
            }
        }
    }
}

/// A box that could not be drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapWarning {
    pub index: u32,
    pub reason: String,
}

/// Renders one channel per entry of `categories`, with a Gaussian at the
/// center cell of every box.
pub fn render_heatmap(
    boxes: &[BoundingBox],
    image_w: usize,
    image_h: usize,
    categories: &[u32],
    cfg: &HeatmapConfig,
) -> Result<(Heatmap, Vec<HeatmapWarning>)> {
    cfg.validate()?;
    if image_w == 0 || image_h == 0 {
        return Err(Error::invalid("image must be non-empty"));
    }
    if categories.is_empty() {
        return Err(Error::invalid("need at least one category"));
    }
    let mut heatmap = Heatmap::zeros(image_w, image_h, categories.len(), cfg.stride);
    let mut warnings = Vec::new();
    let stride = cfg.stride as f64;

    for b in boxes {
        b.validate()?;
        let Some(channel) = categories.iter().position(|&c| c == b.category) else {
            warnings.push(HeatmapWarning {
                index: b.index,
                reason: format!("unknown category {}", b.category),
            });
            continue;
        };
        let (cx, cy) = ((b.x_min + b.x_max) / 2.0, (b.y_min + b.y_max) / 2.0);
        if !(cx >= 0.0 && cx < image_w as f64 && cy >= 0.0 && cy < image_h as f64) {
            warnings.push(HeatmapWarning {
                index: b.index,
                reason: format!("center ({cx}, {cy}) outside the image"),
            });
            continue;
        }
        let radius = match gaussian_radius(b.width() / stride, b.height() / stride, cfg.iou_threshold) {
            Ok(r) => r,
            Err(e) => {
                warnings.push(HeatmapWarning {
                    index: b.index,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let sigma = radius / cfg.sigma_divisor;
        let cell_x = ((cx / stride) as usize).min(heatmap.width() - 1);
        let cell_y = ((cy / stride) as usize).min(heatmap.height() - 1);
        draw_gaussian(
            &mut heatmap,
            channel,
            cell_x,
            cell_y,
            sigma,
            radius.ceil() as usize,
        );
    }
    Ok((heatmap, warnings))
}

/// An image together with its center heatmap.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapSample {
    pub image: Raster,
    pub heatmap: Heatmap,
}

#[inline]
fn blend(a: f64, b: f64, lambda: f64) -> f64 {
    if a == b {
        return a;
    }
    let v = lambda * a + (1.0 - lambda) * b;
    v.clamp(a.min(b), a.max(b))
}

/// Blends two samples with weight `lambda` on `a`; heatmaps share the image
/// weight.
pub fn mixup(a: &HeatmapSample, b: &HeatmapSample, lambda: f64) -> Result<HeatmapSample> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!("mixup weight {lambda} outside [0, 1]")));
    }
    if !a.image.same_shape(&b.image) {
        return Err(Error::mismatch(a.image.shape_string(), b.image.shape_string()));
    }
    if !a.heatmap.grid.same_shape(&b.heatmap.grid) || a.heatmap.stride != b.heatmap.stride {
        return Err(Error::mismatch(
            format!(
                "heatmap {} stride {}",
                a.heatmap.grid.shape_string(),
                a.heatmap.stride
            ),
            format!(
                "heatmap {} stride {}",
                b.heatmap.grid.shape_string(),
                b.heatmap.stride
            ),
        ));
    }
    let mix = |x: &Raster, y: &Raster| -> Result<Raster> {
        let data = x
            .data()
            .iter()
            .zip(y.data())
            .map(|(&p, &q)| blend(p, q, lambda))
            .collect();
        Raster::new(x.width(), x.height(), x.channels(), data)
    };
    Ok(HeatmapSample {
        image: mix(&a.image, &b.image)?,
        heatmap: Heatmap {
            grid: mix(&a.heatmap.grid, &b.heatmap.grid)?,
            stride: a.heatmap.stride,
        },
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn sample(fill: f64, heat: f64) -> HeatmapSample {
        let mut heatmap = Heatmap::zeros(8, 8, 2, 4);
        heatmap.grid.data_mut().iter_mut().for_each(|v| *v = heat);
        HeatmapSample {
            image: Raster::filled(8, 8, 3, fill),
            heatmap,
        }
    }

    #[test]
    fn radius_shrinks_to_zero_as_threshold_tightens() {
        let r = gaussian_radius(40.0, 30.0, 1.0 - 1e-12).unwrap();
        assert!(r < 1e-9, "{r}");
        assert!(gaussian_radius(40.0, 30.0, 0.7).unwrap() > 0.0);
    }

    #[test]
    fn radius_rejects_degenerate_input() {
        assert!(gaussian_radius(0.0, 3.0, 0.7).is_err());
        assert!(gaussian_radius(3.0, 3.0, 0.0).is_err());
        assert!(gaussian_radius(3.0, 3.0, 1.0).is_err());
    }

    #[test]
    fn peak_is_one_at_center() {
        let boxes = [BoundingBox::new(8.0, 8.0, 40.0, 24.0, 5, 0)];
        let (hm, warnings) = render_heatmap(&boxes, 64, 32, &[5], &HeatmapConfig::default()).unwrap();
        assert!(warnings.is_empty());
        assert_eq!((hm.width(), hm.height()), (16, 8));
        assert_eq!(hm.at(6, 4, 0), 1.0);
        assert!(hm.grid.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn value_one_sigma_away() {
        let mut hm = Heatmap::zeros(40, 40, 1, 4);
        draw_gaussian(&mut hm, 0, 5, 5, 2.0, 6);
        assert!((hm.at(7, 5, 0) - (-0.5f64).exp()).abs() < 1e-12);
        assert!((hm.at(5, 3, 0) - 0.60653).abs() < 1e-5);
    }

    #[test]
    fn out_of_image_centers_warn() {
        let boxes = [
            BoundingBox::new(-30.0, 2.0, -10.0, 8.0, 0, 0),
            BoundingBox::new(2.0, 2.0, 8.0, 8.0, 9, 1),
        ];
        let (hm, warnings) = render_heatmap(&boxes, 16, 16, &[0], &HeatmapConfig::default()).unwrap();
        assert_eq!(warnings.iter().map(|w| w.index).collect::<Vec<_>>(), vec![0, 1]);
        assert!(hm.grid.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mixup_endpoints_and_midpoint() {
        let a = sample(200.0, 0.8);
        let b = sample(100.0, 0.2);
        assert_eq!(mixup(&a, &b, 1.0).unwrap(), a);
        assert_eq!(mixup(&a, &b, 0.0).unwrap(), b);
        let mid = mixup(&a, &b, 0.5).unwrap();
        assert!(mid.image.data().iter().all(|&v| v == 150.0));
        assert!(mid.heatmap.grid.data().iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn mixup_rejects_bad_input() {
        let a = sample(1.0, 0.0);
        assert!(mixup(&a, &a, 1.5).is_err());
        assert!(mixup(&a, &a, -0.1).is_err());
        let mut b = sample(1.0, 0.0);
        b.heatmap.stride = 2;
        assert!(mixup(&a, &b, 0.5).is_err());
        let c = HeatmapSample {
            image: Raster::filled(4, 8, 3, 0.0),
            heatmap: a.heatmap.clone(),
        };
        assert!(mixup(&a, &c, 0.5).is_err());
    }

    #[test]
    fn container_roundtrip() {
        let boxes = [BoundingBox::new(3.0, 4.0, 30.0, 20.0, 1, 0)];
        let (hm, _) = render_heatmap(&boxes, 37, 21, &[0, 1], &HeatmapConfig::default()).unwrap();
        let mut bytes = Vec::new();
        hm.write_to(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 16 + hm.grid.data().len() * 4);
        let back = Heatmap::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back.stride, 4);
        for (x, y) in back.grid.data().iter().zip(hm.grid.data()) {
            assert_eq!(*x, f64::from(*y as f32));
        }
        assert!(Heatmap::read_from(&bytes[..10]).is_err());
    }

    proptest! {
        #[test]
        fn radius_is_monotone_and_homogeneous(
            w in 1.0f64..500.0, h in 1.0f64..500.0, grow in 1.0f64..3.0, t in 0.05f64..0.95,
        ) {
            let r = gaussian_radius(w, h, t).unwrap();
            prop_assert!(r > 0.0);
            prop_assert!(gaussian_radius(w * grow, h, t).unwrap() >= r * (1.0 - 1e-12));
            prop_assert!(gaussian_radius(w, h * grow, t).unwrap() >= r * (1.0 - 1e-12));
            let r2 = gaussian_radius(2.0 * w, 2.0 * h, t).unwrap();
            prop_assert!((r2 - 2.0 * r).abs() <= 1e-9 * r.max(1.0));
        }

        #[test]
        fn mixup_of_equal_samples_is_identity(lambda in 0.0f64..=1.0, fill in 0.0f64..255.0) {
            let a = sample(fill, fill / 255.0);
            prop_assert_eq!(mixup(&a, &a, lambda).unwrap(), a);
        }

        #[test]
        fn mixup_stays_between_inputs(lambda in 0.0f64..=1.0, x in 0.0f64..255.0, y in 0.0f64..255.0) {
            let out = mixup(&sample(x, 0.1), &sample(y, 0.9), lambda).unwrap();
            for &v in out.image.data() {
                prop_assert!(v >= x.min(y) && v <= x.max(y));
            }
            for &v in out.heatmap.grid.data() {
                prop_assert!((0.1..=0.9).contains(&v));
            }
        }
    }
}
