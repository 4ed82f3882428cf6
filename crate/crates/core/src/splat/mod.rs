//! Soft point splatting with depth-ordered alpha over-compositing.
//!
//! Every point is moved into the target camera and projected. A pixel gathers
//! the points whose projected centers lie strictly within `radius` of its
//! center, keeps the `k_nearest` closest in depth, and composites them front
//! to back. A point at distance `dist` contributes weight
//! `(1 - dist / radius)^falloff_exponent`, which doubles as its opacity:
//!
//! ```text
//! raw   = sum_i w_i * c_i * prod_{j<i} (1 - w_j)
//! alpha = 1 - prod_i (1 - w_i)
//! out   = raw / max(alpha, alpha_eps)
//! ```
//!
//! Contributor order is ascending depth with ties broken by point index, so
//! the result is independent of how pixels are scheduled across threads.

mod grad;

use rayon::prelude::*;

use crate::camera::{project, world_to_camera, CameraIntrinsics, RigidPose};
use crate::cloud::PayloadPointCloud;
use crate::error::{Error, Result};
use crate::raster::Raster;

pub use grad::{splat_gradients, Cotangent, SplatGradients};

/// Projected centers closer than this to a pixel center count as exactly
/// centered.
pub const CENTER_SNAP_PX: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplatConfig {
    pub k_nearest: usize,
    /// Influence radius in pixels.
    pub radius: f64,
    pub palette_w: usize,
    pub palette_h: usize,
    pub falloff_exponent: f64,
    pub alpha_eps: f64,
}

impl SplatConfig {
    /// Full-size renderer settings: 128 contributors, radius 4.
    pub fn production(palette_w: usize, palette_h: usize) -> Self {
        SplatConfig {
            k_nearest: 128,
            radius: 4.0,
            palette_w,
            palette_h,
            falloff_exponent: 1.0,
            alpha_eps: 1e-4,
        }
    }

    /// Small settings for tests and quick previews: 8 contributors, radius 2.
    pub fn desk(palette_w: usize, palette_h: usize) -> Self {
        SplatConfig {
            k_nearest: 8,
            radius: 2.0,
            ..SplatConfig::production(palette_w, palette_h)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_nearest == 0 {
            return Err(Error::invalid("k_nearest must be at least 1"));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::invalid(format!(
                "radius must be positive, got {}",
                self.radius
            )));
        }
        if self.palette_w == 0 || self.palette_h == 0 {
            return Err(Error::invalid("palette must be at least 1x1"));
        }
        if !(self.falloff_exponent.is_finite() && self.falloff_exponent >= 1.0) {
            return Err(Error::invalid("falloff exponent must be >= 1"));
        }
        if !(self.alpha_eps > 0.0 && self.alpha_eps < 1.0) {
            return Err(Error::invalid("alpha_eps must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Kernel weight for a projected center `dist` pixels away.
    #[inline]
    pub fn weight(&self, dist: f64) -> f64 {
        if dist >= self.radius {
            return 0.0;
        }
        let base = 1.0 - dist / self.radius;
        if self.falloff_exponent == 1.0 {
            base
        } else {
            base.powf(self.falloff_exponent)
        }
    }

    /// Derivative of [`weight`](Self::weight) with respect to `dist`, taking
    /// the interior (one-sided) value at the kernel boundary.
    #[inline]
    pub fn weight_slope(&self, dist: f64) -> f64 {
        let base = (1.0 - dist / self.radius).max(0.0);
        let p = self.falloff_exponent;
        let scale = -p / self.radius;
        if p == 1.0 {
            scale
        } else {
            scale * base.powf(p - 1.0)
        }
    }
}

/// The rendered target view.
#[derive(Debug, Clone, PartialEq)]
pub struct Palette {
    /// Composited payload, normalized by `max(alpha, alpha_eps)`.
    pub payload: Raster,
    /// Accumulated opacity per pixel, row-major.
    pub alpha: Vec<f64>,
    /// Sorted, de-duplicated marks of every contributor at each pixel.
    pub mark_hits: Vec<Vec<u32>>,
}

impl Palette {
    pub fn width(&self) -> usize {
        self.payload.width()
    }

    pub fn height(&self) -> usize {
        self.payload.height()
    }

    #[inline]
    pub fn alpha_at(&self, x: usize, y: usize) -> f64 {
        self.alpha[y * self.payload.width() + x]
    }

    /// The payload with pixels whose alpha falls below `alpha_eps` replaced by
    /// `background`.
    pub fn fill_holes(&self, alpha_eps: f64, background: &[f64]) -> Raster {
        let mut out = self.payload.clone();
        let c = out.channels();
        for (i, px) in out.data_mut().chunks_mut(c).enumerate() {
            if self.alpha[i] < alpha_eps {
                for (dst, &b) in px.iter_mut().zip(background.iter().cycle()) {
                    *dst = b;
                }
            }
        }
        out
    }
}

/// A point's projection into the target view.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Projected {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

/// One point's contribution at one pixel.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Contributor {
    pub index: usize,
    pub depth: f64,
    pub dist: f64,
    /// Offset of the projected center from the pixel center.
    pub du: f64,
    pub dv: f64,
    pub weight: f64,
}

/// Projected points bucketed on a grid of `radius`-sized cells.
pub(crate) struct PointBuckets {
    projected: Vec<Option<Projected>>,
    cell: f64,
    cols: usize,
    rows: usize,
    /// `starts[c]..starts[c + 1]` indexes `members` for cell `c`.
    starts: Vec<usize>,
    members: Vec<usize>,
}

impl PointBuckets {
    pub fn build(
        cloud: &PayloadPointCloud,
        pose: &RigidPose,
        k: &CameraIntrinsics,
        cfg: &SplatConfig,
    ) -> Self {
        let projected: Vec<Option<Projected>> = cloud
            .positions()
            .par_iter()
            .map(|p| {
                project(&world_to_camera(p, pose), k).map(|q| Projected {
                    u: q.u,
                    v: q.v,
                    depth: q.depth,
                })
            })
            .collect();

        let r = cfg.radius;
        // cells cover [-r, W + r) x [-r, H + r)
        let cols = ((cfg.palette_w as f64 + 2.0 * r) / r).ceil() as usize + 1;
        let rows = ((cfg.palette_h as f64 + 2.0 * r) / r).ceil() as usize + 1;
        let cell_of = |q: &Projected| -> Option<usize> {
            if !(q.u > -r && q.u < cfg.palette_w as f64 + r && q.v > -r && q.v < cfg.palette_h as f64 + r) {
                return None;
            }
            let cx = (((q.u + r) / r).floor() as usize).min(cols - 1);
            let cy = (((q.v + r) / r).floor() as usize).min(rows - 1);
            Some(cy * cols + cx)
        };

        let mut counts = vec![0usize; cols * rows + 1];
        let cells: Vec<Option<usize>> = projected.iter().map(|q| q.as_ref().and_then(cell_of)).collect();
        for c in cells.iter().flatten() {
            counts[*c + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let starts = counts.clone();
        let mut fill = counts;
        let mut members = vec![0usize; starts[cols * rows]];
        for (i, c) in cells.iter().enumerate() {
            if let Some(c) = c {
                members[fill[*c]] = i;
                fill[*c] += 1;
            }
        }

        PointBuckets {
            projected,
            cell: r,
            cols,
            rows,
            starts,
            members,
        }
    }

    /// Fills `out` with the depth-sorted, truncated contributors of pixel
    /// `(x, y)`.
    pub fn contributors(&self, x: usize, y: usize, cfg: &SplatConfig, out: &mut Vec<Contributor>) {
        out.clear();
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let r = self.cell;
        let to_cell = |c: f64, n: usize| -> usize { (((c + r) / r).floor().max(0.0) as usize).min(n - 1) };
        let (cx0, cx1) = (to_cell(px - r, self.cols), to_cell(px + r, self.cols));
        let (cy0, cy1) = (to_cell(py - r, self.rows), to_cell(py + r, self.rows));
        for cy in cy0..=cy1 {
            for cx in cx0..=cx1 {
                let c = cy * self.cols + cx;
                for &i in &self.members[self.starts[c]..self.starts[c + 1]] {
                    let q = self.projected[i].as_ref().expect("bucketed points are projected");
                    let du = q.u - px;
                    let dv = q.v - py;
                    let mut dist = (du * du + dv * dv).sqrt();
                    if dist >= cfg.radius {
                        continue;
                    }
                    if dist < CENTER_SNAP_PX {
                        dist = 0.0;
                    }
                    out.push(Contributor {
                        index: i,
                        depth: q.depth,
                        dist,
                        du,
                        dv,
                        weight: cfg.weight(dist),
                    });
                }
            }
        }
        out.sort_unstable_by(|a, b| a.depth.total_cmp(&b.depth).then(a.index.cmp(&b.index)));
        out.truncate(cfg.k_nearest);
    }
}

/// Renders `cloud` as seen from `pose` onto a `palette_w x palette_h` grid.
pub fn splat(
    cloud: &PayloadPointCloud,
    pose: &RigidPose,
    k: &CameraIntrinsics,
    cfg: &SplatConfig,
) -> Result<Palette> {
    cfg.validate()?;
    let index = PointBuckets::build(cloud, pose, k, cfg);
    let (w, h, c) = (cfg.palette_w, cfg.palette_h, cloud.channels());

    let mut payload = vec![0.0; w * h * c];
    let mut alpha = vec![0.0; w * h];
    let mut mark_hits: Vec<Vec<u32>> = vec![Vec::new(); w * h];

    payload
        .par_chunks_mut(w * c)
        .zip(alpha.par_chunks_mut(w))
        .zip(mark_hits.par_chunks_mut(w))
        .enumerate()
        .for_each_init(
            || (Vec::new(), vec![0.0; c]),
            |(contribs, acc), (y, ((payload_row, alpha_row), marks_row))| {
                for x in 0..w {
                    index.contributors(x, y, cfg, contribs);
                    if contribs.is_empty() {
                        continue;
                    }
                    acc.iter_mut().for_each(|a| *a = 0.0);
                    let mut trans = 1.0;
                    let marks = &mut marks_row[x];
                    for ct in contribs.iter() {
                        let w_i = ct.weight;
                        for (a, &p) in acc.iter_mut().zip(cloud.payload(ct.index)) {
                            *a += w_i * p * trans;
                        }
                        trans *= 1.0 - w_i;
                        marks.extend_from_slice(cloud.marks(ct.index));
                    }
                    marks.sort_unstable();
                    marks.dedup();
                    let a = 1.0 - trans;
                    alpha_row[x] = a;
                    let denom = a.max(cfg.alpha_eps);
                    for (dst, &v) in payload_row[x * c..(x + 1) * c].iter_mut().zip(acc.iter()) {
                        *dst = v / denom;
                    }
                }
            },
        );

    Ok(Palette {
        payload: Raster::new(w, h, c, payload)?,
        alpha,
        mark_hits,
    })
}
