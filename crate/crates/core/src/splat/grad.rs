//! Reverse-mode derivatives of [`splat`](super::splat).
//!
//! For a pixel with contributors `0..n` in depth order, write
//! `T_i = prod_{j<i} (1 - w_j)`, `S_i = w_i c_i + (1 - w_i) S_{i+1}` and
//! `Q_i = (1 - w_i) Q_{i+1}` with `S_n = 0`, `Q_n = 1`. Then
//!
//! ```text
//! d raw   / d w_i = T_i (c_i - S_{i+1})
//! d alpha / d w_i = T_i Q_{i+1}
//! d raw   / d c_i = w_i T_i
//! ```
//!
//! which stays finite for fully opaque contributors. Weights flow back
//! through the projected center distance, the perspective division and the
//! rigid transform. Depth order is piecewise constant and carries no
//! gradient.

use nalgebra::Vector3;
use rayon::prelude::*;

use super::{Contributor, PointBuckets, SplatConfig};
use crate::camera::{world_to_camera, CameraIntrinsics, RigidPose};
use crate::cloud::PayloadPointCloud;
use crate::error::{Error, Result};
use crate::raster::Raster;

/// Upstream gradient with the shape of a [`Palette`](super::Palette): one
/// value per payload channel plus one for alpha at every pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Cotangent {
    pub payload: Raster,
    pub alpha: Vec<f64>,
}

impl Cotangent {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Cotangent {
            payload: Raster::filled(width, height, channels, 0.0),
            alpha: vec![0.0; width * height],
        }
    }
}

/// Gradients of `<cotangent, splat(cloud)>` with respect to the cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct SplatGradients {
    /// One 3-vector per point, in the cloud's (world) frame.
    pub positions: Vec<Vector3<f64>>,
    /// `len * channels` values laid out like the cloud payloads.
    pub payloads: Vec<f64>,
}

/// Per-contributor gradient produced while scanning one pixel.
struct Partial {
    index: usize,
    d_u: f64,
    d_v: f64,
    /// Offset into the row's payload-gradient buffer.
    payload_at: usize,
}

pub fn splat_gradients(
    cloud: &PayloadPointCloud,
    pose: &RigidPose,
    k: &CameraIntrinsics,
    cfg: &SplatConfig,
    upstream: &Cotangent,
) -> Result<SplatGradients> {
    cfg.validate()?;
    let (w, h, c) = (cfg.palette_w, cfg.palette_h, cloud.channels());
    if upstream.payload.width() != w
        || upstream.payload.height() != h
        || upstream.payload.channels() != c
        || upstream.alpha.len() != w * h
    {
        return Err(Error::mismatch(
            format!("cotangent {w}x{h}x{c}"),
            upstream.payload.shape_string(),
        ));
    }

    let index = PointBuckets::build(cloud, pose, k, cfg);

    let rows: Vec<(Vec<Partial>, Vec<f64>)> = (0..h)
        .into_par_iter()
        .map_init(
            || PixelScratch::new(c),
            |scratch, y| {
                let mut partials = Vec::new();
                let mut payload_grads = Vec::new();
                for x in 0..w {
                    index.contributors(x, y, cfg, &mut scratch.contribs);
                    if scratch.contribs.is_empty() {
                        continue;
                    }
                    scratch.backward(
                        cloud,
                        cfg,
                        upstream.payload.pixel(x, y),
                        upstream.alpha[y * w + x],
                        &mut partials,
                        &mut payload_grads,
                    );
                }
                (partials, payload_grads)
            },
        )
        .collect();

    // Fixed row-major accumulation order keeps the sums deterministic.
    let n = cloud.len();
    let mut d_uv = vec![[0.0f64; 2]; n];
    let mut payloads = vec![0.0; n * c];
    for (partials, payload_grads) in &rows {
        for p in partials {
            d_uv[p.index][0] += p.d_u;
            d_uv[p.index][1] += p.d_v;
            let dst = &mut payloads[p.index * c..(p.index + 1) * c];
            for (d, g) in dst.iter_mut().zip(&payload_grads[p.payload_at..p.payload_at + c]) {
                *d += g;
            }
        }
    }

    let rt = pose.rotation().transpose();
    let positions = cloud
        .positions()
        .iter()
        .zip(&d_uv)
        .map(|(p, &[gu, gv])| {
            if gu == 0.0 && gv == 0.0 {
                return Vector3::zeros();
            }
            let q = world_to_camera(p, pose);
            let inv_z = 1.0 / q.z;
            let a = gu * k.fx() * inv_z;
            let b = gv * k.fy() * inv_z;
            let d_cam = Vector3::new(a, b, -(a * q.x + b * q.y) * inv_z);
            rt * d_cam
        })
        .collect();

    Ok(SplatGradients { positions, payloads })
}

struct PixelScratch {
    contribs: Vec<Contributor>,
    trans: Vec<f64>,
    raw: Vec<f64>,
    suffix: Vec<f64>,
}

impl PixelScratch {
    fn new(channels: usize) -> Self {
        PixelScratch {
            contribs: Vec::new(),
            trans: Vec::new(),
            raw: vec![0.0; channels],
            suffix: vec![0.0; channels],
        }
    }

    fn backward(
        &mut self,
        cloud: &PayloadPointCloud,
        cfg: &SplatConfig,
        g_payload: &[f64],
        g_alpha: f64,
        partials: &mut Vec<Partial>,
        payload_grads: &mut Vec<f64>,
    ) {
        // forward pass, remembering transmittance in front of each contributor
        self.trans.clear();
        self.raw.iter_mut().for_each(|v| *v = 0.0);
        let mut t = 1.0;
        for ct in &self.contribs {
            self.trans.push(t);
            for (r, &p) in self.raw.iter_mut().zip(cloud.payload(ct.index)) {
                *r += ct.weight * p * t;
            }
            t *= 1.0 - ct.weight;
        }
        let alpha = 1.0 - t;
        let (denom, alpha_active) = if alpha >= cfg.alpha_eps {
            (alpha, true)
        } else {
            (cfg.alpha_eps, false)
        };

        // dL/draw and dL/dalpha
        let inv = 1.0 / denom;
        let mut g_alpha_total = g_alpha;
        if alpha_active {
            let dot: f64 = g_payload.iter().zip(&self.raw).map(|(g, r)| g * r).sum();
            g_alpha_total -= dot * inv * inv;
        }

        // back to front
        self.suffix.iter_mut().for_each(|v| *v = 0.0);
        let mut q_behind = 1.0;
        for (i, ct) in self.contribs.iter().enumerate().rev() {
            let t_i = self.trans[i];
            let payload = cloud.payload(ct.index);

            let mut d_w = 0.0;
            for ((g, &p), s) in g_payload.iter().zip(payload).zip(&self.suffix) {
                d_w += g * inv * t_i * (p - s);
            }
            d_w += g_alpha_total * t_i * q_behind;

            let payload_at = payload_grads.len();
            payload_grads.extend(g_payload.iter().map(|g| g * inv * ct.weight * t_i));

            let (d_u, d_v) = if ct.dist > 0.0 {
                let s = d_w * cfg.weight_slope(ct.dist) / ct.dist;
                (s * ct.du, s * ct.dv)
            } else {
                (0.0, 0.0)
            };
            partials.push(Partial {
                index: ct.index,
                d_u,
                d_v,
                payload_at,
            });

            for (s, &p) in self.suffix.iter_mut().zip(payload) {
                *s = ct.weight * p + (1.0 - ct.weight) * *s;
            }
            q_behind *= 1.0 - ct.weight;
        }
    }
}
