//! Independent reference implementations and fixture builders shared by the
//! integration tests. Nothing here calls into the code paths it checks: the
//! rasterizer loops over every point for every pixel, box transfer warps
//! every source pixel, and rotations come from nalgebra or a matrix series.

#![allow(
    dead_code,
    clippy::too_many_arguments,
    clippy::type_complexity,
    clippy::needless_range_loop
)]

use std::path::Path;

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde_json::json;

use viewaug::camera::DEPTH_EPSILON;
use viewaug::splat::CENTER_SNAP_PX;
use viewaug::{BoundingBox, CameraIntrinsics, PayloadPointCloud, Raster, RigidPose, SplatConfig};

// ---------------------------------------------------------------- rotations

/// Rotation matrix from nalgebra's own axis-angle constructor.
pub fn rodrigues_nalgebra(rvec: [f64; 3]) -> Matrix3<f64> {
    Rotation3::from_scaled_axis(Vector3::from(rvec)).into_inner()
}

/// `exp([r]_x)` by its power series, summed until terms vanish.
pub fn rodrigues_series(rvec: [f64; 3]) -> Matrix3<f64> {
    let [x, y, z] = rvec;
    let k = Matrix3::new(0.0, -z, y, z, 0.0, -x, -y, x, 0.0);
    let mut sum = Matrix3::identity();
    let mut term = Matrix3::identity();
    for n in 1..60 {
        term = term * k / n as f64;
        sum += term;
        if term.amax() < 1e-18 {
            break;
        }
    }
    sum
}

// ------------------------------------------------------------- rasterizer

pub struct NaivePalette {
    pub payload: Vec<f64>,
    pub alpha: Vec<f64>,
}

/// Per-pixel brute-force splatting: every pixel scans every point.
pub fn naive_splat(
    cloud: &PayloadPointCloud,
    pose: &RigidPose,
    k: &CameraIntrinsics,
    cfg: &SplatConfig,
) -> NaivePalette {
    let (w, h, c) = (cfg.palette_w, cfg.palette_h, cloud.channels());
    let mut payload = vec![0.0; w * h * c];
    let mut alpha = vec![0.0; w * h];

    let projected: Vec<Option<(f64, f64, f64)>> = cloud
        .positions()
        .iter()
        .map(|p| {
            let q = pose.rotation() * (p.coords - pose.translation());
            if q.z > DEPTH_EPSILON {
                Some((k.fx() * q.x / q.z + k.cx(), k.fy() * q.y / q.z + k.cy(), q.z))
            } else {
                None
            }
        })
        .collect();

    for y in 0..h {
        for x in 0..w {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let mut hits: Vec<(f64, usize, f64)> = Vec::new();
            for (i, q) in projected.iter().enumerate() {
                let Some((u, v, z)) = *q else { continue };
                let (du, dv) = (u - px, v - py);
                let mut d = (du * du + dv * dv).sqrt();
                if d >= cfg.radius {
                    continue;
                }
                if d < CENTER_SNAP_PX {
                    d = 0.0;
                }
                let base: f64 = 1.0 - d / cfg.radius;
                let wt = if cfg.falloff_exponent == 1.0 {
                    base
                } else {
                    base.powf(cfg.falloff_exponent)
                };
                hits.push((z, i, wt));
            }
            if hits.is_empty() {
                continue;
            }
            // insertion sort on (depth, index)
            for a in 1..hits.len() {
                let mut b = a;
                while b > 0 && (hits[b - 1].0, hits[b - 1].1) > (hits[b].0, hits[b].1) {
                    hits.swap(b - 1, b);
                    b -= 1;
                }
            }
            hits.truncate(cfg.k_nearest);

            let mut acc = vec![0.0; c];
            let mut trans = 1.0;
            for &(_, i, wt) in &hits {
                for ch in 0..c {
                    acc[ch] += wt * cloud.payload(i)[ch] * trans;
                }
                trans *= 1.0 - wt;
            }
            let a = 1.0 - trans;
            alpha[y * w + x] = a;
            let denom = if a > cfg.alpha_eps { a } else { cfg.alpha_eps };
            for ch in 0..c {
                payload[(y * w + x) * c + ch] = acc[ch] / denom;
            }
        }
    }
    NaivePalette { payload, alpha }
}

// -------------------------------------------------------- box transfer

/// Outcome of warping every pixel of a box.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleBox {
    Kept([f64; 4]),
    Dropped(&'static str),
}

/// Warps every source pixel whose center lies in `b` through a constant
/// depth scene and returns the clipped hull, or the reason it is dropped.
pub fn warp_box_oracle(
    b: &BoundingBox,
    src_w: usize,
    src_h: usize,
    depth: f64,
    pose: &RigidPose,
    dst_w: usize,
    dst_h: usize,
    min_visibility: f64,
    min_area: f64,
) -> OracleBox {
    let (sfx, sfy, scx, scy) = (
        src_w as f64 / 2.0,
        src_h as f64 / 2.0,
        src_w as f64 / 2.0,
        src_h as f64 / 2.0,
    );
    let (tfx, tfy, tcx, tcy) = (
        dst_w as f64 / 2.0,
        dst_h as f64 / 2.0,
        dst_w as f64 / 2.0,
        dst_h as f64 / 2.0,
    );
    let r = pose.rotation();
    let t = pose.translation();

    let mut total = 0usize;
    let mut in_frame = 0usize;
    let mut hull: Option<[f64; 4]> = None;
    for y in 0..src_h {
        for x in 0..src_w {
            let (u, v) = (x as f64 + 0.5, y as f64 + 0.5);
            if !(u >= b.x_min && u <= b.x_max && v >= b.y_min && v <= b.y_max) {
                continue;
            }
            total += 1;
            let world = Vector3::new(depth * (u - scx) / sfx, depth * (v - scy) / sfy, depth);
            let cam = r * (world - t);
            if cam.z.is_nan() || cam.z <= DEPTH_EPSILON {
                continue;
            }
            let (pu, pv) = (tfx * cam.x / cam.z + tcx, tfy * cam.y / cam.z + tcy);
            if pu >= 0.0 && pu <= dst_w as f64 && pv >= 0.0 && pv <= dst_h as f64 {
                in_frame += 1;
            }
            hull = Some(match hull {
                None => [pu, pv, pu, pv],
                Some([a, b2, c, d]) => [a.min(pu), b2.min(pv), c.max(pu), d.max(pv)],
            });
        }
    }
    let Some([x0, y0, x1, y1]) = hull else {
        return OracleBox::Dropped("all-points-culled");
    };
    let (x0, y0, x1, y1) = (
        x0.max(0.0),
        y0.max(0.0),
        x1.min(dst_w as f64),
        y1.min(dst_h as f64),
    );
    if x0 > x1 || y0 > y1 {
        return OracleBox::Dropped("fully-out-of-frame");
    }
    if (in_frame as f64 / total as f64) < min_visibility {
        return OracleBox::Dropped("below-visibility");
    }
    if (x1 - x0) * (y1 - y0) < min_area {
        return OracleBox::Dropped("below-min-area");
    }
    OracleBox::Kept([x0, y0, x1, y1])
}

// ------------------------------------------------------- feature distance

/// Plain index-arithmetic loop over layers, rows, columns and channels.
pub fn naive_perceptual(layers: &[(usize, usize, usize, Vec<f64>, Vec<f64>, Vec<f64>)]) -> f64 {
    let mut total = 0.0;
    for (h, w, c, a, b, weights) in layers {
        let mut s = 0.0;
        for y in 0..*h {
            for x in 0..*w {
                for ch in 0..*c {
                    let i = (y * w + x) * c + ch;
                    let d = weights[ch] * (a[i] - b[i]);
                    s += d * d;
                }
            }
        }
        total += s / (*h * *w) as f64;
    }
    total
}

// --------------------------------------------------------------- IoU scan

fn iou(a: [f64; 4], b: [f64; 4]) -> f64 {
    let iw = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let ih = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = iw * ih;
    let area = |r: [f64; 4]| (r[2] - r[0]) * (r[3] - r[1]);
    inter / (area(a) + area(b) - inter)
}

/// Largest radius (scanned in `step` increments) such that a box whose
/// corners move by that radius, translated, shrunk or grown, keeps IoU >= t.
pub fn radius_by_iou_scan(w: f64, h: f64, t: f64, step: f64) -> f64 {
    let gt = [0.0, 0.0, w, h];
    let ok = |r: f64| {
        let translated = [r, r, w + r, h + r];
        let shrunk = [r, r, w - r, h - r];
        let grown = [-r, -r, w + r, h + r];
        let shrunk_ok = 2.0 * r < w.min(h) && iou(gt, shrunk) >= t;
        iou(gt, translated) >= t && shrunk_ok && iou(gt, grown) >= t
    };
    let mut r = 0.0;
    while ok(r + step) {
        r += step;
    }
    r
}

// --------------------------------------------------------------- fixtures

/// Deterministic RGB test card: smooth gradients, a checker and a few
/// solid blocks, varied by `seed`.
pub fn test_card(width: usize, height: usize, seed: u64) -> Raster {
    let s = seed as usize;
    let mut data = Vec::with_capacity(width * height * 3);
    for y in 0..height {
        for x in 0..width {
            let checker = ((x / 8 + y / 8 + s) % 2) as f64;
            let r = ((x * 255) / width.max(1) + s * 37) % 256;
            let g = ((y * 255) / height.max(1) + s * 71) % 256;
            let b = (checker * 200.0) as usize + ((x ^ y) + s) % 56;
            let block = (x / 16 + 3 * (y / 16) + s).is_multiple_of(7);
            if block {
                data.extend_from_slice(&[250.0, 30.0, ((s * 29) % 256) as f64]);
            } else {
                data.extend_from_slice(&[r as f64, g as f64, b as f64]);
            }
        }
    }
    Raster::new(width, height, 3, data).unwrap()
}

/// Writes `count` test cards plus a COCO annotation file into `dir`
/// (`dir/images/*.png`, `dir/annotations.json`) and returns the paths.
pub fn write_fixture(
    dir: &Path,
    count: usize,
    width: usize,
    height: usize,
) -> (std::path::PathBuf, std::path::PathBuf) {
    let images_dir = dir.join("images");
    std::fs::create_dir_all(&images_dir).unwrap();
    let mut images = Vec::new();
    let mut annotations = Vec::new();
    let mut ann_id = 100u64;
    for i in 0..count {
        let id = i as u64 + 1;
        let name = format!("card_{id:02}.png");
        test_card(width, height, id)
            .save_png(images_dir.join(&name))
            .unwrap();
        images.push(json!({"id": id, "file_name": name, "width": width, "height": height, "license": 1}));
        let (w, h) = (width as f64, height as f64);
        let boxes = [
            [w * 0.30, h * 0.30, w * 0.35, h * 0.30, 1.0],
            [w * 0.05 + i as f64, h * 0.10, w * 0.20, h * 0.15, 2.0],
            [w * 0.70, h * 0.65, w * 0.28, h * 0.30, 1.0],
            [w * 0.90, h * 0.02, 1.5, 2.0, 2.0],
        ];
        for b in boxes {
            annotations.push(json!({
                "id": ann_id,
                "image_id": id,
                "category_id": b[4] as u32,
                "bbox": [b[0], b[1], b[2], b[3]],
                "area": b[2] * b[3],
                "iscrowd": 0,
                "segmentation": [],
            }));
            ann_id += 1;
        }
    }
    let coco = json!({
        "info": {"description": "synthetic cards"},
        "licenses": [{"id": 1, "name": "test"}],
        "images": images,
        "annotations": annotations,
        "categories": [{"id": 1, "name": "block"}, {"id": 2, "name": "strip", "supercategory": "shape"}],
    });
    let ann = dir.join("annotations.json");
    std::fs::write(&ann, serde_json::to_vec_pretty(&coco).unwrap()).unwrap();
    (ann, images_dir)
}

/// Recursively lists `(relative path, bytes)` under `root`, sorted.
pub fn read_tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(base, &path, out);
            } else {
                let rel = path.strip_prefix(base).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}

/// Seeded generator for the randomized loops.
pub fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

// ------------------------------------------------------- gradient check

use rand::Rng;
use viewaug::{splat, splat_gradients, Cotangent, Point3D};

/// A random scene for gradient checks: points a few units in front of a
/// slightly rotated camera with a 16 px focal length-equivalent palette.
pub struct GradScene {
    pub cloud: PayloadPointCloud,
    pub pose: RigidPose,
    pub k: CameraIntrinsics,
    pub cfg: SplatConfig,
    pub upstream: Cotangent,
}

pub fn random_grad_scene(rng: &mut impl Rng, exponents: &[f64]) -> GradScene {
    let (w, h) = (rng.gen_range(8..=16), rng.gen_range(8..=16));
    let k = CameraIntrinsics::normalized(w, h);
    let cfg = SplatConfig {
        k_nearest: rng.gen_range(1..=8),
        radius: rng.gen_range(1.0..4.0),
        palette_w: w,
        palette_h: h,
        falloff_exponent: exponents[rng.gen_range(0..exponents.len())],
        alpha_eps: 1e-4,
    };
    let pose = RigidPose::from_vectors(
        [
            rng.gen_range(-0.1..0.1),
            rng.gen_range(-0.1..0.1),
            rng.gen_range(-0.1..0.1),
        ],
        [
            rng.gen_range(-0.2..0.2),
            rng.gen_range(-0.2..0.2),
            rng.gen_range(-0.2..0.2),
        ],
    )
    .unwrap();
    let n = rng.gen_range(4..=40);
    let channels = rng.gen_range(1..=3);
    let mut positions = Vec::with_capacity(n);
    let mut payloads = Vec::with_capacity(n * channels);
    for _ in 0..n {
        // sample in the target camera, then map to world
        let z: f64 = rng.gen_range(4.0..8.0);
        let u: f64 = rng.gen_range(-1.0..w as f64 + 1.0);
        let v: f64 = rng.gen_range(-1.0..h as f64 + 1.0);
        let cam = Point3D::new(z * (u - k.cx()) / k.fx(), z * (v - k.cy()) / k.fy(), z);
        positions.push(pose.camera_to_world(&cam));
        for _ in 0..channels {
            payloads.push(rng.gen_range(0.0..1.0));
        }
    }
    let cloud = PayloadPointCloud::from_parts(positions, payloads, channels).unwrap();
    let mut upstream = Cotangent::zeros(w, h, channels);
    for g in upstream.payload.data_mut() {
        *g = rng.gen_range(-1.0..1.0);
    }
    for g in &mut upstream.alpha {
        *g = rng.gen_range(-1.0..1.0);
    }
    GradScene {
        cloud,
        pose,
        k,
        cfg,
        upstream,
    }
}

fn loss(scene: &GradScene, cloud: &PayloadPointCloud) -> f64 {
    let pal = splat(cloud, &scene.pose, &scene.k, &scene.cfg).unwrap();
    let a: f64 = pal
        .payload
        .data()
        .iter()
        .zip(scene.upstream.payload.data())
        .map(|(p, g)| p * g)
        .sum();
    let b: f64 = pal
        .alpha
        .iter()
        .zip(&scene.upstream.alpha)
        .map(|(p, g)| p * g)
        .sum();
    a + b
}

/// Points whose finite-difference stencil could cross a non-smooth point of
/// the renderer: a kernel boundary, a pixel center (the cone apex), a depth
/// tie with a neighbor, or a covered pixel whose alpha sits at the
/// normalization floor `max(alpha, alpha_eps)`.
fn near_kink(scene: &GradScene, alpha: &[f64], i: usize, margin: f64) -> bool {
    let project = |p: &Point3D| {
        let q = scene.pose.rotation() * (p.coords - scene.pose.translation());
        (
            scene.k.fx() * q.x / q.z + scene.k.cx(),
            scene.k.fy() * q.y / q.z + scene.k.cy(),
            q.z,
        )
    };
    let pos = scene.cloud.positions();
    let (u, v, z) = project(&pos[i]);
    let r = scene.cfg.radius;
    for y in 0..scene.cfg.palette_h {
        for x in 0..scene.cfg.palette_w {
            let d = ((u - x as f64 - 0.5).powi(2) + (v - y as f64 - 0.5).powi(2)).sqrt();
            if (d - r).abs() < margin || d < margin {
                return true;
            }
            let a = alpha[y * scene.cfg.palette_w + x];
            let eps = scene.cfg.alpha_eps;
            if d < r && a > 0.5 * eps && a < 2.0 * eps {
                return true;
            }
        }
    }
    pos.iter().enumerate().any(|(j, p)| {
        if j == i {
            return false;
        }
        let (uj, vj, zj) = project(p);
        let close = ((u - uj).powi(2) + (v - vj).powi(2)).sqrt() < 2.0 * r + margin;
        close && (z - zj).abs() < margin
    })
}

pub struct GradReport {
    /// Point with the largest relative error and its analytic and numeric
    /// position gradients.
    pub worst: Option<(usize, [f64; 3], [f64; 3])>,
    /// Number of gradient vectors compared (position and payload per point).
    pub compared: usize,
    pub excluded_points: usize,
    pub max_rel: f64,
}

/// `|a - n| / max(|a|, |n|, floor)` over whole vectors.
fn relative_error(a: &[f64], n: &[f64], floor: f64) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(n).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(n)).max(floor)
}

/// Compares analytic gradients against central differences with step `h`,
/// one position 3-vector and one payload vector per point.
pub fn check_gradients(scene: &GradScene, h: f64, margin: f64, floor: f64) -> GradReport {
    let grads = splat_gradients(&scene.cloud, &scene.pose, &scene.k, &scene.cfg, &scene.upstream).unwrap();
    let alpha = splat(&scene.cloud, &scene.pose, &scene.k, &scene.cfg)
        .unwrap()
        .alpha;
    let c = scene.cloud.channels();
    let mut report = GradReport {
        worst: None,
        compared: 0,
        excluded_points: 0,
        max_rel: 0.0,
    };
    let central = |edit: &dyn Fn(&mut PayloadPointCloud, f64)| {
        let mut plus = scene.cloud.clone();
        edit(&mut plus, h);
        let mut minus = scene.cloud.clone();
        edit(&mut minus, -h);
        (loss(scene, &plus) - loss(scene, &minus)) / (2.0 * h)
    };

    for i in 0..scene.cloud.len() {
        if near_kink(scene, &alpha, i, margin) {
            report.excluded_points += 1;
            continue;
        }
        let mut numeric = [0.0; 3];
        for (axis, n) in numeric.iter_mut().enumerate() {
            *n = central(&|cl, step| cl.positions_mut()[i].coords[axis] += step);
        }
        let analytic = [grads.positions[i].x, grads.positions[i].y, grads.positions[i].z];
        let e = relative_error(&analytic, &numeric, floor);
        if e > report.max_rel {
            report.max_rel = e;
            report.worst = Some((i, analytic, numeric));
        }

        let numeric: Vec<f64> = (0..c)
            .map(|ch| central(&|cl, step| cl.payloads_mut()[i * c + ch] += step))
            .collect();
        report.max_rel = report.max_rel.max(relative_error(
            &grads.payloads[i * c..(i + 1) * c],
            &numeric,
            floor,
        ));
        report.compared += 2;
    }
    report
}
