//! Pinhole camera model and rigid view changes.
//!
//! Image axes follow the usual y-down convention: `u` grows to the right,
//! `v` grows downwards and the camera looks along `+z`. Pixel coordinates are
//! continuous; the center of pixel column `x` sits at `u = x + 0.5`.

use nalgebra::{Matrix3, Point3, Vector3};

use crate::error::{Error, Result};

/// Points closer to the camera plane than this are culled before projection.
pub const DEPTH_EPSILON: f64 = 1e-6;

const ORTHONORMAL_TOLERANCE: f64 = 1e-9;

pub type Point3D = Point3<f64>;

/// Pixel position plus depth, `(u, v, d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point25D {
    pub u: f64,
    pub v: f64,
    pub d: f64,
}

impl Point25D {
    pub fn new(u: f64, v: f64, d: f64) -> Self {
        Point25D { u, v, d }
    }
}

/// Pinhole intrinsics with zero skew.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(fx.is_finite() && fx > 0.0 && fy.is_finite() && fy > 0.0) {
            return Err(Error::invalid(format!(
                "focal lengths must be positive and finite, got ({fx}, {fy})"
            )));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::invalid("principal point must be finite"));
        }
        Ok(CameraIntrinsics { fx, fy, cx, cy })
    }

    /// Unit focal length with the principal point at the pixel origin.
    pub fn unit() -> Self {
        CameraIntrinsics {
            fx: 1.0,
            fy: 1.0,
            cx: 0.0,
            cy: 0.0,
        }
    }

    /// The unit camera expressed in pixels of a `width x height` frame.
    ///
    /// Normalized device coordinates `[-1, 1]` span the frame, so a unit focal
    /// length and a centered principal point in NDC become `f = size / 2` and
    /// `c = size / 2` in pixels.
    pub fn normalized(width: usize, height: usize) -> Self {
        let (w, h) = (width.max(1) as f64, height.max(1) as f64);
        CameraIntrinsics {
            fx: w / 2.0,
            fy: h / 2.0,
            cx: w / 2.0,
            cy: h / 2.0,
        }
    }

    pub fn fx(&self) -> f64 {
        self.fx
    }

    pub fn fy(&self) -> f64 {
        self.fy
    }

    pub fn cx(&self) -> f64 {
        self.cx
    }

    pub fn cy(&self) -> f64 {
        self.cy
    }

    pub fn skew(&self) -> f64 {
        0.0
    }
}

/// Rotation and translation taking world points into a camera frame as
/// `R * (P - T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if rotation.iter().chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("pose contains non-finite values"));
        }
        let gram = rotation * rotation.transpose();
        let off = (gram - Matrix3::identity()).amax();
        if off > ORTHONORMAL_TOLERANCE {
            return Err(Error::invalid(format!(
                "rotation is not orthonormal (max deviation {off:e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ORTHONORMAL_TOLERANCE {
            return Err(Error::invalid(format!("rotation determinant is {det}")));
        }
        Ok(RigidPose {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        RigidPose {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a pose from an axis-angle rotation vector and a translation.
    pub fn from_vectors(rvec: [f64; 3], translation: [f64; 3]) -> Result<Self> {
        let rotation = rotation_from_vector(rvec)?;
        RigidPose::new(rotation, Vector3::from(translation))
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Maps a camera-frame point back to world coordinates, `R^T * P + T`.
    pub fn camera_to_world(&self, p: &Point3D) -> Point3D {
        Point3D::from(self.rotation.transpose() * p.coords + self.translation)
    }
}

/// Converts an axis-angle vector (radians) into a rotation matrix with
/// Rodrigues' formula.
pub fn rotation_from_vector(rvec: [f64; 3]) -> Result<Matrix3<f64>> {
    if rvec.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "rotation vector must be finite, got {rvec:?}"
        )));
    }
    let [x, y, z] = rvec;
    let theta_sq = x * x + y * y + z * z;
    let theta = theta_sq.sqrt();

    // R = I + a K + b K^2 with K the cross-product matrix of the unnormalized
    // vector, a = sin(t)/t and b = (1 - cos(t))/t^2.
    let (a, b) = if theta < 1e-4 {
        (
            1.0 - theta_sq / 6.0 + theta_sq * theta_sq / 120.0,
            0.5 - theta_sq / 24.0 + theta_sq * theta_sq / 720.0,
        )
    } else {
        let half = (theta / 2.0).sin();
        (theta.sin() / theta, 2.0 * half * half / theta_sq)
    };

    let k = Matrix3::new(0.0, -z, y, z, 0.0, -x, -y, x, 0.0);
    Ok(Matrix3::identity() + k * a + k * k * b)
}

/// Lifts a pixel with depth into the camera frame.
pub fn unproject(p: Point25D, k: &CameraIntrinsics) -> Result<Point3D> {
    if !(p.d.is_finite() && p.d > 0.0) {
        return Err(Error::NonPositiveDepth {
            u: p.u,
            v: p.v,
            depth: p.d,
        });
    }
    Ok(Point3D::new(
        p.d * (p.u - k.cx) / k.fx,
        p.d * (p.v - k.cy) / k.fy,
        p.d,
    ))
}

/// Moves a world point into the camera frame of `pose`.
#[inline]
pub fn world_to_camera(p: &Point3D, pose: &RigidPose) -> Point3D {
    Point3D::from(pose.rotation * (p.coords - pose.translation))
}

/// Pixel position of a projected point, with its camera depth kept for
/// z-ordering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

/// Projects a camera-frame point to pixel coordinates.
///
/// Returns `None` when the point is not in front of the camera by at least
/// [`DEPTH_EPSILON`]; callers cull such points.
#[inline]
pub fn project(p: &Point3D, k: &CameraIntrinsics) -> Option<Projection> {
    if p.z.is_nan() || p.z <= DEPTH_EPSILON {
        return None;
    }
    Some(Projection {
        u: k.fx * p.x / p.z + k.cx,
        v: k.fy * p.y / p.z + k.cy,
        depth: p.z,
    })
}
