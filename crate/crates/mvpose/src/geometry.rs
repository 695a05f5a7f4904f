//! Rigid transforms, pinhole projection, and SVD-based rigid alignment.
//!
//! Everything here is a pure function over immutable values; all distances
//! are meters and all pixel coordinates refer to pixel centers.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;
pub type Point2 = nalgebra::Point2<f64>;

/// Points closer to the camera plane than this are treated as unprojectable.
pub const DEPTH_EPSILON: f64 = 1e-9;

/// Relative singular-value ratio below which a point set counts as collinear.
pub const COLLINEARITY_RATIO: f64 = 1e-9;

/// An SE(3) pose: `p_world = rotation * p_local + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Build from a unit quaternion (w, x, y, z) and a translation.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64, translation: Vector3<f64>) -> Self {
        let q = UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z));
        Self {
            rotation: q.to_rotation_matrix().into_inner(),
            translation,
        }
    }

    /// Rotation of `angle` radians about the given axis, no translation.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let q = UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(*axis), angle);
        Self {
            rotation: q.to_rotation_matrix().into_inner(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Row-major 4x4 homogeneous matrix.
    pub fn to_matrix_row_major(&self) -> [f64; 16] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t[0],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t[1],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t[2],
            0.0,
            0.0,
            0.0,
            1.0,
        ]
    }

    /// Parse a row-major 4x4 homogeneous matrix, validating the rotation block.
    pub fn from_matrix_row_major(m: &[f64; 16]) -> Result<Self> {
        if m[12] != 0.0 || m[13] != 0.0 || m[14] != 0.0 || m[15] != 1.0 {
            return Err(Error::ValidationFailure(
                "bottom row of a rigid transform must be (0, 0, 0, 1)".into(),
            ));
        }
        let rotation = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        let translation = Vector3::new(m[3], m[7], m[11]);
        let t = Self {
            rotation,
            translation,
        };
        if !t.is_valid_rotation(1e-6) {
            return Err(Error::ValidationFailure(
                "rotation block is not orthonormal with determinant +1".into(),
            ));
        }
        Ok(t)
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn invert(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Check orthonormality and determinant +1 within `tol`.
    pub fn is_valid_rotation(&self, tol: f64) -> bool {
        let gram = self.rotation.transpose() * self.rotation;
        let mut max_dev: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                max_dev = max_dev.max((gram[(i, j)] - target).abs());
            }
        }
        max_dev <= tol && (self.rotation.determinant() - 1.0).abs() <= tol
    }

    /// Nearest rotation (polar decomposition via SVD), determinant forced to +1.
    pub fn orthonormalized(&self) -> Self {
        let svd = self.rotation.svd(true, true);
        let u = svd.u.expect("svd with u");
        let v_t = svd.v_t.expect("svd with v_t");
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            let mut u = u;
            u.column_mut(2).scale_mut(-1.0);
            r = u * v_t;
        }
        Self {
            rotation: r,
            translation: self.translation,
        }
    }

    /// Rotation angle (radians) between `self` and `other`.
    pub fn rotation_angle_to(&self, other: &Self) -> f64 {
        let rel = self.rotation * other.rotation.transpose();
        let c = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        c.acos()
    }

    pub fn translation_distance_to(&self, other: &Self) -> f64 {
        (self.translation - other.translation).norm()
    }
}

/// Applying the result equals applying `b`, then `a`.
pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    RigidTransform {
        rotation: a.rotation * b.rotation,
        translation: a.rotation * b.translation + a.translation,
    }
}

/// One calibrated viewpoint: intrinsics, extrinsics, and the crop geometry of
/// the image patch the heatmaps live in. Patch coordinates are full-image
/// coordinates minus `patch_origin`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraView {
    pub view_id: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub world_to_camera: RigidTransform,
    pub patch_origin: (f64, f64),
    pub patch_size: (u32, u32),
}

impl CameraView {
    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::ValidationFailure(format!(
                "focal lengths must be positive, got fx = {}, fy = {}",
                self.fx, self.fy
            )));
        }
        if self.patch_size.0 == 0 || self.patch_size.1 == 0 {
            return Err(Error::ValidationFailure(
                "patch dimensions must be positive".into(),
            ));
        }
        if !self.world_to_camera.is_valid_rotation(1e-6) {
            return Err(Error::ValidationFailure(format!(
                "view {} extrinsics are not a rigid transform",
                self.view_id
            )));
        }
        Ok(())
    }
}

/// Project a world point into patch pixel coordinates, returning the
/// camera-frame depth as well. The pixel may fall outside the patch; the
/// caller decides what out-of-patch means.
pub fn project(view: &CameraView, p: &Point3) -> Result<(Point2, f64)> {
    let pc = view.world_to_camera.apply(p);
    if pc.z <= DEPTH_EPSILON {
        return Err(Error::NonPositiveDepth { z: pc.z });
    }
    let u = view.fx * pc.x / pc.z + view.cx - view.patch_origin.0;
    let v = view.fy * pc.y / pc.z + view.cy - view.patch_origin.1;
    Ok((Point2::new(u, v), pc.z))
}

/// Invert the projection of a patch pixel at a known camera-frame depth,
/// returning a world point.
pub fn backproject_pixel(view: &CameraView, pixel: &Point2, depth: f64) -> Point3 {
    let u_full = pixel.x + view.patch_origin.0;
    let v_full = pixel.y + view.patch_origin.1;
    let x = (u_full - view.cx) * depth / view.fx;
    let y = (v_full - view.cy) * depth / view.fy;
    view.world_to_camera
        .invert()
        .apply(&Point3::new(x, y, depth))
}

/// Least-squares rigid transform mapping `source` onto `target`
/// (orthogonal Procrustes with determinant correction, no scale).
///
/// Rejects collinear or duplicated source points so a RANSAC caller can
/// redraw its sample.
pub fn rigid_align(source: &[Point3], target: &[Point3]) -> Result<RigidTransform> {
    if source.len() != target.len() {
        return Err(Error::DegenerateConfiguration(format!(
            "point lists differ in length: {} vs {}",
            source.len(),
            target.len()
        )));
    }
    if source.len() < 3 {
        return Err(Error::DegenerateConfiguration(format!(
            "need at least 3 correspondences, got {}",
            source.len()
        )));
    }
    let n = source.len() as f64;
    let mut centroid_s = Vector3::zeros();
    let mut centroid_t = Vector3::zeros();
    for (s, t) in source.iter().zip(target) {
        centroid_s += s.coords;
        centroid_t += t.coords;
    }
    centroid_s /= n;
    centroid_t /= n;

    // Collinearity test on the centered source: the second-largest singular
    // value vanishes exactly when the points span at most a line.
    let mut scatter = Matrix3::zeros();
    for s in source {
        let d = s.coords - centroid_s;
        scatter += d * d.transpose();
    }
    let mut eigs: Vec<f64> = scatter
        .symmetric_eigenvalues()
        .iter()
        .map(|e| e.max(0.0).sqrt())
        .collect();
    eigs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if eigs[0] <= 0.0 || eigs[1] <= COLLINEARITY_RATIO * eigs[0] {
        return Err(Error::DegenerateConfiguration(
            "source points are collinear or duplicated".into(),
        ));
    }

    // Cross-covariance H = sum source_c * target_c^T; R = V D U^T.
    let mut h = Matrix3::zeros();
    for (s, t) in source.iter().zip(target) {
        let sc = s.coords - centroid_s;
        let tc = t.coords - centroid_t;
        h += sc * tc.transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("svd with u");
    let v = svd.v_t.expect("svd with v_t").transpose();
    let d = (v * u.transpose()).determinant();
    let correction = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d.signum()));
    let rotation = v * correction * u.transpose();
    let translation = centroid_t - rotation * centroid_s;
    Ok(RigidTransform {
        rotation,
        translation,
    })
}
