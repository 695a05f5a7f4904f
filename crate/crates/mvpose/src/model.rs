//! Object-frame keypoint definitions and surface geometry.

use crate::error::{Error, Result};
use crate::geometry::{Point3, RigidTransform, COLLINEARITY_RATIO};
use nalgebra::{Matrix3, Vector3};

/// Minimum number of surface samples a model must carry. ICP correspondence
/// and ADD both average over these points.
pub const MIN_SURFACE_POINTS: usize = 500;

/// Tolerance for the declared-vs-recomputed diameter check (meters).
pub const DIAMETER_TOLERANCE: f64 = 1e-6;

/// An object model: origin keypoints in the object frame (index 0 is the
/// center keypoint), a sampled surface cloud, and the object diameter.
#[derive(Debug, Clone)]
pub struct KeypointModel {
    pub object_id: String,
    pub origin_keypoints: Vec<Point3>,
    pub surface_points: Vec<Point3>,
    pub diameter: f64,
}

impl KeypointModel {
    /// Validate and build a model. When `declared_diameter` is given it must
    /// match the recomputed max pairwise surface distance within
    /// `DIAMETER_TOLERANCE`.
    pub fn new(
        object_id: impl Into<String>,
        origin_keypoints: Vec<Point3>,
        surface_points: Vec<Point3>,
        declared_diameter: Option<f64>,
    ) -> Result<Self> {
        if origin_keypoints.len() < 3 {
            return Err(Error::ValidationFailure(format!(
                "model needs at least 3 keypoints, got {}",
                origin_keypoints.len()
            )));
        }
        if keypoints_collinear(&origin_keypoints) {
            return Err(Error::ValidationFailure(
                "origin keypoints are collinear".into(),
            ));
        }
        if surface_points.len() < MIN_SURFACE_POINTS {
            return Err(Error::ValidationFailure(format!(
                "model needs at least {} surface points, got {}",
                MIN_SURFACE_POINTS,
                surface_points.len()
            )));
        }
        let diameter = max_pairwise_distance(&surface_points);
        if !(diameter > 0.0) {
            return Err(Error::ValidationFailure(
                "surface diameter must be positive".into(),
            ));
        }
        if let Some(declared) = declared_diameter {
            if (declared - diameter).abs() > DIAMETER_TOLERANCE {
                return Err(Error::ValidationFailure(format!(
                    "declared diameter {declared} does not match computed {diameter}"
                )));
            }
        }
        let centroid = surface_centroid(&surface_points);
        let center_offset = (origin_keypoints[0] - centroid).norm();
        if center_offset > 0.10 * diameter {
            return Err(Error::ValidationFailure(format!(
                "center keypoint is {center_offset} m from the surface centroid, \
                 beyond 10% of the diameter ({diameter} m)"
            )));
        }
        Ok(Self {
            object_id: object_id.into(),
            origin_keypoints,
            surface_points,
            diameter,
        })
    }

    pub fn keypoint_count(&self) -> usize {
        self.origin_keypoints.len()
    }

    /// Keypoint positions under a pose: element k is `R * o_k + t`.
    pub fn keypoints_in_world(&self, pose: &RigidTransform) -> Vec<Point3> {
        self.origin_keypoints.iter().map(|o| pose.apply(o)).collect()
    }
}

fn keypoints_collinear(points: &[Point3]) -> bool {
    let n = points.len() as f64;
    let mut centroid = Vector3::zeros();
    for p in points {
        centroid += p.coords;
    }
    centroid /= n;
    let mut scatter = Matrix3::zeros();
    for p in points {
        let d = p.coords - centroid;
        scatter += d * d.transpose();
    }
    let mut sv: Vec<f64> = scatter
        .symmetric_eigenvalues()
        .iter()
        .map(|e| e.max(0.0).sqrt())
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv[0] <= 0.0 || sv[1] <= COLLINEARITY_RATIO * sv[0]
}

pub fn surface_centroid(points: &[Point3]) -> Point3 {
    let mut sum = Vector3::zeros();
    for p in points {
        sum += p.coords;
    }
    Point3::from(sum / points.len() as f64)
}

/// Max pairwise distance over a point cloud (the ADD "object diameter").
pub fn max_pairwise_distance(points: &[Point3]) -> f64 {
    let mut best: f64 = 0.0;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d2 = (a - b).norm_squared();
            if d2 > best {
                best = d2;
            }
        }
    }
    best.sqrt()
}
