//! Built-in object shapes for the synthetic scene generator.
//!
//! Each shape is a union of analytic solids. The solids drive exact
//! ray-cast depth rendering; their sampled surfaces feed the keypoint model
//! used by ICP and ADD. Keypoints follow the farthest-point convention: the
//! surface centroid as keypoint 0 plus farthest-point samples on the surface.

use nalgebra::Vector3;

use crate::geometry::Point3;
use crate::model::{surface_centroid, KeypointModel};

/// Default surface sampling spacing (meters).
pub const SAMPLE_SPACING: f64 = 0.002;

/// Number of keypoints per built-in model.
pub const KEYPOINT_COUNT: usize = 10;

/// An axis-aligned solid in the object frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    Box {
        center: Vector3<f64>,
        half_extents: Vector3<f64>,
    },
    /// Capped cylinder with its axis along +z.
    Cylinder {
        center: Vector3<f64>,
        radius: f64,
        half_height: f64,
    },
}

impl Primitive {
    /// Signed distance to the solid's boundary (negative inside).
    pub fn signed_distance(&self, p: &Point3) -> f64 {
        match self {
            Primitive::Box {
                center,
                half_extents,
            } => {
                let q = Vector3::new(
                    (p.x - center.x).abs() - half_extents.x,
                    (p.y - center.y).abs() - half_extents.y,
                    (p.z - center.z).abs() - half_extents.z,
                );
                let outside = Vector3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0)).norm();
                let inside = q.x.max(q.y).max(q.z).min(0.0);
                outside + inside
            }
            Primitive::Cylinder {
                center,
                radius,
                half_height,
            } => {
                let radial =
                    ((p.x - center.x).powi(2) + (p.y - center.y).powi(2)).sqrt() - radius;
                let axial = (p.z - center.z).abs() - half_height;
                let outside = (radial.max(0.0).powi(2) + axial.max(0.0).powi(2)).sqrt();
                let inside = radial.max(axial).min(0.0);
                outside + inside
            }
        }
    }

    /// Parameter span `(t_enter, t_exit)` where the ray
    /// `p(t) = origin + t * dir` is inside the solid, if it crosses it.
    /// `dir` need not be unit length.
    pub fn ray_span(&self, origin: &Point3, dir: &Vector3<f64>) -> Option<(f64, f64)> {
        match self {
            Primitive::Box {
                center,
                half_extents,
            } => {
                let mut t_near = f64::NEG_INFINITY;
                let mut t_far = f64::INFINITY;
                for axis in 0..3 {
                    let o = origin[axis] - center[axis];
                    let d = dir[axis];
                    let h = half_extents[axis];
                    if d.abs() < 1e-15 {
                        if o.abs() > h {
                            return None;
                        }
                    } else {
                        let mut t0 = (-h - o) / d;
                        let mut t1 = (h - o) / d;
                        if t0 > t1 {
                            std::mem::swap(&mut t0, &mut t1);
                        }
                        t_near = t_near.max(t0);
                        t_far = t_far.min(t1);
                        if t_near > t_far {
                            return None;
                        }
                    }
                }
                Some((t_near, t_far))
            }
            Primitive::Cylinder {
                center,
                radius,
                half_height,
            } => {
                // Radial quadratic combined with the axial slab.
                let ox = origin.x - center.x;
                let oy = origin.y - center.y;
                let oz = origin.z - center.z;
                let a = dir.x * dir.x + dir.y * dir.y;
                let (mut t_near, mut t_far) = if a < 1e-18 {
                    if ox * ox + oy * oy > radius * radius {
                        return None;
                    }
                    (f64::NEG_INFINITY, f64::INFINITY)
                } else {
                    let b = 2.0 * (ox * dir.x + oy * dir.y);
                    let c = ox * ox + oy * oy - radius * radius;
                    let disc = b * b - 4.0 * a * c;
                    if disc < 0.0 {
                        return None;
                    }
                    let root = disc.sqrt();
                    ((-b - root) / (2.0 * a), (-b + root) / (2.0 * a))
                };
                if dir.z.abs() < 1e-15 {
                    if oz.abs() > *half_height {
                        return None;
                    }
                } else {
                    let mut t0 = (-half_height - oz) / dir.z;
                    let mut t1 = (half_height - oz) / dir.z;
                    if t0 > t1 {
                        std::mem::swap(&mut t0, &mut t1);
                    }
                    t_near = t_near.max(t0);
                    t_far = t_far.min(t1);
                }
                (t_near <= t_far).then_some((t_near, t_far))
            }
        }
    }

    /// Quasi-uniform samples on the solid's boundary. Faces are sampled with
    /// a low-discrepancy sequence rather than a regular grid so the cloud
    /// carries no lattice to alias against rendered pixel grids.
    fn surface_samples(&self, spacing: f64, phase: &mut u64) -> Vec<Point3> {
        let mut pts = Vec::new();
        let density = 1.0 / (spacing * spacing);
        match self {
            Primitive::Box {
                center,
                half_extents,
            } => {
                let h = half_extents;
                // (fixed axis, sign, extent u, extent v) per face pair.
                let faces = [
                    (2usize, 0usize, 1usize, h.x, h.y),
                    (0, 1, 2, h.y, h.z),
                    (1, 0, 2, h.x, h.z),
                ];
                for (fixed, ua, va, hu, hv) in faces {
                    let count = ((4.0 * hu * hv) * density).ceil() as usize;
                    for &sign in &[-1.0f64, 1.0] {
                        for (u, v) in r2_sequence(count, phase) {
                            let mut p = [center.x, center.y, center.z];
                            p[fixed] += sign * h[fixed];
                            p[ua] += (2.0 * u - 1.0) * hu;
                            p[va] += (2.0 * v - 1.0) * hv;
                            pts.push(Point3::new(p[0], p[1], p[2]));
                        }
                    }
                }
            }
            Primitive::Cylinder {
                center,
                radius,
                half_height,
            } => {
                let circumference = 2.0 * std::f64::consts::PI * radius;
                let lateral = ((circumference * 2.0 * half_height) * density).ceil() as usize;
                for (u, v) in r2_sequence(lateral, phase) {
                    let theta = 2.0 * std::f64::consts::PI * u;
                    pts.push(Point3::new(
                        center.x + radius * theta.cos(),
                        center.y + radius * theta.sin(),
                        center.z + (2.0 * v - 1.0) * half_height,
                    ));
                }
                let cap = ((std::f64::consts::PI * radius * radius) * density).ceil() as usize;
                for &sign in &[-1.0f64, 1.0] {
                    for (u, v) in r2_sequence(cap, phase) {
                        let r = radius * u.sqrt();
                        let theta = 2.0 * std::f64::consts::PI * v;
                        pts.push(Point3::new(
                            center.x + r * theta.cos(),
                            center.y + r * theta.sin(),
                            center.z + sign * half_height,
                        ));
                    }
                }
            }
        }
        pts
    }
}

/// A built-in object: analytic union of solids plus the derived keypoint
/// model.
#[derive(Debug, Clone)]
pub struct ShapeSpec {
    pub name: &'static str,
    pub primitives: Vec<Primitive>,
    pub model: KeypointModel,
    pub sample_spacing: f64,
}

impl ShapeSpec {
    /// Rectangular block, the low-feature case.
    pub fn cuboid() -> Self {
        Self::cuboid_with_spacing(SAMPLE_SPACING)
    }

    /// Cuboid with a custom surface sampling spacing.
    pub fn cuboid_with_spacing(spacing: f64) -> Self {
        let primitives = vec![Primitive::Box {
            center: Vector3::zeros(),
            half_extents: Vector3::new(0.024, 0.016, 0.010),
        }];
        Self::build("cuboid", primitives, spacing)
    }

    /// Two perpendicular plates, fully asymmetric.
    pub fn l_bracket() -> Self {
        let primitives = vec![
            Primitive::Box {
                center: Vector3::new(0.0, 0.0, -0.014),
                half_extents: Vector3::new(0.021, 0.010, 0.004),
            },
            Primitive::Box {
                center: Vector3::new(0.017, 0.0, 0.004),
                half_extents: Vector3::new(0.004, 0.010, 0.014),
            },
        ];
        Self::build("l-bracket", primitives, SAMPLE_SPACING)
    }

    /// Cylinder on a flange disc with a key tab breaking the rotational
    /// symmetry only weakly; the near-symmetric regime.
    pub fn flanged_cylinder() -> Self {
        let primitives = vec![
            Primitive::Cylinder {
                center: Vector3::new(0.0, 0.0, 0.0065),
                radius: 0.011,
                half_height: 0.0225,
            },
            Primitive::Cylinder {
                center: Vector3::new(0.0, 0.0, -0.019),
                radius: 0.020,
                half_height: 0.003,
            },
            Primitive::Box {
                center: Vector3::new(0.024, 0.0, -0.019),
                half_extents: Vector3::new(0.006, 0.004, 0.003),
            },
        ];
        Self::build("flanged-cylinder", primitives, SAMPLE_SPACING)
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "cuboid" => Some(Self::cuboid()),
            "l-bracket" => Some(Self::l_bracket()),
            "flanged-cylinder" => Some(Self::flanged_cylinder()),
            _ => None,
        }
    }

    fn build(name: &'static str, primitives: Vec<Primitive>, spacing: f64) -> Self {
        let mut surface = Vec::new();
        let mut phase = 0u64;
        for (i, prim) in primitives.iter().enumerate() {
            for p in prim.surface_samples(spacing, &mut phase) {
                // Keep only points on the union boundary: outside every other
                // solid (shared interior faces are dropped).
                let buried = primitives
                    .iter()
                    .enumerate()
                    .any(|(j, other)| j != i && other.signed_distance(&p) < 1e-9);
                if !buried {
                    surface.push(p);
                }
            }
        }
        let centroid = surface_centroid(&surface);
        let shift = centroid.coords;
        let surface: Vec<Point3> = surface.iter().map(|p| Point3::from(p.coords - shift)).collect();
        let primitives: Vec<Primitive> = primitives
            .into_iter()
            .map(|p| match p {
                Primitive::Box {
                    center,
                    half_extents,
                } => Primitive::Box {
                    center: center - shift,
                    half_extents,
                },
                Primitive::Cylinder {
                    center,
                    radius,
                    half_height,
                } => Primitive::Cylinder {
                    center: center - shift,
                    radius,
                    half_height,
                },
            })
            .collect();

        let keypoints = farthest_point_keypoints(&surface, KEYPOINT_COUNT);
        let model = KeypointModel::new(name, keypoints, surface, None)
            .expect("built-in shape must satisfy the model invariants");
        Self {
            name,
            primitives,
            model,
            sample_spacing: spacing,
        }
    }

    /// Distance from an object-frame point to the union boundary.
    pub fn surface_distance(&self, p: &Point3) -> f64 {
        self.primitives
            .iter()
            .map(|prim| prim.signed_distance(p))
            .fold(f64::INFINITY, f64::min)
            .abs()
    }

    /// First entry of the ray `origin + t * dir` into the union, `t > t_min`.
    pub fn ray_entry(&self, origin: &Point3, dir: &Vector3<f64>, t_min: f64) -> Option<f64> {
        let mut best: Option<f64> = None;
        for prim in &self.primitives {
            if let Some((t_enter, t_exit)) = prim.ray_span(origin, dir) {
                if t_exit >= t_min && t_enter > t_min {
                    best = Some(best.map_or(t_enter, |b: f64| b.min(t_enter)));
                }
            }
        }
        best
    }
}

/// Deterministic R2 low-discrepancy sequence over the unit square. The
/// running `phase` keeps successive faces on different offsets of the same
/// sequence.
fn r2_sequence(count: usize, phase: &mut u64) -> Vec<(f64, f64)> {
    // Inverse powers of the plastic constant.
    const A1: f64 = 0.7548776662466927;
    const A2: f64 = 0.5698402909980532;
    let start = *phase;
    *phase += count as u64;
    (0..count)
        .map(|k| {
            let n = (start + k as u64) as f64;
            ((n * A1 + 0.5).fract(), (n * A2 + 0.5).fract())
        })
        .collect()
}

/// Surface centroid plus greedy farthest-point samples, ties broken by index.
fn farthest_point_keypoints(surface: &[Point3], count: usize) -> Vec<Point3> {
    let centroid = surface_centroid(surface);
    let mut keypoints = vec![centroid];
    let mut min_dist: Vec<f64> = surface.iter().map(|p| (p - centroid).norm()).collect();
    while keypoints.len() < count {
        let mut best_idx = 0;
        let mut best_dist = f64::NEG_INFINITY;
        for (i, &d) in min_dist.iter().enumerate() {
            if d > best_dist {
                best_dist = d;
                best_idx = i;
            }
        }
        let chosen = surface[best_idx];
        keypoints.push(chosen);
        for (i, p) in surface.iter().enumerate() {
            min_dist[i] = min_dist[i].min((p - chosen).norm());
        }
    }
    keypoints
}
