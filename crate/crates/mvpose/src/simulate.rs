//! Synthetic bin-scene generator: instance placement, a camera view cone,
//! per-view keypoint heatmaps, ray-cast masked depth with injected outliers,
//! per-pixel keypoint votes, and ground-truth annotations.
//!
//! Scenes are pure functions of their configuration, including the RNG seed,
//! so every downstream test can treat the generator as its oracle.

use nalgebra::Vector3;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{project, CameraView, Point3, RigidTransform};
use crate::heatmap::{multiview_uncertainty, Heatmap, MapSet, GRID_NODE_LIMIT};
use crate::model::KeypointModel;
use crate::refine::DepthImage;
use crate::shapes::ShapeSpec;

/// Rejection-sampling budget for instance placement.
pub const PLACEMENT_ATTEMPT_LIMIT: usize = 10_000;

/// Scene recipe; all noise parameters are standard deviations.
#[derive(Debug, Clone)]
pub struct SceneConfig {
    pub shape: ShapeSpec,
    pub instance_count: usize,
    /// Full bin widths (meters); instance centers stay inside this box.
    pub bin_extent: Vector3<f64>,
    pub view_count: usize,
    pub cone_half_angle_deg: f64,
    pub camera_distance: f64,
    /// Width of the heatmap peaks (pixels).
    pub heatmap_sigma: f64,
    /// Additive per-pixel heatmap value noise.
    pub heatmap_noise: f64,
    /// Additive depth noise (meters).
    pub depth_noise: f64,
    /// Fraction of masked pixels injected as off-surface outliers.
    pub outlier_fraction: f64,
    /// Probability that a keypoint's heatmap peak is suppressed in a view.
    pub occlusion_dropout: f64,
    pub rng_seed: u64,
    pub patch_size: (u32, u32),
}

impl SceneConfig {
    pub fn new(shape: ShapeSpec) -> Self {
        Self {
            shape,
            instance_count: 1,
            bin_extent: Vector3::new(0.13, 0.13, 0.06),
            view_count: 8,
            cone_half_angle_deg: 30.0,
            camera_distance: 0.5,
            heatmap_sigma: 3.0,
            heatmap_noise: 0.0,
            depth_noise: 0.0,
            outlier_fraction: 0.0,
            occlusion_dropout: 0.0,
            rng_seed: 0,
            patch_size: (192, 192),
        }
    }

    pub fn model(&self) -> &KeypointModel {
        &self.shape.model
    }

    /// Radius of the sphere the cameras must cover: bin half-diagonal plus
    /// half an object diameter for instances near the walls.
    fn coverage_radius(&self) -> f64 {
        self.bin_extent.norm() / 2.0 + self.model().diameter / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.instance_count < 1 {
            return Err(Error::ValidationFailure("instance_count must be >= 1".into()));
        }
        if self.view_count < 1 {
            return Err(Error::ValidationFailure("view_count must be >= 1".into()));
        }
        if !(self.heatmap_sigma > 0.0) {
            return Err(Error::ValidationFailure("heatmap_sigma must be > 0".into()));
        }
        for (name, v) in [
            ("heatmap_noise", self.heatmap_noise),
            ("depth_noise", self.depth_noise),
        ] {
            if v < 0.0 {
                return Err(Error::ValidationFailure(format!("{name} must be >= 0")));
            }
        }
        for (name, v) in [
            ("outlier_fraction", self.outlier_fraction),
            ("occlusion_dropout", self.occlusion_dropout),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::ValidationFailure(format!("{name} must be in [0, 1]")));
            }
        }
        if self.patch_size.0 == 0 || self.patch_size.1 == 0 {
            return Err(Error::ValidationFailure("patch_size must be positive".into()));
        }
        if self.camera_distance < 1.5 * self.coverage_radius() {
            return Err(Error::ValidationFailure(format!(
                "camera_distance {} too small for the bin (needs >= {})",
                self.camera_distance,
                1.5 * self.coverage_radius()
            )));
        }
        Ok(())
    }
}

/// One keypoint vote cast by a masked depth pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelVote {
    pub pixel: (u32, u32),
    pub keypoint_id: u32,
    pub position: Point3,
}

/// Simulated network outputs for one object instance in one view.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDetection {
    pub view_index: usize,
    pub instance_index: usize,
    /// One heatmap per keypoint.
    pub heatmaps: Vec<Heatmap>,
    pub depth: DepthImage,
    /// One vote per valid masked pixel, in row-major pixel order.
    pub votes: Vec<PixelVote>,
    /// Ground-truth annotation aligned with `votes`.
    pub outlier_labels: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub model: KeypointModel,
    pub views: Vec<CameraView>,
    pub ground_truth_poses: Vec<RigidTransform>,
    /// Per instance: fraction of surface points visible in at least one view.
    pub visibility: Vec<f64>,
    /// View-major, instance-minor detection blocks.
    pub detections: Vec<SimDetection>,
}

impl SyntheticScene {
    /// Fused per-(view, keypoint) maps: pixel-wise max over the instances
    /// detected in each view.
    pub fn fused_maps(&self) -> MapSet {
        let mut set = MapSet::zeros(&self.views, self.model.keypoint_count());
        for det in &self.detections {
            for map in &det.heatmaps {
                set.merge(det.view_index, map);
            }
        }
        set
    }
}

pub fn generate(config: &SceneConfig) -> Result<SyntheticScene> {
    config.validate()?;
    let model = config.model().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);

    let poses = place_instances(config, &mut rng)?;
    let views = camera_ring(config);
    let heatmaps = render_heatmaps(config, &poses, &views, &mut rng);
    let renders: Vec<ViewRender> = views
        .iter()
        .map(|view| render_depth(config, &poses, view))
        .collect();
    let visibility = compute_visibility(config, &poses, &views, &renders);

    let keypoints_world: Vec<Vec<Point3>> = poses
        .iter()
        .map(|pose| model.keypoints_in_world(pose))
        .collect();

    let mut detections = Vec::with_capacity(views.len() * poses.len());
    let mut heatmaps = heatmaps;
    for (v, view) in views.iter().enumerate() {
        for j in 0..poses.len() {
            let (depth, outlier_pixels) =
                detection_depth(config, &renders[v], view.view_id, j, &mut rng);
            let (votes, outlier_labels) = cast_votes(
                config,
                view,
                &depth,
                &outlier_pixels,
                &keypoints_world[j],
                &mut rng,
            );
            detections.push(SimDetection {
                view_index: v,
                instance_index: j,
                heatmaps: std::mem::take(&mut heatmaps[v * poses.len() + j]),
                depth,
                votes,
                outlier_labels,
            });
        }
    }

    Ok(SyntheticScene {
        model,
        views,
        ground_truth_poses: poses,
        visibility,
        detections,
    })
}

fn place_instances(config: &SceneConfig, rng: &mut ChaCha8Rng) -> Result<Vec<RigidTransform>> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let half = config.bin_extent / 2.0;
    let min_separation = 0.5 * config.model().diameter;
    let mut poses: Vec<RigidTransform> = Vec::with_capacity(config.instance_count);
    let mut attempts = 0;
    while poses.len() < config.instance_count {
        if attempts >= PLACEMENT_ATTEMPT_LIMIT {
            return Err(Error::PlacementFailure {
                attempts,
                instances: config.instance_count,
            });
        }
        attempts += 1;
        let position = Vector3::new(
            (rng.random::<f64>() - 0.5) * 2.0 * half.x,
            (rng.random::<f64>() - 0.5) * 2.0 * half.y,
            (rng.random::<f64>() - 0.5) * 2.0 * half.z,
        );
        let q = [
            normal.sample(rng),
            normal.sample(rng),
            normal.sample(rng),
            normal.sample(rng),
        ];
        let separated = poses
            .iter()
            .all(|p| (p.translation - position).norm() > min_separation);
        if separated {
            poses.push(RigidTransform::from_quaternion(
                q[0], q[1], q[2], q[3], position,
            ));
        }
    }
    Ok(poses)
}

/// Cameras uniformly spaced in azimuth on a cone above the bin, all aimed at
/// the bin center. The virtual full image is four patches wide so the crop
/// origin is exercised.
fn camera_ring(config: &SceneConfig) -> Vec<CameraView> {
    let alpha = config.cone_half_angle_deg.to_radians();
    let (pw, ph) = config.patch_size;
    let half_patch = f64::from(pw.min(ph)) / 2.0;
    let r_cover = config.coverage_radius();
    let focal = 0.9 * half_patch * (config.camera_distance - r_cover) / r_cover;
    let cx = 2.0 * f64::from(pw);
    let cy = 2.0 * f64::from(ph);
    (0..config.view_count)
        .map(|i| {
            let az = 2.0 * std::f64::consts::PI * i as f64 / config.view_count as f64;
            let position = config.camera_distance
                * Vector3::new(alpha.sin() * az.cos(), alpha.sin() * az.sin(), alpha.cos());
            let forward = (-position).normalize();
            let up = if forward.z.abs() > 0.999 {
                Vector3::x()
            } else {
                Vector3::z()
            };
            let right = forward.cross(&up).normalize();
            let down = forward.cross(&right);
            let rotation = nalgebra::Matrix3::from_rows(&[
                right.transpose(),
                down.transpose(),
                forward.transpose(),
            ]);
            let translation = -(rotation * position);
            CameraView {
                view_id: i as u32,
                fx: focal,
                fy: focal,
                cx,
                cy,
                world_to_camera: RigidTransform::new(rotation, translation),
                patch_origin: (cx - f64::from(pw) / 2.0, cy - f64::from(ph) / 2.0),
                patch_size: (pw, ph),
            }
        })
        .collect()
}

/// Lattice spacing (pixels) of the additive heatmap noise field. Network
/// heatmaps are smooth, so the stand-in noise is drawn on a coarse lattice
/// and upsampled bilinearly instead of being independent per pixel.
const NOISE_LATTICE_PX: u32 = 4;

/// Smooth additive noise field: node values at `NOISE_LATTICE_PX` spacing,
/// bilinearly interpolated across the patch.
fn sampled_noise_field(
    width: u32,
    height: u32,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> impl Fn(u32, u32) -> f64 {
    let nx = width / NOISE_LATTICE_PX + 2;
    let ny = height / NOISE_LATTICE_PX + 2;
    let normal = Normal::new(0.0, sigma).unwrap();
    let nodes: Vec<f64> = (0..(nx as usize) * (ny as usize))
        .map(|_| normal.sample(rng))
        .collect();
    move |x: u32, y: u32| {
        let u = f64::from(x) / f64::from(NOISE_LATTICE_PX);
        let v = f64::from(y) / f64::from(NOISE_LATTICE_PX);
        let x0 = u.floor() as usize;
        let y0 = v.floor() as usize;
        let fx = u - x0 as f64;
        let fy = v - y0 as f64;
        let at = |xi: usize, yi: usize| nodes[yi.min(ny as usize - 1) * nx as usize + xi.min(nx as usize - 1)];
        let top = at(x0, y0) + (at(x0 + 1, y0) - at(x0, y0)) * fx;
        let bottom = at(x0, y0 + 1) + (at(x0 + 1, y0 + 1) - at(x0, y0 + 1)) * fx;
        top + (bottom - top) * fy
    }
}

/// Peak-1 Gaussians at each keypoint's projection, clamped to [0, 1] after
/// additive smooth noise, with whole peaks suppressed per the dropout
/// probability. Returned view-major, instance-minor; inner vectors hold one
/// map per keypoint.
fn render_heatmaps(
    config: &SceneConfig,
    poses: &[RigidTransform],
    views: &[CameraView],
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<Heatmap>> {
    let model = config.model();
    let (w, h) = config.patch_size;
    let sigma = config.heatmap_sigma;
    let window = (4.0 * sigma).ceil() as i64;
    let mut out = Vec::with_capacity(views.len() * poses.len());
    for view in views {
        for pose in poses {
            let mut per_keypoint = Vec::with_capacity(model.keypoint_count());
            for (k, origin) in model.origin_keypoints.iter().enumerate() {
                let projection = project(view, &pose.apply(origin)).ok();
                let dropped = rng.random::<f64>() < config.occlusion_dropout;
                let mut values = vec![0f32; (w as usize) * (h as usize)];
                if let (Some((px, _)), false) = (projection, dropped) {
                    let x_lo = ((px.x.round() as i64) - window).clamp(0, i64::from(w) - 1);
                    let x_hi = ((px.x.round() as i64) + window).clamp(0, i64::from(w) - 1);
                    let y_lo = ((px.y.round() as i64) - window).clamp(0, i64::from(h) - 1);
                    let y_hi = ((px.y.round() as i64) + window).clamp(0, i64::from(h) - 1);
                    for y in y_lo..=y_hi {
                        for x in x_lo..=x_hi {
                            let du = x as f64 - px.x;
                            let dv = y as f64 - px.y;
                            let g = (-(du * du + dv * dv) / (2.0 * sigma * sigma)).exp();
                            values[(y as usize) * (w as usize) + x as usize] = g as f32;
                        }
                    }
                }
                if config.heatmap_noise > 0.0 {
                    let field = sampled_noise_field(w, h, config.heatmap_noise, rng);
                    for y in 0..h {
                        for x in 0..w {
                            let idx = (y as usize) * (w as usize) + x as usize;
                            values[idx] =
                                (f64::from(values[idx]) + field(x, y)).clamp(0.0, 1.0) as f32;
                        }
                    }
                }
                per_keypoint.push(Heatmap {
                    view_id: view.view_id,
                    keypoint_id: k as u32,
                    width: w,
                    height: h,
                    values,
                });
            }
            out.push(per_keypoint);
        }
    }
    out
}

/// Exact ray-cast depth of one view: per pixel, the nearest surface hit over
/// all instances (camera-frame z) and the instance that owns it.
struct ViewRender {
    width: u32,
    height: u32,
    depth: Vec<f32>,
    owner: Vec<i32>,
}

/// Camera center and the world-frame direction whose parameter equals
/// camera-frame depth.
fn pixel_ray(view: &CameraView, u: f64, v: f64) -> (Point3, Vector3<f64>) {
    let cam_to_world = view.world_to_camera.invert();
    let origin = Point3::from(cam_to_world.translation);
    let dir_cam = Vector3::new(
        (u + view.patch_origin.0 - view.cx) / view.fx,
        (v + view.patch_origin.1 - view.cy) / view.fy,
        1.0,
    );
    (origin, cam_to_world.rotate(&dir_cam))
}

fn instance_ray_entry(
    shape: &ShapeSpec,
    pose: &RigidTransform,
    origin: &Point3,
    dir: &Vector3<f64>,
) -> Option<f64> {
    let inv = pose.invert();
    let origin_obj = inv.apply(origin);
    let dir_obj = inv.rotate(dir);
    shape.ray_entry(&origin_obj, &dir_obj, 1e-9)
}

fn render_depth(config: &SceneConfig, poses: &[RigidTransform], view: &CameraView) -> ViewRender {
    let (w, h) = view.patch_size;
    let mut depth = vec![0f32; (w as usize) * (h as usize)];
    let mut owner = vec![-1i32; (w as usize) * (h as usize)];
    for y in 0..h {
        for x in 0..w {
            let (origin, dir) = pixel_ray(view, f64::from(x), f64::from(y));
            let mut best: Option<(f64, usize)> = None;
            for (j, pose) in poses.iter().enumerate() {
                if let Some(t) = instance_ray_entry(&config.shape, pose, &origin, &dir) {
                    if best.map_or(true, |(bt, _)| t < bt) {
                        best = Some((t, j));
                    }
                }
            }
            if let Some((t, j)) = best {
                let idx = (y as usize) * (w as usize) + x as usize;
                depth[idx] = t as f32;
                owner[idx] = j as i32;
            }
        }
    }
    ViewRender {
        width: w,
        height: h,
        depth,
        owner,
    }
}

/// Fraction of each instance's surface samples visible in at least one view,
/// tested by casting the exact ray through each sample's projection.
fn compute_visibility(
    config: &SceneConfig,
    poses: &[RigidTransform],
    views: &[CameraView],
    _renders: &[ViewRender],
) -> Vec<f64> {
    let model = config.model();
    poses
        .iter()
        .enumerate()
        .map(|(j, pose)| {
            let mut visible = 0usize;
            for sample in &model.surface_points {
                let world = pose.apply(sample);
                let seen = views.iter().any(|view| {
                    let Ok((px, z)) = project(view, &world) else {
                        return false;
                    };
                    let (w, h) = view.patch_size;
                    if px.x < -0.5
                        || px.x > f64::from(w) - 0.5
                        || px.y < -0.5
                        || px.y > f64::from(h) - 0.5
                    {
                        return false;
                    }
                    let (origin, dir) = pixel_ray(view, px.x, px.y);
                    let mut nearest: Option<(f64, usize)> = None;
                    for (i, other) in poses.iter().enumerate() {
                        if let Some(t) = instance_ray_entry(&config.shape, other, &origin, &dir) {
                            if nearest.map_or(true, |(bt, _)| t < bt) {
                                nearest = Some((t, i));
                            }
                        }
            }
                    matches!(nearest, Some((t, i)) if i == j && (t - z).abs() <= 1e-6)
                });
                if seen {
                    visible += 1;
                }
            }
            visible as f64 / model.surface_points.len() as f64
        })
        .collect()
}

/// Extract one instance's masked depth from a view render, add depth noise,
/// and inject labeled off-surface outlier pixels on the mask boundary.
/// Returns the depth image and the set of outlier pixel indices.
fn detection_depth(
    config: &SceneConfig,
    render: &ViewRender,
    view_id: u32,
    instance: usize,
    rng: &mut ChaCha8Rng,
) -> (DepthImage, Vec<bool>) {
    let (w, h) = (render.width, render.height);
    let n = (w as usize) * (h as usize);
    let mut depth = vec![0f32; n];
    let mut mask = vec![false; n];
    let mut masked_indices = Vec::new();
    for idx in 0..n {
        if render.owner[idx] == instance as i32 {
            depth[idx] = render.depth[idx];
            mask[idx] = true;
            masked_indices.push(idx);
        }
    }

    if config.depth_noise > 0.0 && !masked_indices.is_empty() {
        let noise = Normal::new(0.0, config.depth_noise).unwrap();
        for &idx in &masked_indices {
            depth[idx] = ((f64::from(depth[idx])) + noise.sample(rng)).max(1e-3) as f32;
        }
    }

    let mut outlier = vec![false; n];
    let wanted = (config.outlier_fraction * masked_indices.len() as f64).round() as usize;
    if wanted > 0 && !masked_indices.is_empty() {
        let mut clean: Vec<f32> = masked_indices.iter().map(|&i| depth[i]).collect();
        clean.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median_depth = f64::from(clean[clean.len() / 2]);
        let ring = dilation_ring(&mask, w, h, wanted);
        let count = wanted.min(ring.len());
        if count > 0 {
            let mut chosen: Vec<usize> = sample_indices(rng, ring.len(), count).into_vec();
            chosen.sort_unstable();
            let diameter = config.model().diameter;
            for ri in chosen {
                let idx = ring[ri];
                let sign = if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 };
                // Mask bleed mostly lands on adjacent geometry a few mm
                // behind the boundary; a smaller share hits detached
                // background depths.
                let (lo, hi) = if rng.random::<f64>() < 0.8 {
                    (0.025, 0.06)
                } else {
                    (0.06, 0.35)
                };
                let magnitude = (lo + (hi - lo) * rng.random::<f64>()) * diameter;
                depth[idx] = (median_depth + sign * magnitude).max(0.05) as f32;
                mask[idx] = true;
                outlier[idx] = true;
            }
        }
    }

    let image = DepthImage {
        view_id,
        width: w,
        height: h,
        depth,
        mask,
    };
    (image, outlier)
}

/// Grow the mask outward until at least `wanted` border pixels exist (up to
/// three rings), returning unmasked border pixel indices in row-major order.
fn dilation_ring(mask: &[bool], w: u32, h: u32, wanted: usize) -> Vec<usize> {
    let mut current = mask.to_vec();
    let mut ring = Vec::new();
    for _ in 0..3 {
        let mut next = current.clone();
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                let idx = (y as usize) * (w as usize) + x as usize;
                if current[idx] {
                    continue;
                }
                let neighbor_masked = [(0i64, 1i64), (0, -1), (1, 0), (-1, 0)]
                    .iter()
                    .any(|(dx, dy)| {
                        let (nx, ny) = (x + dx, y + dy);
                        nx >= 0
                            && ny >= 0
                            && nx < i64::from(w)
                            && ny < i64::from(h)
                            && current[(ny as usize) * (w as usize) + nx as usize]
                    });
                if neighbor_masked {
                    next[idx] = true;
                    ring.push(idx);
                }
            }
        }
        current = next;
        if ring.len() >= wanted {
            break;
        }
    }
    ring
}

/// Per-pixel keypoint votes: true keypoint positions perturbed isotropically
/// with scale `heatmap_sigma * depth / focal` (the projection Jacobian);
/// outlier pixels vote far off the object instead.
fn cast_votes(
    config: &SceneConfig,
    view: &CameraView,
    depth: &DepthImage,
    outlier_pixels: &[bool],
    keypoints_world: &[Point3],
    rng: &mut ChaCha8Rng,
) -> (Vec<PixelVote>, Vec<bool>) {
    let unit_normal = Normal::new(0.0, 1.0).unwrap();
    let k_count = keypoints_world.len();
    let diameter = config.model().diameter;
    let mut votes = Vec::new();
    let mut labels = Vec::new();
    for (x, y, d) in depth.valid_masked_pixels() {
        let idx = (y as usize) * (depth.width as usize) + x as usize;
        let keypoint_id = rng.random_range(0..k_count) as u32;
        let truth = keypoints_world[keypoint_id as usize];
        let is_outlier = outlier_pixels[idx];
        let position = if is_outlier {
            let mut dir = Vector3::new(
                unit_normal.sample(rng),
                unit_normal.sample(rng),
                unit_normal.sample(rng),
            );
            if dir.norm() < 1e-12 {
                dir = Vector3::x();
            }
            let offset = dir.normalize() * ((0.3 + 0.7 * rng.random::<f64>()) * diameter);
            truth + offset
        } else {
            let sigma = config.heatmap_sigma * d / view.fx;
            Point3::new(
                truth.x + sigma * unit_normal.sample(rng),
                truth.y + sigma * unit_normal.sample(rng),
                truth.z + sigma * unit_normal.sample(rng),
            )
        };
        votes.push(PixelVote {
            pixel: (x, y),
            keypoint_id,
            position,
        });
        labels.push(is_outlier);
    }
    (votes, labels)
}

/// Exhaustive grid argmin of the fused keypoint uncertainty around the
/// ground-truth keypoint: the brute-force oracle the RANSAC retrieval is
/// compared against. Ties resolve to the lexicographically smallest
/// coordinates. Returns the argmin and its uncertainty.
pub fn oracle_best_keypoint(
    scene: &SyntheticScene,
    instance: usize,
    keypoint_id: usize,
    search_radius: f64,
    step: f64,
) -> Result<(Point3, f64)> {
    let maps = scene.fused_maps();
    oracle_best_keypoint_with_maps(scene, &maps, instance, keypoint_id, search_radius, step)
}

/// As `oracle_best_keypoint`, reusing prebuilt fused maps.
pub fn oracle_best_keypoint_with_maps(
    scene: &SyntheticScene,
    maps: &MapSet,
    instance: usize,
    keypoint_id: usize,
    search_radius: f64,
    step: f64,
) -> Result<(Point3, f64)> {
    if !(search_radius > 0.0) || !(step > 0.0 && step <= search_radius) {
        return Err(Error::ValidationFailure(format!(
            "oracle grid needs radius > 0 and 0 < step <= radius, got {search_radius}, {step}"
        )));
    }
    let m = (search_radius / step + 1e-9).floor() as i64;
    let per_axis = (2 * m + 1) as u128;
    let nodes = per_axis * per_axis * per_axis;
    if nodes > u128::from(GRID_NODE_LIMIT) {
        return Err(Error::GridTooLarge {
            nodes,
            limit: GRID_NODE_LIMIT,
        });
    }
    let center = scene.ground_truth_poses[instance].apply(&scene.model.origin_keypoints[keypoint_id]);
    let slice = maps.for_keypoint(keypoint_id);
    let mut best_point = center;
    let mut best_u = f64::INFINITY;
    for i in -m..=m {
        for j in -m..=m {
            for k in -m..=m {
                let p = Point3::new(
                    center.x + i as f64 * step,
                    center.y + j as f64 * step,
                    center.z + k as f64 * step,
                );
                let u = multiview_uncertainty(&p, &scene.views, slice);
                if u < best_u {
                    best_u = u;
                    best_point = p;
                }
            }
        }
    }
    Ok((best_point, best_u))
}
