//! Scene cloud assembly from masked depth, quality filtering, and
//! point-to-point ICP against the model surface.

use crate::error::{Error, Result};
use crate::geometry::{backproject_pixel, rigid_align, CameraView, Point2, Point3, RigidTransform};
use crate::heatmap::{multiview_uncertainty, MapSet};

/// Default fraction of highest-scored points kept before ICP.
pub const DEFAULT_KEEP_QUANTILE: f64 = 0.8;

/// Default ICP parameters.
pub const DEFAULT_ICP_MAX_ITERATIONS: usize = 50;
pub const DEFAULT_CORRESPONDENCE_CUTOFF: f64 = 0.01;
pub const DEFAULT_CONVERGENCE_TOL: f64 = 1e-6;

/// A masked depth patch for one object detection in one view. Depth values of
/// 0 or NaN mean missing data.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub view_id: u32,
    pub width: u32,
    pub height: u32,
    pub depth: Vec<f32>,
    pub mask: Vec<bool>,
}

impl DepthImage {
    pub fn validate(&self) -> Result<()> {
        let n = (self.width as usize) * (self.height as usize);
        if self.depth.len() != n || self.mask.len() != n {
            return Err(Error::ValidationFailure(format!(
                "depth image grids must be {}x{} = {n} entries",
                self.width, self.height
            )));
        }
        for d in &self.depth {
            if d.is_finite() && (*d < 0.0 || *d >= 100.0) {
                return Err(Error::ValidationFailure(format!(
                    "depth value {d} outside [0, 100) m"
                )));
            }
        }
        Ok(())
    }

    #[inline]
    fn depth_at(&self, x: u32, y: u32) -> f32 {
        self.depth[(y as usize) * (self.width as usize) + x as usize]
    }

    #[inline]
    fn masked(&self, x: u32, y: u32) -> bool {
        self.mask[(y as usize) * (self.width as usize) + x as usize]
    }

    /// Masked pixels with valid depth, in row-major order. This is the
    /// iteration order `backproject` uses, so per-pixel annotations can be
    /// aligned with the produced cloud.
    pub fn valid_masked_pixels(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        (0..self.height).flat_map(move |y| {
            (0..self.width).filter_map(move |x| {
                let d = self.depth_at(x, y);
                if self.masked(x, y) && d.is_finite() && d > 0.0 {
                    Some((x, y, f64::from(d)))
                } else {
                    None
                }
            })
        })
    }
}

/// A world-frame point cloud with per-point quality scores in [0, 1].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoredCloud {
    pub points: Vec<Point3>,
    pub scores: Vec<f64>,
}

impl ScoredCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn extend(&mut self, other: &ScoredCloud) {
        self.points.extend_from_slice(&other.points);
        self.scores.extend_from_slice(&other.scores);
    }
}

/// The keypoint candidate a cloud point voted for; used to transfer fused
/// keypoint probabilities back onto the depth points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoteTarget {
    pub keypoint_id: u32,
    pub position: Point3,
}

/// One world point per masked pixel with valid depth, scores all 1.
pub fn backproject(view: &CameraView, depth: &DepthImage) -> ScoredCloud {
    debug_assert_eq!(view.view_id, depth.view_id);
    let mut cloud = ScoredCloud::default();
    for (x, y, d) in depth.valid_masked_pixels() {
        let pixel = Point2::new(f64::from(x), f64::from(y));
        cloud.points.push(backproject_pixel(view, &pixel, d));
        cloud.scores.push(1.0);
    }
    cloud
}

/// Score each point by the floored fused probability of the keypoint
/// candidate it voted for: `exp(-multiview_uncertainty)`, which equals the
/// plain probability product whenever every per-view factor exceeds the
/// floor.
pub fn score_cloud(
    cloud: &ScoredCloud,
    targets: &[VoteTarget],
    views: &[CameraView],
    maps: &MapSet,
) -> ScoredCloud {
    debug_assert_eq!(cloud.len(), targets.len());
    let scores = targets
        .iter()
        .map(|t| {
            let u = multiview_uncertainty(
                &t.position,
                views,
                maps.for_keypoint(t.keypoint_id as usize),
            );
            (-u).exp()
        })
        .collect();
    ScoredCloud {
        points: cloud.points.clone(),
        scores,
    }
}

/// Keep the `keep_quantile` fraction of highest-scored points (ties broken by
/// input order); output size is `ceil(keep_quantile * N)` and input order is
/// preserved among the kept points.
pub fn filter_cloud(cloud: &ScoredCloud, keep_quantile: f64) -> ScoredCloud {
    assert!(
        keep_quantile > 0.0 && keep_quantile <= 1.0,
        "keep_quantile must be in (0, 1]"
    );
    if cloud.is_empty() {
        return cloud.clone();
    }
    let keep = (keep_quantile * cloud.len() as f64).ceil() as usize;
    let keep = keep.clamp(1, cloud.len());
    let mut order: Vec<usize> = (0..cloud.len()).collect();
    order.sort_by(|&a, &b| {
        cloud.scores[b]
            .partial_cmp(&cloud.scores[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut selected: Vec<usize> = order[..keep].to_vec();
    selected.sort_unstable();
    ScoredCloud {
        points: selected.iter().map(|&i| cloud.points[i]).collect(),
        scores: selected.iter().map(|&i| cloud.scores[i]).collect(),
    }
}

/// Result of one ICP run.
#[derive(Debug, Clone)]
pub struct IcpResult {
    pub pose: RigidTransform,
    /// RMS distance over the final inlier correspondences (meters).
    pub rms_error: f64,
    /// Surviving correspondences / model points at the final pose.
    pub inlier_fraction: f64,
    pub iterations_used: usize,
    /// Per-iteration statistics, for convergence diagnostics.
    pub trace: Vec<IcpIteration>,
}

/// Post-update statistics of one ICP iteration.
#[derive(Debug, Clone, Copy)]
pub struct IcpIteration {
    pub rms: f64,
    pub pairs: usize,
    /// Fingerprint of the correspondence set (order-independent).
    pub pair_set_fingerprint: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct IcpParams {
    pub max_iterations: usize,
    pub correspondence_cutoff: f64,
    pub convergence_tol: f64,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self {
            max_iterations: DEFAULT_ICP_MAX_ITERATIONS,
            correspondence_cutoff: DEFAULT_CORRESPONDENCE_CUTOFF,
            convergence_tol: DEFAULT_CONVERGENCE_TOL,
        }
    }
}

const KD_NONE: u32 = u32::MAX;

struct KdNode {
    point: u32,
    dim: u8,
    left: u32,
    right: u32,
}

/// Exact nearest-neighbor index over the scene cloud: a median-split k-d
/// tree. Equal distances resolve to the smaller point index so queries are
/// deterministic.
struct KdTree<'a> {
    points: &'a [Point3],
    nodes: Vec<KdNode>,
    root: u32,
}

impl<'a> KdTree<'a> {
    fn build(points: &'a [Point3]) -> Self {
        let mut indices: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = Self::build_rec(points, &mut indices, 0, &mut nodes);
        Self {
            points,
            nodes,
            root,
        }
    }

    fn build_rec(points: &[Point3], idx: &mut [u32], depth: usize, nodes: &mut Vec<KdNode>) -> u32 {
        if idx.is_empty() {
            return KD_NONE;
        }
        let dim = (depth % 3) as u8;
        idx.sort_unstable_by(|&a, &b| {
            points[a as usize][dim as usize]
                .partial_cmp(&points[b as usize][dim as usize])
                .unwrap()
                .then(a.cmp(&b))
        });
        let mid = idx.len() / 2;
        let slot = nodes.len() as u32;
        nodes.push(KdNode {
            point: idx[mid],
            dim,
            left: KD_NONE,
            right: KD_NONE,
        });
        let (lo, rest) = idx.split_at_mut(mid);
        let hi = &mut rest[1..];
        let left = Self::build_rec(points, lo, depth + 1, nodes);
        let right = Self::build_rec(points, hi, depth + 1, nodes);
        nodes[slot as usize].left = left;
        nodes[slot as usize].right = right;
        slot
    }

    /// Nearest point with distance <= cutoff, if any.
    fn nearest_within(&self, q: &Point3, cutoff: f64) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_d2 = cutoff * cutoff;
        self.search(self.root, q, &mut best, &mut best_d2);
        best.map(|(i, d2)| (i, d2.sqrt()))
    }

    fn search(&self, node: u32, q: &Point3, best: &mut Option<(usize, f64)>, best_d2: &mut f64) {
        if node == KD_NONE {
            return;
        }
        let n = &self.nodes[node as usize];
        let p = &self.points[n.point as usize];
        let d2 = (p - q).norm_squared();
        let improves = match best {
            None => d2 <= *best_d2,
            Some((bi, bd2)) => d2 < *bd2 || (d2 == *bd2 && (n.point as usize) < *bi),
        };
        if improves {
            *best = Some((n.point as usize, d2));
            *best_d2 = d2;
        }
        let delta = q[n.dim as usize] - p[n.dim as usize];
        let (near, far) = if delta < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.search(near, q, best, best_d2);
        if delta * delta <= *best_d2 {
            self.search(far, q, best, best_d2);
        }
    }
}

fn correspondences(
    model_surface: &[Point3],
    pose: &RigidTransform,
    tree: &KdTree,
    cutoff: f64,
) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (mi, m) in model_surface.iter().enumerate() {
        let world = pose.apply(m);
        if let Some((si, _)) = tree.nearest_within(&world, cutoff) {
            pairs.push((mi, si));
        }
    }
    pairs
}

fn pair_rms(
    model_surface: &[Point3],
    scene: &ScoredCloud,
    pose: &RigidTransform,
    pairs: &[(usize, usize)],
) -> f64 {
    let mut sum = 0.0;
    for &(mi, si) in pairs {
        sum += (pose.apply(&model_surface[mi]) - scene.points[si]).norm_squared();
    }
    (sum / pairs.len() as f64).sqrt()
}

fn fingerprint(pairs: &[(usize, usize)]) -> u64 {
    // Order-independent FNV-style mix over the pair indices.
    let mut acc: u64 = 0;
    for &(mi, si) in pairs {
        let mut h: u64 = 0xcbf29ce484222325;
        h = (h ^ mi as u64).wrapping_mul(0x100000001b3);
        h = (h ^ si as u64).wrapping_mul(0x100000001b3);
        acc = acc.wrapping_add(h);
    }
    acc
}

/// Point-to-point ICP aligning the model surface to the scene cloud.
///
/// Per iteration: transform the model by the current pose, match each model
/// point to its nearest scene point within the cutoff, and re-fit the pose on
/// the surviving pairs. Stops when the inlier RMS changes by less than
/// `convergence_tol` or the iteration budget is exhausted.
pub fn icp(
    model_surface: &[Point3],
    scene: &ScoredCloud,
    init: &RigidTransform,
    params: &IcpParams,
) -> Result<IcpResult> {
    if model_surface.len() < 3 || scene.len() < 3 {
        return Err(Error::ValidationFailure(format!(
            "icp needs at least 3 model and scene points, got {} and {}",
            model_surface.len(),
            scene.len()
        )));
    }
    let tree = KdTree::build(&scene.points);
    let mut pose = *init;
    let mut trace: Vec<IcpIteration> = Vec::new();
    let mut prev_rms = f64::INFINITY;
    let mut iterations_used = 0;
    for iteration in 0..params.max_iterations {
        let pairs = correspondences(model_surface, &pose, &tree, params.correspondence_cutoff);
        if pairs.is_empty() {
            return Err(Error::NoCorrespondences {
                iteration,
                cutoff: params.correspondence_cutoff,
            });
        }
        iterations_used = iteration + 1;
        if pairs.len() < 3 {
            // Too few pairs to re-fit; keep the current pose.
            let rms = pair_rms(model_surface, scene, &pose, &pairs);
            trace.push(IcpIteration {
                rms,
                pairs: pairs.len(),
                pair_set_fingerprint: fingerprint(&pairs),
            });
            break;
        }
        let source: Vec<Point3> = pairs.iter().map(|&(mi, _)| model_surface[mi]).collect();
        let target: Vec<Point3> = pairs.iter().map(|&(_, si)| scene.points[si]).collect();
        match rigid_align(&source, &target) {
            Ok(fit) => pose = fit,
            // Degenerate correspondence set: stop at the current pose.
            Err(Error::DegenerateConfiguration(_)) => {
                let rms = pair_rms(model_surface, scene, &pose, &pairs);
                trace.push(IcpIteration {
                    rms,
                    pairs: pairs.len(),
                    pair_set_fingerprint: fingerprint(&pairs),
                });
                break;
            }
            Err(e) => return Err(e),
        }
        let rms = pair_rms(model_surface, scene, &pose, &pairs);
        trace.push(IcpIteration {
            rms,
            pairs: pairs.len(),
            pair_set_fingerprint: fingerprint(&pairs),
        });
        if (prev_rms - rms).abs() < params.convergence_tol {
            break;
        }
        prev_rms = rms;
    }

    // Final inlier statistics at the converged pose.
    let pairs = correspondences(model_surface, &pose, &tree, params.correspondence_cutoff);
    if pairs.is_empty() {
        return Err(Error::NoCorrespondences {
            iteration: iterations_used,
            cutoff: params.correspondence_cutoff,
        });
    }
    let rms_error = pair_rms(model_surface, scene, &pose, &pairs);
    Ok(IcpResult {
        pose,
        rms_error,
        inlier_fraction: pairs.len() as f64 / model_surface.len() as f64,
        iterations_used,
        trace,
    })
}
