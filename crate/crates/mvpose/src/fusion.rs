//! Instance clustering in world space and RANSAC retrieval of the pose
//! hypotheses that minimize the total fused keypoint uncertainty.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{rigid_align, CameraView, Point3, RigidTransform};
use crate::heatmap::{multiview_uncertainty, KeypointCandidate, MapSet};
use crate::model::KeypointModel;

/// Default world-space association radius for center-keypoint clustering.
pub const DEFAULT_CLUSTER_RADIUS: f64 = 0.002;

/// Default RANSAC iteration count per cluster.
pub const DEFAULT_RANSAC_ITERATIONS: usize = 500;

/// Default number of distinct hypotheses returned per cluster.
pub const DEFAULT_TOP_N: usize = 5;

/// Two poses count as duplicates below these separations.
pub const DUPLICATE_ROTATION_RAD: f64 = std::f64::consts::PI / 180.0;
pub const DUPLICATE_TRANSLATION: f64 = 5e-4;

/// One detected object instance: candidates grouped per keypoint id, anchored
/// at a center-keypoint cluster center.
#[derive(Debug, Clone)]
pub struct ObjectCluster {
    pub cluster_id: usize,
    pub center: Point3,
    /// Keypoint id -> candidates voting for that keypoint.
    pub members: BTreeMap<u32, Vec<KeypointCandidate>>,
}

impl ObjectCluster {
    pub fn keypoint_ids_with_candidates(&self) -> usize {
        self.members.values().filter(|v| !v.is_empty()).count()
    }
}

/// A candidate object pose with its fused keypoint uncertainty. ICP error and
/// confidence are filled by the refinement and scoring stages.
#[derive(Debug, Clone)]
pub struct PoseHypothesis {
    pub pose: RigidTransform,
    /// Summed per-keypoint fused uncertainty of the reprojected model
    /// keypoints (nats).
    pub keypoint_uncertainty: f64,
    pub icp_error: Option<f64>,
    pub confidence: Option<f64>,
    pub cluster_id: usize,
}

/// Greedy lowest-uncertainty-first clustering of center-keypoint candidates.
/// Every input candidate ends up in exactly one cluster; clusters come back
/// ordered by ascending center uncertainty.
pub fn cluster_instances(
    center_candidates: &[KeypointCandidate],
    radius: f64,
) -> Vec<ObjectCluster> {
    let mut order: Vec<usize> = (0..center_candidates.len()).collect();
    order.sort_by(|&a, &b| {
        center_candidates[a]
            .uncertainty
            .partial_cmp(&center_candidates[b].uncertainty)
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut assigned = vec![false; center_candidates.len()];
    let mut clusters = Vec::new();
    for &seed_idx in &order {
        if assigned[seed_idx] {
            continue;
        }
        let center = center_candidates[seed_idx].position;
        let mut members = Vec::new();
        for (idx, candidate) in center_candidates.iter().enumerate() {
            if !assigned[idx] && (candidate.position - center).norm() <= radius {
                assigned[idx] = true;
                members.push(candidate.clone());
            }
        }
        let mut map = BTreeMap::new();
        map.insert(center_candidates[seed_idx].keypoint_id, members);
        clusters.push(ObjectCluster {
            cluster_id: clusters.len(),
            center,
            members: map,
        });
    }
    clusters
}

/// Evaluate the summed keypoint uncertainty of a pose: each model keypoint is
/// transformed into the world and scored against its fused per-view maps.
pub fn pose_keypoint_uncertainty(
    pose: &RigidTransform,
    model: &KeypointModel,
    views: &[CameraView],
    maps: &MapSet,
) -> f64 {
    let mut total = 0.0;
    for (k, origin) in model.origin_keypoints.iter().enumerate() {
        let p = pose.apply(origin);
        total += multiview_uncertainty(&p, views, maps.for_keypoint(k));
    }
    total
}

/// Cumulative sampling weights over one keypoint's candidates, proportional
/// to the fused probability `exp(-uncertainty)`. Shifted by the minimum
/// uncertainty so heavily penalized clusters still sample proportionally.
struct WeightedCandidates<'a> {
    candidates: &'a [KeypointCandidate],
    cumulative: Vec<f64>,
}

impl<'a> WeightedCandidates<'a> {
    fn new(candidates: &'a [KeypointCandidate]) -> Self {
        let min_u = candidates
            .iter()
            .map(|c| c.uncertainty)
            .fold(f64::INFINITY, f64::min);
        let mut cumulative = Vec::with_capacity(candidates.len());
        let mut total = 0.0;
        for c in candidates {
            total += (-(c.uncertainty - min_u)).exp();
            cumulative.push(total);
        }
        Self {
            candidates,
            cumulative,
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> &'a KeypointCandidate {
        let total = *self.cumulative.last().unwrap();
        let x = rng.random::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c < x);
        &self.candidates[idx.min(self.candidates.len() - 1)]
    }
}

fn poses_are_duplicates(a: &RigidTransform, b: &RigidTransform) -> bool {
    a.rotation_angle_to(b) < DUPLICATE_ROTATION_RAD
        && a.translation_distance_to(b) < DUPLICATE_TRANSLATION
}

/// RANSAC pose retrieval for one cluster.
///
/// Per iteration: draw three distinct keypoint ids uniformly, draw one
/// candidate per id with probability proportional to its fused probability,
/// align the corresponding origin keypoints onto the candidates, and score
/// the pose by its summed reprojected keypoint uncertainty. Degenerate
/// samples are redrawn and count as iterations. Returns up to `top_n`
/// distinct poses ordered by ascending score.
pub fn ransac_pose(
    cluster: &ObjectCluster,
    model: &KeypointModel,
    views: &[CameraView],
    maps: &MapSet,
    iterations: usize,
    top_n: usize,
    seed: u64,
) -> Result<Vec<PoseHypothesis>> {
    if iterations == 0 {
        return Err(Error::ValidationFailure(
            "ransac_pose needs at least one iteration".into(),
        ));
    }
    let ids: Vec<u32> = cluster
        .members
        .iter()
        .filter(|(_, v)| !v.is_empty())
        .map(|(&id, _)| id)
        .collect();
    if ids.len() < 3 {
        return Err(Error::InsufficientKeypoints {
            cluster_id: cluster.cluster_id,
            available: ids.len(),
        });
    }
    let weighted: BTreeMap<u32, WeightedCandidates> = cluster
        .members
        .iter()
        .filter(|(_, v)| !v.is_empty())
        .map(|(&id, v)| (id, WeightedCandidates::new(v)))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scored: Vec<(f64, RigidTransform)> = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        // Three distinct keypoint ids, uniform over the available ids.
        let mut picks = [0usize; 3];
        picks[0] = rng.random_range(0..ids.len());
        loop {
            picks[1] = rng.random_range(0..ids.len());
            if picks[1] != picks[0] {
                break;
            }
        }
        loop {
            picks[2] = rng.random_range(0..ids.len());
            if picks[2] != picks[0] && picks[2] != picks[1] {
                break;
            }
        }
        let mut source = Vec::with_capacity(3);
        let mut target = Vec::with_capacity(3);
        for &pick in &picks {
            let id = ids[pick];
            let candidate = weighted[&id].draw(&mut rng);
            source.push(model.origin_keypoints[id as usize]);
            target.push(candidate.position);
        }
        let pose = match rigid_align(&source, &target) {
            Ok(pose) => pose,
            // Degenerate sample: redraw, consuming the iteration.
            Err(Error::DegenerateConfiguration(_)) => continue,
            Err(e) => return Err(e),
        };
        let score = pose_keypoint_uncertainty(&pose, model, views, maps);
        scored.push((score, pose));
    }

    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut kept: Vec<PoseHypothesis> = Vec::new();
    for (score, pose) in scored {
        if kept.len() >= top_n {
            break;
        }
        if kept.iter().any(|h| poses_are_duplicates(&h.pose, &pose)) {
            continue;
        }
        kept.push(PoseHypothesis {
            pose,
            keypoint_uncertainty: score,
            icp_error: None,
            confidence: None,
            cluster_id: cluster.cluster_id,
        });
    }
    Ok(kept)
}

/// Local all-keypoint consensus polish. Each round probes a small grid
/// around every reprojected keypoint, re-fits the pose to the per-keypoint
/// argmins, and keeps the result only when the summed uncertainty improves.
/// A sampling-based tightening of the RANSAC winner; not a gradient method.
pub fn polish_hypothesis(
    hypothesis: &PoseHypothesis,
    model: &KeypointModel,
    views: &[CameraView],
    maps: &MapSet,
) -> PoseHypothesis {
    let mut best = hypothesis.clone();
    for radius in [1e-3, 5e-4, 2.5e-4, 2.5e-4] {
        let step = radius / 2.0;
        let mut source = Vec::with_capacity(model.keypoint_count());
        let mut target = Vec::with_capacity(model.keypoint_count());
        for (k, origin) in model.origin_keypoints.iter().enumerate() {
            let reprojected = best.pose.apply(origin);
            let Ok(grid) = crate::heatmap::densify_candidates(
                &reprojected,
                radius,
                step,
                views,
                maps.for_keypoint(k),
            ) else {
                return best;
            };
            source.push(*origin);
            target.push(grid[0].position);
        }
        let Ok(fit) = rigid_align(&source, &target) else {
            break;
        };
        let score = pose_keypoint_uncertainty(&fit, model, views, maps);
        if score < best.keypoint_uncertainty {
            best.pose = fit;
            best.keypoint_uncertainty = score;
        } else {
            break;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn candidate(position: Point3, uncertainty: f64) -> KeypointCandidate {
        KeypointCandidate {
            keypoint_id: 0,
            position,
            source_view: 0,
            probability: (-uncertainty).exp(),
            uncertainty,
        }
    }

    #[test]
    fn close_candidates_form_one_cluster() {
        let c = vec![
            candidate(Point3::new(0.0, 0.0, 0.0), 0.5),
            candidate(Point3::new(0.001, 0.0, 0.0), 0.9),
        ];
        let clusters = cluster_instances(&c, DEFAULT_CLUSTER_RADIUS);
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].members[&0].len(), 2);
        // The lower-uncertainty candidate seeds the center.
        assert_eq!(clusters[0].center, c[0].position);
    }

    #[test]
    fn distant_candidates_form_two_clusters() {
        let c = vec![
            candidate(Point3::new(0.0, 0.0, 0.0), 0.5),
            candidate(Point3::new(0.005, 0.0, 0.0), 0.1),
        ];
        let clusters = cluster_instances(&c, DEFAULT_CLUSTER_RADIUS);
        assert_eq!(clusters.len(), 2);
        // Ordered by ascending center uncertainty.
        assert_eq!(clusters[0].center, c[1].position);
        assert_eq!(clusters[1].center, c[0].position);
    }

    #[test]
    fn empty_input_gives_empty_output() {
        assert!(cluster_instances(&[], DEFAULT_CLUSTER_RADIUS).is_empty());
    }

    #[test]
    fn every_candidate_assigned_exactly_once() {
        let mut c = Vec::new();
        for i in 0..40 {
            c.push(candidate(
                Point3::new(0.0005 * (i % 7) as f64, 0.001 * (i % 3) as f64, 0.0),
                (i % 5) as f64,
            ));
        }
        let clusters = cluster_instances(&c, DEFAULT_CLUSTER_RADIUS);
        let total: usize = clusters.iter().map(|cl| cl.members[&0].len()).sum();
        assert_eq!(total, c.len());
    }

    #[test]
    fn ransac_requires_three_keypoint_ids() {
        let model = KeypointModel::new(
            "cube",
            crate::test_util::unit_cube_keypoints(),
            crate::test_util::unit_cube_surface(),
            None,
        )
        .unwrap();
        let mut members = BTreeMap::new();
        members.insert(0, vec![candidate(Point3::new(0.0, 0.0, 0.0), 0.1)]);
        members.insert(1, vec![candidate(Point3::new(0.1, 0.0, 0.0), 0.1)]);
        let cluster = ObjectCluster {
            cluster_id: 7,
            center: Point3::new(0.0, 0.0, 0.0),
            members,
        };
        let views: Vec<CameraView> = Vec::new();
        let maps = MapSet::zeros(&views, model.keypoint_count());
        let err = ransac_pose(&cluster, &model, &views, &maps, 10, 5, 0).unwrap_err();
        match err {
            Error::InsufficientKeypoints {
                cluster_id,
                available,
            } => {
                assert_eq!(cluster_id, 7);
                assert_eq!(available, 2);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }
}
