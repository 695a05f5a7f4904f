//! End-to-end pose estimation on one scene: fuse per-view heatmaps, cluster
//! center-keypoint votes into instances, retrieve RANSAC pose hypotheses,
//! refine them with uncertainty-filtered ICP, and emit confidence-scored
//! detections.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fusion::{
    cluster_instances, polish_hypothesis, pose_keypoint_uncertainty, ransac_pose, ObjectCluster,
    PoseHypothesis, DEFAULT_CLUSTER_RADIUS, DEFAULT_RANSAC_ITERATIONS, DEFAULT_TOP_N,
};
use crate::geometry::{CameraView, Point3};
use crate::heatmap::{densify_candidates, Heatmap, KeypointCandidate, MapSet};
use crate::model::KeypointModel;
use crate::refine::{
    backproject, filter_cloud, icp, score_cloud, IcpParams, ScoredCloud, VoteTarget,
    DEFAULT_KEEP_QUANTILE,
};
use crate::score::{confidence, Detection, DEFAULT_CONFIDENCE_WEIGHTS};
use crate::simulate::{PixelVote, SyntheticScene};

/// The per-detection inputs of one view: heatmaps per keypoint, the masked
/// depth patch, and per-pixel keypoint votes aligned with the depth image's
/// row-major masked pixels.
#[derive(Debug, Clone)]
pub struct ImageInputs {
    pub view_index: usize,
    pub heatmaps: Vec<Heatmap>,
    pub depth: crate::refine::DepthImage,
    pub votes: Vec<PixelVote>,
}

/// Everything the estimator consumes for one scene.
#[derive(Debug, Clone)]
pub struct SceneInputs {
    pub scene_id: String,
    pub object_id: String,
    pub views: Vec<CameraView>,
    pub images: Vec<ImageInputs>,
}

impl SceneInputs {
    pub fn from_scene(scene: &SyntheticScene, scene_id: &str) -> Self {
        Self {
            scene_id: scene_id.to_string(),
            object_id: scene.model.object_id.clone(),
            views: scene.views.clone(),
            images: scene
                .detections
                .iter()
                .map(|d| ImageInputs {
                    view_index: d.view_index,
                    heatmaps: d.heatmaps.clone(),
                    depth: d.depth.clone(),
                    votes: d.votes.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EstimateConfig {
    pub seed: u64,
    /// Use only the first N views when set.
    pub view_limit: Option<usize>,
    pub ransac_iterations: usize,
    pub top_n: usize,
    pub cluster_radius: f64,
    pub keep_quantile: f64,
    pub confidence_weights: (f64, f64),
    pub icp: IcpParams,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            view_limit: None,
            ransac_iterations: DEFAULT_RANSAC_ITERATIONS,
            top_n: DEFAULT_TOP_N,
            cluster_radius: DEFAULT_CLUSTER_RADIUS,
            keep_quantile: DEFAULT_KEEP_QUANTILE,
            confidence_weights: DEFAULT_CONFIDENCE_WEIGHTS,
            icp: IcpParams::default(),
        }
    }
}

/// Per-cluster diagnostics, including the pre-refinement RANSAC hypotheses.
#[derive(Debug, Clone)]
pub struct ClusterReport {
    pub cluster_id: usize,
    pub center: Point3,
    pub attached_images: usize,
    /// RANSAC hypotheses before ICP, ascending by keypoint uncertainty.
    pub ransac_hypotheses: Vec<PoseHypothesis>,
}

#[derive(Debug, Clone)]
pub struct EstimateReport {
    /// Final detections, ascending by confidence.
    pub detections: Vec<Detection>,
    pub clusters: Vec<ClusterReport>,
    pub view_count: usize,
}

/// Run the full pipeline on one scene.
pub fn estimate(
    inputs: &SceneInputs,
    model: &KeypointModel,
    config: &EstimateConfig,
) -> Result<EstimateReport> {
    let n_views = config
        .view_limit
        .map_or(inputs.views.len(), |l| l.min(inputs.views.len()));
    if n_views == 0 {
        return Err(Error::ValidationFailure("no views available".into()));
    }
    let views = &inputs.views[..n_views];
    let images: Vec<&ImageInputs> = inputs
        .images
        .iter()
        .filter(|img| img.view_index < n_views)
        .collect();
    if images.is_empty() {
        return Err(Error::ValidationFailure(
            "no detections within the view limit".into(),
        ));
    }
    let k_count = model.keypoint_count();

    // Fused per-(view, keypoint) maps: max over instance detections.
    let mut maps = MapSet::zeros(views, k_count);
    for img in &images {
        for hm in &img.heatmaps {
            maps.merge(img.view_index, hm);
        }
    }

    // Center-keypoint candidates from every vote image.
    let mut center_candidates = Vec::new();
    for img in &images {
        for vote in &img.votes {
            if vote.keypoint_id == 0 {
                center_candidates.push(KeypointCandidate::scored(
                    0,
                    vote.position,
                    img.view_index as i32,
                    views,
                    maps.for_keypoint(0),
                ));
            }
        }
    }
    if center_candidates.is_empty() {
        return Err(Error::ValidationFailure(
            "no center keypoint votes in any view".into(),
        ));
    }

    let clusters = cluster_instances(&center_candidates, config.cluster_radius);

    // Instance-level merge: with vote noise above the cluster radius one
    // physical instance shatters into several nearby clusters, but instances
    // can never overlap within half a diameter. Absorb lower-ranked clusters
    // into the best one nearby.
    let merge_radius = 0.25 * model.diameter;
    let mut kept: Vec<ObjectCluster> = Vec::new();
    for cluster in clusters {
        if let Some(target) = kept
            .iter_mut()
            .find(|c| (c.center - cluster.center).norm() <= merge_radius)
        {
            for (id, mut cands) in cluster.members {
                target.members.entry(id).or_default().append(&mut cands);
            }
        } else {
            kept.push(cluster);
        }
    }
    for (i, c) in kept.iter_mut().enumerate() {
        c.cluster_id = i;
    }

    // Attach each vote image to a cluster via its median center vote; the
    // median is robust to the outlier votes. Among clusters within the
    // association radius the best-ranked one wins, so leftover shards of the
    // same instance cannot siphon off images with noisy medians.
    let mut attached: Vec<Vec<usize>> = vec![Vec::new(); kept.len()];
    for (ii, img) in images.iter().enumerate() {
        let centers: Vec<Point3> = img
            .votes
            .iter()
            .filter(|v| v.keypoint_id == 0)
            .map(|v| v.position)
            .collect();
        if centers.is_empty() {
            continue;
        }
        let median = component_median(&centers);
        let best = kept
            .iter()
            .enumerate()
            .filter(|(_, c)| (c.center - median).norm() <= merge_radius)
            .map(|(ci, _)| ci)
            .min();
        if let Some(ci) = best {
            attached[ci].push(ii);
        }
    }

    // Rebuild cluster members from the attached images' votes, all keypoints.
    for (ci, cluster) in kept.iter_mut().enumerate() {
        let mut members: BTreeMap<u32, Vec<KeypointCandidate>> = BTreeMap::new();
        for &ii in &attached[ci] {
            let img = images[ii];
            for vote in &img.votes {
                if (vote.keypoint_id as usize) < k_count {
                    members
                        .entry(vote.keypoint_id)
                        .or_default()
                        .push(KeypointCandidate::scored(
                            vote.keypoint_id,
                            vote.position,
                            img.view_index as i32,
                            views,
                            maps.for_keypoint(vote.keypoint_id as usize),
                        ));
                }
            }
        }
        cluster.members = members;
    }
    let attached: Vec<Vec<usize>> = attached
        .into_iter()
        .zip(&kept)
        .filter(|(_, c)| !c.members.is_empty())
        .map(|(a, _)| a)
        .collect();
    kept.retain(|c| !c.members.is_empty());
    for (i, c) in kept.iter_mut().enumerate() {
        c.cluster_id = i;
    }

    // Candidate enrichment: staged grid refinement around the best vote of
    // each keypoint, sampling the fused density at sub-vote resolution.
    for cluster in &mut kept {
        let scatter = center_scatter(cluster);
        let base_radius = (2.0 * scatter).max(0.004);
        let mut extras: Vec<(u32, Vec<KeypointCandidate>)> = Vec::new();
        for (id, cands) in cluster.members.iter() {
            if cands.is_empty() {
                continue;
            }
            let slice = maps.for_keypoint(*id as usize);
            let mut seed = cands
                .iter()
                .min_by(|a, b| a.uncertainty.partial_cmp(&b.uncertainty).unwrap())
                .unwrap()
                .position;
            let mut radius = base_radius;
            let mut collected = Vec::new();
            for _stage in 0..3 {
                let step = radius / 4.0;
                let grid = densify_candidates(&seed, radius, step, views, slice)?;
                seed = grid[0].position;
                collected.extend(grid);
                radius = step;
            }
            extras.push((*id, collected));
        }
        for (id, mut collected) in extras {
            cluster.members.get_mut(&id).unwrap().append(&mut collected);
        }
    }

    // RANSAC retrieval and filtered-ICP refinement per cluster.
    let mut detections: Vec<Detection> = Vec::new();
    let mut reports: Vec<ClusterReport> = Vec::new();
    let mut last_error: Option<Error> = None;
    for (ci, cluster) in kept.iter().enumerate() {
        let hypotheses = match ransac_pose(
            cluster,
            model,
            views,
            &maps,
            config.ransac_iterations,
            config.top_n,
            derive_seed(config.seed, cluster.cluster_id as u64),
        ) {
            Ok(h) => h,
            Err(e @ Error::InsufficientKeypoints { .. }) => {
                last_error = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        if hypotheses.is_empty() {
            continue;
        }
        let mut hypotheses: Vec<PoseHypothesis> = hypotheses
            .iter()
            .map(|h| polish_hypothesis(h, model, views, &maps))
            .collect();
        hypotheses.sort_by(|a, b| {
            a.keypoint_uncertainty
                .partial_cmp(&b.keypoint_uncertainty)
                .unwrap()
        });
        reports.push(ClusterReport {
            cluster_id: cluster.cluster_id,
            center: cluster.center,
            attached_images: attached[ci].len(),
            ransac_hypotheses: hypotheses.clone(),
        });

        // Scene cloud for this cluster: backprojected masked depth of the
        // attached images, scored by the fused probability of each pixel's
        // keypoint vote, then quantile-filtered.
        let mut cloud = ScoredCloud::default();
        let mut targets: Vec<VoteTarget> = Vec::new();
        for &ii in &attached[ci] {
            let img = images[ii];
            let part = backproject(&views[img.view_index], &img.depth);
            if part.len() != img.votes.len() {
                return Err(Error::ValidationFailure(format!(
                    "view {}: {} votes for {} masked depth pixels",
                    img.view_index,
                    img.votes.len(),
                    part.len()
                )));
            }
            targets.extend(img.votes.iter().map(|v| VoteTarget {
                keypoint_id: v.keypoint_id,
                position: v.position,
            }));
            cloud.extend(&part);
        }
        let scored = score_cloud(&cloud, &targets, views, &maps);
        let filtered = filter_cloud(&scored, config.keep_quantile);
        if filtered.len() < 3 {
            continue;
        }

        // Refine every hypothesis, re-evaluate its keypoint uncertainty at
        // the refined pose, and keep the best by combined confidence.
        let mut best: Option<Detection> = None;
        for hyp in &hypotheses {
            let refined = match staged_icp(&model.surface_points, &filtered, &hyp.pose, &config.icp)
            {
                Ok(Some(r)) => r,
                Ok(None) => continue,
                Err(e) => return Err(e),
            };
            let uncertainty = pose_keypoint_uncertainty(&refined.pose, model, views, &maps);
            let conf = confidence(
                uncertainty,
                refined.rms_error,
                model,
                n_views,
                config.confidence_weights,
            );
            let candidate = Detection {
                hypothesis: PoseHypothesis {
                    pose: refined.pose,
                    keypoint_uncertainty: uncertainty,
                    icp_error: Some(refined.rms_error),
                    confidence: Some(conf),
                    cluster_id: cluster.cluster_id,
                },
                confidence: conf,
                object_id: inputs.object_id.clone(),
                scene_id: inputs.scene_id.clone(),
            };
            if best.as_ref().map_or(true, |b| conf < b.confidence) {
                best = Some(candidate);
            }
        }
        if let Some(det) = best {
            detections.push(det);
        }
    }

    if detections.is_empty() {
        return Err(last_error.unwrap_or_else(|| {
            Error::ValidationFailure("no cluster produced a refined detection".into())
        }));
    }
    detections.sort_by(|a, b| {
        a.confidence
            .partial_cmp(&b.confidence)
            .unwrap()
            .then(a.hypothesis.cluster_id.cmp(&b.hypothesis.cluster_id))
    });
    // Instances cannot overlap within half a diameter, so two refined poses
    // this close must describe the same instance; keep the more confident.
    let mut deduped: Vec<Detection> = Vec::with_capacity(detections.len());
    for det in detections {
        let duplicate = deduped.iter().any(|kept| {
            kept.hypothesis
                .pose
                .translation_distance_to(&det.hypothesis.pose)
                < 0.3 * model.diameter
        });
        if !duplicate {
            deduped.push(det);
        }
    }
    let detections = deduped;
    Ok(EstimateReport {
        detections,
        clusters: reports,
        view_count: n_views,
    })
}

/// Coarse-to-fine ICP. A fixed ladder (cutoff, /3, /10) pulls the pose into
/// the fine basin and stops correspondences on unobserved model faces from
/// dragging it; adaptive stages then tighten the cutoff towards the achieved
/// inlier RMS, trimming the one-sided pairs at visibility boundaries. Stops
/// at the last stage that still finds correspondences; `None` if even the
/// first stage has no overlap.
fn staged_icp(
    model_surface: &[Point3],
    scene: &ScoredCloud,
    init: &crate::geometry::RigidTransform,
    params: &IcpParams,
) -> Result<Option<crate::refine::IcpResult>> {
    let ladder = [
        params.correspondence_cutoff,
        params.correspondence_cutoff / 3.0,
        params.correspondence_cutoff / 10.0,
    ];
    let mut result: Option<crate::refine::IcpResult> = None;
    for cutoff in ladder {
        let stage_params = IcpParams {
            correspondence_cutoff: cutoff,
            ..*params
        };
        let pose = result.as_ref().map_or(*init, |r| r.pose);
        match icp(model_surface, scene, &pose, &stage_params) {
            Ok(r) => result = Some(r),
            Err(Error::NoCorrespondences { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    for _ in 0..4 {
        let Some(prev) = &result else { break };
        let stage_params = IcpParams {
            correspondence_cutoff: (1.5 * prev.rms_error).max(5e-5),
            ..*params
        };
        match icp(model_surface, scene, &prev.pose, &stage_params) {
            Ok(r) => {
                let converged = r.rms_error >= prev.rms_error * 0.97;
                result = Some(r);
                if converged {
                    break;
                }
            }
            Err(Error::NoCorrespondences { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(result)
}

/// Component-wise median position.
fn component_median(points: &[Point3]) -> Point3 {
    let mut xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    let mut ys: Vec<f64> = points.iter().map(|p| p.y).collect();
    let mut zs: Vec<f64> = points.iter().map(|p| p.z).collect();
    for v in [&mut xs, &mut ys, &mut zs] {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    Point3::new(xs[xs.len() / 2], ys[ys.len() / 2], zs[zs.len() / 2])
}

/// Median distance of the cluster's center-keypoint votes to its center, a
/// robust read of the vote scatter.
fn center_scatter(cluster: &ObjectCluster) -> f64 {
    let Some(centers) = cluster.members.get(&0) else {
        return 0.0;
    };
    if centers.is_empty() {
        return 0.0;
    }
    let mut dists: Vec<f64> = centers
        .iter()
        .map(|c| (c.position - cluster.center).norm())
        .collect();
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    dists[dists.len() / 2]
}

/// Stable per-cluster RANSAC stream (splitmix64 of the seed and cluster id).
fn derive_seed(seed: u64, cluster_id: u64) -> u64 {
    let mut z = seed ^ cluster_id.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
