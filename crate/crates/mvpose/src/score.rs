//! Combined confidence scoring and the ADD-based evaluation protocol:
//! verdict bands, per-scene detection matching, and precision-recall.

use crate::fusion::PoseHypothesis;
use crate::geometry::{Point3, RigidTransform};
use crate::model::KeypointModel;

/// Default weights (w_u, w_icp) of the combined confidence score.
pub const DEFAULT_CONFIDENCE_WEIGHTS: (f64, f64) = (1.0, 1.0);

/// Default minimum visibility for a ground-truth object to count as
/// detectable.
pub const DEFAULT_VISIBILITY_FLOOR: f64 = 0.6;

/// Combined confidence score; lower is better. The keypoint term is
/// normalized per keypoint per view (nats), the ICP term in units of 1% of
/// the object diameter, so both sit near O(1) for good detections.
pub fn confidence(
    keypoint_uncertainty: f64,
    icp_rms: f64,
    model: &KeypointModel,
    n_views: usize,
    weights: (f64, f64),
) -> f64 {
    let k = model.keypoint_count() as f64;
    let n = n_views as f64;
    weights.0 * (keypoint_uncertainty / (k * n)) + weights.1 * (icp_rms / (0.01 * model.diameter))
}

/// Mean distance between the surface points under the predicted and
/// ground-truth poses.
pub fn add_error(pred: &RigidTransform, gt: &RigidTransform, surface: &[Point3]) -> f64 {
    assert!(!surface.is_empty(), "add_error needs a non-empty surface");
    let sum: f64 = surface
        .iter()
        .map(|v| (pred.apply(v) - gt.apply(v)).norm())
        .sum();
    sum / surface.len() as f64
}

/// Verdict bands over the ADD error relative to the object diameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// ADD < 10% of the diameter.
    Correct,
    /// 10% <= ADD < 30% of the diameter.
    Intermediate,
    /// ADD >= 30% of the diameter.
    Incorrect,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Correct => "correct",
            Verdict::Intermediate => "intermediate",
            Verdict::Incorrect => "incorrect",
        }
    }

    pub fn parse(s: &str) -> Option<Verdict> {
        match s {
            "correct" => Some(Verdict::Correct),
            "intermediate" => Some(Verdict::Intermediate),
            "incorrect" => Some(Verdict::Incorrect),
            _ => None,
        }
    }
}

pub fn verdict(add: f64, diameter: f64) -> Verdict {
    assert!(diameter > 0.0, "verdict needs a positive diameter");
    if add < 0.10 * diameter {
        Verdict::Correct
    } else if add < 0.30 * diameter {
        Verdict::Intermediate
    } else {
        Verdict::Incorrect
    }
}

/// A confidence-scored pose output, ready for evaluation.
#[derive(Debug, Clone)]
pub struct Detection {
    pub hypothesis: PoseHypothesis,
    /// Combined score, lower is better.
    pub confidence: f64,
    pub object_id: String,
    pub scene_id: String,
}

/// One detection's evaluation outcome.
#[derive(Debug, Clone)]
pub struct EvalRecord {
    pub detection_idx: usize,
    pub confidence: f64,
    /// Index of the claimed ground-truth pose, if any.
    pub matched_gt: Option<usize>,
    pub matched_gt_pose: Option<RigidTransform>,
    pub matched_gt_visibility: Option<f64>,
    pub add_error: Option<f64>,
    pub verdict: Option<Verdict>,
}

impl EvalRecord {
    /// Correct match against a sufficiently visible ground-truth object.
    pub fn counts_correct(&self, visibility_floor: f64) -> bool {
        self.verdict == Some(Verdict::Correct)
            && self.matched_gt_visibility.map_or(false, |v| v >= visibility_floor)
    }
}

#[derive(Debug, Clone)]
pub struct EvalSummary {
    pub total_gt: usize,
    pub visible_gt: usize,
    /// Correct matches to ground truth at or above the visibility floor.
    pub correct: usize,
    pub detection_rate: f64,
    pub false_positives: usize,
    pub visibility_floor: f64,
}

#[derive(Debug, Clone)]
pub struct SceneEvaluation {
    pub records: Vec<EvalRecord>,
    pub summary: EvalSummary,
}

/// Match detections to ground truth greedily: in ascending confidence order,
/// each detection claims the unclaimed ground-truth pose of minimal ADD.
/// Unmatched detections are false positives. The detection rate counts
/// correct matches over ground-truth objects at or above the visibility
/// floor.
pub fn evaluate_scene(
    detections: &[Detection],
    ground_truth: &[RigidTransform],
    visibility: &[f64],
    model: &KeypointModel,
    visibility_floor: f64,
) -> SceneEvaluation {
    assert_eq!(ground_truth.len(), visibility.len());
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| {
        detections[a]
            .confidence
            .partial_cmp(&detections[b].confidence)
            .unwrap()
            .then(a.cmp(&b))
    });

    let mut claimed = vec![false; ground_truth.len()];
    let mut records: Vec<EvalRecord> = Vec::with_capacity(detections.len());
    for &idx in &order {
        let det = &detections[idx];
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in ground_truth.iter().enumerate() {
            if claimed[gi] {
                continue;
            }
            let add = add_error(&det.hypothesis.pose, gt, &model.surface_points);
            if best.map_or(true, |(_, b)| add < b) {
                best = Some((gi, add));
            }
        }
        let record = match best {
            Some((gi, add)) => {
                claimed[gi] = true;
                EvalRecord {
                    detection_idx: idx,
                    confidence: det.confidence,
                    matched_gt: Some(gi),
                    matched_gt_pose: Some(ground_truth[gi]),
                    matched_gt_visibility: Some(visibility[gi]),
                    add_error: Some(add),
                    verdict: Some(verdict(add, model.diameter)),
                }
            }
            None => EvalRecord {
                detection_idx: idx,
                confidence: det.confidence,
                matched_gt: None,
                matched_gt_pose: None,
                matched_gt_visibility: None,
                add_error: None,
                verdict: None,
            },
        };
        records.push(record);
    }

    let visible_gt = visibility.iter().filter(|&&v| v >= visibility_floor).count();
    let correct = records
        .iter()
        .filter(|r| r.counts_correct(visibility_floor))
        .count();
    let false_positives = records.iter().filter(|r| r.matched_gt.is_none()).count();
    let detection_rate = if visible_gt == 0 {
        0.0
    } else {
        correct as f64 / visible_gt as f64
    };
    SceneEvaluation {
        records,
        summary: EvalSummary {
            total_gt: ground_truth.len(),
            visible_gt,
            correct,
            detection_rate,
            false_positives,
            visibility_floor,
        },
    }
}

/// One precision-recall sample at a confidence threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Precision-recall over pooled scene evaluations. For each threshold, keep
/// detections with confidence at or below it; precision over the kept set
/// (1.0 by convention when empty), recall over all visible ground truth.
/// Detections matched to ground truth below the visibility floor are outside
/// the evaluated set and count toward neither precision nor recall.
pub fn precision_recall(evals: &[SceneEvaluation], thresholds: &[f64]) -> Vec<PrPoint> {
    assert!(!evals.is_empty(), "precision_recall needs records");
    let total_visible: usize = evals.iter().map(|e| e.summary.visible_gt).sum();
    let mut taus: Vec<f64> = thresholds.to_vec();
    taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    taus.iter()
        .map(|&tau| {
            let mut kept = 0usize;
            let mut correct = 0usize;
            for eval in evals {
                for r in &eval.records {
                    let ignored = r
                        .matched_gt_visibility
                        .map_or(false, |v| v < eval.summary.visibility_floor);
                    if r.confidence <= tau && !ignored {
                        kept += 1;
                        if r.counts_correct(eval.summary.visibility_floor) {
                            correct += 1;
                        }
                    }
                }
            }
            let precision = if kept == 0 {
                1.0
            } else {
                correct as f64 / kept as f64
            };
            let recall = if total_visible == 0 {
                0.0
            } else {
                correct as f64 / total_visible as f64
            };
            PrPoint {
                threshold: tau,
                precision,
                recall,
            }
        })
        .collect()
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman_rank_correlation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    assert!(a.len() >= 2);
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    pearson(&ra, &rb)
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn cube_model() -> KeypointModel {
        KeypointModel::new(
            "cube",
            crate::test_util::unit_cube_keypoints(),
            crate::test_util::unit_cube_surface(),
            None,
        )
        .unwrap()
    }

    fn detection(pose: RigidTransform, conf: f64) -> Detection {
        Detection {
            hypothesis: PoseHypothesis {
                pose,
                keypoint_uncertainty: 0.0,
                icp_error: Some(0.0),
                confidence: Some(conf),
                cluster_id: 0,
            },
            confidence: conf,
            object_id: "cube".into(),
            scene_id: "s".into(),
        }
    }

    #[test]
    fn confidence_perfect_detection_is_zero() {
        let model = cube_model();
        assert_eq!(confidence(0.0, 0.0, &model, 8, (1.0, 1.0)), 0.0);
    }

    #[test]
    fn confidence_keypoint_normalization() {
        let model = cube_model();
        let k = model.keypoint_count() as f64;
        let n = 8.0;
        let c = confidence(k * n * 1.0, 0.0, &model, 8, (1.0, 1.0));
        assert_relative_eq!(c, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn add_error_identity_is_zero() {
        let model = cube_model();
        let pose = RigidTransform::from_quaternion(0.8, 0.1, 0.5, 0.2, Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(add_error(&pose, &pose, &model.surface_points), 0.0);
    }

    #[test]
    fn add_error_pure_translation_is_exact() {
        let model = cube_model();
        let gt = RigidTransform::from_quaternion(0.8, 0.1, 0.5, 0.2, Vector3::new(1.0, 2.0, 3.0));
        let d = 0.0375;
        let pred = crate::geometry::compose(
            &RigidTransform::from_translation(Vector3::new(d, 0.0, 0.0)),
            &gt,
        );
        assert_relative_eq!(
            add_error(&pred, &gt, &model.surface_points),
            d,
            epsilon = 1e-12
        );
    }

    #[test]
    fn add_error_half_turn_matches_axis_distance_oracle() {
        // A half turn about a centroid axis displaces each point by twice its
        // distance to the axis; the mean of that is an independent oracle.
        let model = cube_model();
        let gt = RigidTransform::identity();
        let pred = RigidTransform::from_axis_angle(&Vector3::z(), std::f64::consts::PI);
        let expected: f64 = model
            .surface_points
            .iter()
            .map(|p| 2.0 * (p.x * p.x + p.y * p.y).sqrt())
            .sum::<f64>()
            / model.surface_points.len() as f64;
        assert_relative_eq!(
            add_error(&pred, &gt, &model.surface_points),
            expected,
            epsilon = 1e-12
        );
    }

    #[test]
    fn verdict_bands() {
        assert_eq!(verdict(0.05, 1.0), Verdict::Correct);
        // Exactly 10% falls in the intermediate band (strict inequality).
        assert_eq!(verdict(0.10, 1.0), Verdict::Intermediate);
        assert_eq!(verdict(0.5, 1.0), Verdict::Incorrect);
    }

    #[test]
    fn evaluate_all_matched_rate_one() {
        let model = cube_model();
        let gts = vec![
            RigidTransform::from_translation(Vector3::new(0.0, 0.0, 0.0)),
            RigidTransform::from_translation(Vector3::new(5.0, 0.0, 0.0)),
        ];
        let dets: Vec<Detection> = gts
            .iter()
            .enumerate()
            .map(|(i, gt)| detection(*gt, i as f64))
            .collect();
        let eval = evaluate_scene(&dets, &gts, &[1.0, 1.0], &model, 0.6);
        assert_eq!(eval.summary.correct, 2);
        assert_relative_eq!(eval.summary.detection_rate, 1.0);
        assert_eq!(eval.summary.false_positives, 0);
    }

    #[test]
    fn evaluate_no_detections() {
        let model = cube_model();
        let gts = vec![RigidTransform::identity()];
        let eval = evaluate_scene(&[], &gts, &[1.0], &model, 0.6);
        assert_eq!(eval.summary.detection_rate, 0.0);
        assert_eq!(eval.summary.false_positives, 0);
    }

    #[test]
    fn evaluate_spurious_detection_is_false_positive() {
        let model = cube_model();
        let gts = vec![
            RigidTransform::from_translation(Vector3::new(0.0, 0.0, 0.0)),
            RigidTransform::from_translation(Vector3::new(5.0, 0.0, 0.0)),
        ];
        let dets = vec![
            detection(gts[0], 0.1),
            detection(gts[1], 0.2),
            detection(RigidTransform::from_translation(Vector3::new(9.0, 0.0, 0.0)), 0.3),
        ];
        let eval = evaluate_scene(&dets, &gts, &[1.0, 1.0], &model, 0.6);
        assert_eq!(eval.summary.correct, 2);
        assert_eq!(eval.summary.false_positives, 1);
        assert_relative_eq!(eval.summary.detection_rate, 1.0);
        // The spurious detection (highest confidence value) is the unmatched one.
        let fp = eval.records.iter().find(|r| r.matched_gt.is_none()).unwrap();
        assert_eq!(fp.detection_idx, 2);
    }

    #[test]
    fn greedy_matching_claims_each_gt_once() {
        let model = cube_model();
        let gts = vec![RigidTransform::identity()];
        let dets = vec![
            detection(RigidTransform::identity(), 0.1),
            detection(RigidTransform::identity(), 0.2),
        ];
        let eval = evaluate_scene(&dets, &gts, &[1.0], &model, 0.6);
        let matched: Vec<_> = eval.records.iter().filter(|r| r.matched_gt.is_some()).collect();
        assert_eq!(matched.len(), 1);
        assert_eq!(matched[0].detection_idx, 0);
    }

    #[test]
    fn precision_recall_conventions() {
        let model = cube_model();
        let gts = vec![
            RigidTransform::identity(),
            RigidTransform::from_translation(Vector3::new(5.0, 0.0, 0.0)),
        ];
        let dets = vec![detection(gts[0], 0.5), detection(gts[1], 1.5)];
        let eval = evaluate_scene(&dets, &gts, &[1.0, 1.0], &model, 0.6);
        let pr = precision_recall(&[eval], &[0.0, 1.0, 2.0]);
        // Below every confidence: empty keep, precision 1 by convention.
        assert_eq!(pr[0].precision, 1.0);
        assert_eq!(pr[0].recall, 0.0);
        // Between the two detections.
        assert_eq!(pr[1].precision, 1.0);
        assert_relative_eq!(pr[1].recall, 0.5);
        // Above all: global precision/recall.
        assert_eq!(pr[2].precision, 1.0);
        assert_relative_eq!(pr[2].recall, 1.0);
        // Recall non-decreasing in the threshold.
        for w in pr.windows(2) {
            assert!(w[0].recall <= w[1].recall);
        }
    }

    #[test]
    fn spearman_on_monotone_data() {
        let a = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let b = vec![10.0, 20.0, 25.0, 40.0, 100.0];
        assert_relative_eq!(spearman_rank_correlation(&a, &b), 1.0, epsilon = 1e-12);
        let c: Vec<f64> = b.iter().map(|x| -x).collect();
        assert_relative_eq!(spearman_rank_correlation(&a, &c), -1.0, epsilon = 1e-12);
    }
}
