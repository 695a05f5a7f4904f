//! Shared helpers and the seeded invariant battery used by both the
//! granular invariant tests and the acceptance suite.

#![allow(dead_code)]

use mvpose::error::Error;
use mvpose::fusion::{cluster_instances, ransac_pose, ObjectCluster};
use mvpose::geometry::{
    backproject_pixel, compose, project, rigid_align, CameraView, Point2, Point3, RigidTransform,
};
use mvpose::heatmap::{
    multiview_probability, multiview_uncertainty, Heatmap, KeypointCandidate,
    PROBABILITY_FLOOR,
};
use mvpose::model::KeypointModel;
use mvpose::refine::{backproject, filter_cloud, icp, IcpParams, ScoredCloud};
use mvpose::score::{add_error, evaluate_scene, verdict, Detection, Verdict};
use mvpose::shapes::ShapeSpec;
use mvpose::simulate::{generate, SceneConfig, SyntheticScene};
use nalgebra::Vector3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn random_transform(rng: &mut ChaCha8Rng) -> RigidTransform {
    RigidTransform::from_quaternion(
        rng.random::<f64>() - 0.5,
        rng.random::<f64>() - 0.5,
        rng.random::<f64>() - 0.5,
        rng.random::<f64>() - 0.5,
        Vector3::new(
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
        ),
    )
}

pub fn random_point(rng: &mut ChaCha8Rng, scale: f64) -> Point3 {
    Point3::new(
        (rng.random::<f64>() - 0.5) * scale,
        (rng.random::<f64>() - 0.5) * scale,
        (rng.random::<f64>() - 0.5) * scale,
    )
}

pub fn noisy_scene_config(shape: ShapeSpec, seed: u64) -> SceneConfig {
    let mut config = SceneConfig::new(shape);
    config.instance_count = 3;
    config.heatmap_sigma = 3.0;
    config.heatmap_noise = 0.05;
    config.depth_noise = 0.0005;
    config.outlier_fraction = 0.1;
    config.occlusion_dropout = 0.15;
    config.rng_seed = seed;
    config
}

pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

/// A wrong-object keypoint layout over the same surface: the layout is spun
/// by a generic angle (avoiding the shapes' half-turn symmetries) and shrunk.
pub fn corrupted_model(model: &KeypointModel) -> KeypointModel {
    let spin = RigidTransform::from_axis_angle(&Vector3::new(1.0, 2.0, 3.0), 75f64.to_radians());
    let center = model.origin_keypoints[0];
    let mut keypoints = vec![center];
    for kp in &model.origin_keypoints[1..] {
        keypoints.push(center + spin.rotate(&(kp - center)) * 0.85);
    }
    KeypointModel::new(
        format!("{}-corrupted", model.object_id),
        keypoints,
        model.surface_points.clone(),
        None,
    )
    .unwrap()
}

/// Cameras on a ring above the origin, all aimed at it, so points near the
/// origin project inside every patch.
fn random_views(rng: &mut ChaCha8Rng, n: usize) -> Vec<CameraView> {
    let alpha = (25.0 + rng.random::<f64>() * 20.0f64).to_radians();
    let distance = 0.5;
    (0..n)
        .map(|i| {
            let az = 2.0 * std::f64::consts::PI * (i as f64 + rng.random::<f64>() * 0.3)
                / n as f64;
            let position = distance
                * Vector3::new(alpha.sin() * az.cos(), alpha.sin() * az.sin(), alpha.cos());
            let forward = (-position).normalize();
            let up = Vector3::z();
            let right = forward.cross(&up).normalize();
            let down = forward.cross(&right);
            let rotation = nalgebra::Matrix3::from_rows(&[
                right.transpose(),
                down.transpose(),
                forward.transpose(),
            ]);
            CameraView {
                view_id: i as u32,
                fx: 300.0,
                fy: 300.0,
                cx: 32.0,
                cy: 32.0,
                world_to_camera: RigidTransform::new(rotation, -(rotation * position)),
                patch_origin: (0.0, 0.0),
                patch_size: (64, 64),
            }
        })
        .collect()
}

fn random_heatmaps(rng: &mut ChaCha8Rng, views: &[CameraView]) -> Vec<Heatmap> {
    views
        .iter()
        .map(|v| {
            let values: Vec<f32> = (0..64 * 64)
                .map(|_| 0.05 + 0.95 * rng.random::<f64>() as f32)
                .map(|x| x.clamp(0.0, 1.0))
                .collect();
            Heatmap::new(v.view_id, 0, 64, 64, values).unwrap()
        })
        .collect()
}

// ── Battery checks; each returns a short summary string and panics with a
// descriptive message on violation. ──────────────────────────────────────

/// rigid_align recovers seeded poses exactly, including near-planar sets,
/// and never returns a reflection.
pub fn check_rigid_align_exactness(trials: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut max_angle: f64 = 0.0;
    let mut max_trans: f64 = 0.0;
    for trial in 0..trials {
        let truth = random_transform(&mut rng);
        let n = 3 + (trial % 6);
        let near_planar = trial % 3 == 0;
        let mut source = Vec::with_capacity(n);
        for _ in 0..n {
            let mut p = random_point(&mut rng, 1.0);
            if near_planar {
                p.z *= 1e-7;
            }
            source.push(p);
        }
        let target: Vec<Point3> = source.iter().map(|p| truth.apply(p)).collect();
        let est = match rigid_align(&source, &target) {
            Ok(t) => t,
            // Rare degenerate draw: redraw behavior belongs to callers.
            Err(Error::DegenerateConfiguration(_)) => continue,
            Err(e) => panic!("rigid_align failed: {e}"),
        };
        let det = est.rotation.determinant();
        assert!(
            (det - 1.0).abs() < 1e-9,
            "trial {trial}: determinant {det} is not +1"
        );
        let angle = est.rotation_angle_to(&truth);
        let trans = est.translation_distance_to(&truth);
        assert!(angle < 1e-7, "trial {trial}: rotation error {angle}");
        assert!(trans < 1e-9, "trial {trial}: translation error {trans}");
        max_angle = max_angle.max(angle);
        max_trans = max_trans.max(trans);
    }
    format!("max rotation error {max_angle:.2e} rad, max translation error {max_trans:.2e} m")
}

/// project agrees with projecting the camera-frame point under identity
/// extrinsics.
pub fn check_projection_composition_consistency(trials: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut max_dev: f64 = 0.0;
    let mut checked = 0usize;
    while checked < trials {
        let views = random_views(&mut rng, 1);
        let view = &views[0];
        let p = random_point(&mut rng, 2.0);
        let cam_point = view.world_to_camera.apply(&p);
        let Ok((px, depth)) = project(view, &p) else {
            continue;
        };
        let mut identity_view = view.clone();
        identity_view.world_to_camera = RigidTransform::identity();
        let (px_id, depth_id) = project(&identity_view, &cam_point).unwrap();
        let dev = (px - px_id).norm().max((depth - depth_id).abs());
        assert!(dev < 1e-9, "projection deviates by {dev}");
        max_dev = max_dev.max(dev);
        checked += 1;
    }
    format!("max deviation {max_dev:.2e}")
}

/// Composition chains of length 100 stay orthonormal; compose with the
/// inverse returns identity.
pub fn check_composition_chains(trials: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let mut chain = RigidTransform::identity();
        for _ in 0..100 {
            chain = compose(&chain, &random_transform(&mut rng));
        }
        assert!(chain.is_valid_rotation(1e-9), "chain lost orthonormality");
        let id = compose(&chain, &chain.invert());
        let dev = (id.rotation - nalgebra::Matrix3::identity()).abs().max()
            .max(id.translation.abs().max());
        assert!(dev < 1e-9, "compose(T, invert(T)) deviates by {dev}");
        worst = worst.max(dev);
    }
    format!("max identity deviation {worst:.2e}")
}

/// Decreasing any single heatmap value never decreases the fused
/// uncertainty.
pub fn check_uncertainty_monotonicity(trials: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let views = random_views(&mut rng, 4);
    let mut maps = random_heatmaps(&mut rng, &views);
    for trial in 0..trials {
        let p = random_point(&mut rng, 0.05);
        let before = multiview_uncertainty(&p, &views, &maps);
        let mi = rng.random_range(0..maps.len());
        let vi = rng.random_range(0..maps[mi].values.len());
        let old = maps[mi].values[vi];
        maps[mi].values[vi] = old * rng.random::<f32>();
        let after = multiview_uncertainty(&p, &views, &maps);
        assert!(
            after >= before - 1e-12,
            "trial {trial}: uncertainty decreased from {before} to {after}"
        );
        maps[mi].values[vi] = old;
    }
    "uncertainty never decreased".to_string()
}

/// exp(-uncertainty) equals the probability product when all factors exceed
/// the floor.
pub fn check_product_sum_consistency(trials: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let views = random_views(&mut rng, 5);
    let maps = random_heatmaps(&mut rng, &views);
    let mut checked = 0usize;
    let mut max_rel: f64 = 0.0;
    while checked < trials {
        let p = random_point(&mut rng, 0.05);
        let prob = multiview_probability(&p, &views, &maps);
        if prob <= PROBABILITY_FLOOR {
            continue;
        }
        // All factors exceed the floor only if each per-view lookup does;
        // with 5 views above 0.05 each the product bound suffices.
        let u = multiview_uncertainty(&p, &views, &maps);
        let rel = ((-u).exp() - prob).abs() / prob;
        assert!(rel < 1e-12, "relative gap {rel}");
        max_rel = max_rel.max(rel);
        checked += 1;
    }
    format!("max relative gap {max_rel:.2e}")
}

/// Shuffling (view, map) pairs leaves both fused outputs unchanged within
/// 1e-12 relative.
pub fn check_view_permutation_invariance(trials: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let views = random_views(&mut rng, 6);
    let maps = random_heatmaps(&mut rng, &views);
    for _ in 0..trials {
        let p = random_point(&mut rng, 0.05);
        let u0 = multiview_uncertainty(&p, &views, &maps);
        let p0 = multiview_probability(&p, &views, &maps);
        let mut order: Vec<usize> = (0..views.len()).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let sviews: Vec<CameraView> = order.iter().map(|&i| views[i].clone()).collect();
        let smaps: Vec<Heatmap> = order.iter().map(|&i| maps[i].clone()).collect();
        let u1 = multiview_uncertainty(&p, &sviews, &smaps);
        let p1 = multiview_probability(&p, &sviews, &smaps);
        let du = (u0 - u1).abs() / u0.abs().max(1.0);
        let dp = (p0 - p1).abs() / p0.abs().max(f64::MIN_POSITIVE);
        assert!(du < 1e-12 && dp < 1e-12, "permutation changed outputs by {du} / {dp}");
    }
    "permutation invariant".to_string()
}

/// Bilinear lookup is continuous across interior pixel boundaries.
pub fn check_lookup_continuity(trials: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let views = random_views(&mut rng, 1);
    let maps = random_heatmaps(&mut rng, &views);
    let map = &maps[0];
    let mut max_jump: f64 = 0.0;
    for _ in 0..trials {
        // A boundary between interior nodes, approached from both sides.
        let bx = rng.random_range(1..63) as f64;
        let y = rng.random::<f64>() * 62.0;
        let eps = 1e-7;
        let a = map.lookup(&Point2::new(bx - eps / 2.0, y));
        let b = map.lookup(&Point2::new(bx + eps / 2.0, y));
        let jump = (a - b).abs();
        assert!(jump < 1e-9, "jump {jump} across x = {bx}");
        max_jump = max_jump.max(jump);
        let by = rng.random_range(1..63) as f64;
        let x = rng.random::<f64>() * 62.0;
        let a = map.lookup(&Point2::new(x, by - eps / 2.0));
        let b = map.lookup(&Point2::new(x, by + eps / 2.0));
        let jump = (a - b).abs();
        assert!(jump < 1e-9, "jump {jump} across y = {by}");
        max_jump = max_jump.max(jump);
    }
    format!("max boundary jump {max_jump:.2e}")
}

/// keypoints_in_world round-trips through the inverse pose and preserves
/// pairwise distances.
pub fn check_keypoint_rigidity(trials: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let model = ShapeSpec::cuboid().model;
    let base: Vec<f64> = model
        .origin_keypoints
        .iter()
        .flat_map(|a| {
            model
                .origin_keypoints
                .iter()
                .map(move |b| (a - b).norm())
                .collect::<Vec<_>>()
        })
        .collect();
    for _ in 0..trials {
        let pose = random_transform(&mut rng);
        let world = model.keypoints_in_world(&pose);
        let back = world
            .iter()
            .map(|p| pose.invert().apply(p))
            .collect::<Vec<_>>();
        for (o, b) in model.origin_keypoints.iter().zip(&back) {
            assert!((o - b).norm() < 1e-12, "inverse round-trip broke");
        }
        let mut idx = 0;
        for a in &world {
            for b in &world {
                let d = (a - b).norm();
                assert!(
                    (d - base[idx]).abs() < 1e-12,
                    "pairwise distance changed by {}",
                    (d - base[idx]).abs()
                );
                idx += 1;
            }
        }
    }
    "rigidity preserved".to_string()
}

/// RANSAC determinism, ordering, score consistency, and rotation validity on
/// a seeded noisy scene.
pub fn check_ransac_contract() -> String {
    let mut config = noisy_scene_config(ShapeSpec::cuboid(), 314);
    config.instance_count = 2;
    let scene = generate(&config).unwrap();
    let maps = scene.fused_maps();
    let model = &scene.model;

    // Build a cluster from the scene's center votes the way the pipeline
    // does, but without enrichment.
    let mut centers = Vec::new();
    for det in &scene.detections {
        for vote in &det.votes {
            if vote.keypoint_id == 0 {
                centers.push(KeypointCandidate::scored(
                    0,
                    vote.position,
                    det.view_index as i32,
                    &scene.views,
                    maps.for_keypoint(0),
                ));
            }
        }
    }
    let clusters = cluster_instances(&centers, 0.02);
    let mut cluster = clusters.into_iter().next().unwrap();
    for det in &scene.detections {
        for vote in &det.votes {
            if (vote.position - cluster.center).norm() < 0.6 * model.diameter {
                cluster
                    .members
                    .entry(vote.keypoint_id)
                    .or_default()
                    .push(KeypointCandidate::scored(
                        vote.keypoint_id,
                        vote.position,
                        det.view_index as i32,
                        &scene.views,
                        maps.for_keypoint(vote.keypoint_id as usize),
                    ));
            }
        }
    }

    let a = ransac_pose(&cluster, model, &scene.views, &maps, 300, 5, 99).unwrap();
    let b = ransac_pose(&cluster, model, &scene.views, &maps, 300, 5, 99).unwrap();
    assert_eq!(a.len(), b.len(), "determinism broke: different counts");
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.pose.rotation, y.pose.rotation, "determinism broke");
        assert_eq!(x.pose.translation, y.pose.translation, "determinism broke");
        assert_eq!(
            x.keypoint_uncertainty.to_bits(),
            y.keypoint_uncertainty.to_bits(),
            "determinism broke"
        );
    }
    for w in a.windows(2) {
        assert!(
            w[0].keypoint_uncertainty <= w[1].keypoint_uncertainty,
            "hypotheses not sorted"
        );
    }
    for h in &a {
        assert!(h.pose.is_valid_rotation(1e-9), "invalid rotation");
        let again = mvpose::fusion::pose_keypoint_uncertainty(&h.pose, model, &scene.views, &maps);
        assert!(
            (again - h.keypoint_uncertainty).abs() < 1e-9,
            "score re-evaluation deviates by {}",
            (again - h.keypoint_uncertainty).abs()
        );
        let k = model.keypoint_count() as f64;
        let n = scene.views.len() as f64;
        assert!(h.keypoint_uncertainty >= 0.0);
        assert!(h.keypoint_uncertainty <= k * n * mvpose::heatmap::MAX_UNCERTAINTY_PER_VIEW);
    }
    format!("{} hypotheses, best U {:.3}", a.len(), a[0].keypoint_uncertainty)
}

/// Noiseless cluster of exact candidates: RANSAC recovers the generator pose.
pub fn check_ransac_exact_recovery() -> String {
    let mut config = SceneConfig::new(ShapeSpec::cuboid());
    config.rng_seed = 271;
    let scene = generate(&config).unwrap();
    let maps = scene.fused_maps();
    let model = &scene.model;
    let truth = &scene.ground_truth_poses[0];

    let world = model.keypoints_in_world(truth);
    let mut members = std::collections::BTreeMap::new();
    for (k, p) in world.iter().enumerate() {
        members.insert(
            k as u32,
            vec![KeypointCandidate::scored(
                k as u32,
                *p,
                -1,
                &scene.views,
                maps.for_keypoint(k),
            )],
        );
    }
    let cluster = ObjectCluster {
        cluster_id: 0,
        center: world[0],
        members,
    };
    let hyps = ransac_pose(&cluster, model, &scene.views, &maps, 500, 5, 7).unwrap();
    let best = &hyps[0];
    let terr = best.pose.translation_distance_to(truth);
    let rerr = best.pose.rotation_angle_to(truth);
    assert!(terr < 1e-6, "translation error {terr}");
    assert!(rerr < 1e-4, "rotation error {rerr}");

    // The pose-constrained score can only match or beat the ground truth
    // pose evaluated the same way.
    let u_truth = mvpose::fusion::pose_keypoint_uncertainty(truth, model, &scene.views, &maps);
    assert!(
        best.keypoint_uncertainty <= u_truth + 1e-9,
        "best {} worse than ground truth {}",
        best.keypoint_uncertainty,
        u_truth
    );
    format!("translation {terr:.2e} m, rotation {rerr:.2e} rad")
}

/// Backprojection round-trips every masked valid pixel of a rendered scene.
pub fn check_backprojection_roundtrip() -> String {
    let mut config = SceneConfig::new(ShapeSpec::l_bracket());
    config.rng_seed = 17;
    config.instance_count = 2;
    let scene = generate(&config).unwrap();
    let mut checked = 0usize;
    let mut max_px: f64 = 0.0;
    let mut max_depth: f64 = 0.0;
    for det in &scene.detections {
        let view = &scene.views[det.view_index];
        let cloud = backproject(view, &det.depth);
        for (point, (x, y, d)) in cloud.points.iter().zip(det.depth.valid_masked_pixels()) {
            let (px, z) = project(view, point).unwrap();
            let dev_px = (px.x - f64::from(x)).abs().max((px.y - f64::from(y)).abs());
            let dev_depth = (z - d).abs();
            assert!(dev_px < 1e-6, "pixel deviates by {dev_px}");
            assert!(dev_depth < 1e-9, "depth deviates by {dev_depth}");
            max_px = max_px.max(dev_px);
            max_depth = max_depth.max(dev_depth);
            checked += 1;
        }
    }
    assert!(checked >= 1000, "only {checked} pixels checked");
    format!("{checked} pixels, max {max_px:.2e} px / {max_depth:.2e} m")
}

/// Per-iteration ICP trace: RMS non-increasing unless the correspondence set
/// changed, in which case pair count must rise or RMS still drop.
pub fn check_icp_monotonicity(trials: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let model = ShapeSpec::cuboid().model;
    let mut iterations = 0usize;
    for trial in 0..trials {
        let truth = random_transform(&mut rng);
        let scene = ScoredCloud {
            points: model.surface_points.iter().map(|p| truth.apply(p)).collect(),
            scores: vec![1.0; model.surface_points.len()],
        };
        let nudge = compose(
            &RigidTransform::from_axis_angle(
                &Vector3::new(
                    rng.random::<f64>() - 0.5,
                    rng.random::<f64>() - 0.5,
                    rng.random::<f64>() - 0.5,
                ),
                rng.random::<f64>() * 8f64.to_radians(),
            ),
            &RigidTransform::from_translation(Vector3::new(
                (rng.random::<f64>() - 0.5) * 0.006,
                (rng.random::<f64>() - 0.5) * 0.006,
                (rng.random::<f64>() - 0.5) * 0.006,
            )),
        );
        let init = compose(&truth, &nudge);
        let result = match icp(&model.surface_points, &scene, &init, &IcpParams::default()) {
            Ok(r) => r,
            Err(Error::NoCorrespondences { .. }) => continue,
            Err(e) => panic!("icp failed: {e}"),
        };
        for w in result.trace.windows(2) {
            let (prev, cur) = (&w[0], &w[1]);
            if cur.rms > prev.rms + 1e-12 {
                assert_ne!(
                    cur.pair_set_fingerprint, prev.pair_set_fingerprint,
                    "trial {trial}: RMS rose with an unchanged correspondence set"
                );
                assert!(
                    cur.pairs > prev.pairs || cur.rms < prev.rms,
                    "trial {trial}: combined objective failed to improve \
                     (pairs {} -> {}, rms {} -> {})",
                    prev.pairs,
                    cur.pairs,
                    prev.rms,
                    cur.rms
                );
            }
        }
        iterations += result.trace.len();
    }
    format!("{iterations} traced iterations")
}

/// filter_cloud keeps exactly ceil(q*N) points, never discards a score above
/// the minimum retained one, and keep_quantile = 1 is the identity.
pub fn check_filter_cloud_contract(trials: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    for _ in 0..trials {
        let n = 1 + rng.random_range(0..200);
        let cloud = ScoredCloud {
            points: (0..n).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect(),
            scores: (0..n)
                .map(|_| (rng.random::<f64>() * 4.0).floor() / 4.0)
                .collect(),
        };
        assert_eq!(filter_cloud(&cloud, 1.0), cloud);
        let q = 0.05 + 0.95 * rng.random::<f64>();
        let kept = filter_cloud(&cloud, q);
        assert_eq!(kept.len(), ((q * n as f64).ceil() as usize).clamp(1, n));
        let min_kept = kept.scores.iter().cloned().fold(f64::INFINITY, f64::min);
        let kept_ids: std::collections::HashSet<u64> =
            kept.points.iter().map(|p| p.x as u64).collect();
        for (i, s) in cloud.scores.iter().enumerate() {
            if !kept_ids.contains(&(i as u64)) {
                assert!(
                    *s <= min_kept,
                    "discarded score {s} above min retained {min_kept}"
                );
            }
        }
    }
    "quantile contract holds".to_string()
}

/// add_error symmetry and invariance to a common rigid transform.
pub fn check_add_error_invariance(trials: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(111);
    let model = ShapeSpec::flanged_cylinder().model;
    let mut max_dev: f64 = 0.0;
    for _ in 0..trials {
        let a = random_transform(&mut rng);
        let b = random_transform(&mut rng);
        let common = random_transform(&mut rng);
        let d_ab = add_error(&a, &b, &model.surface_points);
        let d_ba = add_error(&b, &a, &model.surface_points);
        let d_common = add_error(
            &compose(&common, &a),
            &compose(&common, &b),
            &model.surface_points,
        );
        let dev = (d_ab - d_ba).abs().max((d_ab - d_common).abs());
        assert!(dev < 1e-9, "add_error deviates by {dev}");
        max_dev = max_dev.max(dev);
    }
    format!("max deviation {max_dev:.2e}")
}

/// Exactly one verdict per input over [0, inf).
pub fn check_verdict_partition(trials: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(112);
    for i in 0..trials {
        let diameter = 0.01 + rng.random::<f64>();
        let add = match i % 4 {
            0 => 0.10 * diameter,
            1 => 0.30 * diameter,
            _ => rng.random::<f64>() * diameter,
        };
        let v = verdict(add, diameter);
        let bands = [
            add < 0.10 * diameter,
            (0.10 * diameter..0.30 * diameter).contains(&add),
            add >= 0.30 * diameter,
        ];
        assert_eq!(bands.iter().filter(|b| **b).count(), 1);
        let expected = if bands[0] {
            Verdict::Correct
        } else if bands[1] {
            Verdict::Intermediate
        } else {
            Verdict::Incorrect
        };
        assert_eq!(v, expected);
    }
    "bands partition".to_string()
}

/// Greedy matching never assigns two detections to one ground-truth pose and
/// recall is non-decreasing in the threshold.
pub fn check_matching_and_recall_monotonicity(trials: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(113);
    let model = ShapeSpec::cuboid().model;
    for _ in 0..trials {
        let n_gt = 1 + rng.random_range(0..4);
        let gts: Vec<RigidTransform> = (0..n_gt)
            .map(|i| {
                RigidTransform::from_translation(Vector3::new(i as f64 * 0.2, 0.0, 0.0))
            })
            .collect();
        let visibility: Vec<f64> = (0..n_gt).map(|_| rng.random::<f64>()).collect();
        let n_det = rng.random_range(0..6);
        let detections: Vec<Detection> = (0..n_det)
            .map(|d| {
                let near = rng.random_range(0..n_gt);
                let jitter = random_point(&mut rng, 0.01).coords;
                Detection {
                    hypothesis: mvpose::fusion::PoseHypothesis {
                        pose: RigidTransform::from_translation(
                            gts[near].translation + jitter,
                        ),
                        keypoint_uncertainty: 0.0,
                        icp_error: Some(0.0),
                        confidence: Some(rng.random::<f64>() * 3.0),
                        cluster_id: d,
                    },
                    confidence: rng.random::<f64>() * 3.0,
                    object_id: "cuboid".into(),
                    scene_id: "prop".into(),
                }
            })
            .collect();
        let eval = evaluate_scene(&detections, &gts, &visibility, &model, 0.6);
        let mut claimed = std::collections::HashSet::new();
        for r in &eval.records {
            if let Some(gi) = r.matched_gt {
                assert!(claimed.insert(gi), "ground truth {gi} claimed twice");
            }
        }
        if !eval.records.is_empty() {
            let taus: Vec<f64> = (0..10).map(|i| i as f64 * 0.4).collect();
            let pr = mvpose::score::precision_recall(&[eval], &taus);
            for w in pr.windows(2) {
                assert!(w[0].recall <= w[1].recall + 1e-12, "recall not monotone");
            }
        }
    }
    "matching exclusive, recall monotone".to_string()
}

/// Scene generation is a pure function of its config.
pub fn check_simulator_determinism() -> String {
    let config = noisy_scene_config(ShapeSpec::flanged_cylinder(), 515);
    let a = generate(&config).unwrap();
    let b = generate(&config).unwrap();
    assert_eq!(a.ground_truth_poses.len(), b.ground_truth_poses.len());
    for (x, y) in a.ground_truth_poses.iter().zip(&b.ground_truth_poses) {
        assert_eq!(x.rotation, y.rotation);
        assert_eq!(x.translation, y.translation);
    }
    assert_eq!(a.visibility, b.visibility);
    assert_eq!(a.detections.len(), b.detections.len());
    for (x, y) in a.detections.iter().zip(&b.detections) {
        assert_eq!(x, y, "detection blocks differ");
    }
    format!("{} detection blocks bit-identical", a.detections.len())
}

/// Zero-noise depth pixels backproject onto the analytic surface, rendered
/// depth is the nearest instance along each ray, and visibility annotations
/// agree with the rendered pixels.
pub fn check_render_geometry() -> String {
    let mut config = SceneConfig::new(ShapeSpec::cuboid());
    config.rng_seed = 23;
    config.instance_count = 3;
    let scene = generate(&config).unwrap();
    let shape = ShapeSpec::cuboid();
    let mut checked = 0usize;
    for det in &scene.detections {
        let view = &scene.views[det.view_index];
        let pose_inv = scene.ground_truth_poses[det.instance_index].invert();
        let cloud = backproject(view, &det.depth);
        for p in cloud.points.iter().step_by(7) {
            let d = shape.surface_distance(&pose_inv.apply(p));
            assert!(d < 1e-6, "depth point {d:.2e} m off the surface");
            checked += 1;
        }
    }
    assert!(checked >= 1000);
    for (j, vis) in scene.visibility.iter().enumerate() {
        let pixels: usize = scene
            .detections
            .iter()
            .filter(|d| d.instance_index == j)
            .map(|d| d.depth.mask.iter().filter(|m| **m).count())
            .sum();
        assert_eq!(
            pixels > 0,
            *vis > 0.0,
            "instance {j}: pixels {pixels} vs visibility {vis}"
        );
    }
    format!("{checked} surface points verified")
}

/// Heatmap, pose, and cloud files round-trip bit- or value-exactly.
pub fn check_io_roundtrips(trials: usize) -> String {
    use mvpose::io;
    let dir = std::env::temp_dir().join(format!("mvpose-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(114);
    for i in 0..trials {
        let w = 1 + rng.random_range(0..24);
        let h = 1 + rng.random_range(0..24);
        let values: Vec<f32> = (0..w * h).map(|_| rng.random::<f32>()).collect();
        let map = Heatmap::new(i as u32, rng.random_range(0..10), w, h, values).unwrap();
        let path = dir.join("m.hmp");
        io::write_heatmap(&path, &map).unwrap();
        let back = io::read_heatmap(&path).unwrap();
        assert_eq!(map, back, "heatmap round-trip differs");

        let pose = random_transform(&mut rng);
        let pp = dir.join("p.txt");
        io::write_pose_file(&pp, &pose).unwrap();
        let back = io::read_pose_file(&pp).unwrap();
        assert_eq!(pose.rotation, back.rotation);
        assert_eq!(pose.translation, back.translation);

        let n = 1 + rng.random_range(0..40);
        let cloud = ScoredCloud {
            points: (0..n).map(|_| random_point(&mut rng, 10.0)).collect(),
            scores: (0..n).map(|_| rng.random::<f64>()).collect(),
        };
        let cp = dir.join("c.ply");
        io::write_cloud_ply(&cp, &cloud, true).unwrap();
        let back = io::read_cloud_ply(&cp).unwrap();
        assert_eq!(cloud, back, "cloud round-trip differs");
    }
    let _ = std::fs::remove_dir_all(&dir);
    format!("{trials} random round-trips bit/value exact")
}
