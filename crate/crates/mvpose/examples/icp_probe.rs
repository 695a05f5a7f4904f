use std::time::Instant;

use mvpose::refine::{backproject, filter_cloud, icp, score_cloud, IcpParams, ScoredCloud, VoteTarget};
use mvpose::shapes::ShapeSpec;
use mvpose::simulate::{generate, SceneConfig};
use nalgebra::Vector3;

fn main() {
    for (patch, spacing, factor, stages) in [
        (512u32, 0.001f64, 2.0f64, 4usize),
        (512, 0.001, 1.5, 4),
        (512, 0.0015, 2.0, 4),
        (384, 0.001, 1.5, 5),
    ] {
        for seed in [11u64, 42, 77, 5, 9] {
            let t0 = Instant::now();
            let mut config = SceneConfig::new(ShapeSpec::cuboid_with_spacing(spacing));
            config.rng_seed = seed;
            config.patch_size = (patch, patch);
            config.bin_extent = Vector3::new(0.02, 0.02, 0.02);
            let scene = generate(&config).unwrap();
            let truth = scene.ground_truth_poses[0];
            let model = &scene.model;
            let maps = scene.fused_maps();

            let mut cloud = ScoredCloud::default();
            let mut targets = Vec::new();
            for det in &scene.detections {
                let part = backproject(&scene.views[det.view_index], &det.depth);
                targets.extend(det.votes.iter().map(|v| VoteTarget { keypoint_id: v.keypoint_id, position: v.position }));
                cloud.extend(&part);
            }
            let scored = score_cloud(&cloud, &targets, &scene.views, &maps);
            let filtered = filter_cloud(&scored, 0.8);

            let mut pose = truth;
            let mut rms = f64::INFINITY;
            for &c in &[0.01, 0.01 / 3.0, 0.001] {
                let params = IcpParams { correspondence_cutoff: c, ..IcpParams::default() };
                if let Ok(r) = icp(&model.surface_points, &filtered, &pose, &params) { pose = r.pose; rms = r.rms_error; }
            }
            for _ in 0..stages {
                let c = (factor * rms).max(5e-5);
                let params = IcpParams { correspondence_cutoff: c, max_iterations: 80, ..IcpParams::default() };
                match icp(&model.surface_points, &filtered, &pose, &params) {
                    Ok(r) => { pose = r.pose; let prev = rms; rms = r.rms_error; if rms >= prev * 0.97 { break; } }
                    Err(_) => break,
                }
            }
            println!("patch {patch} sp {spacing} f {factor} st {stages} seed {seed}: trans {:.1} um rot {:.4} deg  (model {} pts, scene {} pts, {:?})",
                pose.translation_distance_to(&truth) * 1e6, pose.rotation_angle_to(&truth).to_degrees(),
                model.surface_points.len(), filtered.points.len(), t0.elapsed());
        }
    }
}
