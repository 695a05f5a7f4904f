use mvpose::fusion::pose_keypoint_uncertainty;
use mvpose::heatmap::multiview_uncertainty;
use mvpose::pipeline::{estimate, EstimateConfig, SceneInputs};
use mvpose::shapes::ShapeSpec;
use mvpose::simulate::{generate, oracle_best_keypoint_with_maps, SceneConfig};

fn main() {
    let (radius, step) = (0.005f64, 0.0005f64);
    for i in 0..4u64 {
        let shape = if i % 2 == 0 { ShapeSpec::cuboid() } else { ShapeSpec::l_bracket() };
        let mut config = SceneConfig::new(shape);
        config.instance_count = 3;
        config.heatmap_sigma = 3.0;
        config.heatmap_noise = 0.05;
        config.depth_noise = 0.0005;
        config.outlier_fraction = 0.1;
        config.occlusion_dropout = 0.15;
        config.rng_seed = 1000 + i;
        let scene = generate(&config).unwrap();
        let inputs = SceneInputs::from_scene(&scene, "probe");
        let report = estimate(&inputs, &scene.model, &EstimateConfig { seed: i, ..Default::default() }).unwrap();
        let maps = scene.fused_maps();
        for cl in &report.clusters {
            let (gi, _) = scene.ground_truth_poses.iter().enumerate()
                .map(|(gi, g)| (gi, (g.translation - cl.center.coords).norm()))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap()).unwrap();
            let gt = &scene.ground_truth_poses[gi];
            let h = &cl.ransac_hypotheses[0];
            let u_gt = pose_keypoint_uncertainty(gt, &scene.model, &scene.views, &maps);
            let mut oracle_sum = 0.0;
            let mut details = String::new();
            for k in 0..scene.model.keypoint_count() {
                let (op, ou) = oracle_best_keypoint_with_maps(&scene, &maps, gi, k, radius, step).unwrap();
                oracle_sum += ou;
                let gp = gt.apply(&scene.model.origin_keypoints[k]);
                let gu = multiview_uncertainty(&gp, &scene.views, maps.for_keypoint(k));
                let rp = h.pose.apply(&scene.model.origin_keypoints[k]);
                let ru = multiview_uncertainty(&rp, &scene.views, maps.for_keypoint(k));
                details.push_str(&format!("   kp{k}: gt {:.2} oracle {:.2} (moved {:.1}mm) ransac {:.2}\n", gu, ou, (op - gp).norm()*1e3, ru));
            }
            println!("scene {i} cluster {}: ransac {:.2} gtpose {:.2} oracle {:.2} ratio {:.3} gtratio {:.3}",
                cl.cluster_id, h.keypoint_uncertainty, u_gt, oracle_sum,
                h.keypoint_uncertainty / oracle_sum, u_gt / oracle_sum);
            if h.keypoint_uncertainty / oracle_sum > 1.15 { print!("{details}"); }
        }
    }
}
