use mvpose::pipeline::{estimate, EstimateConfig, SceneInputs};
use mvpose::shapes::ShapeSpec;
use mvpose::simulate::{generate, SceneConfig};

fn main() {
    for i in [9u64, 11] {
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
        let inputs = SceneInputs::from_scene(&scene, "fp");
        let cfg = EstimateConfig { seed: i, ..Default::default() };
        let report = estimate(&inputs, &scene.model, &cfg).unwrap();
        println!("scene {i}: {} clusters, {} detections, visibility {:?}", report.clusters.len(), report.detections.len(), scene.visibility);
        for cl in &report.clusters {
            let dists: Vec<f64> = scene.ground_truth_poses.iter().map(|g| (g.translation - cl.center.coords).norm() * 1e3).collect();
            println!("  cluster {}: attached {} imgs, dist to GTs (mm) {:?}", cl.cluster_id, cl.attached_images, dists.iter().map(|d| (d * 10.0).round() / 10.0).collect::<Vec<_>>());
        }
        for d in &report.detections {
            println!("  detection cluster {} conf {:.3}", d.hypothesis.cluster_id, d.confidence);
        }
    }
}
