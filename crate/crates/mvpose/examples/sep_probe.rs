use mvpose::geometry::{Point3, RigidTransform};
use mvpose::model::KeypointModel;
use mvpose::pipeline::{estimate, EstimateConfig, SceneInputs};
use mvpose::score::{evaluate_scene, precision_recall, spearman_rank_correlation};
use mvpose::shapes::ShapeSpec;
use mvpose::simulate::{generate, SceneConfig};
use nalgebra::Vector3;

fn corrupted_model(model: &KeypointModel) -> KeypointModel {
    let spin = RigidTransform::from_axis_angle(&Vector3::new(1.0, 2.0, 3.0), 75f64.to_radians());
    let mut keypoints: Vec<Point3> = vec![model.origin_keypoints[0]];
    for kp in &model.origin_keypoints[1..] {
        let rel = kp - model.origin_keypoints[0];
        keypoints.push(model.origin_keypoints[0] + spin.rotate(&rel) * 0.85);
    }
    KeypointModel::new(
        format!("{}-corrupted", model.object_id),
        keypoints,
        model.surface_points.clone(),
        None,
    )
    .unwrap()
}

fn main() {
    let mut evals = Vec::new();
    let mut confs = Vec::new();
    let mut adds = Vec::new();
    for i in 0..10u64 {
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
        let inputs = SceneInputs::from_scene(&scene, &format!("s{i}"));
        let cfg = EstimateConfig { seed: i, ..Default::default() };
        let mut detections = estimate(&inputs, &scene.model, &cfg).unwrap().detections;
        let bad_model = corrupted_model(&scene.model);
        match estimate(&inputs, &bad_model, &cfg) {
            Ok(rep) => {
                println!("scene {i}: {} correct-run dets (conf {:?}), {} corrupted dets (conf {:?})",
                    detections.len(),
                    detections.iter().map(|d| (d.confidence * 100.0).round() / 100.0).collect::<Vec<_>>(),
                    rep.detections.len(),
                    rep.detections.iter().map(|d| (d.confidence * 100.0).round() / 100.0).collect::<Vec<_>>());
                detections.extend(rep.detections);
            }
            Err(e) => println!("scene {i}: corrupted estimate failed ({e})"),
        }
        let eval = evaluate_scene(&detections, &scene.ground_truth_poses, &scene.visibility, &scene.model, 0.6);
        for r in &eval.records {
            confs.push(r.confidence);
            // Unmatched detections carry no ADD; use a large sentinel for rank correlation.
            adds.push(r.add_error.unwrap_or(10.0 * scene.model.diameter));
        }
        evals.push(eval);
    }
    let mut taus: Vec<f64> = confs.clone();
    taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pr = precision_recall(&evals, &taus);
    let best = pr
        .iter()
        .filter(|p| p.precision == 1.0)
        .map(|p| p.recall)
        .fold(0.0f64, f64::max);
    println!("max recall at precision 1.0: {best:.3}");
    println!("spearman(conf, add) pooled: {:.3}", spearman_rank_correlation(&confs, &adds));
}
