use std::time::Instant;

use mvpose::pipeline::{estimate, EstimateConfig, SceneInputs};
use mvpose::score::{add_error, evaluate_scene, spearman_rank_correlation, Detection};
use mvpose::shapes::ShapeSpec;
use mvpose::simulate::{generate, oracle_best_keypoint_with_maps, SceneConfig};

fn noisy_config(shape: ShapeSpec, seed: u64) -> SceneConfig {
    let mut c = SceneConfig::new(shape);
    c.instance_count = 3;
    c.heatmap_sigma = 3.0;
    c.heatmap_noise = 0.05;
    c.depth_noise = 0.0005;
    c.outlier_fraction = 0.1;
    c.occlusion_dropout = 0.15;
    c.rng_seed = seed;
    c
}

fn median(v: &mut Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if v.is_empty() { f64::NAN } else { v[v.len() / 2] }
}

fn main() {
    let t_all = Instant::now();
    let n_scenes = 14u64;
    let mut trans_errs = Vec::new();
    let mut rot_errs = Vec::new();
    let mut correct = 0usize;
    let mut visible = 0usize;
    let mut fps = 0usize;
    let mut add_filtered = Vec::new();
    let mut add_unfiltered = Vec::new();
    let mut trans_by_views: Vec<Vec<f64>> = vec![Vec::new(); 3];
    let mut oracle_ratios = Vec::new();
    let mut confs = Vec::new();
    let mut adds_for_corr = Vec::new();

    for i in 0..n_scenes {
        let shape = if i % 2 == 0 { ShapeSpec::cuboid() } else { ShapeSpec::l_bracket() };
        let config = noisy_config(shape, 1000 + i);
        let t0 = Instant::now();
        let scene = generate(&config).unwrap();
        let inputs = SceneInputs::from_scene(&scene, &format!("s{i}"));
        let cfg = EstimateConfig { seed: i, ..EstimateConfig::default() };
        let report = match estimate(&inputs, &scene.model, &cfg) {
            Ok(r) => r,
            Err(e) => { println!("scene {i}: estimate failed: {e}"); continue; }
        };
        let eval = evaluate_scene(&report.detections, &scene.ground_truth_poses, &scene.visibility, &scene.model, 0.6);
        correct += eval.summary.correct;
        visible += eval.summary.visible_gt;
        fps += eval.summary.false_positives;
        for r in &eval.records {
            if let (Some(gi), Some(add)) = (r.matched_gt, r.add_error) {
                let det = &report.detections[r.detection_idx];
                let gt = &scene.ground_truth_poses[gi];
                if r.verdict == Some(mvpose::score::Verdict::Correct) {
                    trans_errs.push(det.hypothesis.pose.translation_distance_to(gt) * 1e3);
                    rot_errs.push(det.hypothesis.pose.rotation_angle_to(gt).to_degrees());
                }
                confs.push(r.confidence);
                adds_for_corr.push(add);
                add_filtered.push(add);
            }
        }
        // unfiltered comparison
        let cfg_unf = EstimateConfig { seed: i, keep_quantile: 1.0, ..EstimateConfig::default() };
        if let Ok(rep_u) = estimate(&inputs, &scene.model, &cfg_unf) {
            let eval_u = evaluate_scene(&rep_u.detections, &scene.ground_truth_poses, &scene.visibility, &scene.model, 0.6);
            for r in &eval_u.records {
                if let Some(add) = r.add_error { add_unfiltered.push(add); }
            }
        }
        // view sweep: best-hypothesis translation error per visible instance
        for (vi, &views) in [2usize, 4, 8].iter().enumerate() {
            let cfg_v = EstimateConfig { seed: i, view_limit: Some(views), ..EstimateConfig::default() };
            if let Ok(rep_v) = estimate(&inputs, &scene.model, &cfg_v) {
                for cl in &rep_v.clusters {
                    let best = &cl.ransac_hypotheses[0];
                    // match cluster to nearest GT center
                    let gt = scene.ground_truth_poses.iter()
                        .min_by(|a, b| {
                            let da = (a.translation - cl.center.coords).norm();
                            let db = (b.translation - cl.center.coords).norm();
                            da.partial_cmp(&db).unwrap()
                        }).unwrap();
                    trans_by_views[vi].push(best.pose.translation_distance_to(gt) * 1e3);
                }
            }
        }
        // oracle comparison
        let maps = scene.fused_maps();
        for cl in &report.clusters {
            let (gi, _) = scene.ground_truth_poses.iter().enumerate()
                .map(|(gi, g)| (gi, (g.translation - cl.center.coords).norm()))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap()).unwrap();
            let mut oracle_sum = 0.0;
            for k in 0..scene.model.keypoint_count() {
                let (_, u) = oracle_best_keypoint_with_maps(&scene, &maps, gi, k, 0.00025, 0.00025).unwrap();
                oracle_sum += u;
            }
            let best = &cl.ransac_hypotheses[0];
            oracle_ratios.push(best.keypoint_uncertainty / oracle_sum);
        }
        if eval.summary.false_positives > 0 || eval.summary.correct < eval.summary.visible_gt {
            for r in &eval.records {
                println!("  det {} conf {:.3} matched {:?} add {:?} verdict {:?}", r.detection_idx, r.confidence, r.matched_gt, r.add_error.map(|a| a*1e3), r.verdict);
            }
        }
        println!("scene {i}: rate {}/{} fps {} ({:?})", eval.summary.correct, eval.summary.visible_gt, eval.summary.false_positives, t0.elapsed());
    }

    println!("\n== detection rate: {}/{} = {:.3}, false positives {}", correct, visible, correct as f64 / visible as f64, fps);
    println!("== median correct trans {:.3} mm rot {:.3} deg (n={})", median(&mut trans_errs), median(&mut rot_errs), rot_errs.len());
    println!("== median ADD filtered {:.4} mm (n={}) vs unfiltered {:.4} mm (n={})",
        median(&mut add_filtered) * 1e3, adds_for_corr.len(), median(&mut add_unfiltered) * 1e3, add_unfiltered.len());
    let m2 = median(&mut trans_by_views[0]);
    let m4 = median(&mut trans_by_views[1]);
    let m8 = median(&mut trans_by_views[2]);
    println!("== view sweep medians: 2v {:.3} mm, 4v {:.3} mm, 8v {:.3} mm", m2, m4, m8);
    let mut sorted = oracle_ratios.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!("== oracle ratio: max {:.4} median {:.4} (n={})", sorted.last().unwrap(), sorted[sorted.len()/2], sorted.len());
    println!("== spearman(conf, add) = {:.3}", spearman_rank_correlation(&confs, &adds_for_corr));
    let _ = Detection { hypothesis: mvpose::fusion::PoseHypothesis { pose: mvpose::geometry::RigidTransform::identity(), keypoint_uncertainty: 0.0, icp_error: None, confidence: None, cluster_id: 0 }, confidence: 0.0, object_id: String::new(), scene_id: String::new() };
    let _ = add_error;
    println!("total {:?}", t_all.elapsed());
}
