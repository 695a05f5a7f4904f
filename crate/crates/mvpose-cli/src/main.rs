//! Command-line pipeline: simulate synthetic bin scenes, estimate poses from
//! scene manifests, evaluate detections against ground truth, and report
//! pooled precision-recall tables.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use nalgebra::Vector3;

use mvpose::io;
use mvpose::pipeline::{estimate, EstimateConfig};
use mvpose::refine::IcpParams;
use mvpose::score::{evaluate_scene, precision_recall, SceneEvaluation};
use mvpose::shapes::ShapeSpec;
use mvpose::simulate::{generate, SceneConfig};

#[derive(Parser)]
#[command(
    name = "mvpose",
    about = "Multi-view 6D pose estimation: synthetic scenes, pose retrieval, evaluation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic bin scene and write it as a scene directory.
    Simulate(SimulateArgs),
    /// Estimate object poses from a scene manifest.
    Estimate(EstimateArgs),
    /// Evaluate a detections file against the scene's ground truth.
    Evaluate(EvaluateArgs),
    /// Pool evaluation summaries into precision-recall and histogram tables.
    Report(ReportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Output scene directory.
    #[arg(long)]
    out: PathBuf,
    /// Built-in shape: cuboid, l-bracket, or flanged-cylinder.
    #[arg(long, default_value = "cuboid")]
    shape: String,
    #[arg(long, default_value_t = 1)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    views: usize,
    /// Scene identifier embedded in the manifest.
    #[arg(long)]
    scene_id: Option<String>,
    /// Bin extent as x,y,z meters.
    #[arg(long, value_parser = parse_vector3)]
    bin_extent: Option<Vector3<f64>>,
    #[arg(long, default_value_t = 30.0)]
    cone_half_angle: f64,
    #[arg(long, default_value_t = 0.5)]
    camera_distance: f64,
    /// Square patch edge in pixels.
    #[arg(long, default_value_t = 192)]
    patch: u32,
    #[arg(long, default_value_t = 3.0)]
    heatmap_sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    heatmap_noise: f64,
    #[arg(long, default_value_t = 0.0)]
    depth_noise: f64,
    #[arg(long, default_value_t = 0.0)]
    outlier_fraction: f64,
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
}

#[derive(Args)]
struct EstimateArgs {
    /// Scene manifest path.
    #[arg(long)]
    manifest: PathBuf,
    /// Detections output file (JSON).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use only the first N views.
    #[arg(long)]
    views: Option<usize>,
    #[arg(long, default_value_t = mvpose::fusion::DEFAULT_RANSAC_ITERATIONS)]
    ransac_iters: usize,
    #[arg(long, default_value_t = mvpose::refine::DEFAULT_KEEP_QUANTILE)]
    keep_quantile: f64,
    /// Confidence weights as wU,wICP.
    #[arg(long, value_parser = parse_pair, default_value = "1,1")]
    conf_weights: (f64, f64),
    #[arg(long, default_value_t = mvpose::refine::DEFAULT_CORRESPONDENCE_CUTOFF)]
    icp_cutoff: f64,
    #[arg(long, default_value_t = mvpose::fusion::DEFAULT_TOP_N)]
    top_n: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Scene manifest path (must carry a ground-truth block).
    #[arg(long)]
    manifest: PathBuf,
    /// Detections file produced by `estimate`.
    #[arg(long)]
    detections: PathBuf,
    /// Per-detection CSV output.
    #[arg(long)]
    out_csv: PathBuf,
    /// Summary JSON output (consumed by `report`).
    #[arg(long)]
    out_summary: PathBuf,
    #[arg(long, default_value_t = mvpose::score::DEFAULT_VISIBILITY_FLOOR)]
    visibility_floor: f64,
}

#[derive(Args)]
struct ReportArgs {
    /// Evaluation summary JSON files.
    #[arg(long, num_args = 1.., required = true)]
    summaries: Vec<PathBuf>,
    /// Output directory for the report tables.
    #[arg(long)]
    out_dir: PathBuf,
    /// Number of confidence bins in the verdict histogram.
    #[arg(long, default_value_t = 20)]
    bins: usize,
}

fn parse_vector3(s: &str) -> Result<Vector3<f64>, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected x,y,z".into());
    }
    let mut v = [0f64; 3];
    for (slot, part) in v.iter_mut().zip(&parts) {
        *slot = part.trim().parse().map_err(|_| format!("bad number '{part}'"))?;
    }
    Ok(Vector3::new(v[0], v[1], v[2]))
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err("expected wU,wICP".into());
    }
    let a = parts[0].trim().parse().map_err(|_| "bad first weight")?;
    let b = parts[1].trim().parse().map_err(|_| "bad second weight")?;
    Ok((a, b))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = err
                .downcast_ref::<mvpose::Error>()
                .map(|e| e.code())
                .unwrap_or("Cli");
            eprintln!("error[{code}]: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Simulate(args) => simulate(args),
        Command::Estimate(args) => run_estimate(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Report(args) => report(args),
    }
}

fn simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let shape = ShapeSpec::by_name(&args.shape)
        .ok_or_else(|| anyhow!("unknown shape '{}' (cuboid, l-bracket, flanged-cylinder)", args.shape))?;
    let mut config = SceneConfig::new(shape);
    config.instance_count = args.instances;
    config.rng_seed = args.seed;
    config.view_count = args.views;
    config.cone_half_angle_deg = args.cone_half_angle;
    config.camera_distance = args.camera_distance;
    config.patch_size = (args.patch, args.patch);
    config.heatmap_sigma = args.heatmap_sigma;
    config.heatmap_noise = args.heatmap_noise;
    config.depth_noise = args.depth_noise;
    config.outlier_fraction = args.outlier_fraction;
    config.occlusion_dropout = args.dropout;
    if let Some(extent) = args.bin_extent {
        config.bin_extent = extent;
    }
    let scene = generate(&config)?;
    let scene_id = args
        .scene_id
        .unwrap_or_else(|| format!("{}-{}", args.shape, args.seed));
    let manifest = io::write_scene(&args.out, &scene, &scene_id)?;
    println!(
        "wrote scene '{}' ({} instances, {} views) to {}",
        scene_id,
        scene.ground_truth_poses.len(),
        scene.views.len(),
        manifest.display()
    );
    Ok(())
}

fn run_estimate(args: EstimateArgs) -> anyhow::Result<()> {
    let loaded = io::load_scene(&args.manifest)
        .with_context(|| format!("loading {}", args.manifest.display()))?;
    let config = EstimateConfig {
        seed: args.seed,
        view_limit: args.views,
        ransac_iterations: args.ransac_iters,
        top_n: args.top_n,
        keep_quantile: args.keep_quantile,
        confidence_weights: args.conf_weights,
        icp: IcpParams {
            correspondence_cutoff: args.icp_cutoff,
            ..IcpParams::default()
        },
        ..EstimateConfig::default()
    };
    let report = estimate(&loaded.inputs, &loaded.model, &config)?;
    let file = io::DetectionsFile::from_detections(&report.detections);
    io::write_detections(&args.out, &file)?;
    println!(
        "estimated {} detections over {} views -> {}",
        report.detections.len(),
        report.view_count,
        args.out.display()
    );
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> anyhow::Result<()> {
    let loaded = io::load_scene(&args.manifest)
        .with_context(|| format!("loading {}", args.manifest.display()))?;
    let ground_truth = loaded
        .ground_truth
        .ok_or_else(|| anyhow!("manifest has no ground-truth block"))?;
    let detections_file = io::read_detections(&args.detections)?;
    if detections_file.object_id != loaded.model.object_id {
        bail!(
            "detections are for object '{}', scene model is '{}'",
            detections_file.object_id,
            loaded.model.object_id
        );
    }
    let detections = detections_file.to_detections(&args.detections)?;
    let eval = evaluate_scene(
        &detections,
        &ground_truth.poses,
        &ground_truth.visibility,
        &loaded.model,
        args.visibility_floor,
    );
    io::write_eval_csv(
        &args.out_csv,
        &detections_file.scene_id,
        &detections_file.object_id,
        &eval,
    )?;
    let summary = io::EvalSummaryFile::from_evaluation(
        &detections_file.scene_id,
        &detections_file.object_id,
        &eval,
    );
    io::write_eval_summary(&args.out_summary, &summary)?;
    println!(
        "scene '{}': detection rate {:.3} ({}/{} visible), {} false positives",
        detections_file.scene_id,
        eval.summary.detection_rate,
        eval.summary.correct,
        eval.summary.visible_gt,
        eval.summary.false_positives
    );
    Ok(())
}

fn report(args: ReportArgs) -> anyhow::Result<()> {
    std::fs::create_dir_all(&args.out_dir)?;
    let mut evals: Vec<SceneEvaluation> = Vec::new();
    let mut confidences: Vec<f64> = Vec::new();
    for path in &args.summaries {
        let summary = io::read_eval_summary(path)?;
        let eval = summary.to_evaluation();
        confidences.extend(eval.records.iter().map(|r| r.confidence));
        evals.push(eval);
    }
    if confidences.is_empty() {
        bail!("no detections in the provided summaries");
    }
    confidences.sort_by(|a, b| a.partial_cmp(b).unwrap());
    confidences.dedup();

    let pr = precision_recall(&evals, &confidences);
    let mut table = String::from("threshold,precision,recall\n");
    for p in &pr {
        table.push_str(&format!("{},{},{}\n", p.threshold, p.precision, p.recall));
    }
    let pr_path = args.out_dir.join("precision_recall.csv");
    io::atomic_write(&pr_path, table.as_bytes())?;

    write_verdict_histogram(&args.out_dir.join("verdict_histogram.csv"), &evals, args.bins)?;

    let visible: usize = evals.iter().map(|e| e.summary.visible_gt).sum();
    let correct: usize = evals.iter().map(|e| e.summary.correct).sum();
    let fps: usize = evals.iter().map(|e| e.summary.false_positives).sum();
    println!(
        "pooled {} scenes: detection rate {:.3} ({correct}/{visible}), {fps} false positives; \
         tables in {}",
        evals.len(),
        if visible == 0 {
            0.0
        } else {
            correct as f64 / visible as f64
        },
        args.out_dir.display()
    );
    Ok(())
}

/// Histogram of detection verdicts over confidence bins: the data behind the
/// separability plots.
fn write_verdict_histogram(
    path: &Path,
    evals: &[SceneEvaluation],
    bins: usize,
) -> anyhow::Result<()> {
    let confidences: Vec<f64> = evals
        .iter()
        .flat_map(|e| e.records.iter().map(|r| r.confidence))
        .collect();
    let lo = confidences.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = confidences.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let bins = bins.max(1);
    let width = ((hi - lo) / bins as f64).max(1e-12);
    let mut counts = vec![[0usize; 4]; bins];
    for eval in evals {
        for r in &eval.records {
            let mut b = ((r.confidence - lo) / width) as usize;
            if b >= bins {
                b = bins - 1;
            }
            let class = match r.verdict {
                Some(mvpose::score::Verdict::Correct) => 0,
                Some(mvpose::score::Verdict::Intermediate) => 1,
                Some(mvpose::score::Verdict::Incorrect) => 2,
                None => 3,
            };
            counts[b][class] += 1;
        }
    }
    let mut out = String::from("bin_lo,bin_hi,correct,intermediate,incorrect,unmatched\n");
    for (i, c) in counts.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            lo + i as f64 * width,
            lo + (i + 1) as f64 * width,
            c[0],
            c[1],
            c[2],
            c[3]
        ));
    }
    io::atomic_write(path, out.as_bytes())?;
    Ok(())
}
