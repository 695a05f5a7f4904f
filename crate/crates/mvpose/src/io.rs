//! File formats: binary heatmap grids, ASCII PLY clouds, JSON manifests,
//! pose files, detection files, and evaluation outputs.
//!
//! All writes are whole-file atomic (write to a temp file, then rename).
//! Binary formats round-trip bit-exactly; text formats round-trip value-exact
//! (f64 values are printed with shortest round-trip formatting).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraView, Point3, RigidTransform};
use crate::heatmap::Heatmap;
use crate::model::KeypointModel;
use crate::pipeline::{ImageInputs, SceneInputs};
use crate::refine::{DepthImage, ScoredCloud};
use crate::score::{SceneEvaluation, Verdict};
use crate::simulate::{PixelVote, SyntheticScene};

pub const SCENE_SCHEMA_VERSION: u32 = 1;
pub const MODEL_SCHEMA_VERSION: u32 = 1;
pub const DETECTIONS_SCHEMA_VERSION: u32 = 1;
pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

const HEATMAP_MAGIC: &[u8; 4] = b"HMP1";
const DEPTH_MAGIC: &[u8; 4] = b"DEP1";
const VOTES_MAGIC: &[u8; 4] = b"VOT1";

/// Write bytes atomically: temp file in the same directory, then rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => d.join(format!(
            ".{}.tmp{}",
            path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default(),
            std::process::id()
        )),
        None => PathBuf::from(format!(".atomic.tmp{}", std::process::id())),
    };
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn parse_error(path: &Path, location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::ParseError {
        path: path.display().to_string(),
        location: location.into(),
        message: message.into(),
    }
}

// ── Heatmap files ─────────────────────────────────────────────────────────

/// Binary layout: magic "HMP1"; little-endian u32 width, height, view_id,
/// keypoint_id; then width*height f32 probabilities, row-major, top-left
/// origin.
pub fn write_heatmap(path: &Path, map: &Heatmap) -> Result<()> {
    let mut bytes = Vec::with_capacity(20 + map.values.len() * 4);
    bytes.extend_from_slice(HEATMAP_MAGIC);
    for v in [map.width, map.height, map.view_id, map.keypoint_id] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    for v in &map.values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    atomic_write(path, &bytes)
}

pub fn read_heatmap(path: &Path) -> Result<Heatmap> {
    let bytes = fs::read(path)?;
    if bytes.len() < 20 {
        return Err(parse_error(
            path,
            "header",
            format!("file is {} bytes, header needs 20", bytes.len()),
        ));
    }
    if &bytes[0..4] != HEATMAP_MAGIC {
        return Err(Error::SchemaMismatch {
            path: path.display().to_string(),
            expected: "HMP1".into(),
            found: String::from_utf8_lossy(&bytes[0..4]).into_owned(),
        });
    }
    let u32_at = |offset: usize| {
        u32::from_le_bytes([
            bytes[offset],
            bytes[offset + 1],
            bytes[offset + 2],
            bytes[offset + 3],
        ])
    };
    let width = u32_at(4);
    let height = u32_at(8);
    let view_id = u32_at(12);
    let keypoint_id = u32_at(16);
    let expected = 20 + (width as usize) * (height as usize) * 4;
    if bytes.len() != expected {
        return Err(parse_error(
            path,
            format!("byte {}", bytes.len().min(expected)),
            format!("payload length mismatch: expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    let values: Vec<f32> = bytes[20..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Heatmap::new(view_id, keypoint_id, width, height, values)
        .map_err(|e| parse_error(path, "payload", e.to_string()))
}

// ── Depth files ───────────────────────────────────────────────────────────

/// Binary layout: magic "DEP1"; little-endian u32 width, height, view_id,
/// instance; then width*height f32 depth (0 = missing), then width*height
/// u8 mask flags.
pub fn write_depth(path: &Path, image: &DepthImage, instance: u32) -> Result<()> {
    let n = image.depth.len();
    let mut bytes = Vec::with_capacity(20 + n * 5);
    bytes.extend_from_slice(DEPTH_MAGIC);
    for v in [image.width, image.height, image.view_id, instance] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    for v in &image.depth {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes.extend(image.mask.iter().map(|&m| u8::from(m)));
    atomic_write(path, &bytes)
}

pub fn read_depth(path: &Path) -> Result<(DepthImage, u32)> {
    let bytes = fs::read(path)?;
    if bytes.len() < 20 {
        return Err(parse_error(path, "header", "file shorter than 20-byte header"));
    }
    if &bytes[0..4] != DEPTH_MAGIC {
        return Err(Error::SchemaMismatch {
            path: path.display().to_string(),
            expected: "DEP1".into(),
            found: String::from_utf8_lossy(&bytes[0..4]).into_owned(),
        });
    }
    let u32_at = |offset: usize| {
        u32::from_le_bytes([
            bytes[offset],
            bytes[offset + 1],
            bytes[offset + 2],
            bytes[offset + 3],
        ])
    };
    let width = u32_at(4);
    let height = u32_at(8);
    let view_id = u32_at(12);
    let instance = u32_at(16);
    let n = (width as usize) * (height as usize);
    let expected = 20 + n * 5;
    if bytes.len() != expected {
        return Err(parse_error(
            path,
            "payload",
            format!("expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    let depth: Vec<f32> = bytes[20..20 + n * 4]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let mask: Vec<bool> = bytes[20 + n * 4..].iter().map(|&b| b != 0).collect();
    let image = DepthImage {
        view_id,
        width,
        height,
        depth,
        mask,
    };
    image
        .validate()
        .map_err(|e| parse_error(path, "payload", e.to_string()))?;
    Ok((image, instance))
}

// ── Vote files ────────────────────────────────────────────────────────────

/// Binary layout: magic "VOT1"; little-endian u32 count, view_id, instance;
/// then per vote u32 px, u32 py, u32 keypoint_id and three f64 world
/// coordinates. Votes are stored in row-major masked-pixel order.
pub fn write_votes(path: &Path, view_id: u32, instance: u32, votes: &[PixelVote]) -> Result<()> {
    let mut bytes = Vec::with_capacity(16 + votes.len() * 36);
    bytes.extend_from_slice(VOTES_MAGIC);
    for v in [votes.len() as u32, view_id, instance] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    for vote in votes {
        bytes.extend_from_slice(&vote.pixel.0.to_le_bytes());
        bytes.extend_from_slice(&vote.pixel.1.to_le_bytes());
        bytes.extend_from_slice(&vote.keypoint_id.to_le_bytes());
        for c in [vote.position.x, vote.position.y, vote.position.z] {
            bytes.extend_from_slice(&c.to_le_bytes());
        }
    }
    atomic_write(path, &bytes)
}

pub fn read_votes(path: &Path) -> Result<(u32, u32, Vec<PixelVote>)> {
    let bytes = fs::read(path)?;
    if bytes.len() < 16 {
        return Err(parse_error(path, "header", "file shorter than 16-byte header"));
    }
    if &bytes[0..4] != VOTES_MAGIC {
        return Err(Error::SchemaMismatch {
            path: path.display().to_string(),
            expected: "VOT1".into(),
            found: String::from_utf8_lossy(&bytes[0..4]).into_owned(),
        });
    }
    let u32_at = |offset: usize| {
        u32::from_le_bytes([
            bytes[offset],
            bytes[offset + 1],
            bytes[offset + 2],
            bytes[offset + 3],
        ])
    };
    let count = u32_at(4) as usize;
    let view_id = u32_at(8);
    let instance = u32_at(12);
    let expected = 16 + count * 36;
    if bytes.len() != expected {
        return Err(parse_error(
            path,
            "payload",
            format!("expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    let f64_at = |offset: usize| {
        let mut b = [0u8; 8];
        b.copy_from_slice(&bytes[offset..offset + 8]);
        f64::from_le_bytes(b)
    };
    let mut votes = Vec::with_capacity(count);
    for i in 0..count {
        let base = 16 + i * 36;
        votes.push(PixelVote {
            pixel: (u32_at(base), u32_at(base + 4)),
            keypoint_id: u32_at(base + 8),
            position: Point3::new(f64_at(base + 12), f64_at(base + 20), f64_at(base + 28)),
        });
    }
    Ok((view_id, instance, votes))
}

// ── ASCII PLY point clouds ────────────────────────────────────────────────

/// ASCII PLY with double x/y/z properties and an optional score property.
pub fn write_cloud_ply(path: &Path, cloud: &ScoredCloud, with_scores: bool) -> Result<()> {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    out.push_str(&format!("element vertex {}\n", cloud.len()));
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    if with_scores {
        out.push_str("property double score\n");
    }
    out.push_str("end_header\n");
    for (p, s) in cloud.points.iter().zip(&cloud.scores) {
        if with_scores {
            out.push_str(&format!("{} {} {} {}\n", p.x, p.y, p.z, s));
        } else {
            out.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
        }
    }
    atomic_write(path, out.as_bytes())
}

/// Read an ASCII PLY; missing score property defaults every score to 1.
pub fn read_cloud_ply(path: &Path) -> Result<ScoredCloud> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let mut line_no = 0;
    let mut expect = |want: Option<&str>| -> Result<(usize, String)> {
        match lines.next() {
            Some((n, l)) => {
                line_no = n + 1;
                if let Some(w) = want {
                    if l.trim() != w {
                        return Err(parse_error(
                            path,
                            format!("line {}", n + 1),
                            format!("expected '{w}', found '{l}'"),
                        ));
                    }
                }
                Ok((n + 1, l.to_string()))
            }
            None => Err(parse_error(path, format!("line {}", line_no + 1), "unexpected end of file")),
        }
    };
    expect(Some("ply"))?;
    expect(Some("format ascii 1.0"))?;

    let mut vertex_count: Option<usize> = None;
    let mut properties: Vec<String> = Vec::new();
    loop {
        let (n, line) = expect(None)?;
        let line = line.trim().to_string();
        if line == "end_header" {
            break;
        }
        if line.starts_with("comment") {
            continue;
        }
        if let Some(rest) = line.strip_prefix("element vertex ") {
            vertex_count = Some(rest.trim().parse().map_err(|_| {
                parse_error(path, format!("line {n}"), "bad vertex count")
            })?);
        } else if line.starts_with("element ") {
            return Err(parse_error(
                path,
                format!("line {n}"),
                "only vertex elements are supported",
            ));
        } else if let Some(rest) = line.strip_prefix("property ") {
            let mut parts = rest.split_whitespace();
            let ty = parts.next().unwrap_or_default();
            let name = parts.next().unwrap_or_default();
            if !matches!(ty, "float" | "double" | "float32" | "float64") {
                return Err(parse_error(
                    path,
                    format!("line {n}"),
                    format!("unsupported property type '{ty}'"),
                ));
            }
            properties.push(name.to_string());
        }
    }
    let vertex_count = vertex_count
        .ok_or_else(|| parse_error(path, "header", "missing 'element vertex' line"))?;
    let idx = |name: &str| properties.iter().position(|p| p == name);
    let (ix, iy, iz) = match (idx("x"), idx("y"), idx("z")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(parse_error(path, "header", "missing x/y/z properties")),
    };
    let iscore = idx("score");

    let mut cloud = ScoredCloud::default();
    for _ in 0..vertex_count {
        let (n, line) = expect(None)?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != properties.len() {
            return Err(parse_error(
                path,
                format!("line {n}"),
                format!("expected {} fields, found {}", properties.len(), fields.len()),
            ));
        }
        let parse = |i: usize| -> Result<f64> {
            fields[i]
                .parse()
                .map_err(|_| parse_error(path, format!("line {n}"), format!("bad float '{}'", fields[i])))
        };
        cloud
            .points
            .push(Point3::new(parse(ix)?, parse(iy)?, parse(iz)?));
        cloud.scores.push(match iscore {
            Some(i) => parse(i)?,
            None => 1.0,
        });
    }
    Ok(cloud)
}

// ── Pose files ────────────────────────────────────────────────────────────

/// A pose file is four lines of four whitespace-separated values: the
/// row-major 4x4 homogeneous matrix.
pub fn write_pose_file(path: &Path, pose: &RigidTransform) -> Result<()> {
    let m = pose.to_matrix_row_major();
    let mut out = String::new();
    for r in 0..4 {
        out.push_str(&format!(
            "{} {} {} {}\n",
            m[r * 4],
            m[r * 4 + 1],
            m[r * 4 + 2],
            m[r * 4 + 3]
        ));
    }
    atomic_write(path, out.as_bytes())
}

pub fn read_pose_file(path: &Path) -> Result<RigidTransform> {
    let text = fs::read_to_string(path)?;
    let values: Vec<f64> = text
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| parse_error(path, "body", format!("bad float '{t}'")))
        })
        .collect::<Result<_>>()?;
    if values.len() != 16 {
        return Err(parse_error(
            path,
            "body",
            format!("expected 16 values, found {}", values.len()),
        ));
    }
    let mut m = [0f64; 16];
    m.copy_from_slice(&values);
    RigidTransform::from_matrix_row_major(&m)
}

// ── Model manifests ───────────────────────────────────────────────────────

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelManifest {
    pub schema_version: u32,
    pub object_id: String,
    pub keypoints: Vec<[f64; 3]>,
    /// Surface PLY path, relative to this manifest.
    pub surface: String,
    pub diameter: f64,
}

pub fn save_model(dir: &Path, model: &KeypointModel) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let surface_name = "surface.ply";
    let cloud = ScoredCloud {
        points: model.surface_points.clone(),
        scores: vec![1.0; model.surface_points.len()],
    };
    write_cloud_ply(&dir.join(surface_name), &cloud, false)?;
    let manifest = ModelManifest {
        schema_version: MODEL_SCHEMA_VERSION,
        object_id: model.object_id.clone(),
        keypoints: model
            .origin_keypoints
            .iter()
            .map(|p| [p.x, p.y, p.z])
            .collect(),
        surface: surface_name.to_string(),
        diameter: model.diameter,
    };
    let path = dir.join("model.json");
    atomic_write(&path, serde_json::to_string_pretty(&manifest).unwrap().as_bytes())?;
    Ok(path)
}

/// Load and validate a model: the declared diameter must match the surface
/// within tolerance and all model invariants must hold.
pub fn load_model(manifest_path: &Path) -> Result<KeypointModel> {
    let text = fs::read_to_string(manifest_path)?;
    let manifest: ModelManifest = serde_json::from_str(&text)
        .map_err(|e| parse_error(manifest_path, format!("line {}", e.line()), e.to_string()))?;
    if manifest.schema_version != MODEL_SCHEMA_VERSION {
        return Err(Error::SchemaMismatch {
            path: manifest_path.display().to_string(),
            expected: MODEL_SCHEMA_VERSION.to_string(),
            found: manifest.schema_version.to_string(),
        });
    }
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let surface = read_cloud_ply(&dir.join(&manifest.surface))?;
    KeypointModel::new(
        manifest.object_id,
        manifest
            .keypoints
            .iter()
            .map(|k| Point3::new(k[0], k[1], k[2]))
            .collect(),
        surface.points,
        Some(manifest.diameter),
    )
}

// ── Scene manifests ───────────────────────────────────────────────────────

#[derive(Debug, Serialize, Deserialize)]
pub struct CameraEntry {
    pub view_id: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Row-major 4x4 world-to-camera matrix.
    pub world_to_camera: Vec<f64>,
    pub patch_origin: [f64; 2],
    pub patch_size: [u32; 2],
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DetectionEntry {
    pub view_id: u32,
    pub instance: u32,
    /// One heatmap file per keypoint, in keypoint order.
    pub heatmaps: Vec<String>,
    pub depth: String,
    pub votes: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GroundTruthEntry {
    /// Row-major 4x4 object poses.
    pub poses: Vec<Vec<f64>>,
    pub visibility: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SceneManifest {
    pub schema_version: u32,
    pub scene_id: String,
    pub object_manifest: String,
    pub cameras: Vec<CameraEntry>,
    pub detections: Vec<DetectionEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruthEntry>,
}

#[derive(Debug, Clone)]
pub struct SceneGroundTruth {
    pub poses: Vec<RigidTransform>,
    pub visibility: Vec<f64>,
}

/// Everything `estimate` and `evaluate` need, loaded from disk.
pub struct LoadedScene {
    pub inputs: SceneInputs,
    pub model: KeypointModel,
    pub ground_truth: Option<SceneGroundTruth>,
}

/// Write a complete synthetic scene (model, manifest, heatmaps, depth,
/// votes, ground truth) into `dir`. Returns the manifest path.
pub fn write_scene(dir: &Path, scene: &SyntheticScene, scene_id: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    save_model(dir, &scene.model)?;

    let cameras: Vec<CameraEntry> = scene
        .views
        .iter()
        .map(|v| CameraEntry {
            view_id: v.view_id,
            fx: v.fx,
            fy: v.fy,
            cx: v.cx,
            cy: v.cy,
            world_to_camera: v.world_to_camera.to_matrix_row_major().to_vec(),
            patch_origin: [v.patch_origin.0, v.patch_origin.1],
            patch_size: [v.patch_size.0, v.patch_size.1],
        })
        .collect();

    let mut detections = Vec::with_capacity(scene.detections.len());
    for det in &scene.detections {
        let v = det.view_index;
        let j = det.instance_index;
        let mut heatmap_names = Vec::with_capacity(det.heatmaps.len());
        for (k, map) in det.heatmaps.iter().enumerate() {
            let name = format!("hm_v{v}_i{j}_k{k}.hmp");
            write_heatmap(&dir.join(&name), map)?;
            heatmap_names.push(name);
        }
        let depth_name = format!("depth_v{v}_i{j}.dep");
        write_depth(&dir.join(&depth_name), &det.depth, j as u32)?;
        let votes_name = format!("votes_v{v}_i{j}.vot");
        write_votes(&dir.join(&votes_name), det.depth.view_id, j as u32, &det.votes)?;
        detections.push(DetectionEntry {
            view_id: det.depth.view_id,
            instance: j as u32,
            heatmaps: heatmap_names,
            depth: depth_name,
            votes: votes_name,
        });
    }

    let manifest = SceneManifest {
        schema_version: SCENE_SCHEMA_VERSION,
        scene_id: scene_id.to_string(),
        object_manifest: "model.json".to_string(),
        cameras,
        detections,
        ground_truth: Some(GroundTruthEntry {
            poses: scene
                .ground_truth_poses
                .iter()
                .map(|p| p.to_matrix_row_major().to_vec())
                .collect(),
            visibility: scene.visibility.clone(),
        }),
    };
    let path = dir.join("manifest.json");
    atomic_write(&path, serde_json::to_string_pretty(&manifest).unwrap().as_bytes())?;
    Ok(path)
}

fn matrix_from_vec(path: &Path, values: &[f64]) -> Result<RigidTransform> {
    if values.len() != 16 {
        return Err(parse_error(
            path,
            "matrix",
            format!("expected 16 values, found {}", values.len()),
        ));
    }
    let mut m = [0f64; 16];
    m.copy_from_slice(values);
    RigidTransform::from_matrix_row_major(&m)
}

pub fn load_scene(manifest_path: &Path) -> Result<LoadedScene> {
    let text = fs::read_to_string(manifest_path)?;
    let manifest: SceneManifest = serde_json::from_str(&text)
        .map_err(|e| parse_error(manifest_path, format!("line {}", e.line()), e.to_string()))?;
    if manifest.schema_version != SCENE_SCHEMA_VERSION {
        return Err(Error::SchemaMismatch {
            path: manifest_path.display().to_string(),
            expected: SCENE_SCHEMA_VERSION.to_string(),
            found: manifest.schema_version.to_string(),
        });
    }
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let model = load_model(&dir.join(&manifest.object_manifest))?;

    let mut views = Vec::with_capacity(manifest.cameras.len());
    for cam in &manifest.cameras {
        let view = CameraView {
            view_id: cam.view_id,
            fx: cam.fx,
            fy: cam.fy,
            cx: cam.cx,
            cy: cam.cy,
            world_to_camera: matrix_from_vec(manifest_path, &cam.world_to_camera)?,
            patch_origin: (cam.patch_origin[0], cam.patch_origin[1]),
            patch_size: (cam.patch_size[0], cam.patch_size[1]),
        };
        view.validate()?;
        views.push(view);
    }

    let view_index_of = |view_id: u32| -> Result<usize> {
        views
            .iter()
            .position(|v| v.view_id == view_id)
            .ok_or_else(|| {
                parse_error(
                    manifest_path,
                    "detections",
                    format!("detection references unknown view {view_id}"),
                )
            })
    };

    let mut images = Vec::with_capacity(manifest.detections.len());
    for entry in &manifest.detections {
        let view_index = view_index_of(entry.view_id)?;
        let view = &views[view_index];
        let mut heatmaps = Vec::with_capacity(entry.heatmaps.len());
        for name in &entry.heatmaps {
            let map = read_heatmap(&dir.join(name))?;
            if (map.width, map.height) != view.patch_size {
                return Err(Error::ValidationFailure(format!(
                    "heatmap {name} is {}x{}, view {} patch is {}x{}",
                    map.width, map.height, entry.view_id, view.patch_size.0, view.patch_size.1
                )));
            }
            heatmaps.push(map);
        }
        let (depth, _) = read_depth(&dir.join(&entry.depth))?;
        let (_, _, votes) = read_votes(&dir.join(&entry.votes))?;
        images.push(ImageInputs {
            view_index,
            heatmaps,
            depth,
            votes,
        });
    }

    let ground_truth = match &manifest.ground_truth {
        Some(gt) => {
            let poses = gt
                .poses
                .iter()
                .map(|p| matrix_from_vec(manifest_path, p))
                .collect::<Result<Vec<_>>>()?;
            Some(SceneGroundTruth {
                poses,
                visibility: gt.visibility.clone(),
            })
        }
        None => None,
    };

    Ok(LoadedScene {
        inputs: SceneInputs {
            scene_id: manifest.scene_id.clone(),
            object_id: model.object_id.clone(),
            views,
            images,
        },
        model,
        ground_truth,
    })
}

// ── Detection files ───────────────────────────────────────────────────────

#[derive(Debug, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub cluster_id: usize,
    /// Row-major 4x4 pose.
    pub pose: Vec<f64>,
    pub keypoint_uncertainty: f64,
    pub icp_rms: Option<f64>,
    pub confidence: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DetectionsFile {
    pub schema_version: u32,
    pub scene_id: String,
    pub object_id: String,
    pub detections: Vec<DetectionRecord>,
}

impl DetectionsFile {
    pub fn from_detections(detections: &[crate::score::Detection]) -> Self {
        let (scene_id, object_id) = detections
            .first()
            .map(|d| (d.scene_id.clone(), d.object_id.clone()))
            .unwrap_or_default();
        Self {
            schema_version: DETECTIONS_SCHEMA_VERSION,
            scene_id,
            object_id,
            detections: detections
                .iter()
                .map(|d| DetectionRecord {
                    cluster_id: d.hypothesis.cluster_id,
                    pose: d.hypothesis.pose.to_matrix_row_major().to_vec(),
                    keypoint_uncertainty: d.hypothesis.keypoint_uncertainty,
                    icp_rms: d.hypothesis.icp_error,
                    confidence: d.confidence,
                })
                .collect(),
        }
    }

    /// Rebuild scored detections (poses validated).
    pub fn to_detections(&self, path: &Path) -> Result<Vec<crate::score::Detection>> {
        self.detections
            .iter()
            .map(|r| {
                Ok(crate::score::Detection {
                    hypothesis: crate::fusion::PoseHypothesis {
                        pose: matrix_from_vec(path, &r.pose)?,
                        keypoint_uncertainty: r.keypoint_uncertainty,
                        icp_error: r.icp_rms,
                        confidence: Some(r.confidence),
                        cluster_id: r.cluster_id,
                    },
                    confidence: r.confidence,
                    object_id: self.object_id.clone(),
                    scene_id: self.scene_id.clone(),
                })
            })
            .collect()
    }
}

pub fn write_detections(path: &Path, file: &DetectionsFile) -> Result<()> {
    atomic_write(path, serde_json::to_string_pretty(file).unwrap().as_bytes())
}

pub fn read_detections(path: &Path) -> Result<DetectionsFile> {
    let text = fs::read_to_string(path)?;
    let file: DetectionsFile = serde_json::from_str(&text)
        .map_err(|e| parse_error(path, format!("line {}", e.line()), e.to_string()))?;
    if file.schema_version != DETECTIONS_SCHEMA_VERSION {
        return Err(Error::SchemaMismatch {
            path: path.display().to_string(),
            expected: DETECTIONS_SCHEMA_VERSION.to_string(),
            found: file.schema_version.to_string(),
        });
    }
    Ok(file)
}

// ── Evaluation outputs ────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub struct EvalCsvRow {
    pub scene_id: String,
    pub object_id: String,
    pub detection_idx: usize,
    pub confidence: f64,
    pub add_error_m: Option<f64>,
    pub verdict: String,
}

pub const EVAL_CSV_HEADER: &str = "scene_id,object_id,detection_idx,confidence,add_error_m,verdict";

pub fn write_eval_csv(
    path: &Path,
    scene_id: &str,
    object_id: &str,
    eval: &SceneEvaluation,
) -> Result<()> {
    let mut out = String::from(EVAL_CSV_HEADER);
    out.push('\n');
    for r in &eval.records {
        let add = r.add_error.map(|a| a.to_string()).unwrap_or_default();
        let verdict = r
            .verdict
            .map(|v| v.as_str().to_string())
            .unwrap_or_else(|| "unmatched".to_string());
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            scene_id, object_id, r.detection_idx, r.confidence, add, verdict
        ));
    }
    atomic_write(path, out.as_bytes())
}

pub fn read_eval_csv(path: &Path) -> Result<Vec<EvalCsvRow>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == EVAL_CSV_HEADER => {}
        Some((_, header)) => {
            return Err(parse_error(
                path,
                "line 1",
                format!("unexpected header '{header}'"),
            ))
        }
        None => return Err(parse_error(path, "line 1", "empty file")),
    }
    let mut rows = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(parse_error(
                path,
                format!("line {}", n + 1),
                format!("expected 6 fields, found {}", fields.len()),
            ));
        }
        rows.push(EvalCsvRow {
            scene_id: fields[0].to_string(),
            object_id: fields[1].to_string(),
            detection_idx: fields[2].parse().map_err(|_| {
                parse_error(path, format!("line {}", n + 1), "bad detection_idx")
            })?,
            confidence: fields[3].parse().map_err(|_| {
                parse_error(path, format!("line {}", n + 1), "bad confidence")
            })?,
            add_error_m: if fields[4].is_empty() {
                None
            } else {
                Some(fields[4].parse().map_err(|_| {
                    parse_error(path, format!("line {}", n + 1), "bad add_error_m")
                })?)
            },
            verdict: fields[5].to_string(),
        });
    }
    Ok(rows)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvalRecordRow {
    pub detection_idx: usize,
    pub confidence: f64,
    pub matched_gt: Option<usize>,
    pub gt_visibility: Option<f64>,
    pub add_error_m: Option<f64>,
    pub verdict: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvalSummaryFile {
    pub schema_version: u32,
    pub scene_id: String,
    pub object_id: String,
    pub total_gt: usize,
    pub visible_gt: usize,
    pub correct: usize,
    pub detection_rate: f64,
    pub false_positives: usize,
    pub visibility_floor: f64,
    pub records: Vec<EvalRecordRow>,
}

impl EvalSummaryFile {
    pub fn from_evaluation(scene_id: &str, object_id: &str, eval: &SceneEvaluation) -> Self {
        Self {
            schema_version: SUMMARY_SCHEMA_VERSION,
            scene_id: scene_id.to_string(),
            object_id: object_id.to_string(),
            total_gt: eval.summary.total_gt,
            visible_gt: eval.summary.visible_gt,
            correct: eval.summary.correct,
            detection_rate: eval.summary.detection_rate,
            false_positives: eval.summary.false_positives,
            visibility_floor: eval.summary.visibility_floor,
            records: eval
                .records
                .iter()
                .map(|r| EvalRecordRow {
                    detection_idx: r.detection_idx,
                    confidence: r.confidence,
                    matched_gt: r.matched_gt,
                    gt_visibility: r.matched_gt_visibility,
                    add_error_m: r.add_error,
                    verdict: r.verdict.map(|v| v.as_str().to_string()),
                })
                .collect(),
        }
    }

    /// Rebuild the in-memory evaluation (ground-truth poses are not stored).
    pub fn to_evaluation(&self) -> SceneEvaluation {
        SceneEvaluation {
            records: self
                .records
                .iter()
                .map(|r| crate::score::EvalRecord {
                    detection_idx: r.detection_idx,
                    confidence: r.confidence,
                    matched_gt: r.matched_gt,
                    matched_gt_pose: None,
                    matched_gt_visibility: r.gt_visibility,
                    add_error: r.add_error_m,
                    verdict: r.verdict.as_deref().and_then(Verdict::parse),
                })
                .collect(),
            summary: crate::score::EvalSummary {
                total_gt: self.total_gt,
                visible_gt: self.visible_gt,
                correct: self.correct,
                detection_rate: self.detection_rate,
                false_positives: self.false_positives,
                visibility_floor: self.visibility_floor,
            },
        }
    }
}

pub fn write_eval_summary(path: &Path, file: &EvalSummaryFile) -> Result<()> {
    atomic_write(path, serde_json::to_string_pretty(file).unwrap().as_bytes())
}

pub fn read_eval_summary(path: &Path) -> Result<EvalSummaryFile> {
    let text = fs::read_to_string(path)?;
    let file: EvalSummaryFile = serde_json::from_str(&text)
        .map_err(|e| parse_error(path, format!("line {}", e.line()), e.to_string()))?;
    if file.schema_version != SUMMARY_SCHEMA_VERSION {
        return Err(Error::SchemaMismatch {
            path: path.display().to_string(),
            expected: SUMMARY_SCHEMA_VERSION.to_string(),
            found: file.schema_version.to_string(),
        });
    }
    Ok(file)
}
