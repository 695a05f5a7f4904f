//! Per-view keypoint probability grids and their multi-view fusion.
//!
//! A heatmap stores, for one keypoint in one view, the probability that the
//! keypoint projects to each patch pixel. Fusing a 3D candidate across views
//! multiplies the per-view probabilities looked up at its projections; the
//! corresponding uncertainty is the summed negative log likelihood, floored
//! so that zero-probability views stay finite and totally ordered.

use crate::error::{Error, Result};
use crate::geometry::{project, CameraView, Point2, Point3};

/// Per-view probability floor; lookups below this are clamped when converting
/// to uncertainty so a single dead view cannot produce an infinite score.
pub const PROBABILITY_FLOOR: f64 = 1e-6;

/// Uncertainty contributed by a view at or below the probability floor,
/// `-ln(PROBABILITY_FLOOR)`.
pub const MAX_UNCERTAINTY_PER_VIEW: f64 = 13.815510557964274;

/// Node count limit for grid probes.
pub const GRID_NODE_LIMIT: u64 = 10_000_000;

/// One keypoint's probability grid for one view patch. Values are calibrated
/// probabilities in [0, 1], row-major with the origin at the top-left pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub view_id: u32,
    pub keypoint_id: u32,
    pub width: u32,
    pub height: u32,
    pub values: Vec<f32>,
}

impl Heatmap {
    pub fn new(
        view_id: u32,
        keypoint_id: u32,
        width: u32,
        height: u32,
        values: Vec<f32>,
    ) -> Result<Self> {
        if values.len() != (width as usize) * (height as usize) {
            return Err(Error::ValidationFailure(format!(
                "heatmap payload has {} values, expected {}x{} = {}",
                values.len(),
                width,
                height,
                (width as usize) * (height as usize)
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(&f64::from(**v))) {
            return Err(Error::ValidationFailure(format!(
                "heatmap value {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            view_id,
            keypoint_id,
            width,
            height,
            values,
        })
    }

    pub fn zeros(view_id: u32, keypoint_id: u32, width: u32, height: u32) -> Self {
        Self {
            view_id,
            keypoint_id,
            width,
            height,
            values: vec![0.0; (width as usize) * (height as usize)],
        }
    }

    #[inline]
    pub fn value_at(&self, x: u32, y: u32) -> f32 {
        self.values[(y as usize) * (self.width as usize) + x as usize]
    }

    #[inline]
    fn node(&self, x: i64, y: i64) -> f64 {
        // Clamp-to-edge for the half-pixel border band.
        let x = x.clamp(0, i64::from(self.width) - 1) as usize;
        let y = y.clamp(0, i64::from(self.height) - 1) as usize;
        f64::from(self.values[y * self.width as usize + x])
    }

    /// Bilinear probability lookup with pixel-center convention. Returns 0
    /// exactly when the pixel falls outside
    /// [-0.5, width-0.5] x [-0.5, height-0.5].
    pub fn lookup(&self, pixel: &Point2) -> f64 {
        let (u, v) = (pixel.x, pixel.y);
        let w = f64::from(self.width);
        let h = f64::from(self.height);
        if !(u >= -0.5 && u <= w - 0.5 && v >= -0.5 && v <= h - 0.5) {
            return 0.0;
        }
        let x0 = u.floor();
        let y0 = v.floor();
        let fx = u - x0;
        let fy = v - y0;
        let x0 = x0 as i64;
        let y0 = y0 as i64;
        let v00 = self.node(x0, y0);
        let v10 = self.node(x0 + 1, y0);
        let v01 = self.node(x0, y0 + 1);
        let v11 = self.node(x0 + 1, y0 + 1);
        let top = v00 + (v10 - v00) * fx;
        let bottom = v01 + (v11 - v01) * fx;
        top + (bottom - top) * fy
    }

    /// Pixel-wise maximum with another map of the same geometry.
    pub fn merge_max(&mut self, other: &Heatmap) {
        debug_assert_eq!(self.width, other.width);
        debug_assert_eq!(self.height, other.height);
        debug_assert_eq!(self.keypoint_id, other.keypoint_id);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            if *b > *a {
                *a = *b;
            }
        }
    }
}

/// A 3D keypoint position hypothesis with its fused multi-view score.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointCandidate {
    pub keypoint_id: u32,
    pub position: Point3,
    /// View that voted this candidate, or -1 for grid-generated candidates.
    pub source_view: i32,
    /// Floored fused probability, `exp(-uncertainty)`.
    pub probability: f64,
    /// Summed floored negative log likelihood over views (nats).
    pub uncertainty: f64,
}

impl KeypointCandidate {
    /// Score a position against the per-view maps of one keypoint.
    pub fn scored(
        keypoint_id: u32,
        position: Point3,
        source_view: i32,
        views: &[CameraView],
        maps: &[Heatmap],
    ) -> Self {
        let uncertainty = multiview_uncertainty(&position, views, maps);
        Self {
            keypoint_id,
            position,
            source_view,
            probability: (-uncertainty).exp(),
            uncertainty,
        }
    }
}

/// Probability of one per-view lookup, with unprojectable views contributing
/// zero.
fn view_probability(p: &Point3, view: &CameraView, map: &Heatmap) -> f64 {
    match project(view, p) {
        Ok((pixel, _)) => map.lookup(&pixel),
        Err(_) => 0.0,
    }
}

/// Product over views of the heatmap probability at the candidate's
/// projection. Views where the candidate projects outside the patch or
/// behind the camera contribute a factor of zero.
pub fn multiview_probability(p: &Point3, views: &[CameraView], maps: &[Heatmap]) -> f64 {
    debug_assert_eq!(views.len(), maps.len());
    let mut product = 1.0;
    for (view, map) in views.iter().zip(maps) {
        debug_assert_eq!(view.view_id, map.view_id);
        product *= view_probability(p, view, map);
        if product == 0.0 {
            return 0.0;
        }
    }
    product
}

/// Summed negative log likelihood over views, with each per-view probability
/// floored at `PROBABILITY_FLOOR`. Equals `-ln(multiview_probability)` when
/// every factor exceeds the floor; never infinite.
pub fn multiview_uncertainty(p: &Point3, views: &[CameraView], maps: &[Heatmap]) -> f64 {
    debug_assert_eq!(views.len(), maps.len());
    let mut total = 0.0;
    for (view, map) in views.iter().zip(maps) {
        debug_assert_eq!(view.view_id, map.view_id);
        total += -view_probability(p, view, map).max(PROBABILITY_FLOOR).ln();
    }
    total
}

/// Probe an axis-aligned cube of grid nodes around `seed` and score each node,
/// returning candidates ordered by ascending uncertainty (ties keep grid
/// order). Stands in for dense per-pixel votes when sampling the fused 3D
/// probability density.
pub fn densify_candidates(
    seed: &Point3,
    radius: f64,
    step: f64,
    views: &[CameraView],
    maps: &[Heatmap],
) -> Result<Vec<KeypointCandidate>> {
    if !(radius > 0.0) || !(step > 0.0 && step <= radius) {
        return Err(Error::ValidationFailure(format!(
            "grid probe needs radius > 0 and 0 < step <= radius, got radius = {radius}, step = {step}"
        )));
    }
    let m = (radius / step + 1e-9).floor() as i64;
    let per_axis = (2 * m + 1) as u128;
    let nodes = per_axis * per_axis * per_axis;
    if nodes > u128::from(GRID_NODE_LIMIT) {
        return Err(Error::GridTooLarge {
            nodes,
            limit: GRID_NODE_LIMIT,
        });
    }
    let keypoint_id = maps.first().map(|m| m.keypoint_id).unwrap_or(0);
    let mut out = Vec::with_capacity(nodes as usize);
    for i in -m..=m {
        for j in -m..=m {
            for k in -m..=m {
                let position = Point3::new(
                    seed.x + i as f64 * step,
                    seed.y + j as f64 * step,
                    seed.z + k as f64 * step,
                );
                out.push(KeypointCandidate::scored(
                    keypoint_id,
                    position,
                    -1,
                    views,
                    maps,
                ));
            }
        }
    }
    out.sort_by(|a, b| a.uncertainty.partial_cmp(&b.uncertainty).unwrap());
    Ok(out)
}

/// All heatmaps of a scene arranged keypoint-major so fusion can slice the
/// per-view maps of one keypoint. Slot `k * n_views + v` holds keypoint `k`
/// of view index `v`, aligned with the owning view list.
#[derive(Debug, Clone)]
pub struct MapSet {
    keypoint_count: usize,
    view_count: usize,
    maps: Vec<Heatmap>,
}

impl MapSet {
    /// Start with all-zero maps matching the views' patch geometry.
    pub fn zeros(views: &[CameraView], keypoint_count: usize) -> Self {
        let mut maps = Vec::with_capacity(keypoint_count * views.len());
        for k in 0..keypoint_count {
            for view in views {
                maps.push(Heatmap::zeros(
                    view.view_id,
                    k as u32,
                    view.patch_size.0,
                    view.patch_size.1,
                ));
            }
        }
        Self {
            keypoint_count,
            view_count: views.len(),
            maps,
        }
    }

    /// Fold one detection's heatmap into its (view, keypoint) slot by
    /// pixel-wise maximum. Multiple instances detected in the same view merge
    /// into one multi-peak map per keypoint.
    pub fn merge(&mut self, view_index: usize, map: &Heatmap) {
        let k = map.keypoint_id as usize;
        debug_assert!(k < self.keypoint_count);
        debug_assert!(view_index < self.view_count);
        self.maps[k * self.view_count + view_index].merge_max(map);
    }

    pub fn for_keypoint(&self, keypoint_id: usize) -> &[Heatmap] {
        let n = self.view_count;
        &self.maps[keypoint_id * n..(keypoint_id + 1) * n]
    }

    pub fn keypoint_count(&self) -> usize {
        self.keypoint_count
    }

    pub fn view_count(&self) -> usize {
        self.view_count
    }
}
