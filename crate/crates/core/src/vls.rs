//! Virtual laser scanner: a regular azimuth/elevation grid of ideal rays cast
//! from one position into a triangulated panel, keeping the first hit of each ray.
//!
//! Grid angles are computed in integer nano-degrees, so a grid whose
//! resolution divides another's (same origin) reproduces the coarse grid's ray
//! directions bit for bit.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvh::{intersect_brute_force, Bvh, RayHit, Tri};
use crate::cloud::{CloudMetadata, Label, LabeledPoint, LabeledPointCloud};
use crate::geom::Point3;
use crate::mesh::{tessellate_trees, LabeledMesh};
use crate::panel::{PanelLayout, PanelSkeleton};
use crate::seed::{derive_seed, rng_from_seed};

/// Ray origins are pushed this far along the ray.
pub const ORIGIN_OFFSET: f64 = 1e-7;
const NANO: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScannerConfig {
    pub position: Point3,
    /// Azimuth window in degrees, measured from +x towards +y before yaw.
    pub az_range_deg: [f64; 2],
    /// Elevation window in degrees above the horizontal.
    pub el_range_deg: [f64; 2],
    /// Angular step of the grid, degrees.
    pub resolution_deg: f64,
    pub max_range_m: f64,
    /// Standard deviation of additive Gaussian range noise; 0 disables noise.
    pub range_noise_sigma_m: f64,
    /// Rotation of the whole grid about the vertical axis, degrees.
    pub yaw_deg: f64,
    pub noise_seed: u64,
}

impl Default for ScannerConfig {
    fn default() -> Self {
        ScannerConfig {
            position: Point3::new(0.0, -3.0, 1.5),
            az_range_deg: [35.0, 145.0],
            el_range_deg: [-30.0, 40.0],
            resolution_deg: 0.06,
            max_range_m: 30.0,
            range_noise_sigma_m: 0.0,
            yaw_deg: 0.0,
            noise_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScanError {
    #[error("invalid scanner configuration: {0}")]
    InvalidConfig(String),
}

/// Grid axis in integer nano-degrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct GridAxis {
    start: i64,
    step: i64,
    count: usize,
}

impl GridAxis {
    fn new([lo, hi]: [f64; 2], step_deg: f64) -> GridAxis {
        let start = (lo * NANO).round() as i64;
        let end = (hi * NANO).round() as i64;
        let step = (step_deg * NANO).round() as i64;
        GridAxis { start, step, count: ((end - start) / step) as usize + 1 }
    }

    #[inline]
    fn angle_nd(&self, i: usize) -> i64 {
        self.start + i as i64 * self.step
    }
}

#[inline]
fn nd_to_rad(nd: i64) -> f64 {
    (nd as f64 / NANO).to_radians()
}

impl ScannerConfig {
    pub fn validate(&self) -> Result<(), ScanError> {
        let bad = |m: String| Err(ScanError::InvalidConfig(m));
        if !(self.resolution_deg > 0.0 && self.resolution_deg.is_finite()) || (self.resolution_deg * NANO).round() < 1.0 {
            return bad(format!("resolution_deg must be > 0, got {}", self.resolution_deg));
        }
        for (name, [lo, hi]) in [("az_range_deg", self.az_range_deg), ("el_range_deg", self.el_range_deg)] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return bad(format!("{name} must be a non-degenerate range, got [{lo}, {hi}]"));
            }
        }
        if self.el_range_deg[0] < -90.0 || self.el_range_deg[1] > 90.0 {
            return bad("el_range_deg must lie within [-90, 90]".into());
        }
        if !(self.max_range_m > 0.0) {
            return bad(format!("max_range_m must be > 0, got {}", self.max_range_m));
        }
        if !(self.range_noise_sigma_m >= 0.0 && self.range_noise_sigma_m.is_finite()) {
            return bad("range_noise_sigma_m must be >= 0".into());
        }
        if !self.position.is_finite() || !self.yaw_deg.is_finite() {
            return bad("position and yaw_deg must be finite".into());
        }
        Ok(())
    }

    fn axes(&self) -> (GridAxis, GridAxis) {
        (GridAxis::new(self.az_range_deg, self.resolution_deg), GridAxis::new(self.el_range_deg, self.resolution_deg))
    }

    /// Number of grid nodes (rays).
    pub fn ray_count(&self) -> usize {
        let (az, el) = self.axes();
        az.count * el.count
    }

    /// Interprets `position` and `yaw_deg` in a row frame (x along the row,
    /// y to its left, z up) anchored at `origin`, and returns the world-frame config.
    pub fn in_row_frame(&self, origin: Point3, row_axis: Point3) -> ScannerConfig {
        let heading = row_axis.y.atan2(row_axis.x);
        ScannerConfig {
            position: origin + self.position.rotate_z(heading),
            yaw_deg: self.yaw_deg + heading.to_degrees(),
            ..self.clone()
        }
    }

    /// World-frame config for a panel: the row frame is anchored at the
    /// midpoint between the first and last trunk bases, on the ground.
    pub fn for_panel(&self, layout: &PanelLayout, panel: &PanelSkeleton) -> ScannerConfig {
        let (Some(first), Some(last)) = (panel.trees.first(), panel.trees.last()) else {
            return self.clone();
        };
        let mid = (first.trunk.base() + last.trunk.base()) * 0.5;
        self.in_row_frame(Point3::new(mid.x, mid.y, 0.0), layout.row_axis)
    }
}

/// Arc length between adjacent rays at `distance`: `distance · θ` with θ in radians.
pub fn resolution_to_spacing(resolution_deg: f64, distance_m: f64) -> f64 {
    distance_m * resolution_deg.to_radians()
}

/// Triangulated scene with per-triangle labels and a BVH.
#[derive(Debug, Clone)]
pub struct TriangleMeshScene {
    pub mesh: LabeledMesh,
    tris: Vec<Tri>,
    bvh: Bvh,
}

impl TriangleMeshScene {
    pub fn new(mesh: LabeledMesh) -> TriangleMeshScene {
        let tris: Vec<Tri> = (0..mesh.len())
            .map(|i| {
                let [a, b, c] = mesh.triangle(i);
                Tri::new(a, b, c)
            })
            .collect();
        let bvh = Bvh::build(&tris);
        TriangleMeshScene { mesh, tris, bvh }
    }

    pub fn triangle_count(&self) -> usize {
        self.tris.len()
    }

    pub fn label(&self, triangle: u32) -> Label {
        self.mesh.labels[triangle as usize]
    }

    /// Nearest hit via the BVH.
    pub fn cast(&self, origin: Point3, dir: Point3, t_max: f64) -> Option<RayHit> {
        self.bvh.intersect(&self.tris, origin, dir, t_max)
    }

    /// Nearest hit by testing every triangle.
    pub fn cast_brute_force(&self, origin: Point3, dir: Point3, t_max: f64) -> Option<RayHit> {
        intersect_brute_force(&self.tris, origin, dir, t_max)
    }
}

/// Tessellates every organ of the panel into a scene, with end caps.
/// `sides` must be at least 6.
pub fn tessellate(panel: &PanelSkeleton, sides: usize) -> TriangleMeshScene {
    assert!(sides >= 6, "tessellation needs at least 6 sides");
    TriangleMeshScene::new(tessellate_trees(&panel.trees, sides, true))
}

/// One returned point with its grid provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanHit {
    pub az_index: usize,
    pub el_index: usize,
    /// Grid angles in nano-degrees (before yaw); identical across nested grids.
    pub az_ndeg: i64,
    pub el_ndeg: i64,
    pub origin: Point3,
    pub direction: Point3,
    /// Distance to the surface along the ray (before noise).
    pub range: f64,
    /// Reported point, including range noise.
    pub position: Point3,
    pub triangle: u32,
    pub label: Label,
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    pub hits: Vec<ScanHit>,
    pub ray_count: usize,
}

impl ScanResult {
    pub fn hit_rate(&self) -> f64 {
        if self.ray_count == 0 {
            0.0
        } else {
            self.hits.len() as f64 / self.ray_count as f64
        }
    }

    pub fn to_cloud(&self, cfg: &ScannerConfig) -> LabeledPointCloud {
        let points = self
            .hits
            .iter()
            .map(|h| LabeledPoint { position: h.position.to_f32_precision(), label: h.label })
            .collect();
        LabeledPointCloud::new(
            points,
            CloudMetadata {
                seed: cfg.noise_seed,
                generator: format!(
                    "vls resolution_deg={} position=({}, {}, {}) yaw_deg={}",
                    cfg.resolution_deg, cfg.position.x, cfg.position.y, cfg.position.z, cfg.yaw_deg
                ),
            },
        )
    }
}

/// Casts the full grid, returning hits in row-major (azimuth, elevation) order.
/// Rows are processed in parallel on the current rayon pool; the output does
/// not depend on the number of threads.
pub fn scan_hits(scene: &TriangleMeshScene, cfg: &ScannerConfig) -> Result<ScanResult, ScanError> {
    cfg.validate()?;
    let (az_axis, el_axis) = cfg.axes();
    let yaw = cfg.yaw_deg.to_radians();
    let el_dirs: Vec<(f64, f64)> = (0..el_axis.count).map(|j| nd_to_rad(el_axis.angle_nd(j)).sin_cos()).collect();
    let noise = (cfg.range_noise_sigma_m > 0.0).then(|| Normal::new(0.0, cfg.range_noise_sigma_m).unwrap());
    let rows: Vec<Vec<ScanHit>> = (0..az_axis.count)
        .into_par_iter()
        .map(|i| {
            let az_nd = az_axis.angle_nd(i);
            let (saz, caz) = (nd_to_rad(az_nd) + yaw).sin_cos();
            let mut row = Vec::new();
            for (j, &(sel, cel)) in el_dirs.iter().enumerate() {
                let dir = Point3::new(cel * caz, cel * saz, sel);
                let origin = cfg.position + dir * ORIGIN_OFFSET;
                let Some(hit) = scene.cast(origin, dir, cfg.max_range_m) else {
                    continue;
                };
                let reported = match &noise {
                    Some(n) => {
                        let mut rng = rng_from_seed(derive_seed(cfg.noise_seed, (i * el_axis.count + j) as u64));
                        hit.t + n.sample(&mut rng)
                    }
                    None => hit.t,
                };
                row.push(ScanHit {
                    az_index: i,
                    el_index: j,
                    az_ndeg: az_nd,
                    el_ndeg: el_axis.angle_nd(j),
                    origin,
                    direction: dir,
                    range: hit.t,
                    position: origin + dir * reported,
                    triangle: hit.triangle,
                    label: scene.label(hit.triangle),
                });
            }
            row
        })
        .collect();
    Ok(ScanResult { hits: rows.into_iter().flatten().collect(), ray_count: az_axis.count * el_axis.count })
}

/// Scans `scene` and returns the labeled first-hit cloud.
pub fn scan(scene: &TriangleMeshScene, cfg: &ScannerConfig) -> Result<LabeledPointCloud, ScanError> {
    Ok(scan_hits(scene, cfg)?.to_cloud(cfg))
}
