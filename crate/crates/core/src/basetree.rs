//! Base-tree library: the trunks and primary branches that new organs are
//! interpolated from, its versioned file format, and a synthetic generator.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Point3;
use crate::organ::{OrganCurve, OrganError, OrganKind};
use crate::seed::rng_from_seed;

pub const LIBRARY_VERSION: u32 = 1;

/// A primary branch in its local frame: origin at the attachment point, growing
/// roughly along +x with +z up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseBranch {
    pub curve: OrganCurve,
    /// Meters above the trunk base.
    pub attach_height: f64,
    /// Radians in [0, 2π).
    pub azimuth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseTreeLibrary {
    pub trunks: Vec<OrganCurve>,
    pub branches: Vec<BaseBranch>,
    pub provenance: String,
}

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed library document: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("invalid synthesis parameters: {0}")]
    Params(String),
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> LibraryError {
    LibraryError::Schema { path: path.into(), message: message.into() }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LibraryDoc {
    version: u32,
    provenance: String,
    trunks: Vec<TrunkDoc>,
    branches: Vec<BranchDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrunkDoc {
    centerline: Vec<[f64; 3]>,
    radii: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchDoc {
    attach_height: f64,
    azimuth: f64,
    centerline: Vec<[f64; 3]>,
    radii: Vec<f64>,
}

fn organ_from_doc(
    path: &str,
    centerline: &[[f64; 3]],
    radii: &[f64],
    kind: OrganKind,
) -> Result<OrganCurve, LibraryError> {
    let pts = centerline.iter().map(|&a| Point3::from(a)).collect();
    OrganCurve::new(pts, radii.to_vec(), kind).map_err(|e| match e {
        OrganError::NonPositiveRadius(i) => schema(format!("{path}.radii[{i}]"), "non-positive radius"),
        OrganError::NonFinite(i) => schema(format!("{path}.centerline[{i}]"), "non-finite value"),
        OrganError::RepeatedPoint(i) => {
            schema(format!("{path}.centerline[{i}]"), "repeated consecutive point")
        }
        other => schema(path, other.to_string()),
    })
}

impl BaseBranch {
    pub fn validate(&self, path: &str) -> Result<(), LibraryError> {
        if self.curve.kind != OrganKind::Branch {
            return Err(schema(path, "base branch curve must be of kind branch"));
        }
        if !(self.attach_height >= 0.0 && self.attach_height.is_finite()) {
            return Err(schema(format!("{path}.attach_height"), "must be finite and >= 0"));
        }
        if !(0.0..TAU).contains(&self.azimuth) {
            return Err(schema(format!("{path}.azimuth"), "must lie in [0, 2π)"));
        }
        if self.curve.base().norm() > 1e-9 {
            return Err(schema(format!("{path}.centerline[0]"), "local-frame curve must start at the origin"));
        }
        Ok(())
    }
}

impl BaseTreeLibrary {
    pub fn counts(&self) -> (usize, usize) {
        (self.trunks.len(), self.branches.len())
    }

    pub fn validate(&self) -> Result<(), LibraryError> {
        for (i, t) in self.trunks.iter().enumerate() {
            let path = format!("trunks[{i}]");
            if t.kind != OrganKind::Trunk {
                return Err(schema(path, "trunk curve must be of kind trunk"));
            }
            t.validate().map_err(|e| schema(&path, e.to_string()))?;
        }
        for (i, b) in self.branches.iter().enumerate() {
            let path = format!("branches[{i}]");
            b.curve.validate().map_err(|e| schema(&path, e.to_string()))?;
            b.validate(&path)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let doc = LibraryDoc {
            version: LIBRARY_VERSION,
            provenance: self.provenance.clone(),
            trunks: self
                .trunks
                .iter()
                .map(|t| TrunkDoc {
                    centerline: t.centerline.iter().map(|&p| p.into()).collect(),
                    radii: t.radii.clone(),
                })
                .collect(),
            branches: self
                .branches
                .iter()
                .map(|b| BranchDoc {
                    attach_height: b.attach_height,
                    azimuth: b.azimuth,
                    centerline: b.curve.centerline.iter().map(|&p| p.into()).collect(),
                    radii: b.curve.radii.clone(),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("library serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, LibraryError> {
        let doc: LibraryDoc = serde_json::from_str(text)?;
        if doc.version != LIBRARY_VERSION {
            return Err(schema("version", format!("unsupported version {} (expected {LIBRARY_VERSION})", doc.version)));
        }
        let mut trunks = Vec::with_capacity(doc.trunks.len());
        for (i, t) in doc.trunks.iter().enumerate() {
            trunks.push(organ_from_doc(&format!("trunks[{i}]"), &t.centerline, &t.radii, OrganKind::Trunk)?);
        }
        let mut branches = Vec::with_capacity(doc.branches.len());
        for (i, b) in doc.branches.iter().enumerate() {
            let path = format!("branches[{i}]");
            let curve = organ_from_doc(&path, &b.centerline, &b.radii, OrganKind::Branch)?;
            let branch = BaseBranch { curve, attach_height: b.attach_height, azimuth: b.azimuth };
            branch.validate(&path)?;
            branches.push(branch);
        }
        Ok(BaseTreeLibrary { trunks, branches, provenance: doc.provenance })
    }
}

pub fn save_library(lib: &BaseTreeLibrary, path: impl AsRef<Path>) -> Result<(), LibraryError> {
    fs::write(path, lib.to_json())?;
    Ok(())
}

pub fn load_library(path: impl AsRef<Path>) -> Result<BaseTreeLibrary, LibraryError> {
    BaseTreeLibrary::from_json(&fs::read_to_string(path)?)
}

/// Ranges for the synthetic base library. All lengths in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub trunk_height: [f64; 2],
    pub trunk_base_radius: [f64; 2],
    /// Tip radius as a fraction of the base radius.
    pub trunk_tip_fraction: [f64; 2],
    pub trunk_samples: usize,
    /// Standard deviation of the per-step horizontal wander.
    pub trunk_wander: f64,
    pub branch_length: [f64; 2],
    pub branch_base_radius: [f64; 2],
    pub branch_tip_fraction: [f64; 2],
    pub branch_samples: usize,
    /// Initial upward pitch, degrees.
    pub branch_pitch_deg: [f64; 2],
    /// Total pitch lost from base to tip, degrees.
    pub branch_droop_deg: [f64; 2],
    pub branch_attach_height: [f64; 2],
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            trunk_height: [2.5, 3.5],
            trunk_base_radius: [0.03, 0.05],
            trunk_tip_fraction: [0.15, 0.3],
            trunk_samples: 24,
            trunk_wander: 0.008,
            branch_length: [0.3, 1.2],
            branch_base_radius: [0.005, 0.015],
            branch_tip_fraction: [0.1, 0.3],
            branch_samples: 16,
            branch_pitch_deg: [0.0, 30.0],
            branch_droop_deg: [10.0, 40.0],
            branch_attach_height: [0.5, 3.0],
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), LibraryError> {
        let ranges = [
            ("trunk_height", self.trunk_height, true),
            ("trunk_base_radius", self.trunk_base_radius, true),
            ("trunk_tip_fraction", self.trunk_tip_fraction, true),
            ("branch_length", self.branch_length, true),
            ("branch_base_radius", self.branch_base_radius, true),
            ("branch_tip_fraction", self.branch_tip_fraction, true),
            ("branch_pitch_deg", self.branch_pitch_deg, false),
            ("branch_droop_deg", self.branch_droop_deg, false),
            ("branch_attach_height", self.branch_attach_height, false),
        ];
        for (name, [lo, hi], positive) in ranges {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(LibraryError::Params(format!("{name}: degenerate range [{lo}, {hi}]")));
            }
            if positive && lo <= 0.0 {
                return Err(LibraryError::Params(format!("{name}: values must be > 0")));
            }
        }
        if self.trunk_tip_fraction[1] > 1.0 || self.branch_tip_fraction[1] > 1.0 {
            return Err(LibraryError::Params("tip fractions must be <= 1".into()));
        }
        if self.branch_attach_height[0] < 0.0 {
            return Err(LibraryError::Params("branch_attach_height must be >= 0".into()));
        }
        if self.trunk_samples < 2 || self.branch_samples < 2 {
            return Err(LibraryError::Params("sample counts must be >= 2".into()));
        }
        if !(self.trunk_wander >= 0.0) {
            return Err(LibraryError::Params("trunk_wander must be >= 0".into()));
        }
        Ok(())
    }
}

fn uniform<R: Rng>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

/// Linear taper from `r0` at the base to `r0 * tip_fraction` at the tip, with
/// mild noise, made monotone non-increasing by a running minimum.
fn tapered_radii<R: Rng>(rng: &mut R, n: usize, r0: f64, tip_fraction: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut prev = r0;
    for k in 0..n {
        let t = k as f64 / (n - 1) as f64;
        let nominal = r0 * (1.0 - (1.0 - tip_fraction) * t);
        let noisy = if k == 0 { r0 } else { nominal * rng.gen_range(0.97..1.03) };
        prev = prev.min(noisy);
        out.push(prev);
    }
    out
}

fn synth_trunk<R: Rng>(rng: &mut R, p: &SynthParams) -> OrganCurve {
    let n = p.trunk_samples;
    let height = uniform(rng, p.trunk_height);
    let r0 = uniform(rng, p.trunk_base_radius);
    let tip = uniform(rng, p.trunk_tip_fraction);
    let wander = Normal::new(0.0, p.trunk_wander.max(1e-12)).unwrap();
    let lean = Point3::new(rng.gen_range(-0.02..0.02), rng.gen_range(-0.02..0.02), 0.0);
    let mut xy = Point3::ZERO;
    let mut centerline = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 / (n - 1) as f64;
        if k > 0 {
            xy += Point3::new(wander.sample(rng), wander.sample(rng), 0.0) + lean * (1.0 / (n - 1) as f64);
        }
        centerline.push(Point3::new(xy.x, xy.y, height * t));
    }
    let radii = tapered_radii(rng, n, r0, tip);
    OrganCurve::new(centerline, radii, OrganKind::Trunk).expect("synthetic trunk is valid")
}

fn synth_branch<R: Rng>(rng: &mut R, p: &SynthParams) -> BaseBranch {
    let n = p.branch_samples;
    let length = uniform(rng, p.branch_length);
    let r0 = uniform(rng, p.branch_base_radius);
    let tip = uniform(rng, p.branch_tip_fraction);
    let pitch0 = uniform(rng, p.branch_pitch_deg).to_radians();
    let droop = uniform(rng, p.branch_droop_deg).to_radians();
    let step = length / (n - 1) as f64;
    let mut yaw: f64 = 0.0;
    let mut pos = Point3::ZERO;
    let mut centerline = Vec::with_capacity(n);
    centerline.push(pos);
    for k in 1..n {
        let t = (k as f64 - 0.5) / (n - 1) as f64;
        let pitch = pitch0 - droop * t;
        yaw += rng.gen_range(-0.04..0.04);
        let dir = Point3::new(pitch.cos() * yaw.cos(), pitch.cos() * yaw.sin(), pitch.sin());
        pos += dir * step;
        centerline.push(pos);
    }
    let radii = tapered_radii(rng, n, r0, tip);
    let curve = OrganCurve::new(centerline, radii, OrganKind::Branch).expect("synthetic branch is valid");
    BaseBranch {
        curve,
        attach_height: uniform(rng, p.branch_attach_height),
        azimuth: rng.gen_range(0.0..TAU),
    }
}

/// Generates a synthetic base library; a deterministic function of `(seed, params)`.
pub fn synth_library(
    seed: u64,
    n_trunks: usize,
    n_branches: usize,
    params: &SynthParams,
) -> Result<BaseTreeLibrary, LibraryError> {
    if n_trunks == 0 || n_branches == 0 {
        return Err(LibraryError::Params("need at least one trunk and one branch".into()));
    }
    params.validate()?;
    let mut rng = rng_from_seed(seed);
    let trunks = (0..n_trunks).map(|_| synth_trunk(&mut rng, params)).collect();
    let branches = (0..n_branches).map(|_| synth_branch(&mut rng, params)).collect();
    Ok(BaseTreeLibrary {
        trunks,
        branches,
        provenance: format!("synthetic seed={seed} trunks={n_trunks} branches={n_branches}"),
    })
}
