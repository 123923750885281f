//! Tree generation: blend trunks and branches from a base library, lay out
//! branch heights, add second-order branches, taper every organ, reject
//! colliding branches and label everything.

use std::f64::consts::TAU;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basetree::{BaseBranch, BaseTreeLibrary};
use crate::collision::{organ_pair_collisions, Attachment, CollisionPair, OrganRef};
use crate::geom::Point3;
use crate::organ::{blend_curves, OrganCurve, OrganKind};
use crate::seed::{rng_from_seed, SimRng};

/// Samples per interpolated trunk.
pub const TRUNK_SAMPLES: usize = 64;
/// Samples per interpolated primary branch.
pub const BRANCH_SAMPLES: usize = 32;
/// Regularizer of the inverse height-difference weights, meters.
pub const HEIGHT_WEIGHT_EPS: f64 = 1e-3;
/// Smallest radius any organ sample may taper to, meters.
pub const MIN_TIP_RADIUS: f64 = 5e-4;
/// Second-order branches attach beyond this fraction of the parent length.
pub const CHILD_MIN_ATTACH_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenParams {
    /// Number of base trunks blended per tree.
    pub k1: usize,
    /// Number of nearest base branches blended per primary branch.
    pub k2: usize,
    pub branch_count_range: [usize; 2],
    /// Branch zone as fractions of trunk height.
    pub branch_zone: [f64; 2],
    pub min_branch_separation: f64,
    pub higher_order_prob: f64,
    pub higher_order_scale_range: [f64; 2],
    pub collision_retries: u32,
    pub taper_exponent: f64,
    /// Angle between a second-order branch and its parent's tangent, degrees.
    pub child_branch_angle_deg: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            k1: 3,
            k2: 3,
            branch_count_range: [10, 16],
            branch_zone: [0.2, 0.9],
            min_branch_separation: 0.08,
            higher_order_prob: 0.4,
            higher_order_scale_range: [0.3, 0.6],
            collision_retries: 8,
            taper_exponent: 1.0,
            child_branch_angle_deg: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("library has {have} trunks, need k1={need}")]
    NotEnoughTrunks { need: usize, have: usize },
    #[error("library has {have} branches, need k2={need}")]
    NotEnoughBranches { need: usize, have: usize },
    #[error("infeasible branch layout: {0}")]
    InfeasibleLayout(String),
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
}

impl GenParams {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::InvalidParams(m.to_string()));
        if self.k1 < 1 || self.k2 < 1 {
            return bad("k1 and k2 must be >= 1");
        }
        let [bmin, bmax] = self.branch_count_range;
        if bmin > bmax {
            return bad("branch_count_range min > max");
        }
        let [lo, hi] = self.branch_zone;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return bad("branch_zone must satisfy 0 <= low < high <= 1");
        }
        if !(self.min_branch_separation >= 0.0 && self.min_branch_separation.is_finite()) {
            return bad("min_branch_separation must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.higher_order_prob) {
            return bad("higher_order_prob must lie in [0, 1]");
        }
        let [smin, smax] = self.higher_order_scale_range;
        if !(0.0 < smin && smin <= smax && smax <= 1.0) {
            return bad("higher_order_scale_range must lie within (0, 1] with min <= max");
        }
        if !(self.taper_exponent >= 0.0 && self.taper_exponent.is_finite()) {
            return bad("taper_exponent must be >= 0");
        }
        if !(0.0..=180.0).contains(&self.child_branch_angle_deg) {
            return bad("child_branch_angle_deg must lie in [0, 180]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedBranch {
    /// World-frame curve.
    pub curve: OrganCurve,
    /// 1 for primary branches, 2 for branches growing on a primary.
    pub order: u8,
    pub parent: OrganRef,
    /// Arc-length position of the attachment on the parent.
    pub attach_s: f64,
    /// Dense, 1-based within the tree (panel-wide after assembly).
    pub instance_id: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSkeleton {
    pub trunk: OrganCurve,
    pub branches: Vec<PlacedBranch>,
    /// 0 until the tree is placed in a panel.
    pub tree_id: u32,
    pub seed: u64,
    /// Branches dropped after exhausting collision retries.
    pub dropped_branches: u32,
}

impl TreeSkeleton {
    pub fn organ(&self, r: OrganRef) -> &OrganCurve {
        match r {
            OrganRef::Trunk => &self.trunk,
            OrganRef::Branch(i) => &self.branches[i].curve,
        }
    }

    pub fn primary_count(&self) -> usize {
        self.branches.iter().filter(|b| b.order == 1).count()
    }

    pub fn translated(&self, d: Point3) -> TreeSkeleton {
        TreeSkeleton {
            trunk: self.trunk.translated(d),
            branches: self
                .branches
                .iter()
                .map(|b| PlacedBranch { curve: b.curve.translated(d), ..b.clone() })
                .collect(),
            ..self.clone()
        }
    }

    /// Structured debug dump.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("skeleton serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Normalized weights from `raw`.
fn normalized(raw: Vec<f64>) -> Vec<f64> {
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}

/// Blends trunks with the given weights after resampling each to [`TRUNK_SAMPLES`].
pub fn blend_trunks(trunks: &[&OrganCurve], weights: &[f64]) -> OrganCurve {
    let resampled: Vec<OrganCurve> = trunks.iter().map(|t| t.resample(TRUNK_SAMPLES)).collect();
    blend_curves(&resampled, weights)
}

/// Picks `k1` distinct base trunks uniformly and blends them with random
/// normalized weights.
pub fn interpolate_trunk(lib: &BaseTreeLibrary, k1: usize, rng: &mut SimRng) -> Result<OrganCurve, GenError> {
    if k1 == 0 || lib.trunks.len() < k1 {
        return Err(GenError::NotEnoughTrunks { need: k1, have: lib.trunks.len() });
    }
    let picks = index::sample(rng, lib.trunks.len(), k1).into_vec();
    let weights = if k1 == 1 {
        vec![1.0]
    } else {
        normalized(picks.iter().map(|_| 1.0 - rng.gen::<f64>()).collect())
    };
    let chosen: Vec<&OrganCurve> = picks.iter().map(|&i| &lib.trunks[i]).collect();
    Ok(blend_trunks(&chosen, &weights))
}

/// Draws sorted attachment heights (meters above the trunk base) for the primary branches.
///
/// The heights are uniform over the branch zone conditioned on every gap being at
/// least `min_branch_separation`, drawn with the exact gap transform of that
/// conditional law: uniform points on the zone shrunk by `(n-1)·sep`, sorted,
/// then shifted apart by `k·sep`.
pub fn sample_branch_heights(trunk: &OrganCurve, params: &GenParams, rng: &mut SimRng) -> Result<Vec<f64>, GenError> {
    params.validate()?;
    let [nmin, nmax] = params.branch_count_range;
    let n = rng.gen_range(nmin..=nmax);
    let height = trunk.height();
    let lo = params.branch_zone[0] * height;
    let hi = params.branch_zone[1] * height;
    let sep = params.min_branch_separation;
    if n == 0 {
        return Ok(Vec::new());
    }
    let slack = (hi - lo) - (n - 1) as f64 * sep;
    if slack < 0.0 {
        return Err(GenError::InfeasibleLayout(format!(
            "{n} branches with separation {sep} m do not fit in a {:.4} m zone",
            hi - lo
        )));
    }
    let mut u: Vec<f64> = (0..n).map(|_| slack * rng.gen::<f64>()).collect();
    u.sort_by(f64::total_cmp);
    Ok(u.into_iter().enumerate().map(|(k, x)| lo + x + k as f64 * sep).collect())
}

/// The `k2` base branches nearest in attachment height (ties to the lower
/// index) with normalized weights `1/(ε + |Δh|)`.
pub fn branch_weights(lib: &BaseTreeLibrary, attach_height: f64, k2: usize) -> Result<Vec<(usize, f64)>, GenError> {
    if k2 == 0 || lib.branches.len() < k2 {
        return Err(GenError::NotEnoughBranches { need: k2, have: lib.branches.len() });
    }
    let mut order: Vec<(f64, usize)> =
        lib.branches.iter().enumerate().map(|(i, b)| ((attach_height - b.attach_height).abs(), i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order.truncate(k2);
    let weights = normalized(order.iter().map(|(d, _)| 1.0 / (HEIGHT_WEIGHT_EPS + d)).collect());
    Ok(order.into_iter().map(|(_, i)| i).zip(weights).collect())
}

/// Blends the `k2` nearest base branches into a new local-frame branch at
/// `attach_height` with a uniform random azimuth.
pub fn interpolate_branch(
    lib: &BaseTreeLibrary,
    attach_height: f64,
    k2: usize,
    rng: &mut SimRng,
) -> Result<BaseBranch, GenError> {
    let picks = branch_weights(lib, attach_height, k2)?;
    let curves: Vec<OrganCurve> = picks.iter().map(|&(i, _)| lib.branches[i].curve.resample(BRANCH_SAMPLES)).collect();
    let weights: Vec<f64> = picks.iter().map(|&(_, w)| w).collect();
    Ok(BaseBranch {
        curve: blend_curves(&curves, &weights),
        attach_height,
        azimuth: rng.gen_range(0.0..TAU),
    })
}

/// Replaces radii by `r_base·(1 − s/S)^exponent` where that is smaller, then
/// enforces a non-increasing profile and the [`MIN_TIP_RADIUS`] floor.
pub fn apply_tapering(organ: &OrganCurve, taper_exponent: f64) -> OrganCurve {
    let cum = organ.cumulative_lengths();
    let total = *cum.last().unwrap();
    let r_base = organ.radii[0];
    let mut running = f64::INFINITY;
    let radii = organ
        .radii
        .iter()
        .zip(&cum)
        .map(|(&r, &s)| {
            let frac = if total > 0.0 { (1.0 - s / total).max(0.0) } else { 1.0 };
            let law = r_base * frac.powf(taper_exponent);
            running = running.min(law.min(r));
            running.max(MIN_TIP_RADIUS)
        })
        .collect();
    OrganCurve { centerline: organ.centerline.clone(), radii, kind: organ.kind }
}

/// Places a local-frame branch on the trunk: rotate by its azimuth about +z and
/// translate to the trunk centerline at its attachment height. The base radius
/// is clamped to the trunk radius there and the result is tapered.
pub fn place_primary(trunk: &OrganCurve, branch: &BaseBranch, taper_exponent: f64) -> Option<(OrganCurve, f64)> {
    let (anchor, attach_s) = trunk.point_at_height(branch.attach_height)?;
    let mut curve = branch.curve.map_points(|p| p.rotate_z(branch.azimuth) + anchor);
    curve.kind = OrganKind::Branch;
    curve.radii[0] = curve.radii[0].min(trunk.radius_at(attach_s));
    Some((apply_tapering(&curve, taper_exponent), attach_s))
}

/// Builds a second-order branch from a local-frame base curve: scaled by
/// `scale`, attached at arc length `attach_s` on `parent`, leaving the parent
/// at `angle` from its tangent and rotated by `azimuth` about that tangent.
pub fn make_child(
    parent: &OrganCurve,
    base: &OrganCurve,
    scale: f64,
    attach_s: f64,
    azimuth: f64,
    angle: f64,
    taper_exponent: f64,
) -> OrganCurve {
    let anchor = parent.point_at(attach_s);
    let tangent = parent.tangent_at(attach_s);
    let up_perp = |d: Point3| (Point3::UNIT_Z - d * Point3::UNIT_Z.dot(d)).try_normalize().unwrap_or_else(|| d.any_orthogonal());
    let n1 = up_perp(tangent);
    let n2 = tangent.cross(n1);
    let dir = tangent * angle.cos() + (n1 * azimuth.cos() + n2 * azimuth.sin()) * angle.sin();
    let e1 = dir.try_normalize().unwrap_or(tangent);
    let e3 = up_perp(e1);
    let e2 = e3.cross(e1);
    let origin = base.centerline[0];
    let centerline = base
        .centerline
        .iter()
        .map(|&p| {
            let l = (p - origin) * scale;
            anchor + e1 * l.x + e2 * l.y + e3 * l.z
        })
        .collect();
    let mut radii: Vec<f64> = base.radii.iter().map(|r| r * scale).collect();
    radii[0] = radii[0].min(parent.radius_at(attach_s));
    apply_tapering(&OrganCurve { centerline, radii, kind: OrganKind::Branch }, taper_exponent)
}

/// Random choices behind one second-order branch.
#[derive(Debug, Clone, Copy)]
struct ChildPlan {
    base_index: usize,
    scale: f64,
    attach_s: f64,
    azimuth: f64,
}

fn plan_children(primary: &OrganCurve, lib: &BaseTreeLibrary, params: &GenParams, rng: &mut SimRng) -> Vec<ChildPlan> {
    if lib.branches.is_empty() || !(rng.gen::<f64>() < params.higher_order_prob) {
        return Vec::new();
    }
    let count = rng.gen_range(1..=2);
    let total = primary.arc_length();
    let [smin, smax] = params.higher_order_scale_range;
    (0..count)
        .map(|_| ChildPlan {
            base_index: rng.gen_range(0..lib.branches.len()),
            scale: if smin == smax { smin } else { rng.gen_range(smin..smax) },
            attach_s: total * rng.gen_range(CHILD_MIN_ATTACH_FRACTION..1.0),
            azimuth: rng.gen_range(0.0..TAU),
        })
        .collect()
}

fn build_child(plan: &ChildPlan, primary: &OrganCurve, lib: &BaseTreeLibrary, params: &GenParams) -> OrganCurve {
    make_child(
        primary,
        &lib.branches[plan.base_index].curve,
        plan.scale,
        plan.attach_s,
        plan.azimuth,
        params.child_branch_angle_deg.to_radians(),
        params.taper_exponent,
    )
}

/// With probability `higher_order_prob`, grows 1–2 second-order branches on
/// `primary` (its index in the tree's branch list is `primary_index`) from
/// randomly picked, scaled base branches. Instance ids are left at 0.
pub fn generate_higher_order(
    primary: &PlacedBranch,
    primary_index: usize,
    lib: &BaseTreeLibrary,
    params: &GenParams,
    rng: &mut SimRng,
) -> Vec<PlacedBranch> {
    plan_children(&primary.curve, lib, params, rng)
        .iter()
        .map(|plan| PlacedBranch {
            curve: build_child(plan, &primary.curve, lib, params),
            order: 2,
            parent: OrganRef::Branch(primary_index),
            attach_s: plan.attach_s,
            instance_id: 0,
        })
        .collect()
}

/// Attachment of `child` to `parent` if `child` hangs directly off `parent`.
fn attachment(tree: &TreeSkeleton, parent: OrganRef, child: OrganRef) -> Option<Attachment> {
    match child {
        OrganRef::Branch(c) if tree.branches[c].parent == parent => {
            Some(Attachment { attach_s: tree.branches[c].attach_s })
        }
        _ => None,
    }
}

/// All pairs of overlapping capsules between different organs of `tree`,
/// ignoring parent-child pairs close to their attachment.
pub fn collision_test(tree: &TreeSkeleton) -> Vec<CollisionPair> {
    let mut refs = vec![OrganRef::Trunk];
    refs.extend((0..tree.branches.len()).map(OrganRef::Branch));
    let mut out = Vec::new();
    for (i, &a) in refs.iter().enumerate() {
        for &b in &refs[i + 1..] {
            let (p, c, att) = match (attachment(tree, a, b), attachment(tree, b, a)) {
                (Some(att), _) => (a, b, Some(att)),
                (None, Some(att)) => (b, a, Some(att)),
                (None, None) => (a, b, None),
            };
            organ_pair_collisions(tree.organ(p), p, tree.organ(c), c, att, &mut out);
        }
    }
    out
}

/// True if `candidate` (hanging off `parent` at `attach_s`) touches any organ of `tree`.
fn collides(tree: &TreeSkeleton, candidate: &OrganCurve, parent: OrganRef, attach_s: f64) -> bool {
    let cand_ref = OrganRef::Branch(tree.branches.len());
    let mut hits = Vec::new();
    let mut check = |r: OrganRef| {
        let att = (r == parent).then_some(Attachment { attach_s });
        organ_pair_collisions(tree.organ(r), r, candidate, cand_ref, att, &mut hits);
        !hits.is_empty()
    };
    if check(OrganRef::Trunk) {
        return true;
    }
    (0..tree.branches.len()).any(|i| check(OrganRef::Branch(i)))
}

/// Generates one tree. Deterministic in `(lib, params, seed)`.
pub fn generate_tree(lib: &BaseTreeLibrary, params: &GenParams, seed: u64) -> Result<TreeSkeleton, GenError> {
    params.validate()?;
    if lib.branches.len() < params.k2 {
        return Err(GenError::NotEnoughBranches { need: params.k2, have: lib.branches.len() });
    }
    let mut rng = rng_from_seed(seed);
    let trunk = apply_tapering(&interpolate_trunk(lib, params.k1, &mut rng)?, params.taper_exponent);
    let heights = sample_branch_heights(&trunk, params, &mut rng)?;
    let mut tree = TreeSkeleton { trunk, branches: Vec::new(), tree_id: 0, seed, dropped_branches: 0 };
    let mut next_id = 1u32;

    for h in heights {
        let mut local = interpolate_branch(lib, h, params.k2, &mut rng)?;
        let mut placed = None;
        for attempt in 0..=params.collision_retries {
            if attempt > 0 {
                local.azimuth = rng.gen_range(0.0..TAU);
            }
            let Some((curve, attach_s)) = place_primary(&tree.trunk, &local, params.taper_exponent) else {
                break;
            };
            if !collides(&tree, &curve, OrganRef::Trunk, attach_s) {
                placed = Some((curve, attach_s));
                break;
            }
        }
        let Some((curve, attach_s)) = placed else {
            tree.dropped_branches += 1;
            continue;
        };
        let primary_index = tree.branches.len();
        tree.branches.push(PlacedBranch { curve, order: 1, parent: OrganRef::Trunk, attach_s, instance_id: next_id });
        next_id += 1;

        let parent = OrganRef::Branch(primary_index);
        for mut plan in plan_children(&tree.branches[primary_index].curve, lib, params, &mut rng) {
            let mut accepted = None;
            for attempt in 0..=params.collision_retries {
                if attempt > 0 {
                    plan.azimuth = rng.gen_range(0.0..TAU);
                }
                let curve = build_child(&plan, &tree.branches[primary_index].curve, lib, params);
                if !collides(&tree, &curve, parent, plan.attach_s) {
                    accepted = Some(curve);
                    break;
                }
            }
            match accepted {
                Some(curve) => {
                    tree.branches.push(PlacedBranch { curve, order: 2, parent, attach_s: plan.attach_s, instance_id: next_id });
                    next_id += 1;
                }
                None => tree.dropped_branches += 1,
            }
        }
    }
    Ok(tree)
}
