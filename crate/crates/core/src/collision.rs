//! Capsule-based collision tests between organs of one tree.

use serde::{Deserialize, Serialize};

use crate::geom::{Aabb, Point3};
use crate::organ::OrganCurve;

/// Fraction of arc length around an attachment that is exempt from parent-child tests.
pub const ATTACH_EXEMPT_FRACTION: f64 = 0.1;

/// Exact minimum distance between segments `[p1, q1]` and `[p2, q2]`.
pub fn segment_distance(p1: Point3, q1: Point3, p2: Point3, q2: Point3) -> f64 {
    const EPS: f64 = 1e-18;
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(r);
    let (s, t);
    if a <= EPS && e <= EPS {
        return r.norm();
    }
    if a <= EPS {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(r);
        if e <= EPS {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 0.0 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    ((p1 + d1 * s) - (p2 + d2 * t)).norm()
}

/// Which organ of a tree: the trunk or a branch by index into the branch list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrganRef {
    Trunk,
    Branch(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionPair {
    pub a: OrganRef,
    pub segment_a: usize,
    pub b: OrganRef,
    pub segment_b: usize,
    /// Centerline distance minus both capsule radii; negative means overlap.
    pub surface_distance: f64,
}

/// Parent-child relation between the two organs under test: the child is
/// attached to the parent at arc-length `attach_s` on the parent.
#[derive(Debug, Clone, Copy)]
pub struct Attachment {
    pub attach_s: f64,
}

struct Capsules {
    starts: Vec<f64>,
    ends: Vec<f64>,
    total: f64,
}

impl Capsules {
    fn of(c: &OrganCurve) -> Capsules {
        let cum = c.cumulative_lengths();
        Capsules {
            starts: cum[..cum.len() - 1].to_vec(),
            ends: cum[1..].to_vec(),
            total: *cum.last().unwrap(),
        }
    }
}

#[inline]
fn capsule_radius(c: &OrganCurve, seg: usize) -> f64 {
    c.radii[seg].max(c.radii[seg + 1])
}

/// All overlapping capsule pairs between organs `a` and `b`. When `b` is a
/// child of `a`, pairs near the attachment are skipped.
pub fn organ_pair_collisions(
    a: &OrganCurve,
    a_ref: OrganRef,
    b: &OrganCurve,
    b_ref: OrganRef,
    child_of_a: Option<Attachment>,
    out: &mut Vec<CollisionPair>,
) {
    if !a.bounds().overlaps(&b.bounds()) {
        return;
    }
    let ca = Capsules::of(a);
    let cb = Capsules::of(b);
    let seg_box = |c: &OrganCurve, i: usize| {
        Aabb::from_points([c.centerline[i], c.centerline[i + 1]]).inflate(capsule_radius(c, i))
    };
    let b_boxes: Vec<Aabb> = (0..b.len() - 1).map(|j| seg_box(b, j)).collect();
    for i in 0..a.len() - 1 {
        let abox = seg_box(a, i);
        let parent_near = child_of_a.is_some_and(|att| {
            let w = ATTACH_EXEMPT_FRACTION * ca.total;
            ca.ends[i] >= att.attach_s - w && ca.starts[i] <= att.attach_s + w
        });
        for (j, bbox) in b_boxes.iter().enumerate() {
            if child_of_a.is_some()
                && (parent_near || cb.starts[j] < ATTACH_EXEMPT_FRACTION * cb.total)
            {
                continue;
            }
            if !abox.overlaps(bbox) {
                continue;
            }
            let d = segment_distance(a.centerline[i], a.centerline[i + 1], b.centerline[j], b.centerline[j + 1]);
            let surface = d - capsule_radius(a, i) - capsule_radius(b, j);
            if surface < 0.0 {
                out.push(CollisionPair { a: a_ref, segment_a: i, b: b_ref, segment_b: j, surface_distance: surface });
            }
        }
    }
}
