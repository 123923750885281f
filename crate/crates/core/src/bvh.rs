//! Bounding volume hierarchy over triangles, built with binned SAH.

use crate::geom::{Aabb, Point3};

const BINS: usize = 16;
const MAX_LEAF: usize = 4;
const MAX_DEPTH: usize = 100;
const TRAVERSAL_COST: f64 = 1.0;
const INTERSECT_COST: f64 = 1.0;
/// Barycentric slack so rays through a shared edge cannot slip between both
/// triangles through rounding.
const EDGE_EPS: f64 = 1e-9;
/// Bounds padding (meters) covering the slack above.
const BOUNDS_PAD: f64 = 1e-7;

/// Precomputed triangle for Möller–Trumbore.
#[derive(Debug, Clone, Copy)]
pub struct Tri {
    pub v0: Point3,
    pub e1: Point3,
    pub e2: Point3,
}

impl Tri {
    pub fn new(a: Point3, b: Point3, c: Point3) -> Tri {
        Tri { v0: a, e1: b - a, e2: c - a }
    }

    fn bounds(&self) -> Aabb {
        Aabb::from_points([self.v0, self.v0 + self.e1, self.v0 + self.e2]).inflate(BOUNDS_PAD)
    }

    /// Ray parameter of the intersection with `origin + t·dir`, if `t > 0`.
    /// Edges and vertices count as hits.
    #[inline]
    pub fn intersect(&self, origin: Point3, dir: Point3) -> Option<f64> {
        let pvec = dir.cross(self.e2);
        let det = self.e1.dot(pvec);
        if det.abs() < 1e-30 {
            return None;
        }
        let inv = 1.0 / det;
        let tvec = origin - self.v0;
        let u = tvec.dot(pvec) * inv;
        if !(-EDGE_EPS..=1.0 + EDGE_EPS).contains(&u) {
            return None;
        }
        let qvec = tvec.cross(self.e1);
        let v = dir.dot(qvec) * inv;
        if v < -EDGE_EPS || u + v > 1.0 + EDGE_EPS {
            return None;
        }
        let t = self.e2.dot(qvec) * inv;
        (t > 0.0).then_some(t)
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    bounds: Aabb,
    /// Leaf: first index into `order`. Interior: index of the left child (right = left + 1).
    start: u32,
    /// Leaf: number of triangles; 0 for interior nodes.
    count: u32,
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
}

/// Nearest hit along a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub triangle: u32,
}

#[inline]
fn better(t: f64, tri: u32, best: &Option<RayHit>) -> bool {
    match best {
        None => true,
        Some(b) => t < b.t || (t == b.t && tri < b.triangle),
    }
}

impl Bvh {
    pub fn build(tris: &[Tri]) -> Bvh {
        let mut bvh = Bvh { nodes: Vec::new(), order: (0..tris.len() as u32).collect() };
        if tris.is_empty() {
            return bvh;
        }
        let boxes: Vec<Aabb> = tris.iter().map(Tri::bounds).collect();
        let centroids: Vec<Point3> = boxes.iter().map(Aabb::centroid).collect();
        bvh.nodes.push(Node { bounds: Aabb::EMPTY, start: 0, count: tris.len() as u32 });
        let mut stack = vec![(0usize, 0usize)];
        while let Some((ni, depth)) = stack.pop() {
            let (start, count) = (bvh.nodes[ni].start as usize, bvh.nodes[ni].count as usize);
            let items = &mut bvh.order[start..start + count];
            let bounds = items.iter().fold(Aabb::EMPTY, |b, &i| b.union(boxes[i as usize]));
            bvh.nodes[ni].bounds = bounds;
            if count <= MAX_LEAF || depth >= MAX_DEPTH {
                continue;
            }
            let Some(mid) = split(items, &boxes, &centroids, bounds) else {
                continue;
            };
            let left = bvh.nodes.len();
            bvh.nodes.push(Node { bounds: Aabb::EMPTY, start: start as u32, count: mid as u32 });
            bvh.nodes.push(Node { bounds: Aabb::EMPTY, start: (start + mid) as u32, count: (count - mid) as u32 });
            bvh.nodes[ni].start = left as u32;
            bvh.nodes[ni].count = 0;
            stack.push((left + 1, depth + 1));
            stack.push((left, depth + 1));
        }
        bvh
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Nearest triangle hit with `0 < t <= t_max`; equal distances resolve to the lower triangle index.
    pub fn intersect(&self, tris: &[Tri], origin: Point3, dir: Point3, t_max: f64) -> Option<RayHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Point3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<RayHit> = None;
        let mut limit = t_max;
        let mut stack = [0u32; MAX_DEPTH + 4];
        let mut sp = 1usize;
        while sp > 0 {
            sp -= 1;
            let n = &self.nodes[stack[sp] as usize];
            if slab(&n.bounds, origin, inv, limit).is_none() {
                continue;
            }
            if n.count > 0 {
                for &ti in &self.order[n.start as usize..(n.start + n.count) as usize] {
                    if let Some(t) = tris[ti as usize].intersect(origin, dir) {
                        if t <= limit && better(t, ti, &best) {
                            best = Some(RayHit { t, triangle: ti });
                            limit = t;
                        }
                    }
                }
                continue;
            }
            let l = n.start;
            let dl = slab(&self.nodes[l as usize].bounds, origin, inv, limit);
            let dr = slab(&self.nodes[l as usize + 1].bounds, origin, inv, limit);
            // push the far child first so the near one is visited next
            match (dl, dr) {
                (Some(a), Some(b)) => {
                    let (near, far) = if a <= b { (l, l + 1) } else { (l + 1, l) };
                    stack[sp] = far;
                    stack[sp + 1] = near;
                    sp += 2;
                }
                (Some(_), None) => {
                    stack[sp] = l;
                    sp += 1;
                }
                (None, Some(_)) => {
                    stack[sp] = l + 1;
                    sp += 1;
                }
                (None, None) => {}
            }
        }
        best
    }
}

/// Entry distance of the ray into `b` if it enters before `limit` (ties kept).
#[inline]
fn slab(b: &Aabb, o: Point3, inv: Point3, limit: f64) -> Option<f64> {
    let (mut t0, mut t1) = (0.0f64, limit);
    for axis in 0..3 {
        let ta = (b.min[axis] - o[axis]) * inv[axis];
        let tb = (b.max[axis] - o[axis]) * inv[axis];
        let (lo, hi) = if ta <= tb { (ta, tb) } else { (tb, ta) };
        // NaN (0 · ∞ on a slab face) leaves the interval unchanged
        if lo > t0 {
            t0 = lo;
        }
        if hi < t1 {
            t1 = hi;
        }
        if t0 > t1 {
            return None;
        }
    }
    Some(t0)
}

/// Partitions `items` by a binned SAH split; returns the left count, or `None`
/// when a leaf is cheaper.
fn split(items: &mut [u32], boxes: &[Aabb], centroids: &[Point3], bounds: Aabb) -> Option<usize> {
    let cbounds = items.iter().fold(Aabb::EMPTY, |b, &i| b.grow(centroids[i as usize]));
    let mut best: Option<(f64, usize, usize)> = None; // cost, axis, bin
    for axis in 0..3 {
        let (lo, hi) = (cbounds.min[axis], cbounds.max[axis]);
        if hi - lo <= 0.0 {
            continue;
        }
        let scale = BINS as f64 / (hi - lo);
        let bin_of = |c: f64| (((c - lo) * scale) as usize).min(BINS - 1);
        let mut bin_box = [Aabb::EMPTY; BINS];
        let mut bin_n = [0usize; BINS];
        for &i in items.iter() {
            let b = bin_of(centroids[i as usize][axis]);
            bin_n[b] += 1;
            bin_box[b] = bin_box[b].union(boxes[i as usize]);
        }
        let mut right_area = [0.0; BINS];
        let mut right_n = [0usize; BINS];
        let (mut acc_b, mut acc_n) = (Aabb::EMPTY, 0);
        for b in (1..BINS).rev() {
            acc_b = acc_b.union(bin_box[b]);
            acc_n += bin_n[b];
            right_area[b] = acc_b.surface_area();
            right_n[b] = acc_n;
        }
        let (mut acc_b, mut acc_n) = (Aabb::EMPTY, 0);
        for b in 0..BINS - 1 {
            acc_b = acc_b.union(bin_box[b]);
            acc_n += bin_n[b];
            if acc_n == 0 || right_n[b + 1] == 0 {
                continue;
            }
            let cost = acc_b.surface_area() * acc_n as f64 + right_area[b + 1] * right_n[b + 1] as f64;
            if best.is_none_or(|(c, _, _)| cost < c) {
                best = Some((cost, axis, b));
            }
        }
    }
    let parent_area = bounds.surface_area().max(f64::MIN_POSITIVE);
    let n = items.len();
    let (cost, axis, bin) = match best {
        Some(b) => b,
        None => {
            // all centroids coincide: split by count
            return (n > MAX_LEAF * 4).then_some(n / 2);
        }
    };
    let split_cost = TRAVERSAL_COST + INTERSECT_COST * cost / parent_area;
    if split_cost >= INTERSECT_COST * n as f64 && n <= 16 {
        return None;
    }
    let (lo, hi) = (cbounds.min[axis], cbounds.max[axis]);
    let scale = BINS as f64 / (hi - lo);
    let mut left = 0;
    for k in 0..n {
        let c = centroids[items[k] as usize][axis];
        if (((c - lo) * scale) as usize).min(BINS - 1) <= bin {
            items.swap(k, left);
            left += 1;
        }
    }
    (left > 0 && left < n).then_some(left)
}

/// Linear scan over all triangles with the same hit rule as [`Bvh::intersect`].
pub fn intersect_brute_force(tris: &[Tri], origin: Point3, dir: Point3, t_max: f64) -> Option<RayHit> {
    let mut best = None;
    for (i, tri) in tris.iter().enumerate() {
        if let Some(t) = tri.intersect(origin, dir) {
            if t <= t_max && better(t, i as u32, &best) {
                best = Some(RayHit { t, triangle: i as u32 });
            }
        }
    }
    best
}
