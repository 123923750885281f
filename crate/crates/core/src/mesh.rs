//! Tube tessellation of organs into labeled triangle meshes.

use crate::cloud::Label;
use crate::geom::Point3;
use crate::organ::OrganCurve;
use crate::treegen::TreeSkeleton;

/// Triangle soup with one label per triangle.
#[derive(Debug, Clone, Default)]
pub struct LabeledMesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[u32; 3]>,
    pub labels: Vec<Label>,
    /// Zero-length centerline segments that were dropped.
    pub skipped_segments: usize,
}

impl LabeledMesh {
    pub fn triangle(&self, i: usize) -> [Point3; 3] {
        let [a, b, c] = self.triangles[i];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    pub fn triangle_area(&self, i: usize) -> f64 {
        let [a, b, c] = self.triangle(i);
        (b - a).cross(c - a).norm() * 0.5
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|i| self.triangle_area(i)).sum()
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Appends a truncated-cone tube along `curve`: `sides` quads (two triangles
    /// each) per centerline segment, plus optional fan caps (`sides - 2`
    /// triangles per end). Ring radius follows the per-sample radii.
    pub fn add_tube(&mut self, curve: &OrganCurve, label: Label, sides: usize, caps: bool) {
        assert!(sides >= 3, "tube needs at least 3 sides");
        let mut pts: Vec<Point3> = Vec::with_capacity(curve.len());
        let mut radii: Vec<f64> = Vec::with_capacity(curve.len());
        for (p, &r) in curve.centerline.iter().zip(&curve.radii) {
            if pts.last().is_some_and(|q: &Point3| q.distance(*p) <= 0.0) {
                self.skipped_segments += 1;
                continue;
            }
            pts.push(*p);
            radii.push(r);
        }
        if pts.len() < 2 {
            return;
        }
        let n = pts.len();
        let seg_dir = |i: usize| (pts[i + 1] - pts[i]).try_normalize().unwrap_or(Point3::UNIT_Z);
        let tangents: Vec<Point3> = (0..n)
            .map(|i| {
                if i == 0 {
                    seg_dir(0)
                } else if i == n - 1 {
                    seg_dir(n - 2)
                } else {
                    (seg_dir(i - 1) + seg_dir(i)).try_normalize().unwrap_or(seg_dir(i))
                }
            })
            .collect();
        // parallel-transported ring frames
        let mut normal = {
            let t = tangents[0];
            (Point3::UNIT_Z - t * t.z).try_normalize().unwrap_or_else(|| t.any_orthogonal())
        };
        let base = self.vertices.len() as u32;
        let ring_angles: Vec<(f64, f64)> =
            (0..sides).map(|k| (std::f64::consts::TAU * k as f64 / sides as f64).sin_cos()).collect();
        for i in 0..n {
            let t = tangents[i];
            normal = (normal - t * normal.dot(t)).try_normalize().unwrap_or_else(|| t.any_orthogonal());
            let binormal = t.cross(normal);
            for &(s, c) in &ring_angles {
                self.vertices.push(pts[i] + (normal * c + binormal * s) * radii[i]);
            }
        }
        let sides32 = sides as u32;
        let v = |ring: usize, k: usize| base + ring as u32 * sides32 + (k % sides) as u32;
        for i in 0..n - 1 {
            for k in 0..sides {
                let (a, b, c, d) = (v(i, k), v(i, k + 1), v(i + 1, k), v(i + 1, k + 1));
                self.triangles.push([a, b, d]);
                self.triangles.push([a, d, c]);
                self.labels.push(label);
                self.labels.push(label);
            }
        }
        if caps {
            for ring in [0, n - 1] {
                for k in 1..sides - 1 {
                    let tri = if ring == 0 {
                        [v(ring, 0), v(ring, k + 1), v(ring, k)]
                    } else {
                        [v(ring, 0), v(ring, k), v(ring, k + 1)]
                    };
                    self.triangles.push(tri);
                    self.labels.push(label);
                }
            }
        }
    }
}

/// Tessellates every organ of `trees`. Trees that were never placed in a panel
/// (tree id 0) are labeled as tree 1.
pub fn tessellate_trees(trees: &[TreeSkeleton], sides: usize, caps: bool) -> LabeledMesh {
    let mut mesh = LabeledMesh::default();
    for tree in trees {
        let tree_id = tree.tree_id.max(1);
        mesh.add_tube(&tree.trunk, Label::trunk(tree_id), sides, caps);
        for b in &tree.branches {
            mesh.add_tube(&b.curve, Label::branch(tree_id, b.instance_id.max(1)), sides, caps);
        }
    }
    mesh
}
