//! Instance masks as sorted point-index sets.

use serde::{Deserialize, Serialize};

/// Instance class ids used in prediction sets and ground-truth segment lists.
pub mod class {
    pub const TRUNK: u8 = 0;
    pub const BRANCH: u8 = 1;
    pub const TREE: u8 = 2;
}

/// A ground-truth segment: class plus ascending, unique point indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub class: u8,
    pub points: Vec<u32>,
}

/// A predicted instance mask with its confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub class: u8,
    pub score: f64,
    pub points: Vec<u32>,
}

impl Instance {
    pub fn segment(&self) -> Segment {
        Segment { class: self.class, points: self.points.clone() }
    }
}

/// Size of the intersection of two ascending index lists.
pub fn intersection_size(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// IoU of two ascending index lists; 0 when both are empty.
pub fn mask_iou(a: &[u32], b: &[u32]) -> f64 {
    let inter = intersection_size(a, b);
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Sparse IoU table: for every mask in `preds`, the `(target index, IoU)` pairs
/// with non-zero overlap among `targets`, ascending by target index.
pub fn overlap_table(preds: &[&[u32]], targets: &[&[u32]], n_points: usize) -> Vec<Vec<(usize, f64)>> {
    let mut owners: Vec<Vec<u32>> = vec![Vec::new(); n_points];
    for (t, pts) in targets.iter().enumerate() {
        for &p in pts.iter() {
            owners[p as usize].push(t as u32);
        }
    }
    let mut counts = vec![0usize; targets.len()];
    let mut touched = Vec::new();
    preds
        .iter()
        .map(|pred| {
            for &p in pred.iter() {
                for &t in &owners[p as usize] {
                    if counts[t as usize] == 0 {
                        touched.push(t as usize);
                    }
                    counts[t as usize] += 1;
                }
            }
            touched.sort_unstable();
            let row = touched
                .iter()
                .map(|&t| {
                    let inter = counts[t];
                    let union = pred.len() + targets[t].len() - inter;
                    (t, inter as f64 / union as f64)
                })
                .collect();
            for &t in &touched {
                counts[t] = 0;
            }
            touched.clear();
            row
        })
        .collect()
}

/// Number of points a mask set refers to (one past the largest index).
pub fn index_extent<'a>(masks: impl IntoIterator<Item = &'a [u32]>) -> usize {
    masks.into_iter().filter_map(|m| m.last()).map(|&x| x as usize + 1).max().unwrap_or(0)
}
