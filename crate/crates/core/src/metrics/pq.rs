//! Panoptic quality with the strict IoU > 0.5 matching rule.
//!
//! Because masks within one input are disjoint-in-spirit but not required to
//! be, uniqueness is enforced rather than assumed: a pair is accepted only if
//! neither side has been matched already (with disjoint masks at most one
//! candidate can exceed 0.5 anyway).

use serde::{Deserialize, Serialize};

use super::segments::{index_extent, overlap_table, Instance, Segment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PqScores {
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// `(gt index, pred index, IoU)` for every true positive.
    pub matches: Vec<(usize, usize, f64)>,
}

impl PqScores {
    /// Scores from matched IoUs and error counts. An empty-vs-empty comparison
    /// is a perfect score.
    pub fn from_counts(matches: Vec<(usize, usize, f64)>, fp: usize, fn_: usize) -> PqScores {
        let tp = matches.len();
        let iou_sum: f64 = matches.iter().map(|m| m.2).sum();
        let denom = tp as f64 + 0.5 * fp as f64 + 0.5 * fn_ as f64;
        let (sq, rq) = if denom == 0.0 {
            (1.0, 1.0)
        } else if tp == 0 {
            (0.0, 0.0)
        } else {
            (iou_sum / tp as f64, tp as f64 / denom)
        };
        PqScores { pq: sq * rq, sq, rq, tp, fp, fn_, matches }
    }
}

/// Class-aware PQ: a prediction only matches ground truth of its own class.
pub fn panoptic_quality(gt: &[Segment], preds: &[Instance]) -> PqScores {
    let n_points = index_extent(gt.iter().map(|s| s.points.as_slice()).chain(preds.iter().map(|p| p.points.as_slice())));
    let targets: Vec<&[u32]> = gt.iter().map(|s| s.points.as_slice()).collect();
    let masks: Vec<&[u32]> = preds.iter().map(|p| p.points.as_slice()).collect();
    let table = overlap_table(&masks, &targets, n_points);
    let mut gt_used = vec![false; gt.len()];
    let mut matches = Vec::new();
    for (p, row) in table.iter().enumerate() {
        for &(g, iou) in row {
            if iou > 0.5 && gt[g].class == preds[p].class && !gt_used[g] {
                gt_used[g] = true;
                matches.push((g, p, iou));
                break;
            }
        }
    }
    let fp = preds.len() - matches.len();
    let fn_ = gt.len() - matches.len();
    matches.sort_by_key(|m| m.0);
    PqScores::from_counts(matches, fp, fn_)
}
