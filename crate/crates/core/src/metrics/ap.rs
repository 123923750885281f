//! Instance average precision.
//!
//! Default protocol: per class and IoU threshold, predictions are visited in
//! descending score order and each is greedily matched to the unmatched
//! ground-truth instance of its class with the highest IoU, counting a true
//! positive iff that IoU reaches the threshold. The precision–recall curve is
//! integrated with all-point interpolation (monotone precision envelope). AP
//! averages over classes that have ground truth, then over thresholds.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::segments::{index_extent, overlap_table, Instance, Segment};

/// IoU thresholds 0.50, 0.55, …, 0.95.
pub fn default_thresholds() -> Vec<f64> {
    (0..10).map(|k| 0.5 + 0.05 * k as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApScores {
    pub thresholds: Vec<f64>,
    pub per_threshold: Vec<f64>,
    /// Mean over all thresholds.
    pub ap: f64,
    /// Value at IoU 0.50 (or the first threshold when 0.50 is absent).
    pub ap50: f64,
}

/// A way of turning one class's predictions and ground truth into an AP value
/// at one IoU threshold.
pub trait ApProtocol {
    /// `ious[p]` lists `(gt index, IoU)` with non-zero overlap for prediction `p`.
    fn class_ap(&self, scores: &[f64], ious: &[Vec<(usize, f64)>], n_gt: usize, threshold: f64) -> f64;
}

/// Greedy score-ordered matching with precision-envelope integration.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyEnvelope;

impl ApProtocol for GreedyEnvelope {
    fn class_ap(&self, scores: &[f64], ious: &[Vec<(usize, f64)>], n_gt: usize, threshold: f64) -> f64 {
        if n_gt == 0 {
            return if scores.is_empty() { 1.0 } else { 0.0 };
        }
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let mut matched = vec![false; n_gt];
        let mut tp_flags = Vec::with_capacity(order.len());
        for &p in &order {
            let mut best: Option<(usize, f64)> = None;
            for &(g, iou) in &ious[p] {
                if !matched[g] && best.is_none_or(|(_, b)| iou > b) {
                    best = Some((g, iou));
                }
            }
            match best {
                Some((g, iou)) if iou >= threshold => {
                    matched[g] = true;
                    tp_flags.push(true);
                }
                _ => tp_flags.push(false),
            }
        }
        precision_envelope_ap(&tp_flags, n_gt)
    }
}

/// All-point interpolated area under the PR curve of a ranked TP/FP list.
pub fn precision_envelope_ap(tp_flags: &[bool], n_gt: usize) -> f64 {
    let mut tp = 0usize;
    let mut precision = Vec::with_capacity(tp_flags.len());
    let mut recall = Vec::with_capacity(tp_flags.len());
    for (k, &is_tp) in tp_flags.iter().enumerate() {
        tp += is_tp as usize;
        precision.push(tp as f64 / (k + 1) as f64);
        recall.push(tp as f64 / n_gt as f64);
    }
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, r) in precision.iter().zip(&recall) {
        ap += (r - prev_recall) * p;
        prev_recall = *r;
    }
    ap
}

pub fn instance_ap(gt: &[Segment], preds: &[Instance], thresholds: &[f64]) -> ApScores {
    instance_ap_with(&GreedyEnvelope, gt, preds, thresholds)
}

pub fn instance_ap_with(protocol: &dyn ApProtocol, gt: &[Segment], preds: &[Instance], thresholds: &[f64]) -> ApScores {
    let classes: BTreeSet<u8> = gt.iter().map(|s| s.class).collect();
    let n_points = index_extent(gt.iter().map(|s| s.points.as_slice()).chain(preds.iter().map(|p| p.points.as_slice())));
    let per_class: Vec<(Vec<f64>, Vec<Vec<(usize, f64)>>, usize)> = classes
        .iter()
        .map(|&c| {
            let g: Vec<&[u32]> = gt.iter().filter(|s| s.class == c).map(|s| s.points.as_slice()).collect();
            let p: Vec<&Instance> = preds.iter().filter(|p| p.class == c).collect();
            let masks: Vec<&[u32]> = p.iter().map(|p| p.points.as_slice()).collect();
            let ious = overlap_table(&masks, &g, n_points);
            (p.iter().map(|p| p.score).collect(), ious, g.len())
        })
        .collect();
    let per_threshold: Vec<f64> = thresholds
        .iter()
        .map(|&t| {
            if per_class.is_empty() {
                return if preds.is_empty() { 1.0 } else { 0.0 };
            }
            per_class.iter().map(|(s, i, n)| protocol.class_ap(s, i, *n, t)).sum::<f64>() / per_class.len() as f64
        })
        .collect();
    let ap = if per_threshold.is_empty() { 0.0 } else { per_threshold.iter().sum::<f64>() / per_threshold.len() as f64 };
    let ap50 = thresholds
        .iter()
        .position(|&t| (t - 0.5).abs() < 1e-12)
        .or(if thresholds.is_empty() { None } else { Some(0) })
        .map(|i| per_threshold[i])
        .unwrap_or(0.0);
    ApScores { thresholds: thresholds.to_vec(), per_threshold, ap, ap50 }
}
