//! Panel-level evaluation for the two tasks.
//!
//! P2T (panel → tree): instances are trees, one ground-truth segment per
//! `tree_id`, predicted as class [`class::TREE`]. P2B (panel → branch): mIoU
//! over the trunk/branch semantics, AP and PQ over branch instances. Trunks
//! are scored separately as one segment per tree.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ap::{default_thresholds, instance_ap, ApScores};
use super::pq::{panoptic_quality, PqScores};
use super::segments::{class, Instance, Segment};
use super::semantic::{miou, SemanticScores};
use super::MetricsError;
use crate::cloud::{LabeledPointCloud, Semantic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Task {
    P2T,
    P2B,
}

/// Per-point semantic classes plus scored instance masks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub semantic: Vec<u8>,
    pub instances: Vec<Instance>,
}

impl PredictionSet {
    pub fn validate(&self, n_points: usize) -> Result<(), MetricsError> {
        if self.semantic.len() != n_points {
            return Err(MetricsError::PointCountMismatch { cloud: n_points, prediction: self.semantic.len() });
        }
        if let Some(i) = self.semantic.iter().position(|&c| c > class::BRANCH) {
            return Err(MetricsError::InvalidPrediction(format!("semantic[{i}]: unknown class {}", self.semantic[i])));
        }
        for (k, inst) in self.instances.iter().enumerate() {
            let bad = |m: String| Err(MetricsError::InvalidPrediction(format!("instance {k}: {m}")));
            if inst.class > class::TREE {
                return bad(format!("unknown class {}", inst.class));
            }
            if !inst.score.is_finite() || !(0.0..=1.0).contains(&inst.score) {
                return bad(format!("score {} outside [0, 1]", inst.score));
            }
            if inst.points.windows(2).any(|w| w[0] >= w[1]) {
                return bad("point indices not strictly ascending".into());
            }
            if let Some(&last) = inst.points.last() {
                if last as usize >= n_points {
                    return bad(format!("point index {last} out of range"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Predicted instances with fewer points are discarded before scoring.
    pub min_instance_points: usize,
    pub thresholds: Vec<f64>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { min_instance_points: 0, thresholds: default_thresholds() }
    }
}

/// Raw (unscaled) scores of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task: Task,
    pub semantic: Option<SemanticScores>,
    pub ap: ApScores,
    pub pq: PqScores,
    /// P2B only: trunks, one segment per tree.
    pub trunk_pq: Option<PqScores>,
}

/// Ground-truth segments of one instance class, in ascending key order.
pub fn gt_segments(cloud: &LabeledPointCloud, cls: u8) -> Vec<Segment> {
    let mut groups: BTreeMap<(u32, u32), Vec<u32>> = BTreeMap::new();
    for (i, p) in cloud.points.iter().enumerate() {
        let key = match (cls, p.label.semantic) {
            (class::TREE, _) => (p.label.tree_id, 0),
            (class::TRUNK, Semantic::Trunk) => (p.label.tree_id, 0),
            (class::BRANCH, Semantic::Branch) => (p.label.tree_id, p.label.branch_id),
            _ => continue,
        };
        groups.entry(key).or_default().push(i as u32);
    }
    groups.into_values().map(|points| Segment { class: cls, points }).collect()
}

/// The ground truth restated as a prediction with unit scores.
pub fn gt_as_prediction(cloud: &LabeledPointCloud) -> PredictionSet {
    let instances = [class::TRUNK, class::BRANCH, class::TREE]
        .into_iter()
        .flat_map(|c| gt_segments(cloud, c))
        .map(|s| Instance { class: s.class, score: 1.0, points: s.points })
        .collect();
    PredictionSet { semantic: cloud.points.iter().map(|p| p.label.semantic.code()).collect(), instances }
}

pub fn evaluate(gt: &LabeledPointCloud, pred: &PredictionSet, task: Task) -> Result<TaskReport, MetricsError> {
    evaluate_with(gt, pred, task, &EvalOptions::default())
}

pub fn evaluate_with(
    gt: &LabeledPointCloud,
    pred: &PredictionSet,
    task: Task,
    opts: &EvalOptions,
) -> Result<TaskReport, MetricsError> {
    pred.validate(gt.len())?;
    let of_class = |c: u8| -> Vec<Instance> {
        pred.instances.iter().filter(|i| i.class == c && i.points.len() >= opts.min_instance_points).cloned().collect()
    };
    match task {
        Task::P2T => {
            let segs = gt_segments(gt, class::TREE);
            let preds = of_class(class::TREE);
            Ok(TaskReport {
                task,
                semantic: None,
                ap: instance_ap(&segs, &preds, &opts.thresholds),
                pq: panoptic_quality(&segs, &preds),
                trunk_pq: None,
            })
        }
        Task::P2B => {
            let gt_sem: Vec<u8> = gt.points.iter().map(|p| p.label.semantic.code()).collect();
            let semantic = miou(&gt_sem, &pred.semantic, &[class::TRUNK, class::BRANCH])?;
            let branches = gt_segments(gt, class::BRANCH);
            let branch_preds = of_class(class::BRANCH);
            Ok(TaskReport {
                task,
                semantic: Some(semantic),
                ap: instance_ap(&branches, &branch_preds, &opts.thresholds),
                pq: panoptic_quality(&branches, &branch_preds),
                trunk_pq: Some(panoptic_quality(&gt_segments(gt, class::TRUNK), &of_class(class::TRUNK))),
            })
        }
    }
}

/// Headline numbers of one panel (or a mean over panels), all ×100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(rename = "mIoU")]
    pub miou: f64,
    #[serde(rename = "P2B_AP50")]
    pub p2b_ap50: f64,
    #[serde(rename = "P2B_AP")]
    pub p2b_ap: f64,
    #[serde(rename = "P2B_PQ")]
    pub p2b_pq: f64,
    #[serde(rename = "P2T_AP")]
    pub p2t_ap: f64,
    #[serde(rename = "P2B_SQ")]
    pub p2b_sq: f64,
    #[serde(rename = "P2B_RQ")]
    pub p2b_rq: f64,
    #[serde(rename = "P2T_AP50")]
    pub p2t_ap50: f64,
    #[serde(rename = "P2T_PQ")]
    pub p2t_pq: f64,
    #[serde(rename = "trunk_IoU")]
    pub trunk_iou: Option<f64>,
    #[serde(rename = "branch_IoU")]
    pub branch_iou: Option<f64>,
    #[serde(rename = "trunk_PQ")]
    pub trunk_pq: f64,
}

impl MetricsReport {
    /// Fixed-key text form, one `key = value` per line.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
        let mut s = String::new();
        for (k, v) in [
            ("mIoU", self.miou),
            ("P2B_AP50", self.p2b_ap50),
            ("P2B_AP", self.p2b_ap),
            ("P2B_PQ", self.p2b_pq),
            ("P2T_AP", self.p2t_ap),
            ("P2B_SQ", self.p2b_sq),
            ("P2B_RQ", self.p2b_rq),
            ("P2T_AP50", self.p2t_ap50),
            ("P2T_PQ", self.p2t_pq),
        ] {
            s += &format!("{k} = {v:.4}\n");
        }
        s += &format!("trunk_IoU = {}\nbranch_IoU = {}\n", opt(self.trunk_iou), opt(self.branch_iou));
        s += &format!("trunk_PQ = {:.4}\n", self.trunk_pq);
        s
    }
}

pub fn evaluate_panel(gt: &LabeledPointCloud, pred: &PredictionSet, opts: &EvalOptions) -> Result<MetricsReport, MetricsError> {
    let b = evaluate_with(gt, pred, Task::P2B, opts)?;
    let t = evaluate_with(gt, pred, Task::P2T, opts)?;
    let sem = b.semantic.as_ref().expect("P2B has semantics");
    let class_iou = |c: u8| sem.per_class.iter().find(|(k, _)| *k == c).and_then(|(_, v)| *v).map(|v| v * 100.0);
    Ok(MetricsReport {
        miou: sem.mean * 100.0,
        p2b_ap50: b.ap.ap50 * 100.0,
        p2b_ap: b.ap.ap * 100.0,
        p2b_pq: b.pq.pq * 100.0,
        p2t_ap: t.ap.ap * 100.0,
        p2b_sq: b.pq.sq * 100.0,
        p2b_rq: b.pq.rq * 100.0,
        p2t_ap50: t.ap.ap50 * 100.0,
        p2t_pq: t.pq.pq * 100.0,
        trunk_iou: class_iou(class::TRUNK),
        branch_iou: class_iou(class::BRANCH),
        trunk_pq: b.trunk_pq.as_ref().map_or(0.0, |p| p.pq * 100.0),
    })
}

/// Mean over panels; optional fields average over the panels where present.
pub fn aggregate(reports: &[MetricsReport]) -> Option<MetricsReport> {
    if reports.is_empty() {
        return None;
    }
    let mean = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / reports.len() as f64;
    let mean_opt = |f: fn(&MetricsReport) -> Option<f64>| {
        let v: Vec<f64> = reports.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    Some(MetricsReport {
        miou: mean(|r| r.miou),
        p2b_ap50: mean(|r| r.p2b_ap50),
        p2b_ap: mean(|r| r.p2b_ap),
        p2b_pq: mean(|r| r.p2b_pq),
        p2t_ap: mean(|r| r.p2t_ap),
        p2b_sq: mean(|r| r.p2b_sq),
        p2b_rq: mean(|r| r.p2b_rq),
        p2t_ap50: mean(|r| r.p2t_ap50),
        p2t_pq: mean(|r| r.p2t_pq),
        trunk_iou: mean_opt(|r| r.trunk_iou),
        branch_iou: mean_opt(|r| r.branch_iou),
        trunk_pq: mean(|r| r.trunk_pq),
    })
}
