//! Brute-force reference implementations used only by tests. Each one is
//! written from the metric's definition with hash sets and exhaustive loops,
//! sharing no code with the library.
#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use orchard_sim::metrics::{Instance, Segment};
use orchard_sim::Point3;

pub fn voxel_set(points: &[Point3], size: f64) -> HashSet<[i64; 3]> {
    points.iter().map(|p| floor_index(*p, size)).collect()
}

pub fn floor_index(p: Point3, size: f64) -> [i64; 3] {
    [(p.x / size).floor() as i64, (p.y / size).floor() as i64, (p.z / size).floor() as i64]
}

pub fn iou(a: &[u32], b: &[u32]) -> f64 {
    let a: HashSet<u32> = a.iter().copied().collect();
    let b: HashSet<u32> = b.iter().copied().collect();
    let union = a.union(&b).count();
    if union == 0 {
        0.0
    } else {
        a.intersection(&b).count() as f64 / union as f64
    }
}

/// Mean IoU over classes that occur in either labeling.
pub fn miou(gt: &[u8], pred: &[u8], classes: &[u8]) -> f64 {
    let mut ious = Vec::new();
    for &c in classes {
        let g: HashSet<usize> = (0..gt.len()).filter(|&i| gt[i] == c).collect();
        let p: HashSet<usize> = (0..pred.len()).filter(|&i| pred[i] == c).collect();
        let union = g.union(&p).count();
        if union > 0 {
            ious.push(g.intersection(&p).count() as f64 / union as f64);
        }
    }
    if ious.is_empty() {
        1.0
    } else {
        ious.iter().sum::<f64>() / ious.len() as f64
    }
}

/// AP of one class at one threshold: greedy matching, then the area under
/// the interpolated curve p_interp(r) = max_{r' ≥ r} p(r'), summed over the
/// recall steps.
fn class_ap(gt: &[&Segment], preds: &[&Instance], t: f64) -> f64 {
    if gt.is_empty() {
        return if preds.is_empty() { 1.0 } else { 0.0 };
    }
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].score.partial_cmp(&preds[a].score).unwrap().then(a.cmp(&b)));
    let mut used = vec![false; gt.len()];
    let mut curve = Vec::new();
    let mut tp = 0;
    for (rank, &p) in order.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for g in 0..gt.len() {
            let v = iou(&preds[p].points, &gt[g].points);
            if !used[g] && v > 0.0 && best.map_or(true, |(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        if let Some((g, v)) = best {
            if v >= t {
                used[g] = true;
                tp += 1;
            }
        }
        curve.push((tp as f64 / gt.len() as f64, tp as f64 / (rank + 1) as f64));
    }
    let mut area = 0.0;
    let mut last_r = 0.0;
    for k in 0..curve.len() {
        let r = curve[k].0;
        if r > last_r {
            let p = curve[k..].iter().map(|c| c.1).fold(0.0, f64::max);
            area += (r - last_r) * p;
            last_r = r;
        }
    }
    area
}

/// Returns (per-threshold AP averaged over gt classes, AP, AP50).
pub fn ap(gt: &[Segment], preds: &[Instance], thresholds: &[f64]) -> (Vec<f64>, f64, f64) {
    let mut classes: Vec<u8> = gt.iter().map(|s| s.class).collect();
    classes.sort();
    classes.dedup();
    let per: Vec<f64> = thresholds
        .iter()
        .map(|&t| {
            if classes.is_empty() {
                return if preds.is_empty() { 1.0 } else { 0.0 };
            }
            classes
                .iter()
                .map(|&c| {
                    let g: Vec<&Segment> = gt.iter().filter(|s| s.class == c).collect();
                    let p: Vec<&Instance> = preds.iter().filter(|s| s.class == c).collect();
                    class_ap(&g, &p, t)
                })
                .sum::<f64>()
                / classes.len() as f64
        })
        .collect();
    let mean = per.iter().sum::<f64>() / per.len() as f64;
    let at50 = thresholds.iter().position(|&t| (t - 0.5).abs() < 1e-12).map_or(per[0], |i| per[i]);
    (per, mean, at50)
}

/// (PQ, SQ, RQ, matches) from all pairs with IoU > 0.5 and equal class.
/// Panics if any segment takes part in two such pairs.
pub fn pq(gt: &[Segment], preds: &[Instance]) -> (f64, f64, f64, usize) {
    let mut pairs = Vec::new();
    for (g, s) in gt.iter().enumerate() {
        for (p, i) in preds.iter().enumerate() {
            let v = iou(&s.points, &i.points);
            if s.class == i.class && v > 0.5 {
                pairs.push((g, p, v));
            }
        }
    }
    let mut seen_g = HashMap::new();
    let mut seen_p = HashMap::new();
    for &(g, p, _) in &pairs {
        assert!(seen_g.insert(g, p).is_none(), "gt {g} matched twice");
        assert!(seen_p.insert(p, g).is_none(), "pred {p} matched twice");
    }
    let tp = pairs.len() as f64;
    let fp = preds.len() as f64 - tp;
    let fn_ = gt.len() as f64 - tp;
    if tp + fp + fn_ == 0.0 {
        return (1.0, 1.0, 1.0, 0);
    }
    if tp == 0.0 {
        return (0.0, 0.0, 0.0, 0);
    }
    let sum: f64 = pairs.iter().map(|x| x.2).sum();
    let pq = sum / (tp + 0.5 * fp + 0.5 * fn_);
    (pq, sum / tp, tp / (tp + 0.5 * fp + 0.5 * fn_), pairs.len())
}

/// Minimum total cost over every injective assignment of the smaller side.
pub fn min_assignment_cost(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let m = if n == 0 { 0 } else { cost[0].len() };
    if n == 0 || m == 0 {
        return 0.0;
    }
    if n > m {
        let t: Vec<Vec<f64>> = (0..m).map(|j| (0..n).map(|i| cost[i][j]).collect()).collect();
        return min_assignment_cost(&t);
    }
    fn rec(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
        if row == cost.len() {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                best = best.min(cost[row][j] + rec(cost, row + 1, used));
                used[j] = false;
            }
        }
        best
    }
    rec(cost, 0, &mut vec![false; m])
}

/// Closest distance between two segments by dense parameter sampling plus
/// endpoint projections; an upper bound that converges to the true distance.
pub fn sampled_segment_distance(p1: Point3, q1: Point3, p2: Point3, q2: Point3, steps: usize) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..=steps {
        let a = p1.lerp(q1, i as f64 / steps as f64);
        for j in 0..=steps {
            let b = p2.lerp(q2, j as f64 / steps as f64);
            best = best.min(a.distance(b));
        }
    }
    best
}

/// A randomized small evaluation problem.
pub struct MetricCase {
    pub gt_semantic: Vec<u8>,
    pub pred_semantic: Vec<u8>,
    pub gt: Vec<Segment>,
    /// Disjoint masks, as a panoptic prediction would produce.
    pub preds: Vec<Instance>,
    /// Possibly overlapping masks.
    pub overlapping: Vec<Instance>,
    pub cost: Vec<Vec<f64>>,
}

/// Up to 200 points, up to 8 instances per side, a cost matrix up to 7×7.
/// Predictions are perturbed copies of the ground truth so IoUs spread
/// around the matching thresholds; scores come from a small set to force ties.
pub fn random_case(seed: u64) -> MetricCase {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=200usize);
    let n_gt = rng.gen_range(0..=8usize);
    let n_pred = rng.gen_range(0..=8usize);
    let gt_semantic: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
    let pred_semantic = gt_semantic.iter().map(|&c| if rng.gen_bool(0.3) { rng.gen_range(0..2) } else { c }).collect();

    let gt_owner: Vec<Option<usize>> = (0..n).map(|_| (n_gt > 0 && rng.gen_bool(0.8)).then(|| rng.gen_range(0..n_gt))).collect();
    let gt_class: Vec<u8> = (0..n_gt).map(|_| rng.gen_range(0..2)).collect();
    let relabel: Vec<usize> = (0..n_gt.max(1)).map(|_| rng.gen_range(0..n_pred.max(1))).collect();
    let pred_owner: Vec<Option<usize>> = gt_owner
        .iter()
        .map(|o| {
            if n_pred == 0 {
                None
            } else if rng.gen_bool(0.75) {
                o.map(|g| relabel[g])
            } else {
                rng.gen_bool(0.5).then(|| rng.gen_range(0..n_pred))
            }
        })
        .collect();
    let masks = |owner: &[Option<usize>], k: usize| -> Vec<Vec<u32>> {
        let mut m = vec![Vec::new(); k];
        for (i, o) in owner.iter().enumerate() {
            if let Some(o) = o {
                m[*o].push(i as u32);
            }
        }
        m
    };
    let gt: Vec<Segment> = masks(&gt_owner, n_gt).into_iter().zip(&gt_class).map(|(points, &class)| Segment { class, points }).collect();
    let scores = [0.25, 0.5, 0.75, 1.0];
    let pick_class = |rng: &mut rand_chacha::ChaCha8Rng| if n_gt > 0 && rng.gen_bool(0.8) { gt_class[rng.gen_range(0..n_gt)] } else { rng.gen_range(0..2) };
    let preds: Vec<Instance> = masks(&pred_owner, n_pred)
        .into_iter()
        .enumerate()
        .map(|(k, points)| {
            // class of the gt instance this prediction mostly copies, if any
            let class = relabel.iter().position(|&r| r == k).filter(|&g| g < n_gt && rng.gen_bool(0.85)).map(|g| gt_class[g]).unwrap_or_else(|| pick_class(&mut rng));
            Instance { class, score: scores[rng.gen_range(0..4)], points }
        })
        .collect();
    let overlapping: Vec<Instance> = (0..rng.gen_range(0..=8))
        .map(|_| {
            let base: Vec<u32> = if !gt.is_empty() && rng.gen_bool(0.7) { gt[rng.gen_range(0..gt.len())].points.clone() } else { Vec::new() };
            let mut pts: Vec<u32> = base.into_iter().filter(|_| rng.gen_bool(0.8)).collect();
            pts.extend((0..rng.gen_range(0..10)).map(|_| rng.gen_range(0..n as u32)));
            pts.sort_unstable();
            pts.dedup();
            Instance { class: pick_class(&mut rng), score: scores[rng.gen_range(0..4)], points: pts }
        })
        .collect();
    let (r, c) = (rng.gen_range(1..=7), rng.gen_range(1..=7));
    let cost = (0..r).map(|_| (0..c).map(|_| if rng.gen_bool(0.2) { rng.gen_range(0..3) as f64 } else { rng.gen_range(-5.0..5.0) }).collect()).collect();
    MetricCase { gt_semantic, pred_semantic, gt, preds, overlapping, cost }
}
