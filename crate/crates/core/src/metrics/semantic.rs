use serde::{Deserialize, Serialize};

use super::MetricsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticScores {
    /// `(class, IoU)`; `None` for classes absent from both inputs.
    pub per_class: Vec<(u8, Option<f64>)>,
    /// Mean over classes present in either input. 1 when no class is present.
    pub mean: f64,
}

/// Per-class IoU `|gt_c ∩ pred_c| / |gt_c ∪ pred_c|` and their mean.
pub fn miou(gt: &[u8], pred: &[u8], classes: &[u8]) -> Result<SemanticScores, MetricsError> {
    if gt.len() != pred.len() {
        return Err(MetricsError::LengthMismatch { gt: gt.len(), pred: pred.len() });
    }
    let mut inter = vec![0usize; classes.len()];
    let mut union = vec![0usize; classes.len()];
    let slot = |c: u8| classes.iter().position(|&k| k == c);
    for (&g, &p) in gt.iter().zip(pred) {
        let (sg, sp) = (slot(g), slot(p));
        if g == p {
            if let Some(s) = sg {
                inter[s] += 1;
                union[s] += 1;
            }
        } else {
            if let Some(s) = sg {
                union[s] += 1;
            }
            if let Some(s) = sp {
                union[s] += 1;
            }
        }
    }
    let per_class: Vec<(u8, Option<f64>)> = classes
        .iter()
        .enumerate()
        .map(|(s, &c)| (c, (union[s] > 0).then(|| inter[s] as f64 / union[s] as f64)))
        .collect();
    let present: Vec<f64> = per_class.iter().filter_map(|(_, v)| *v).collect();
    let mean = if present.is_empty() { 1.0 } else { present.iter().sum::<f64>() / present.len() as f64 };
    Ok(SemanticScores { per_class, mean })
}
