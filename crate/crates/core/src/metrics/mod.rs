//! Segmentation metrics: semantic mIoU, instance AP/AP50, panoptic quality and
//! the optimal-assignment matcher. All reports scale values by 100.

pub mod ap;
pub mod evaluate;
pub mod hungarian;
pub mod pq;
pub mod predfile;
pub mod segments;
pub mod semantic;

pub use ap::{instance_ap, ApProtocol, ApScores, GreedyEnvelope};
pub use evaluate::{
    aggregate, evaluate, evaluate_panel, gt_as_prediction, gt_segments, EvalOptions, MetricsReport, PredictionSet,
    Task, TaskReport,
};
pub use hungarian::hungarian_assign;
pub use pq::{panoptic_quality, PqScores};
pub use segments::{class, mask_iou, Instance, Segment};
pub use semantic::{miou, SemanticScores};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("length mismatch: gt has {gt} labels, prediction has {pred}")]
    LengthMismatch { gt: usize, pred: usize },
    #[error("point count mismatch: cloud has {cloud} points, prediction has {prediction}")]
    PointCountMismatch { cloud: usize, prediction: usize },
    #[error("invalid prediction: {0}")]
    InvalidPrediction(String),
    #[error("prediction file: line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
