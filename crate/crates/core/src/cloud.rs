//! Labeled point clouds: every point carries trunk/branch semantics plus tree and
//! branch instance ids.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Point3;

/// Organ class of a point. The numeric values are the on-disk encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Semantic {
    Trunk = 0,
    Branch = 1,
}

impl Semantic {
    pub const ALL: [Semantic; 2] = [Semantic::Trunk, Semantic::Branch];

    pub fn code(self) -> u8 {
        self as u8
    }
}

impl TryFrom<u8> for Semantic {
    type Error = LabelError;

    fn try_from(v: u8) -> Result<Self, LabelError> {
        match v {
            0 => Ok(Semantic::Trunk),
            1 => Ok(Semantic::Branch),
            other => Err(LabelError::UnknownSemantic(other)),
        }
    }
}

impl fmt::Display for Semantic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Semantic::Trunk => f.write_str("trunk"),
            Semantic::Branch => f.write_str("branch"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("unknown semantic value {0} (expected 0=trunk or 1=branch)")]
    UnknownSemantic(u8),
    #[error("tree_id must be >= 1, got {0}")]
    InvalidTreeId(i64),
    #[error("branch_id must be >= 0, got {0}")]
    NegativeBranchId(i64),
    #[error("trunk points must have branch_id 0, got {0}")]
    TrunkWithBranchId(u32),
    #[error("branch points must have branch_id >= 1")]
    BranchWithoutId,
    #[error("non-finite coordinate")]
    NonFinite,
}

/// Per-organ label triple shared by points, triangles and skeleton organs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Label {
    pub semantic: Semantic,
    pub tree_id: u32,
    pub branch_id: u32,
}

impl Label {
    pub fn trunk(tree_id: u32) -> Label {
        Label { semantic: Semantic::Trunk, tree_id, branch_id: 0 }
    }

    pub fn branch(tree_id: u32, branch_id: u32) -> Label {
        Label { semantic: Semantic::Branch, tree_id, branch_id }
    }

    pub fn validate(&self) -> Result<(), LabelError> {
        if self.tree_id == 0 || self.tree_id > i32::MAX as u32 {
            return Err(LabelError::InvalidTreeId(self.tree_id as i64));
        }
        if self.branch_id > i32::MAX as u32 {
            return Err(LabelError::NegativeBranchId(self.branch_id as i32 as i64));
        }
        match self.semantic {
            Semantic::Trunk if self.branch_id != 0 => {
                Err(LabelError::TrunkWithBranchId(self.branch_id))
            }
            Semantic::Branch if self.branch_id == 0 => Err(LabelError::BranchWithoutId),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPoint {
    pub position: Point3,
    pub label: Label,
}

impl LabeledPoint {
    pub fn new(position: Point3, label: Label) -> Result<Self, LabelError> {
        if !position.is_finite() {
            return Err(LabelError::NonFinite);
        }
        label.validate()?;
        Ok(LabeledPoint { position, label })
    }

    #[inline]
    pub fn semantic(&self) -> Semantic {
        self.label.semantic
    }

    #[inline]
    pub fn tree_id(&self) -> u32 {
        self.label.tree_id
    }

    #[inline]
    pub fn branch_id(&self) -> u32 {
        self.label.branch_id
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CloudMetadata {
    pub seed: u64,
    pub generator: String,
}

/// An ordered, labeled point cloud.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledPointCloud {
    pub points: Vec<LabeledPoint>,
    pub metadata: CloudMetadata,
}

impl LabeledPointCloud {
    pub fn new(points: Vec<LabeledPoint>, metadata: CloudMetadata) -> Self {
        LabeledPointCloud { points, metadata }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = Point3> + '_ {
        self.points.iter().map(|p| p.position)
    }

    pub fn semantics(&self) -> Vec<Semantic> {
        self.points.iter().map(|p| p.label.semantic).collect()
    }

    /// Appends another cloud (e.g. a second scan position). Metadata of `self` is kept.
    pub fn extend_from(&mut self, other: &LabeledPointCloud) {
        self.points.extend_from_slice(&other.points);
    }
}
