//! Procedural orchard panels, virtual laser scanning and segmentation metrics.
//!
//! The pipeline: a [`basetree`] library of trunks and branches is blended into
//! new trees by [`treegen`], trees are lined up into rows by [`panel`], the
//! panel is scanned by the ray-cast scanner in [`vls`], and predictions made on
//! the resulting labeled clouds are scored by [`metrics`].

pub mod basetree;
pub mod bvh;
pub mod cloud;
pub mod collision;
pub mod geom;
pub mod mesh;
pub mod metrics;
pub mod organ;
pub mod panel;
pub mod ply;
pub mod seed;
pub mod treegen;
pub mod vls;
pub mod voxel;

pub use cloud::{CloudMetadata, Label, LabeledPoint, LabeledPointCloud, Semantic};
pub use geom::Point3;
