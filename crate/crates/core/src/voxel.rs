//! Sparse voxelization with a point-to-voxel inverse map.

use std::collections::HashMap;

use thiserror::Error;

use crate::cloud::LabeledPointCloud;
use crate::geom::Point3;

/// Integer voxel coordinates, `floor(coord / voxel_size)` per axis.
pub type VoxelIndex = [i64; 3];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VoxelError {
    #[error("empty input")]
    EmptyInput,
    #[error("invalid voxel size {0}")]
    InvalidVoxelSize(String),
}

#[derive(Debug, Clone)]
pub struct VoxelGrid {
    pub voxel_size: f64,
    /// Occupied voxel -> feature slot. Slots are numbered by first occurrence in the input.
    pub occupied: HashMap<VoxelIndex, usize>,
    /// Occupied voxels in slot order.
    pub voxels: Vec<VoxelIndex>,
    /// Voxel of every input point, same order as the input.
    pub inverse_map: Vec<VoxelIndex>,
}

#[inline]
pub fn voxel_index(p: Point3, voxel_size: f64) -> VoxelIndex {
    [
        (p.x / voxel_size).floor() as i64,
        (p.y / voxel_size).floor() as i64,
        (p.z / voxel_size).floor() as i64,
    ]
}

impl VoxelGrid {
    /// Number of occupied voxels (K_v).
    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    /// Slot of every input point.
    pub fn point_slots(&self) -> Vec<usize> {
        self.inverse_map.iter().map(|v| self.occupied[v]).collect()
    }

    /// Center of a voxel in meters.
    pub fn voxel_center(&self, v: VoxelIndex) -> Point3 {
        Point3::new(
            (v[0] as f64 + 0.5) * self.voxel_size,
            (v[1] as f64 + 0.5) * self.voxel_size,
            (v[2] as f64 + 0.5) * self.voxel_size,
        )
    }
}

pub fn voxelize_points(points: &[Point3], voxel_size: f64) -> Result<VoxelGrid, VoxelError> {
    if !(voxel_size > 0.0 && voxel_size.is_finite()) {
        return Err(VoxelError::InvalidVoxelSize(voxel_size.to_string()));
    }
    if points.is_empty() {
        return Err(VoxelError::EmptyInput);
    }
    let mut occupied = HashMap::new();
    let mut voxels = Vec::new();
    let mut inverse_map = Vec::with_capacity(points.len());
    for &p in points {
        let v = voxel_index(p, voxel_size);
        occupied.entry(v).or_insert_with(|| {
            voxels.push(v);
            voxels.len() - 1
        });
        inverse_map.push(v);
    }
    Ok(VoxelGrid { voxel_size, occupied, voxels, inverse_map })
}

pub fn voxelize(cloud: &LabeledPointCloud, voxel_size: f64) -> Result<VoxelGrid, VoxelError> {
    let pts: Vec<Point3> = cloud.positions().collect();
    voxelize_points(&pts, voxel_size)
}
