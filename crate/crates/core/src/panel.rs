//! Panels: rows of 8–10 trees with per-panel tree and branch instance ids.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{CloudMetadata, LabeledPoint, LabeledPointCloud};
use crate::geom::Point3;
use crate::mesh::tessellate_trees;
use crate::seed::{rng_from_seed, SimRng};
use crate::treegen::TreeSkeleton;

/// Ring resolution used when sampling reference clouds from organ surfaces.
pub const SURFACE_SIDES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    WithReplacement,
    WithoutReplacement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PanelParams {
    pub n_trees_range: [usize; 2],
    /// Trunk-base to trunk-base distance, meters.
    pub spacing_range: [f64; 2],
    /// Horizontal row direction.
    pub row_axis: Point3,
}

impl Default for PanelParams {
    fn default() -> Self {
        PanelParams { n_trees_range: [8, 10], spacing_range: [0.6, 0.9], row_axis: Point3::UNIT_X }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PanelError {
    #[error("empty tree pool")]
    EmptyPool,
    #[error("sampling without replacement needs at least {need} trees, pool has {have}")]
    PoolTooSmall { need: usize, have: usize },
    #[error("invalid panel parameters: {0}")]
    InvalidParams(String),
    #[error("surface sampling density must be > 0")]
    InvalidDensity,
}

impl PanelParams {
    pub fn validate(&self) -> Result<(), PanelError> {
        let [nmin, nmax] = self.n_trees_range;
        if nmin == 0 || nmin > nmax {
            return Err(PanelError::InvalidParams("n_trees_range must satisfy 1 <= min <= max".into()));
        }
        let [smin, smax] = self.spacing_range;
        if !(smin > 0.0 && smin <= smax && smax.is_finite()) {
            return Err(PanelError::InvalidParams("spacing_range must satisfy 0 < min <= max".into()));
        }
        let axis = Point3::new(self.row_axis.x, self.row_axis.y, 0.0);
        if axis.try_normalize().is_none() {
            return Err(PanelError::InvalidParams("row_axis must have a horizontal component".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelLayout {
    pub n_trees: usize,
    pub spacings: Vec<f64>,
    pub row_axis: Point3,
    /// Pool index of the tree at each row position.
    pub tree_refs: Vec<usize>,
    pub sampling_mode: SamplingMode,
}

/// Trees in row order, translated into place, with `tree_id = position + 1`
/// and branch instance ids dense across the whole panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSkeleton {
    pub trees: Vec<TreeSkeleton>,
}

impl PanelSkeleton {
    pub fn branch_count(&self) -> usize {
        self.trees.iter().map(|t| t.branches.len()).sum()
    }
}

/// Draws pool members across a batch of panels.
///
/// Without replacement, trees come from a shuffled deck that is refilled only
/// once every member has been used, so usage counts never differ by more than
/// one; a tree is never repeated within a panel. With replacement, draws are
/// independent and uniform.
#[derive(Debug, Clone)]
pub struct TreeSampler {
    mode: SamplingMode,
    pool_len: usize,
    deck: Vec<usize>,
    usage: Vec<u64>,
}

impl TreeSampler {
    pub fn new(mode: SamplingMode, pool_len: usize) -> Self {
        TreeSampler { mode, pool_len, deck: Vec::new(), usage: vec![0; pool_len] }
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    /// How often each pool member has been drawn so far.
    pub fn usage(&self) -> &[u64] {
        &self.usage
    }

    fn draw_panel(&mut self, n: usize, rng: &mut SimRng) -> Result<Vec<usize>, PanelError> {
        if self.pool_len == 0 {
            return Err(PanelError::EmptyPool);
        }
        let picks = match self.mode {
            SamplingMode::WithReplacement => (0..n).map(|_| rng.gen_range(0..self.pool_len)).collect(),
            SamplingMode::WithoutReplacement => {
                if self.pool_len < n {
                    return Err(PanelError::PoolTooSmall { need: n, have: self.pool_len });
                }
                let mut picks: Vec<usize> = Vec::with_capacity(n);
                while picks.len() < n {
                    if self.deck.is_empty() {
                        self.deck = (0..self.pool_len).collect();
                        self.deck.shuffle(rng);
                    }
                    // deck is drawn from the back; skip members already in this panel
                    let pos = self
                        .deck
                        .iter()
                        .rposition(|t| !picks.contains(t))
                        .expect("a fresh deck always holds an unused tree");
                    picks.push(self.deck.remove(pos));
                }
                picks
            }
        };
        for &p in &picks {
            self.usage[p] += 1;
        }
        Ok(picks)
    }
}

/// Lays out one panel: draws the tree count and spacings, samples trees from
/// `pool` through `sampler`, and places tree `k` at the cumulative spacing
/// along the row axis with its trunk base on the ground.
pub fn assemble_panel(
    pool: &[TreeSkeleton],
    sampler: &mut TreeSampler,
    params: &PanelParams,
    rng: &mut SimRng,
) -> Result<(PanelLayout, PanelSkeleton), PanelError> {
    params.validate()?;
    if pool.is_empty() {
        return Err(PanelError::EmptyPool);
    }
    let [nmin, nmax] = params.n_trees_range;
    let n_trees = rng.gen_range(nmin..=nmax);
    let [smin, smax] = params.spacing_range;
    let spacings: Vec<f64> =
        (1..n_trees).map(|_| if smin == smax { smin } else { rng.gen_range(smin..=smax) }).collect();
    let tree_refs = sampler.draw_panel(n_trees, rng)?;
    let axis = Point3::new(params.row_axis.x, params.row_axis.y, 0.0).try_normalize().unwrap();
    let layout = PanelLayout { n_trees, spacings, row_axis: axis, tree_refs, sampling_mode: sampler.mode() };
    let panel = place_trees(pool, &layout)?;
    Ok((layout, panel))
}

/// Rebuilds the panel a layout describes from the tree pool it was drawn from.
pub fn place_trees(pool: &[TreeSkeleton], layout: &PanelLayout) -> Result<PanelSkeleton, PanelError> {
    if layout.tree_refs.len() != layout.n_trees || layout.spacings.len() + 1 != layout.n_trees.max(1) {
        return Err(PanelError::InvalidParams("layout counts are inconsistent".into()));
    }
    if let Some(&r) = layout.tree_refs.iter().find(|&&r| r >= pool.len()) {
        return Err(PanelError::PoolTooSmall { need: r + 1, have: pool.len() });
    }
    let mut offset = 0.0;
    let mut next_branch_id = 0u32;
    let mut trees = Vec::with_capacity(layout.n_trees);
    for (k, &r) in layout.tree_refs.iter().enumerate() {
        if k > 0 {
            offset += layout.spacings[k - 1];
        }
        let src = &pool[r];
        let mut t = src.translated(layout.row_axis * offset - src.trunk.base());
        t.tree_id = k as u32 + 1;
        for b in &mut t.branches {
            b.instance_id += next_branch_id;
        }
        next_branch_id += src.branches.len() as u32;
        trees.push(t);
    }
    Ok(PanelSkeleton { trees })
}

/// Samples a noise-free labeled cloud uniformly by area over the organ
/// surfaces (end caps excluded). The point count is `round(area · density)`.
pub fn panel_to_cloud(panel: &PanelSkeleton, density: f64, seed: u64) -> Result<LabeledPointCloud, PanelError> {
    if !(density > 0.0 && density.is_finite()) {
        return Err(PanelError::InvalidDensity);
    }
    let mesh = tessellate_trees(&panel.trees, SURFACE_SIDES, false);
    let mut cdf = Vec::with_capacity(mesh.len());
    let mut acc = 0.0;
    for i in 0..mesh.len() {
        acc += mesh.triangle_area(i);
        cdf.push(acc);
    }
    let count = (acc * density).round() as usize;
    let mut rng = rng_from_seed(seed);
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let u = rng.gen::<f64>() * acc;
        let tri = cdf.partition_point(|&c| c <= u).min(mesh.len() - 1);
        let [a, b, c] = mesh.triangle(tri);
        let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
        let s = r1.sqrt();
        let p = a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2);
        points.push(LabeledPoint { position: p.to_f32_precision(), label: mesh.labels[tri] });
    }
    Ok(LabeledPointCloud::new(
        points,
        CloudMetadata { seed, generator: format!("surface-sample density={density}") },
    ))
}
