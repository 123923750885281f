use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use orchard_sim::basetree::{load_library, synth_library, BaseTreeLibrary};
use orchard_sim::metrics::predfile::read_prediction;
use orchard_sim::metrics::{aggregate, evaluate_panel, EvalOptions, MetricsReport};
use orchard_sim::panel::{assemble_panel, panel_to_cloud, place_trees, PanelLayout, TreeSampler};
use orchard_sim::ply::{encode_cloud, read_cloud, Encoding};
use orchard_sim::seed::{derive_named, derive_seed, rng_from_seed};
use orchard_sim::treegen::{generate_tree, TreeSkeleton};
use orchard_sim::vls::{scan_hits, tessellate};
use orchard_sim::voxel::voxelize;
use orchard_sim::{LabeledPointCloud, Semantic};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{scan_dataset_name, Loaded};
use crate::error::CliError;
use crate::output::Outputs;

pub const SURFACE: &str = "surface";

fn tree_file(i: usize) -> String {
    format!("trees/tree_{i:05}.json")
}

fn layout_file(k: usize) -> String {
    format!("panels/panel_{k:04}.json")
}

/// Directory holding a dataset's panel clouds, relative to the output root.
pub fn dataset_dir(name: &str) -> &str {
    if name == SURFACE {
        "panels"
    } else {
        name
    }
}

pub fn cloud_file(dataset: &str, k: usize) -> String {
    format!("{}/panel_{k:04}.ply", dataset_dir(dataset))
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    serde_json::from_slice(&read(path)?).map_err(|e| CliError::io(path, e))
}

/// Runs `f` over `0..n` in parallel and returns the results in index order,
/// failing with the lowest-index error.
fn par_indexed<T: Send>(n: usize, f: impl Fn(usize) -> Result<T, CliError> + Sync) -> Result<Vec<T>, CliError> {
    (0..n).into_par_iter().map(&f).collect::<Vec<_>>().into_iter().collect()
}

fn library(l: &Loaded) -> Result<BaseTreeLibrary, CliError> {
    let path = match &l.config.library.path {
        Some(p) => l.resolve(p),
        None => l.output_dir.join("library.json"),
    };
    load_library(&path).map_err(|e| CliError::from(e).at(&path))
}

pub fn gen_base(l: &Loaded) -> Result<(), CliError> {
    let c = &l.config.library;
    let lib = synth_library(derive_named(l.config.master_seed, "library"), c.n_trunks, c.n_branches, &c.synth)?;
    let out = Outputs::new(&l.output_dir);
    out.write("library.json", lib.to_json().as_bytes())?;
    out.finish("gen-base", l, json!({ "trunks": lib.trunks.len(), "branches": lib.branches.len() }))
}

pub fn gen_trees(l: &Loaded) -> Result<(), CliError> {
    let lib = library(l)?;
    let params = &l.config.trees.params;
    let stream = derive_named(l.config.master_seed, "trees");
    let out = Outputs::new(&l.output_dir);
    out.reset_dir("trees")?;
    let stats = par_indexed(l.config.trees.count, |i| {
        let tree = generate_tree(&lib, params, derive_seed(stream, i as u64))?;
        out.write(&tree_file(i), &serde_json::to_vec(&tree).expect("serializable"))?;
        Ok((tree.branches.len(), tree.dropped_branches as usize))
    })?;
    let branches: usize = stats.iter().map(|s| s.0).sum();
    let dropped: usize = stats.iter().map(|s| s.1).sum();
    out.finish("gen-trees", l, json!({ "trees": stats.len(), "branches": branches, "dropped_branches": dropped }))
}

fn load_trees(l: &Loaded) -> Result<Vec<TreeSkeleton>, CliError> {
    par_indexed(l.config.trees.count, |i| read_json(&l.output_dir.join(tree_file(i))))
}

pub fn gen_panels(l: &Loaded) -> Result<(), CliError> {
    let pool = load_trees(l)?;
    let pc = &l.config.panels;
    let mut sampler = TreeSampler::new(pc.sampling, pool.len());
    let mut rng = rng_from_seed(derive_named(l.config.master_seed, "panels"));
    let mut panels = Vec::with_capacity(pc.count);
    for _ in 0..pc.count {
        panels.push(assemble_panel(&pool, &mut sampler, &pc.params, &mut rng)?);
    }
    let out = Outputs::new(&l.output_dir);
    out.reset_dir("panels")?;
    let surface = derive_named(l.config.master_seed, "surface");
    let points = par_indexed(panels.len(), |k| {
        let (layout, panel) = &panels[k];
        out.write_json(&layout_file(k), layout)?;
        let cloud = panel_to_cloud(panel, pc.surface_density, derive_seed(surface, k as u64))?;
        out.write(&cloud_file(SURFACE, k), &encode_cloud(&cloud, Encoding::BinaryLittleEndian)?)?;
        Ok(cloud.len())
    })?;
    let usage = sampler.usage();
    out.finish(
        "gen-panels",
        l,
        json!({
            "panels": panels.len(),
            "trees_per_panel": panels.iter().map(|p| p.0.n_trees).collect::<Vec<_>>(),
            "surface_points": points,
            "usage_min": usage.iter().min(),
            "usage_max": usage.iter().max(),
        }),
    )
}

fn load_layouts(l: &Loaded) -> Result<Vec<PanelLayout>, CliError> {
    (0..l.config.panels.count).map(|k| read_json(&l.output_dir.join(layout_file(k)))).collect()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct HitStats {
    pub panel: usize,
    pub triangles: usize,
    pub rays: usize,
    pub hits: usize,
}

pub fn scan(l: &Loaded) -> Result<(), CliError> {
    if l.config.scanner.is_empty() {
        return Err(CliError::config("no [[scanner]] entries configured"));
    }
    let pool = load_trees(l)?;
    let layouts = load_layouts(l)?;
    let out = Outputs::new(&l.output_dir);
    let stream = derive_named(l.config.master_seed, "scan");
    let mut summary = serde_json::Map::new();
    for scanner in &l.config.scanner {
        let name = scan_dataset_name(scanner);
        out.reset_dir(&name)?;
        let mut table = Vec::new();
        for (k, layout) in layouts.iter().enumerate() {
            let panel = place_trees(&pool, layout)?;
            let scene = tessellate(&panel, l.config.panels.tube_sides);
            let mut cfg = scanner.for_panel(layout, &panel);
            cfg.noise_seed = derive_seed(scanner.noise_seed ^ stream, k as u64);
            let result = scan_hits(&scene, &cfg).map_err(|e| CliError::config(e.to_string()))?;
            let cloud = result.to_cloud(&cfg);
            out.write(&cloud_file(&name, k), &encode_cloud(&cloud, Encoding::BinaryLittleEndian)?)?;
            table.push(HitStats { panel: k, triangles: scene.triangle_count(), rays: result.ray_count, hits: result.hits.len() });
        }
        let hits: usize = table.iter().map(|h| h.hits).sum();
        let rays: usize = table.iter().map(|h| h.rays).sum();
        out.write_json(&format!("{name}/hits.json"), &table)?;
        summary.insert(name, json!({ "rays": rays, "hits": hits }));
    }
    out.finish("scan", l, summary.into())
}

/// Configured datasets whose directory exists.
fn present_datasets(l: &Loaded) -> Vec<String> {
    std::iter::once(SURFACE.to_string())
        .chain(l.config.scanner.iter().map(scan_dataset_name))
        .filter(|d| l.output_dir.join(dataset_dir(d)).is_dir())
        .collect()
}

fn load_cloud(l: &Loaded, dataset: &str, k: usize) -> Result<LabeledPointCloud, CliError> {
    let path = l.output_dir.join(cloud_file(dataset, k));
    read_cloud(&path).map_err(|e| CliError::from(e).at(&path))
}

#[derive(Serialize)]
struct VoxelFile<'a> {
    voxel_size: f64,
    n_points: usize,
    n_voxels: usize,
    voxels: &'a [[i64; 3]],
    /// Voxel slot of every input point, in point order.
    point_slots: Vec<usize>,
}

pub fn voxelize_cmd(l: &Loaded) -> Result<(), CliError> {
    let size = l.config.voxel_size.ok_or_else(|| CliError::config("voxel_size is required for voxelize"))?;
    let datasets = present_datasets(l);
    if datasets.is_empty() {
        return Err(CliError::new(crate::error::Category::Io, "no panel datasets found; run gen-panels or scan first"));
    }
    let out = Outputs::new(&l.output_dir);
    out.reset_dir("voxels")?;
    let mut summary = serde_json::Map::new();
    for d in &datasets {
        let counts = par_indexed(l.config.panels.count, |k| {
            let cloud = load_cloud(l, d, k)?;
            let grid = voxelize(&cloud, size).map_err(|e| CliError::from(e).at(Path::new(&cloud_file(d, k))))?;
            let file = VoxelFile {
                voxel_size: size,
                n_points: cloud.len(),
                n_voxels: grid.len(),
                voxels: &grid.voxels,
                point_slots: grid.point_slots(),
            };
            out.write(&format!("voxels/{d}/panel_{k:04}.json"), &serde_json::to_vec(&file).expect("serializable"))?;
            Ok((cloud.len(), grid.len()))
        })?;
        let points: usize = counts.iter().map(|c| c.0).sum();
        let voxels: usize = counts.iter().map(|c| c.1).sum();
        summary.insert(d.clone(), json!({ "points": points, "voxels": voxels }));
    }
    out.finish("voxelize", l, summary.into())
}

pub fn eval(l: &Loaded) -> Result<String, CliError> {
    let d = &l.config.eval.dataset;
    let known: BTreeSet<String> =
        std::iter::once(SURFACE.to_string()).chain(l.config.scanner.iter().map(scan_dataset_name)).collect();
    if !known.contains(d) {
        return Err(CliError::config(format!("eval.dataset `{d}` is not one of {known:?}")));
    }
    let pred_dir: PathBuf = l.resolve(&l.config.eval.predictions_dir);
    let opts = EvalOptions { min_instance_points: l.config.eval.min_instance_points, ..EvalOptions::default() };
    let out = Outputs::new(&l.output_dir);
    out.reset_dir(&format!("eval/{d}"))?;
    let reports: Vec<MetricsReport> = par_indexed(l.config.panels.count, |k| {
        let gt = load_cloud(l, d, k)?;
        let path = pred_dir.join(format!("panel_{k:04}.pred"));
        let pred = read_prediction(&path).map_err(|e| CliError::from(e).at(&path))?;
        let report = evaluate_panel(&gt, &pred, &opts).map_err(|e| CliError::from(e).at(&path))?;
        out.write_json(&format!("eval/{d}/panel_{k:04}.json"), &report)?;
        Ok(report)
    })?;
    let text = match aggregate(&reports) {
        Some(mean) => {
            out.write_json(&format!("eval/{d}/aggregate.json"), &mean)?;
            let text = format!("dataset = {d}\npanels = {}\n{}", reports.len(), mean.to_text());
            out.write(&format!("eval/{d}/aggregate.txt"), text.as_bytes())?;
            text
        }
        None => format!("dataset = {d}\npanels = 0\n"),
    };
    out.finish("eval", l, json!({ "dataset": d, "panels": reports.len() }))?;
    Ok(text)
}

#[derive(Default)]
struct CloudStats {
    points: usize,
    trunk: usize,
    trees: usize,
    branches: usize,
}

fn cloud_stats(c: &LabeledPointCloud) -> CloudStats {
    let mut trees = BTreeSet::new();
    let mut branches = BTreeSet::new();
    let mut trunk = 0;
    for p in &c.points {
        trees.insert(p.label.tree_id);
        if p.label.semantic == Semantic::Trunk {
            trunk += 1;
        } else {
            branches.insert((p.label.tree_id, p.label.branch_id));
        }
    }
    CloudStats { points: c.len(), trunk, trees: trees.len(), branches: branches.len() }
}

pub fn stats(l: &Loaded) -> Result<String, CliError> {
    let mut s = String::new();
    let datasets = present_datasets(l);
    if datasets.is_empty() {
        return Err(CliError::new(crate::error::Category::Io, "no panel datasets found; run gen-panels or scan first"));
    }
    writeln!(s, "{:<14} {:>7} {:>12} {:>8} {:>8} {:>8} {:>9}", "dataset", "panels", "points", "trunk%", "branch%", "trees", "branches").unwrap();
    for d in &datasets {
        let per = par_indexed(l.config.panels.count, |k| Ok(cloud_stats(&load_cloud(l, d, k)?)))?;
        let points: usize = per.iter().map(|p| p.points).sum();
        let trunk: usize = per.iter().map(|p| p.trunk).sum();
        let pct = |n: usize| if points == 0 { 0.0 } else { 100.0 * n as f64 / points as f64 };
        writeln!(
            s,
            "{:<14} {:>7} {:>12} {:>8.2} {:>8.2} {:>8} {:>9}",
            d,
            per.len(),
            points,
            pct(trunk),
            pct(points - trunk),
            per.iter().map(|p| p.trees).sum::<usize>(),
            per.iter().map(|p| p.branches).sum::<usize>()
        )
        .unwrap();
    }
    let scans: Vec<_> = l.config.scanner.iter().filter(|c| datasets.contains(&scan_dataset_name(c))).collect();
    if !scans.is_empty() {
        writeln!(s, "\n{:<14} {:>10} {:>14} {:>12} {:>9}", "scan", "res_deg", "rays", "hits", "hit_rate").unwrap();
        for c in scans {
            let name = scan_dataset_name(c);
            let table: Vec<HitStats> = read_json(&l.output_dir.join(&name).join("hits.json"))?;
            let rays: usize = table.iter().map(|h| h.rays).sum();
            let hits: usize = table.iter().map(|h| h.hits).sum();
            let rate = if rays == 0 { 0.0 } else { hits as f64 / rays as f64 };
            writeln!(s, "{:<14} {:>10} {:>14} {:>12} {:>9.5}", name, c.resolution_deg, rays, hits, rate).unwrap();
        }
    }
    let out = Outputs::new(&l.output_dir);
    out.write("stats.txt", s.as_bytes())?;
    out.finish("stats", l, json!({ "datasets": datasets }))?;
    Ok(s)
}
