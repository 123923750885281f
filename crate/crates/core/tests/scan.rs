use std::collections::HashSet;

use orchard_sim::basetree::{synth_library, SynthParams};
use orchard_sim::mesh::LabeledMesh;
use orchard_sim::organ::{OrganCurve, OrganKind};
use orchard_sim::panel::{assemble_panel, PanelParams, PanelSkeleton, SamplingMode, TreeSampler};
use orchard_sim::seed::rng_from_seed;
use orchard_sim::treegen::{generate_tree, GenParams};
use orchard_sim::vls::*;
use orchard_sim::{Label, Point3, Semantic};
use rand::Rng;

/// Square in the plane x = `x`, spanning ±`half` in y and z.
fn quad(mesh: &mut LabeledMesh, x: f64, half: f64, label: Label) {
    let base = mesh.vertices.len() as u32;
    for (y, z) in [(-half, -half), (half, -half), (half, half), (-half, half)] {
        mesh.vertices.push(Point3::new(x, y, z));
    }
    mesh.triangles.push([base, base + 1, base + 2]);
    mesh.triangles.push([base, base + 2, base + 3]);
    mesh.labels.extend([label, label]);
}

fn window(az: [f64; 2], el: [f64; 2], res: f64) -> ScannerConfig {
    ScannerConfig { position: Point3::ZERO, az_range_deg: az, el_range_deg: el, resolution_deg: res, ..ScannerConfig::default() }
}

fn small_panel(seed: u64) -> (orchard_sim::panel::PanelLayout, PanelSkeleton) {
    let lib = synth_library(seed, 5, 40, &SynthParams::default()).unwrap();
    let p = GenParams { branch_count_range: [4, 6], ..GenParams::default() };
    let pool: Vec<_> = (0..10).map(|s| generate_tree(&lib, &p, s).unwrap()).collect();
    let mut sampler = TreeSampler::new(SamplingMode::WithoutReplacement, pool.len());
    assemble_panel(&pool, &mut sampler, &PanelParams::default(), &mut rng_from_seed(seed)).unwrap()
}

#[test]
fn quad_window_count() {
    let mut mesh = LabeledMesh::default();
    quad(&mut mesh, 10.0, 1.0, Label::trunk(1));
    let scene = TriangleMeshScene::new(mesh);
    let r = scan_hits(&scene, &window([-0.5, 0.5], [-0.5, 0.5], 0.1)).unwrap();
    assert_eq!(r.ray_count, 121);
    assert_eq!(r.hits.len(), 121);
    assert!(r.hits.iter().all(|h| (h.position.x - 10.0).abs() < 1e-9));
}

#[test]
fn near_quad_occludes_far_quad() {
    let mut mesh = LabeledMesh::default();
    quad(&mut mesh, 10.0, 2.0, Label::trunk(2));
    quad(&mut mesh, 5.0, 1.0, Label::trunk(1));
    let scene = TriangleMeshScene::new(mesh);
    let cloud = scan(&scene, &window([-5.0, 5.0], [-5.0, 5.0], 0.25)).unwrap();
    assert_eq!(cloud.len(), 41 * 41);
    assert!(cloud.points.iter().all(|p| p.label.tree_id == 1 && (p.position.x - 5.0).abs() < 1e-5));
}

#[test]
fn max_range_cuts_far_hits() {
    let mut mesh = LabeledMesh::default();
    quad(&mut mesh, 10.0, 1.0, Label::trunk(1));
    let scene = TriangleMeshScene::new(mesh);
    let cfg = ScannerConfig { max_range_m: 9.0, ..window([-0.5, 0.5], [-0.5, 0.5], 0.1) };
    assert!(scan(&scene, &cfg).unwrap().is_empty());
}

/// Thin horizontal branch at 10 m, centred half-way between 0.3° elevation lines.
fn thin_branch_scene() -> TriangleMeshScene {
    let z = 10.0 * 0.15f64.to_radians().tan();
    let pts = (0..11).map(|i| Point3::new(10.0, -0.15 + 0.03 * i as f64, z)).collect();
    let curve = OrganCurve::new(pts, vec![0.004; 11], OrganKind::Branch).unwrap();
    let mut mesh = LabeledMesh::default();
    mesh.add_tube(&curve, Label::branch(1, 1), 16, true);
    TriangleMeshScene::new(mesh)
}

#[test]
fn thin_branch_no_hit_effect() {
    let scene = thin_branch_scene();
    assert!(resolution_to_spacing(0.3, 10.0) > 0.008);
    assert!(resolution_to_spacing(0.03, 10.0) < 0.008);
    let coarse = scan_hits(&scene, &window([-1.5, 1.5], [-1.5, 1.5], 0.3)).unwrap();
    assert_eq!(coarse.hits.len(), 0);
    let fine = scan_hits(&scene, &window([-1.5, 1.5], [-1.5, 1.5], 0.03)).unwrap();
    assert!(fine.hits.len() >= 10, "{}", fine.hits.len());
    // every azimuth column whose ray passes well inside the branch's extent hits it
    let columns: HashSet<usize> = fine.hits.iter().map(|h| h.az_index).collect();
    let inner = (0..=100).filter(|&i| (-1.5 + 0.03 * i as f64).to_radians().tan().abs() * 10.0 < 0.14);
    for i in inner {
        assert!(columns.contains(&i), "column {i} missed");
    }
}

#[test]
fn nested_grids_give_nested_hits() {
    let (layout, panel) = small_panel(3);
    let scene = tessellate(&panel, 8);
    let base = ScannerConfig { az_range_deg: [60.0, 120.0], el_range_deg: [-20.0, 30.0], ..ScannerConfig::default() };
    let keys = |res: f64| -> HashSet<(i64, i64)> {
        let cfg = ScannerConfig { resolution_deg: res, ..base.clone() }.for_panel(&layout, &panel);
        scan_hits(&scene, &cfg).unwrap().hits.iter().map(|h| (h.az_ndeg, h.el_ndeg)).collect()
    };
    let coarse = keys(0.3);
    let fine = keys(0.06);
    assert!(!coarse.is_empty());
    assert!(coarse.is_subset(&fine));
    assert!(fine.len() > coarse.len());
}

#[test]
fn bvh_matches_brute_force_on_tree_scene() {
    let lib = synth_library(4, 5, 40, &SynthParams::default()).unwrap();
    let p = GenParams { branch_count_range: [3, 4], higher_order_prob: 0.0, ..GenParams::default() };
    let tree = generate_tree(&lib, &p, 1).unwrap();
    let scene = tessellate(&PanelSkeleton { trees: vec![tree] }, 6);
    assert!(scene.triangle_count() <= 5000, "{}", scene.triangle_count());
    let mut rng = rng_from_seed(12);
    let mut hits = 0;
    for _ in 0..20_000 {
        let origin = Point3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(0.0..3.5));
        let target = Point3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(0.0..3.0));
        let dir = (target - origin).try_normalize().unwrap();
        let a = scene.cast(origin, dir, 10.0);
        assert_eq!(a, scene.cast_brute_force(origin, dir, 10.0));
        hits += a.is_some() as usize;
    }
    assert!(hits > 100, "{hits}");
}

fn point_triangle_distance(p: Point3, [a, b, c]: [Point3; 3]) -> f64 {
    // dense barycentric sampling is too slow; project to the plane and clamp to edges
    let n = (b - a).cross(c - a).try_normalize().unwrap();
    let q = p - n * (p - a).dot(n);
    let inside = [(a, b), (b, c), (c, a)].iter().all(|&(u, v)| (v - u).cross(q - u).dot(n) >= -1e-12);
    if inside {
        return (p - q).norm();
    }
    [(a, b), (b, c), (c, a)]
        .iter()
        .map(|&(u, v)| {
            let t = ((p - u).dot(v - u) / (v - u).norm_squared()).clamp(0.0, 1.0);
            p.distance(u + (v - u) * t)
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn hits_lie_on_triangles_and_rays() {
    let (layout, panel) = small_panel(6);
    let scene = tessellate(&panel, 8);
    let cfg = ScannerConfig { resolution_deg: 0.3, ..ScannerConfig::default() }.for_panel(&layout, &panel);
    let r = scan_hits(&scene, &cfg).unwrap();
    assert!(r.hits.len() > 100);
    assert!(r.hits.len() <= r.ray_count);
    for h in &r.hits {
        assert!(point_triangle_distance(h.position, scene.mesh.triangle(h.triangle as usize)) < 1e-6);
        assert!((h.position - h.origin).cross(h.direction).norm() < 1e-9);
        assert!(h.range <= cfg.max_range_m);
        assert_eq!(h.label, scene.mesh.labels[h.triangle as usize]);
    }
    let cloud = r.to_cloud(&cfg);
    assert!(cloud.points.iter().any(|p| p.label.semantic == Semantic::Branch));
}

#[test]
fn output_independent_of_thread_count() {
    let (layout, panel) = small_panel(2);
    let scene = tessellate(&panel, 8);
    let cfg = ScannerConfig { resolution_deg: 0.3, range_noise_sigma_m: 0.002, noise_seed: 5, ..ScannerConfig::default() }.for_panel(&layout, &panel);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| scan(&scene, &cfg).unwrap())
    };
    let one = run(1);
    assert!(!one.is_empty());
    assert_eq!(one, run(3));
    assert_eq!(one, run(1));
}

#[test]
fn row_frame_places_scanner_beside_row() {
    let (layout, panel) = small_panel(1);
    let cfg = ScannerConfig::default().for_panel(&layout, &panel);
    let mid = (panel.trees[0].trunk.base() + panel.trees.last().unwrap().trunk.base()) * 0.5;
    let rel = cfg.position - Point3::new(mid.x, mid.y, 0.0);
    assert!((rel.norm() - (9.0f64 + 2.25).sqrt()).abs() < 1e-9);
    assert!(rel.dot(layout.row_axis).abs() < 1e-9);
}
