use orchard_sim::basetree::{synth_library, BaseBranch, BaseTreeLibrary, SynthParams};
use orchard_sim::collision::OrganRef;
use orchard_sim::organ::{OrganCurve, OrganKind};
use orchard_sim::seed::rng_from_seed;
use orchard_sim::treegen::*;
use orchard_sim::Point3;
use proptest::prelude::*;

fn vertical(height: f64, n: usize, r0: f64, r1: f64) -> OrganCurve {
    let pts = (0..n).map(|i| Point3::new(0.0, 0.0, height * i as f64 / (n - 1) as f64)).collect();
    let radii = (0..n).map(|i| r0 + (r1 - r0) * i as f64 / (n - 1) as f64).collect();
    OrganCurve::new(pts, radii, OrganKind::Trunk).unwrap()
}

fn horizontal(len: f64, n: usize, r: f64) -> OrganCurve {
    let pts = (0..n).map(|i| Point3::new(len * i as f64 / (n - 1) as f64, 0.0, 0.0)).collect();
    OrganCurve::new(pts, vec![r; n], OrganKind::Branch).unwrap()
}

fn two_branch_lib() -> BaseTreeLibrary {
    let b = |h: f64, len: f64| BaseBranch { curve: horizontal(len, 7, 0.01), attach_height: h, azimuth: 0.0 };
    BaseTreeLibrary { trunks: vec![vertical(3.0, 10, 0.04, 0.01)], branches: vec![b(1.0, 0.6), b(2.0, 1.0)], provenance: "test".into() }
}

fn small_lib() -> BaseTreeLibrary {
    synth_library(2024, 5, 40, &SynthParams::default()).unwrap()
}

fn max_point_diff(a: &OrganCurve, b: &OrganCurve) -> f64 {
    assert_eq!(a.len(), b.len());
    let p = a.centerline.iter().zip(&b.centerline).map(|(x, y)| x.distance(*y));
    let r = a.radii.iter().zip(&b.radii).map(|(x, y)| (x - y).abs());
    p.chain(r).fold(0.0, f64::max)
}

#[test]
fn k1_one_is_resampled_selection() {
    let lib = small_lib();
    for seed in 0..20 {
        let t = interpolate_trunk(&lib, 1, &mut rng_from_seed(seed)).unwrap();
        let best = lib.trunks.iter().map(|b| max_point_diff(&t, &b.resample(TRUNK_SAMPLES))).fold(f64::INFINITY, f64::min);
        assert!(best <= 1e-9, "{best}");
    }
}

#[test]
fn k1_two_midpoint_of_vertical_trunks() {
    let a = vertical(2.0, 5, 0.05, 0.01);
    let b = vertical(3.0, 9, 0.03, 0.02);
    let m = blend_trunks(&[&a, &b], &[0.5, 0.5]);
    assert_eq!(m.len(), TRUNK_SAMPLES);
    assert!((m.height() - 2.5).abs() < 1e-12);
    for (k, p) in m.centerline.iter().enumerate() {
        let f = k as f64 / (TRUNK_SAMPLES - 1) as f64;
        let expect = Point3::new(0.0, 0.0, 0.5 * (2.0 * f) + 0.5 * (3.0 * f));
        assert!(p.distance(expect) < 1e-12);
        let r = 0.5 * (0.05 - 0.04 * f) + 0.5 * (0.03 - 0.01 * f);
        assert!((m.radii[k] - r).abs() < 1e-12);
    }
}

#[test]
fn too_few_trunks_or_branches() {
    let lib = two_branch_lib();
    assert!(matches!(interpolate_trunk(&lib, 2, &mut rng_from_seed(0)), Err(GenError::NotEnoughTrunks { .. })));
    assert!(matches!(interpolate_branch(&lib, 1.0, 3, &mut rng_from_seed(0)), Err(GenError::NotEnoughBranches { .. })));
}

#[test]
fn nearest_branch_dominates() {
    let w = branch_weights(&two_branch_lib(), 1.0, 2).unwrap();
    assert_eq!(w[0].0, 0);
    assert!(w[0].1 >= 0.999);
    // 1/ε against 1/(ε + 1)
    let expect = (1.0 / 1e-3) / (1.0 / 1e-3 + 1.0 / (1e-3 + 1.0));
    assert!((w[0].1 - expect).abs() < 1e-12);
}

#[test]
fn equidistant_query_gives_mean() {
    let lib = two_branch_lib();
    let w = branch_weights(&lib, 1.5, 2).unwrap();
    assert_eq!(w.iter().map(|x| x.1).collect::<Vec<_>>(), vec![0.5, 0.5]);
    let out = interpolate_branch(&lib, 1.5, 2, &mut rng_from_seed(1)).unwrap();
    let a = lib.branches[0].curve.resample(BRANCH_SAMPLES);
    let b = lib.branches[1].curve.resample(BRANCH_SAMPLES);
    for k in 0..BRANCH_SAMPLES {
        assert!(out.curve.centerline[k].distance(a.centerline[k].lerp(b.centerline[k], 0.5)) < 1e-12);
    }
    assert_eq!(out.attach_height, 1.5);
    assert!((0.0..std::f64::consts::TAU).contains(&out.azimuth));
}

#[test]
fn k2_one_is_nearest_resampled() {
    let lib = small_lib();
    for h in [0.4, 1.0, 1.7, 2.9] {
        let out = interpolate_branch(&lib, h, 1, &mut rng_from_seed(3)).unwrap();
        let nearest = lib
            .branches
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1.attach_height - h).abs().total_cmp(&(b.1.attach_height - h).abs()).then(a.0.cmp(&b.0)))
            .unwrap()
            .1;
        assert!(max_point_diff(&out.curve, &nearest.curve.resample(BRANCH_SAMPLES)) <= 1e-9);
    }
}

#[test]
fn height_examples() {
    let trunk = vertical(3.0, 10, 0.04, 0.01);
    let p = GenParams { branch_count_range: [8, 8], branch_zone: [0.2, 0.9], min_branch_separation: 0.05, ..GenParams::default() };
    for seed in 0..50 {
        let h = sample_branch_heights(&trunk, &p, &mut rng_from_seed(seed)).unwrap();
        assert_eq!(h.len(), 8);
        assert!(h.iter().all(|&x| (0.6 - 1e-12..=2.7 + 1e-12).contains(&x)));
        assert!(h.windows(2).all(|w| w[1] - w[0] >= 0.05 - 1e-12));
    }
    let p = GenParams { branch_count_range: [3, 3], branch_zone: [0.5, 0.5001], min_branch_separation: 0.1, ..GenParams::default() };
    let err = sample_branch_heights(&trunk, &p, &mut rng_from_seed(0)).unwrap_err();
    assert!(err.to_string().contains("infeasible branch layout"));
}

#[test]
fn heights_uniform_by_chi_square() {
    let trunk = vertical(3.0, 10, 0.04, 0.01);
    let p = GenParams { branch_count_range: [3, 3], min_branch_separation: 0.001, ..GenParams::default() };
    let (lo, hi) = (0.2 * 3.0, 0.9 * 3.0);
    let mut bins = [0usize; 20];
    let mut total = 0;
    for seed in 0..10_000 {
        for h in sample_branch_heights(&trunk, &p, &mut rng_from_seed(seed)).unwrap() {
            bins[(((h - lo) / (hi - lo) * 20.0) as usize).min(19)] += 1;
            total += 1;
        }
    }
    let e = total as f64 / 20.0;
    let chi2: f64 = bins.iter().map(|&o| (o as f64 - e).powi(2) / e).sum();
    // 19 degrees of freedom, p = 0.001
    assert!(chi2 < 43.82, "chi2 = {chi2}, bins = {bins:?}");
}

#[test]
fn tapering_examples() {
    let c = horizontal(1.0, 5, 0.02);
    let t = apply_tapering(&c, 1.0);
    let mm: Vec<f64> = t.radii.iter().map(|r| r * 1000.0).collect();
    for (got, want) in mm.iter().zip([20.0, 15.0, 10.0, 5.0, 0.5]) {
        assert!((got - want).abs() < 1e-9, "{mm:?}");
    }
    let mono = OrganCurve { radii: vec![0.02, 0.015, 0.01, 0.005, 0.0001], ..c.clone() };
    let t = apply_tapering(&mono, 0.0);
    assert_eq!(&t.radii[..4], &mono.radii[..4]);
    assert_eq!(t.radii[4], MIN_TIP_RADIUS);
}

#[test]
fn no_children_without_probability() {
    let lib = small_lib();
    let trunk = vertical(3.0, 10, 0.04, 0.01);
    let base = &lib.branches[0];
    let (curve, attach_s) = place_primary(&trunk, base, 1.0).unwrap();
    let primary = PlacedBranch { curve, order: 1, parent: OrganRef::Trunk, attach_s, instance_id: 1 };
    let p = GenParams { higher_order_prob: 0.0, ..GenParams::default() };
    for seed in 0..100 {
        assert!(generate_higher_order(&primary, 0, &lib, &p, &mut rng_from_seed(seed)).is_empty());
    }
}

#[test]
fn scaled_child_measurements() {
    let parent = apply_tapering(&horizontal(1.0, 32, 0.012), 1.0);
    let base = horizontal(0.8, 20, 0.01);
    let attach_s = 0.6;
    let child = make_child(&parent, &base, 0.5, attach_s, 1.0, 50f64.to_radians(), 1.0);
    assert!((child.arc_length() - 0.4).abs() < 1e-9);
    assert!(child.base_radius() <= (0.5 * 0.01f64).min(parent.radius_at(attach_s)) + 1e-15);
    assert!(child.base().distance(parent.point_at(attach_s)) < 1e-12);
    let angle = child.tangent_at(0.0).dot(parent.tangent_at(attach_s)).acos().to_degrees();
    assert!((angle - 50.0).abs() < 1e-6, "{angle}");
}

#[test]
fn thousand_children_attach_on_parent() {
    let lib = small_lib();
    let trunk = vertical(3.0, 10, 0.04, 0.01);
    let p = GenParams { higher_order_prob: 1.0, ..GenParams::default() };
    let mut n = 0;
    let mut seed = 0;
    while n < 1000 {
        let base = &lib.branches[seed as usize % lib.branches.len()];
        let (curve, attach_s) = place_primary(&trunk, base, 1.0).unwrap();
        let primary = PlacedBranch { curve, order: 1, parent: OrganRef::Trunk, attach_s, instance_id: 1 };
        for c in generate_higher_order(&primary, 0, &lib, &p, &mut rng_from_seed(seed)) {
            assert!(c.curve.base().distance(primary.curve.point_at(c.attach_s)) < 1e-3);
            assert!(c.attach_s >= 0.2 * primary.curve.arc_length() - 1e-12);
            assert!(c.curve.base_radius() <= primary.curve.radius_at(c.attach_s) + 1e-15);
            assert_eq!(c.order, 2);
            n += 1;
        }
        seed += 1;
    }
}

#[test]
fn single_branch_tree_has_no_collisions() {
    let trunk = vertical(3.0, 10, 0.04, 0.01);
    let base = BaseBranch { curve: horizontal(0.8, 10, 0.01), attach_height: 1.5, azimuth: 0.3 };
    let (curve, attach_s) = place_primary(&trunk, &base, 1.0).unwrap();
    let tree = TreeSkeleton {
        trunk,
        branches: vec![PlacedBranch { curve, order: 1, parent: OrganRef::Trunk, attach_s, instance_id: 1 }],
        tree_id: 0,
        seed: 0,
        dropped_branches: 0,
    };
    assert!(collision_test(&tree).is_empty());
}

#[test]
fn generation_is_deterministic() {
    let lib = small_lib();
    let p = GenParams::default();
    assert_eq!(generate_tree(&lib, &p, 77).unwrap(), generate_tree(&lib, &p, 77).unwrap());
    assert_ne!(generate_tree(&lib, &p, 77).unwrap(), generate_tree(&lib, &p, 78).unwrap());
    let t = generate_tree(&lib, &p, 77).unwrap();
    assert_eq!(TreeSkeleton::from_json(&t.to_json()).unwrap(), t);
}

#[test]
fn branch_count_contract() {
    let lib = small_lib();
    let p = GenParams { branch_count_range: [8, 10], ..GenParams::default() };
    for seed in 0..30 {
        let t = generate_tree(&lib, &p, seed).unwrap();
        let total = t.primary_count() + t.dropped_branches as usize;
        assert!((8..=10).contains(&total), "{total}");
    }
}

/// Every invariant a generated tree promises.
fn audit(t: &TreeSkeleton) {
    assert!(collision_test(t).is_empty(), "collisions in tree seed {}", t.seed);
    assert!(t.trunk.is_tapered());
    let mut ids: Vec<u32> = t.branches.iter().map(|b| b.instance_id).collect();
    ids.sort();
    assert_eq!(ids, (1..=t.branches.len() as u32).collect::<Vec<_>>());
    for b in &t.branches {
        assert!(b.curve.is_tapered());
        assert!(b.curve.radii.iter().all(|&r| r >= MIN_TIP_RADIUS));
        match (b.order, b.parent) {
            (1, OrganRef::Trunk) => assert!(b.curve.base().distance(t.trunk.point_at(b.attach_s)) < 1e-3),
            (2, OrganRef::Branch(p)) => {
                assert_eq!(t.branches[p].order, 1);
                assert!(b.curve.base().distance(t.branches[p].curve.point_at(b.attach_s)) < 1e-3);
            }
            other => panic!("unexpected hierarchy {other:?}"),
        }
    }
}

#[test]
fn hundred_tree_audit() {
    let lib = small_lib();
    let p = GenParams::default();
    for seed in 0..100 {
        audit(&generate_tree(&lib, &p, seed).unwrap());
    }
}

#[test]
fn invalid_params() {
    let lib = small_lib();
    for p in [
        GenParams { k1: 0, ..GenParams::default() },
        GenParams { branch_zone: [0.9, 0.2], ..GenParams::default() },
        GenParams { higher_order_scale_range: [0.5, 1.5], ..GenParams::default() },
    ] {
        assert!(matches!(generate_tree(&lib, &p, 0), Err(GenError::InvalidParams(_))));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tapering_always_monotone(radii in prop::collection::vec(1e-4f64..0.1, 2..40), exp in 0.0f64..3.0) {
        let n = radii.len();
        let pts = (0..n).map(|i| Point3::new(i as f64 * 0.1, (i as f64).sin() * 0.01, 0.0)).collect();
        let c = OrganCurve::new(pts, radii.clone(), OrganKind::Branch).unwrap();
        let t = apply_tapering(&c, exp);
        prop_assert!(t.radii.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(t.radii.iter().all(|&r| r >= MIN_TIP_RADIUS));
        for (o, i) in t.radii.iter().zip(&radii) {
            prop_assert!(*o <= i.max(MIN_TIP_RADIUS));
        }
    }

    #[test]
    fn blends_are_convex(seed in any::<u64>(), raw in prop::collection::vec(0.01f64..1.0, 2..5)) {
        let lib = synth_library(seed, raw.len(), 1, &SynthParams::default()).unwrap();
        let sum: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x / sum).collect();
        let refs: Vec<&OrganCurve> = lib.trunks.iter().collect();
        let out = blend_trunks(&refs, &w);
        let inputs: Vec<OrganCurve> = lib.trunks.iter().map(|t| t.resample(TRUNK_SAMPLES)).collect();
        for k in 0..TRUNK_SAMPLES {
            let (lo, hi) = inputs.iter().fold((Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY), Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY)), |(lo, hi), c| (lo.min(c.centerline[k]), hi.max(c.centerline[k])));
            let p = out.centerline[k];
            for a in 0..3 {
                prop_assert!(p[a] >= lo[a] - 1e-12 && p[a] <= hi[a] + 1e-12);
            }
            let rmin = inputs.iter().map(|c| c.radii[k]).fold(f64::INFINITY, f64::min);
            let rmax = inputs.iter().map(|c| c.radii[k]).fold(0.0, f64::max);
            prop_assert!(out.radii[k] >= rmin - 1e-15 && out.radii[k] <= rmax + 1e-15);
        }
    }

    #[test]
    fn generated_trees_pass_audit(seed in any::<u64>()) {
        audit(&generate_tree(&small_lib(), &GenParams::default(), seed).unwrap());
    }
}
