mod oracles;

use std::collections::HashSet;

use orchard_sim::voxel::{voxelize, voxelize_points, VoxelError};
use orchard_sim::{CloudMetadata, Label, LabeledPoint, LabeledPointCloud, Point3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cloud_of(points: &[Point3]) -> LabeledPointCloud {
    let pts = points.iter().map(|&p| LabeledPoint::new(p, Label::trunk(1)).unwrap()).collect();
    LabeledPointCloud::new(pts, CloudMetadata::default())
}

#[test]
fn four_points_one_voxel() {
    let pts = [
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(0.009, 0.001, 0.005),
        Point3::new(0.001, 0.0099, 0.0),
        Point3::new(0.005, 0.005, 0.005),
    ];
    let g = voxelize(&cloud_of(&pts), 0.02).unwrap();
    assert_eq!(g.len(), 1);
    assert_eq!(g.inverse_map, vec![[0, 0, 0]; 4]);
}

#[test]
fn two_points_two_voxels() {
    let g = voxelize_points(&[Point3::ZERO, Point3::new(0.03, 0.0, 0.0)], 0.02).unwrap();
    assert_eq!(g.len(), 2);
    assert_eq!(g.voxels, vec![[0, 0, 0], [1, 0, 0]]);
}

#[test]
fn boundary_goes_to_higher_index() {
    let g = voxelize_points(&[Point3::new(0.5, -0.5, 0.0)], 0.25).unwrap();
    assert_eq!(g.inverse_map[0], [2, -2, 0]);
}

#[test]
fn errors() {
    assert!(matches!(voxelize(&cloud_of(&[]), 0.1), Err(VoxelError::EmptyInput)));
    let e = voxelize_points(&[Point3::ZERO], 0.0).unwrap_err();
    assert!(e.to_string().starts_with("invalid voxel size"));
    assert!(voxelize_points(&[Point3::ZERO], -1.0).is_err());
    assert!(voxelize_points(&[Point3::ZERO], f64::NAN).is_err());
    assert_eq!(VoxelError::EmptyInput.to_string(), "empty input");
}

#[test]
fn uniform_cube_matches_hash_set_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pts: Vec<Point3> = (0..10_000).map(|_| Point3::new(rng.gen(), rng.gen(), rng.gen())).collect();
    let g = voxelize_points(&pts, 0.05).unwrap();
    let oracle = oracles::voxel_set(&pts, 0.05);
    assert_eq!(g.len(), oracle.len());
    assert_eq!(g.voxels.iter().copied().collect::<HashSet<_>>(), oracle);
    for (p, v) in pts.iter().zip(&g.inverse_map) {
        assert_eq!(*v, oracles::floor_index(*p, 0.05));
    }
}

fn point_strategy() -> impl Strategy<Value = Point3> {
    (-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0).prop_map(|(x, y, z)| Point3::new(x, y, z))
}

proptest! {
    #[test]
    fn agrees_with_oracle(pts in prop::collection::vec(point_strategy(), 1..400), size in 0.01f64..1.0) {
        let g = voxelize_points(&pts, size).unwrap();
        prop_assert!(g.len() <= pts.len());
        prop_assert_eq!(g.voxels.iter().copied().collect::<HashSet<_>>(), oracles::voxel_set(&pts, size));
        for (p, v) in pts.iter().zip(&g.inverse_map) {
            prop_assert_eq!(*v, oracles::floor_index(*p, size));
            prop_assert_eq!(g.voxels[g.occupied[v]], *v);
        }
    }

    #[test]
    fn permutation_covariant(pts in prop::collection::vec(point_strategy(), 1..200), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut perm: Vec<usize> = (0..pts.len()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let shuffled: Vec<Point3> = perm.iter().map(|&i| pts[i]).collect();
        let a = voxelize_points(&pts, 0.3).unwrap();
        let b = voxelize_points(&shuffled, 0.3).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            prop_assert_eq!(b.inverse_map[k], a.inverse_map[i]);
        }
        prop_assert_eq!(a.voxels.iter().collect::<HashSet<_>>(), b.voxels.iter().collect::<HashSet<_>>());
    }
}
