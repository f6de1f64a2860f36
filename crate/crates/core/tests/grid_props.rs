mod common;

use blockcarve::carve::{cell_conv, KernelField};
use blockcarve::cloud::{BoundingRange, Point3, PointCloud};
use blockcarve::grid::{gridding, gridding_reverse, GridGeometry, VoxelGrid};
use common::cloud;
use proptest::prelude::*;

fn unit_range() -> BoundingRange {
    BoundingRange::new(Point3::splat(-1.0), Point3::splat(1.0)).unwrap()
}

fn field(dims: [usize; 3], n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, dims[0] * dims[1] * dims[2] * n)
}

proptest! {
    #[test]
    fn gridding_conserves_mass(pts in cloud(1..100), n in 2usize..9) {
        let g = gridding(&pts, [n; 3], unit_range()).unwrap();
        let total: f64 = g.values.iter().sum();
        prop_assert!((total - pts.len() as f64).abs() < 1e-9);
        prop_assert!(g.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn gridding_ignores_order(pts in cloud(2..60)) {
        let mut rev = pts.points.clone();
        rev.reverse();
        let a = gridding(&pts, [5; 3], unit_range()).unwrap();
        let b = gridding(&PointCloud::new(rev), [5; 3], unit_range()).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn reverse_points_stay_in_range(pts in cloud(1..60), m in 1usize..40) {
        let g = gridding(&pts, [6; 3], unit_range()).unwrap();
        let out = gridding_reverse(&g, m, 0.0).unwrap();
        prop_assert_eq!(out.len(), m);
        prop_assert!(out.points.iter().all(|p| unit_range().contains(*p)));
    }

    #[test]
    fn cell_conv_is_linear_in_the_grid(
        a in field([4; 3], 1),
        b in field([4; 3], 1),
        k in field([4; 3], 27),
        s in -2.0..2.0f64,
    ) {
        let geo = GridGeometry::new([4; 3], unit_range()).unwrap();
        let kernels = KernelField::new([4; 3], 3, k).unwrap();
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + s * y).collect();
        let ca = cell_conv(&VoxelGrid::from_values(geo, a).unwrap(), &kernels).unwrap();
        let cb = cell_conv(&VoxelGrid::from_values(geo, b).unwrap(), &kernels).unwrap();
        let cm = cell_conv(&VoxelGrid::from_values(geo, mix).unwrap(), &kernels).unwrap();
        for i in 0..cm.values.len() {
            prop_assert!((cm.values[i] - ca.values[i] - s * cb.values[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_kernels_copy_the_grid(a in field([5; 3], 1)) {
        let geo = GridGeometry::new([5; 3], unit_range()).unwrap();
        let g = VoxelGrid::from_values(geo, a).unwrap();
        let out = cell_conv(&g, &KernelField::identity([5; 3], 3)).unwrap();
        prop_assert_eq!(out.values, g.values);
    }
}

#[test]
fn empty_carve_is_an_error() {
    let geo = GridGeometry::new([4; 3], unit_range()).unwrap();
    assert!(gridding_reverse(&VoxelGrid::zeros(geo), 4, 0.0).is_err());
}
