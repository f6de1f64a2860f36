mod common;

use blockcarve::chamfer::{chamfer, nearest_neighbors, KdTree};
use blockcarve::cloud::{Point3, PointCloud};
use common::{cloud, point, rotate};
use proptest::prelude::*;

fn brute_nearest(q: Point3, pts: &[Point3]) -> f64 {
    pts.iter().map(|p| q.dist_sq(*p)).fold(f64::INFINITY, f64::min)
}

proptest! {
    #[test]
    fn kd_nearest_matches_scan(pts in cloud(1..150), q in point()) {
        let tree = KdTree::build(&pts.points);
        let (i, d) = tree.nearest(q).unwrap();
        prop_assert_eq!(d, brute_nearest(q, &pts.points));
        prop_assert_eq!(q.dist_sq(pts.points[i]), d);
    }

    #[test]
    fn chamfer_is_symmetric(a in cloud(1..80), b in cloud(1..80)) {
        prop_assert_eq!(chamfer(&a, &b).unwrap(), chamfer(&b, &a).unwrap());
    }

    #[test]
    fn chamfer_of_self_is_zero(a in cloud(1..80)) {
        prop_assert_eq!(chamfer(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn chamfer_ignores_order(a in cloud(2..60), b in cloud(1..60), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = a.points.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let d0 = chamfer(&a, &b).unwrap();
        let d1 = chamfer(&PointCloud::new(shuffled), &b).unwrap();
        prop_assert!((d0 - d1).abs() <= 1e-12 * d0.max(1.0));
    }

    #[test]
    fn chamfer_is_rigid_invariant(
        a in cloud(1..60),
        b in cloud(1..60),
        axis in point(),
        angle in -3.0..3.0f64,
        shift in point(),
    ) {
        prop_assume!(axis.norm() > 0.1);
        let move_ = |c: &PointCloud| PointCloud::new(c.points.iter().map(|&p| rotate(p, axis, angle) + shift).collect());
        let d0 = chamfer(&a, &b).unwrap();
        let d1 = chamfer(&move_(&a), &move_(&b)).unwrap();
        prop_assert!((d0 - d1).abs() <= 1e-9);
    }

    #[test]
    fn neighbor_distances_are_minimal(a in cloud(1..60), b in cloud(1..60)) {
        for (q, (j, d)) in a.points.iter().zip(nearest_neighbors(&a.points, &b.points)) {
            prop_assert_eq!(d, brute_nearest(*q, &b.points));
            prop_assert_eq!(q.dist_sq(b.points[j]), d);
        }
    }
}

#[test]
fn chamfer_rejects_empty() {
    let a = PointCloud::new(vec![Point3::ZERO]);
    assert!(chamfer(&a, &PointCloud::default()).is_err());
}
