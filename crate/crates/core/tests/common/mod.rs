#![allow(dead_code)]

use blockcarve::cloud::{Point3, PointCloud};
use proptest::prelude::*;

pub fn point() -> impl Strategy<Value = Point3> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y, z)| Point3::new(x, y, z))
}

pub fn cloud(n: std::ops::Range<usize>) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(point(), n).prop_map(PointCloud::new)
}

/// Rotation about a unit axis by `angle`, Rodrigues form.
pub fn rotate(p: Point3, axis: Point3, angle: f64) -> Point3 {
    let k = axis.normalized();
    let (s, c) = angle.sin_cos();
    p * c + k.cross(p) * s + k * (k.dot(p) * (1.0 - c))
}
