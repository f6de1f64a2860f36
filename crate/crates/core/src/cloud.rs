//! Point cloud primitives, bounding ranges and point-block assembly.
//!
//! A point-block is the raw material for carving: the partial observation
//! plus a set of filler points that occupy the space the complete shape may
//! reach. Everything here is a pure function of its inputs.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A point (or displacement) in 3D.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ZERO: Point3 = Point3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn splat(v: f64) -> Self {
        Self::new(v, v, v)
    }

    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Point3) -> Point3 {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist_sq(self, o: Point3) -> f64 {
        let dx = self.x - o.x;
        let dy = self.y - o.y;
        let dz = self.z - o.z;
        dx * dx + dy * dy + dz * dz
    }

    pub fn normalized(self) -> Point3 {
        self * (1.0 / self.norm())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn min(self, o: Point3) -> Point3 {
        Point3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Point3) -> Point3 {
        Point3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl Index<usize> for Point3 {
    type Output = f64;
    fn index(&self, axis: usize) -> &f64 {
        match axis {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("axis {axis} out of range"),
        }
    }
}

impl IndexMut<usize> for Point3 {
    fn index_mut(&mut self, axis: usize) -> &mut f64 {
        match axis {
            0 => &mut self.x,
            1 => &mut self.y,
            2 => &mut self.z,
            _ => panic!("axis {axis} out of range"),
        }
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Point3 {
    fn add_assign(&mut self, o: Point3) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Point3 {
    fn sub_assign(&mut self, o: Point3) {
        self.x -= o.x;
        self.y -= o.y;
        self.z -= o.z;
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

/// Per-point feature vectors stored row-major, `dim` values per point.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub dim: usize,
    pub values: Vec<f64>,
}

impl Features {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }
}

/// An ordered list of points with optional per-point features.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub features: Option<Features>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        Self {
            points,
            features: None,
        }
    }

    pub fn with_features(points: Vec<Point3>, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != points.len() * dim {
            return Err(Error::ShapeMismatch(format!(
                "{} feature values for {} points of dimension {dim}",
                values.len(),
                points.len()
            )));
        }
        Ok(Self {
            points,
            features: Some(Features { dim, values }),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.points.iter().all(|p| p.is_finite())
            && self
                .features
                .as_ref()
                .is_none_or(|f| f.values.iter().all(|v| v.is_finite()))
    }

    /// Picks points (and their features) by index, repeats allowed.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        let points = indices.iter().map(|&i| self.points[i]).collect();
        let features = self.features.as_ref().map(|f| Features {
            dim: f.dim,
            values: indices.iter().flat_map(|&i| f.row(i).iter().copied()).collect(),
        });
        PointCloud { points, features }
    }

    /// Concatenates two clouds; features are dropped unless both carry the same dimension.
    pub fn concat(&self, other: &PointCloud) -> PointCloud {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        let features = match (&self.features, &other.features) {
            (Some(a), Some(b)) if a.dim == b.dim => {
                let mut values = a.values.clone();
                values.extend_from_slice(&b.values);
                Some(Features { dim: a.dim, values })
            }
            _ => None,
        };
        PointCloud { points, features }
    }
}

impl From<Vec<Point3>> for PointCloud {
    fn from(points: Vec<Point3>) -> Self {
        PointCloud::new(points)
    }
}

/// Axis-aligned box with `min < max` on every axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingRange {
    min: Point3,
    max: Point3,
}

impl BoundingRange {
    pub fn new(min: Point3, max: Point3) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) {
            return Err(Error::InvalidArgument("non-finite range".into()));
        }
        for a in 0..3 {
            if min[a] >= max[a] {
                return Err(Error::InvalidArgument(format!(
                    "range min {} not below max {} on axis {a}",
                    min[a], max[a]
                )));
            }
        }
        Ok(Self { min, max })
    }

    pub fn min(&self) -> Point3 {
        self.min
    }

    pub fn max(&self) -> Point3 {
        self.max
    }

    pub fn extent(&self) -> Point3 {
        self.max - self.min
    }

    pub fn center(&self) -> Point3 {
        (self.min + self.max) * 0.5
    }

    pub fn contains(&self, p: Point3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    pub fn clamp(&self, p: Point3) -> Point3 {
        p.max(self.min).min(self.max)
    }
}

/// A partial cloud together with the filler points sampled around it.
#[derive(Debug, Clone, PartialEq)]
pub struct PointBlock {
    pub partial: PointCloud,
    pub sampled: PointCloud,
    pub range: BoundingRange,
    /// Number of partial points that fell outside `range` and were clamped.
    pub clamped: usize,
}

impl PointBlock {
    pub fn len(&self) -> usize {
        self.partial.len() + self.sampled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All block points, partial first.
    pub fn points(&self) -> PointCloud {
        let mut pts = self.partial.points.clone();
        pts.extend_from_slice(&self.sampled.points);
        PointCloud::new(pts)
    }
}

/// Default degenerate-axis extent: 1e-3 of the cloud's largest extent.
pub fn default_min_extent(cloud: &PointCloud) -> f64 {
    let (lo, hi) = tight_box(&cloud.points);
    let e = hi - lo;
    1e-3 * e.x.max(e.y).max(e.z)
}

fn tight_box(points: &[Point3]) -> (Point3, Point3) {
    points.iter().fold(
        (Point3::splat(f64::INFINITY), Point3::splat(f64::NEG_INFINITY)),
        |(lo, hi), &p| (lo.min(p), hi.max(p)),
    )
}

/// Axis-aligned bounds of `cloud`, each side padded by `padding` times the
/// side length. Zero-extent axes become `min_extent` wide around the points.
pub fn compute_bounds(cloud: &PointCloud, padding: f64, min_extent: f64) -> Result<BoundingRange> {
    if cloud.is_empty() {
        return Err(Error::EmptyInput);
    }
    if padding.is_nan() || padding < 0.0 {
        return Err(Error::InvalidArgument(format!("padding {padding} < 0")));
    }
    let (lo, hi) = tight_box(&cloud.points);
    let mut min = lo;
    let mut max = hi;
    for a in 0..3 {
        let side = hi[a] - lo[a];
        if side > 0.0 {
            min[a] = lo[a] - padding * side;
            max[a] = hi[a] + padding * side;
        } else {
            min[a] = lo[a] - 0.5 * min_extent;
            max[a] = hi[a] + 0.5 * min_extent;
        }
    }
    BoundingRange::new(min, max)
}

/// How filler points are placed inside a range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    /// Cell centers of a regular `n x n x n` subdivision.
    Lattice,
    /// Uniform random draws.
    Random,
}

pub fn sample_block_points(
    range: &BoundingRange,
    n_per_axis: usize,
    mode: SampleMode,
    seed: u64,
) -> Result<PointCloud> {
    if n_per_axis < 2 {
        return Err(Error::InvalidArgument(format!(
            "n_per_axis must be at least 2, got {n_per_axis}"
        )));
    }
    let n = n_per_axis;
    let lo = range.min();
    let ext = range.extent();
    let mut points = Vec::with_capacity(n * n * n);
    match mode {
        SampleMode::Lattice => {
            let step = |a: usize, i: usize| lo[a] + (i as f64 + 0.5) * ext[a] / n as f64;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        points.push(Point3::new(step(0, i), step(1, j), step(2, k)));
                    }
                }
            }
        }
        SampleMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..n * n * n {
                let u: [f64; 3] = rng.gen();
                points.push(Point3::new(
                    lo.x + u[0] * ext.x,
                    lo.y + u[1] * ext.y,
                    lo.z + u[2] * ext.z,
                ));
            }
        }
    }
    Ok(PointCloud::new(points))
}

fn clamp_into(cloud: &PointCloud, range: &BoundingRange) -> (PointCloud, usize) {
    let mut clamped = 0;
    let points = cloud
        .points
        .iter()
        .map(|&p| {
            if range.contains(p) {
                p
            } else {
                clamped += 1;
                range.clamp(p)
            }
        })
        .collect();
    (
        PointCloud {
            points,
            features: cloud.features.clone(),
        },
        clamped,
    )
}

/// Assembles a point-block from a partial cloud and an explicit filler set.
pub fn assemble_block(partial: &PointCloud, sampled: PointCloud, range: BoundingRange) -> PointBlock {
    let (partial, clamped) = clamp_into(partial, &range);
    let (sampled, _) = clamp_into(&sampled, &range);
    if clamped > 0 {
        log::warn!("{clamped} partial point(s) outside the block range were clamped");
    }
    PointBlock {
        partial,
        sampled,
        range,
        clamped,
    }
}

pub fn build_point_block(
    partial: &PointCloud,
    range: BoundingRange,
    n_per_axis: usize,
    mode: SampleMode,
    seed: u64,
) -> Result<PointBlock> {
    let sampled = sample_block_points(&range, n_per_axis, mode, seed)?;
    Ok(assemble_block(partial, sampled, range))
}

/// The partial cloud together with its reflection across the plane
/// `coord[axis] = offset`. Reflected points follow the originals.
pub fn mirror_symmetric_block(partial: &PointCloud, axis: usize, offset: f64) -> Result<PointCloud> {
    if axis > 2 {
        return Err(Error::InvalidArgument(format!("axis {axis} not in {{0,1,2}}")));
    }
    let mirrored: Vec<Point3> = partial
        .points
        .iter()
        .map(|&p| {
            let mut q = p;
            q[axis] = 2.0 * offset - p[axis];
            q
        })
        .collect();
    Ok(partial.concat(&PointCloud {
        points: mirrored,
        features: partial.features.clone(),
    }))
}

/// Isotropic similarity mapping a cloud into `[-0.5, 0.5]^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitCubeTransform {
    pub center: Point3,
    pub scale: f64,
}

impl UnitCubeTransform {
    pub fn apply(&self, p: Point3) -> Point3 {
        (p - self.center) * self.scale
    }

    pub fn invert(&self, p: Point3) -> Point3 {
        p * (1.0 / self.scale) + self.center
    }

    pub fn apply_cloud(&self, cloud: &PointCloud) -> PointCloud {
        PointCloud {
            points: cloud.points.iter().map(|&p| self.apply(p)).collect(),
            features: cloud.features.clone(),
        }
    }

    pub fn invert_cloud(&self, cloud: &PointCloud) -> PointCloud {
        PointCloud {
            points: cloud.points.iter().map(|&p| self.invert(p)).collect(),
            features: cloud.features.clone(),
        }
    }
}

/// Centers the tight box at the origin and scales its longest side to 1.
pub fn normalize_unit_cube(cloud: &PointCloud) -> Result<(PointCloud, UnitCubeTransform)> {
    if cloud.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (lo, hi) = tight_box(&cloud.points);
    let e = hi - lo;
    let longest = e.x.max(e.y).max(e.z);
    if longest <= 0.0 {
        return Err(Error::InvalidArgument("all points coincide".into()));
    }
    let t = UnitCubeTransform {
        center: (lo + hi) * 0.5,
        scale: 1.0 / longest,
    };
    Ok((t.apply_cloud(cloud), t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsampleMethod {
    Random,
    FarthestPoint,
}

/// Resamples a cloud to exactly `m` points. When `m` exceeds the cloud size
/// every point is kept once and the remainder is drawn with replacement.
pub fn subsample_fixed(
    cloud: &PointCloud,
    m: usize,
    method: SubsampleMethod,
    seed: u64,
) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::EmptyInput);
    }
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let n = cloud.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = match method {
        SubsampleMethod::Random => {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            perm.truncate(m);
            perm
        }
        SubsampleMethod::FarthestPoint => {
            let first = rng.gen_range(0..n);
            farthest_point_indices(&cloud.points, m.min(n), first)
        }
    };
    while idx.len() < m {
        idx.push(rng.gen_range(0..n));
    }
    Ok(cloud.select(&idx))
}

/// Greedy farthest-point order starting at `first`; ties go to the lower index.
pub fn farthest_point_indices(points: &[Point3], m: usize, first: usize) -> Vec<usize> {
    let m = m.min(points.len());
    let mut out = Vec::with_capacity(m);
    if m == 0 {
        return out;
    }
    let mut dist = vec![f64::INFINITY; points.len()];
    let mut cur = first;
    out.push(cur);
    while out.len() < m {
        let c = points[cur];
        let mut best = 0;
        let mut best_d = f64::NEG_INFINITY;
        for (i, (p, d)) in points.iter().zip(dist.iter_mut()).enumerate() {
            *d = d.min(p.dist_sq(c));
            if *d > best_d {
                best_d = *d;
                best = i;
            }
        }
        cur = best;
        out.push(cur);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64, z: f64) -> Point3 {
        Point3::new(x, y, z)
    }

    fn unit_cube_corners() -> PointCloud {
        let mut v = Vec::new();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    v.push(p(i as f64, j as f64, k as f64));
                }
            }
        }
        PointCloud::new(v)
    }

    #[test]
    fn bounds_tight_box() {
        let r = compute_bounds(&unit_cube_corners(), 0.0, 1e-3).unwrap();
        assert_eq!(r.min(), p(0.0, 0.0, 0.0));
        assert_eq!(r.max(), p(1.0, 1.0, 1.0));
    }

    #[test]
    fn bounds_padding_and_degenerate_axes() {
        let c = PointCloud::new(vec![p(0.0, 0.0, 0.0), p(2.0, 0.0, 0.0)]);
        let r = compute_bounds(&c, 0.1, 0.01).unwrap();
        assert!((r.min().x + 0.2).abs() < 1e-12);
        assert!((r.max().x - 2.2).abs() < 1e-12);
        for a in 1..3 {
            assert!((r.min()[a] + 0.005).abs() < 1e-12);
            assert!((r.max()[a] - 0.005).abs() < 1e-12);
        }
    }

    #[test]
    fn bounds_single_point() {
        let c = PointCloud::new(vec![p(1.0, 2.0, 3.0)]);
        assert!(compute_bounds(&c, 0.0, 0.0).is_err());
        assert_eq!(default_min_extent(&c), 0.0);
        let r = compute_bounds(&c, 0.0, 0.5).unwrap();
        assert_eq!(r.extent(), Point3::splat(0.5));
        assert_eq!(r.center(), p(1.0, 2.0, 3.0));
    }

    #[test]
    fn bounds_empty() {
        assert!(matches!(
            compute_bounds(&PointCloud::default(), 0.0, 1e-3),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn lattice_counts_and_centers() {
        let r = BoundingRange::new(p(-1.0, 0.0, 3.0), p(2.0, 5.0, 4.0)).unwrap();
        assert_eq!(sample_block_points(&r, 11, SampleMode::Lattice, 0).unwrap().len(), 1331);
        let unit = BoundingRange::new(Point3::ZERO, Point3::splat(1.0)).unwrap();
        let s = sample_block_points(&unit, 2, SampleMode::Lattice, 0).unwrap();
        assert_eq!(s.len(), 8);
        for q in &s.points {
            for a in 0..3 {
                assert!(q[a] == 0.25 || q[a] == 0.75);
            }
        }
        assert!(sample_block_points(&unit, 1, SampleMode::Lattice, 0).is_err());
    }

    #[test]
    fn random_sampling_is_seeded() {
        let unit = BoundingRange::new(Point3::ZERO, Point3::splat(1.0)).unwrap();
        let a = sample_block_points(&unit, 4, SampleMode::Random, 9).unwrap();
        let b = sample_block_points(&unit, 4, SampleMode::Random, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 64);
        assert!(a.points.iter().all(|&q| unit.contains(q)));
    }

    #[test]
    fn block_counts_and_clamping() {
        let unit = BoundingRange::new(Point3::splat(-0.5), Point3::splat(0.5)).unwrap();
        let partial = PointCloud::new(vec![p(0.1, 0.1, 0.1); 2048]);
        let b = build_point_block(&partial, unit, 13, SampleMode::Lattice, 0).unwrap();
        assert_eq!(b.len(), 2048 + 2197);
        assert_eq!(b.clamped, 0);

        let empty = build_point_block(&PointCloud::default(), unit, 3, SampleMode::Lattice, 0).unwrap();
        assert_eq!(empty.len(), 27);
        assert!(empty.partial.is_empty());

        let out = PointCloud::new(vec![p(0.0, 0.0, 0.0), p(2.0, 0.0, -3.0)]);
        let b = build_point_block(&out, unit, 2, SampleMode::Lattice, 0).unwrap();
        assert_eq!(b.clamped, 1);
        assert_eq!(b.partial.points[1], p(0.5, 0.0, -0.5));
    }

    #[test]
    fn mirror_reflects() {
        let c = PointCloud::new(vec![p(1.0, 0.0, 0.0)]);
        let m = mirror_symmetric_block(&c, 0, 0.0).unwrap();
        assert_eq!(m.points, vec![p(1.0, 0.0, 0.0), p(-1.0, 0.0, 0.0)]);

        let on_plane = PointCloud::new(vec![p(0.0, 2.0, 0.0)]);
        let m = mirror_symmetric_block(&on_plane, 0, 0.0).unwrap();
        assert_eq!(m.points, vec![p(0.0, 2.0, 0.0), p(0.0, 2.0, 0.0)]);

        let big = PointCloud::new((0..2048).map(|i| p(i as f64, 1.0, 2.0)).collect());
        assert_eq!(mirror_symmetric_block(&big, 1, 0.5).unwrap().len(), 4096);
        assert!(mirror_symmetric_block(&big, 3, 0.0).is_err());
    }

    #[test]
    fn normalize_examples() {
        let (n, t) = normalize_unit_cube(&unit_cube_corners()).unwrap();
        for q in &n.points {
            for a in 0..3 {
                assert!(q[a] == -0.5 || q[a] == 0.5);
            }
        }
        assert_eq!(t.scale, 1.0);

        let c = PointCloud::new(vec![p(0.0, 0.0, 0.0), p(4.0, 2.0, 0.0)]);
        let (n, _) = normalize_unit_cube(&c).unwrap();
        assert_eq!(n.points[0], p(-0.5, -0.25, 0.0));
        assert_eq!(n.points[1], p(0.5, 0.25, 0.0));

        let same = PointCloud::new(vec![p(1.0, 1.0, 1.0); 3]);
        assert!(normalize_unit_cube(&same).is_err());
    }

    #[test]
    fn subsample_examples() {
        let c = PointCloud::new((0..10).map(|i| p(i as f64, 0.0, 0.0)).collect());
        let s = subsample_fixed(&c, 10, SubsampleMethod::Random, 3).unwrap();
        let mut xs: Vec<f64> = s.points.iter().map(|q| q.x).collect();
        xs.sort_by(f64::total_cmp);
        assert_eq!(xs, (0..10).map(|i| i as f64).collect::<Vec<_>>());

        let square = vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(1.0, 1.0, 0.0), p(0.0, 1.0, 0.0)];
        for first in 0..4 {
            let idx = farthest_point_indices(&square, 2, first);
            assert_eq!(idx, vec![first, (first + 2) % 4]);
        }
        let fps = subsample_fixed(&PointCloud::new(square.clone()), 2, SubsampleMethod::FarthestPoint, 5).unwrap();
        assert_eq!(fps.points[0].dist_sq(fps.points[1]), 2.0);

        let two = PointCloud::new(vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0)]);
        let s = subsample_fixed(&two, 3, SubsampleMethod::Random, 0).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.points.contains(&two.points[0]) && s.points.contains(&two.points[1]));
    }

    #[test]
    fn features_follow_selection() {
        let c = PointCloud::with_features(vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0)], 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let s = c.select(&[1, 1, 0]);
        assert_eq!(s.features.unwrap().values, vec![3.0, 4.0, 3.0, 4.0, 1.0, 2.0]);
        assert!(PointCloud::with_features(vec![Point3::ZERO], 2, vec![1.0]).is_err());
    }
}
