//! Virtual range-sensor augmentation: partial views of a complete cloud seen
//! from random positions on the unit sphere around its normalized frame.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cloud::{normalize_unit_cube, Point3, PointCloud};
use crate::error::{Error, Result};

/// Relative slack on the frustum test so points exactly on the boundary stay inside.
const FRUSTUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorPose {
    pub position: Point3,
    /// Unit vector from the sensor towards the origin.
    pub view: Point3,
    /// Unit vector orthogonal to `view`.
    pub up: Point3,
    /// Full vertical field of view, radians.
    pub vfov: f64,
    /// Full horizontal field of view, radians.
    pub hfov: f64,
}

pub const DEFAULT_FOV_DEG: f64 = 49.1;

impl SensorPose {
    /// Sensor at `position` looking at the origin.
    pub fn look_at_origin(position: Point3, vfov: f64, hfov: f64) -> Result<Self> {
        let n = position.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidArgument("sensor at the origin".into()));
        }
        let view = position * (-1.0 / n);
        let project = |a: Point3| a - view * a.dot(view);
        let mut up = project(Point3::new(0.0, 0.0, 1.0));
        if up.norm() < 1e-6 {
            up = project(Point3::new(1.0, 0.0, 0.0));
        }
        Ok(Self {
            position,
            view,
            up: up.normalized(),
            vfov,
            hfov,
        })
    }

    pub fn right(&self) -> Point3 {
        self.view.cross(self.up)
    }

    /// Camera-frame coordinates `(horizontal, vertical, depth)`.
    pub fn to_camera(&self, p: Point3) -> (f64, f64, f64) {
        let d = p - self.position;
        (d.dot(self.right()), d.dot(self.up), d.dot(self.view))
    }
}

/// Uniformly distributed sensor on the unit sphere, looking at the origin.
pub fn random_sensor(seed: u64, vfov: f64, hfov: f64) -> SensorPose {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let g = Point3::new(
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
        );
        let n = g.norm();
        if n > 1e-9 {
            return SensorPose::look_at_origin(g * (1.0 / n), vfov, hfov).expect("unit position");
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibilityConfig {
    /// Depth-buffer pixels per axis.
    pub resolution: usize,
    /// Depth slack behind the nearest point of a pixel.
    pub depth_tolerance: f64,
}

impl Default for VisibilityConfig {
    fn default() -> Self {
        Self {
            resolution: 160,
            depth_tolerance: 0.01,
        }
    }
}

impl VisibilityConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resolution < 16 {
            return Err(Error::InvalidArgument(format!(
                "depth buffer resolution {} is below 16",
                self.resolution
            )));
        }
        if !(self.depth_tolerance > 0.0) {
            return Err(Error::InvalidArgument("depth tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Normalized image-plane coordinates in `[-1, 1]` for frustum points.
fn image_coords(pose: &SensorPose, p: Point3) -> Option<(f64, f64, f64)> {
    let (x, y, d) = pose.to_camera(p);
    if d <= 0.0 {
        return None;
    }
    let u = x / (d * (pose.hfov * 0.5).tan());
    let v = y / (d * (pose.vfov * 0.5).tan());
    let lim = 1.0 + FRUSTUM_TOL;
    (u.abs() <= lim && v.abs() <= lim).then_some((u, v, d))
}

/// Indices of points in front of the sensor and inside both half-angles.
pub fn frustum_cull(cloud: &PointCloud, pose: &SensorPose) -> Vec<usize> {
    (0..cloud.len())
        .filter(|&i| image_coords(pose, cloud.points[i]).is_some())
        .collect()
}

/// Frustum points surviving a depth-buffer test, in ascending index order.
pub fn visible_points(cloud: &PointCloud, pose: &SensorPose, cfg: &VisibilityConfig) -> Vec<usize> {
    let r = cfg.resolution;
    let pixel = |c: f64| (((c + 1.0) * 0.5 * r as f64).floor().max(0.0) as usize).min(r - 1);
    let hits: Vec<(usize, usize, f64)> = (0..cloud.len())
        .filter_map(|i| image_coords(pose, cloud.points[i]).map(|(u, v, d)| (i, pixel(v) * r + pixel(u), d)))
        .collect();
    let mut nearest = vec![f64::INFINITY; r * r];
    for &(_, px, d) in &hits {
        nearest[px] = nearest[px].min(d);
    }
    hits.into_iter()
        .filter(|&(_, px, d)| d <= nearest[px] + cfg.depth_tolerance)
        .map(|(i, _, _)| i)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorAugConfig {
    pub vfov: f64,
    pub hfov: f64,
    pub visibility: VisibilityConfig,
    /// Poses seeing less than this fraction of points are re-drawn.
    pub min_visible_fraction: f64,
    pub max_attempts: usize,
}

impl Default for SensorAugConfig {
    fn default() -> Self {
        let fov = DEFAULT_FOV_DEG.to_radians();
        Self {
            vfov: fov,
            hfov: fov,
            visibility: VisibilityConfig::default(),
            min_visible_fraction: 0.05,
            max_attempts: 16,
        }
    }
}

/// Indices of one view of `gt` per partial, each drawn from an independent pose.
pub fn generate_partial_indices(gt: &PointCloud, t: usize, seed: u64, cfg: &SensorAugConfig) -> Result<Vec<Vec<usize>>> {
    if t == 0 {
        return Err(Error::InvalidArgument("zero partial views requested".into()));
    }
    cfg.visibility.validate()?;
    let (normalized, _) = normalize_unit_cube(gt)?;
    let need = ((cfg.min_visible_fraction * gt.len() as f64).ceil() as usize).max(1);
    let mut out = Vec::with_capacity(t);
    for view in 0..t as u64 {
        let mut found = None;
        for attempt in 0..cfg.max_attempts as u64 {
            let pose_seed = seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(view << 32 | attempt);
            let pose = random_sensor(pose_seed, cfg.vfov, cfg.hfov);
            let idx = visible_points(&normalized, &pose, &cfg.visibility);
            if idx.len() >= need {
                found = Some(idx);
                break;
            }
        }
        out.push(found.ok_or(Error::DegenerateAugmentation)?);
    }
    Ok(out)
}

/// `t` partial clouds of `gt`. Points are copied from `gt` by index, so every
/// partial is an exact subset in the original frame.
pub fn generate_partials(gt: &PointCloud, t: usize, seed: u64, cfg: &SensorAugConfig) -> Result<Vec<PointCloud>> {
    Ok(generate_partial_indices(gt, t, seed, cfg)?
        .iter()
        .map(|idx| gt.select(idx))
        .collect())
}

/// Keeps `ceil((1 - fraction) * |gt|)` uniformly chosen points, in input order.
pub fn random_drop(gt: &PointCloud, fraction: f64, seed: u64) -> Result<PointCloud> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("drop fraction {fraction} outside (0, 1)")));
    }
    let keep = ((1.0 - fraction) * gt.len() as f64).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, gt.len(), keep).into_vec();
    idx.sort_unstable();
    Ok(gt.select(&idx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn fov() -> f64 {
        DEFAULT_FOV_DEG.to_radians()
    }

    #[test]
    fn pose_is_unit_and_orthogonal() {
        for s in 0..200 {
            let p = random_sensor(s, fov(), fov());
            assert!((p.position.norm() - 1.0).abs() < 1e-12);
            assert!(p.view.dot(p.up).abs() < 1e-9);
            assert!((p.view + p.position).norm() < 1e-12);
            assert_eq!(p, random_sensor(s, fov(), fov()));
        }
        let top = SensorPose::look_at_origin(Point3::new(0.0, 0.0, 1.0), fov(), fov()).unwrap();
        assert!((top.up.norm() - 1.0).abs() < 1e-12 && top.up.dot(top.view).abs() < 1e-12);
    }

    #[test]
    fn octants_are_uniform() {
        let n = 10_000;
        let mut counts = [0usize; 8];
        for s in 0..n {
            let p = random_sensor(s as u64, fov(), fov()).position;
            counts[(p.x > 0.0) as usize * 4 + (p.y > 0.0) as usize * 2 + (p.z > 0.0) as usize] += 1;
        }
        let mean = n as f64 / 8.0;
        let sigma = (n as f64 * 0.125 * 0.875).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() < 5.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn frustum_basics() {
        let pose = random_sensor(3, fov(), fov());
        let behind = pose.position * 2.0;
        let cloud = PointCloud::new(vec![Point3::ZERO, behind]);
        assert_eq!(frustum_cull(&cloud, &pose), vec![0]);
    }

    #[test]
    fn half_angle_boundary_is_inside() {
        let pose = SensorPose::look_at_origin(Point3::new(0.0, 0.0, 1.0), fov(), fov()).unwrap();
        let half = (fov() * 0.5).tan();
        // One unit in front of the sensor, exactly on the vertical and horizontal edges.
        let edge_v = pose.position + pose.view + pose.up * half;
        let edge_h = pose.position + pose.view + pose.right() * half;
        let outside = pose.position + pose.view + pose.up * (half * 1.001);
        let cloud = PointCloud::new(vec![edge_v, edge_h, outside]);
        assert_eq!(frustum_cull(&cloud, &pose), vec![0, 1]);
    }

    #[test]
    fn depth_buffer_keeps_the_near_point() {
        let pose = SensorPose::look_at_origin(Point3::new(0.0, 0.0, 1.0), fov(), fov()).unwrap();
        let near = Point3::new(0.0, 0.0, 0.2);
        let far = Point3::new(0.0, 0.0, -0.2);
        let cloud = PointCloud::new(vec![far, near]);
        let cfg = VisibilityConfig { resolution: 32, depth_tolerance: 0.01 };
        assert_eq!(visible_points(&cloud, &pose, &cfg), vec![1]);
        let single = PointCloud::new(vec![far]);
        assert_eq!(visible_points(&single, &pose, &cfg), vec![0]);
        let loose = VisibilityConfig { resolution: 32, depth_tolerance: 1e9 };
        assert_eq!(visible_points(&cloud, &pose, &loose), frustum_cull(&cloud, &pose));
    }

    fn sphere(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointCloud::new(
            (0..n)
                .map(|_| {
                    let g = Point3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
                    g.normalized() * 0.4
                })
                .collect(),
        )
    }

    #[test]
    fn partials_are_exact_subsets() {
        let gt = sphere(2000, 1);
        let cfg = SensorAugConfig::default();
        let parts = generate_partials(&gt, 2, 9, &cfg).unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts, generate_partials(&gt, 2, 9, &cfg).unwrap());
        for part in &parts {
            assert!(!part.is_empty() && part.len() < gt.len());
            for p in &part.points {
                assert!(gt.points.contains(p));
            }
        }
        assert!(generate_partials(&gt, 0, 9, &cfg).is_err());
    }

    #[test]
    fn unreachable_visibility_is_degenerate() {
        let gt = sphere(500, 2);
        let cfg = SensorAugConfig { min_visible_fraction: 1.0, ..Default::default() };
        assert!(matches!(generate_partials(&gt, 1, 0, &cfg), Err(Error::DegenerateAugmentation)));
    }

    #[test]
    fn random_drop_counts() {
        let gt = sphere(2048, 3);
        let half = random_drop(&gt, 0.5, 4).unwrap();
        assert_eq!(half.len(), 1024);
        assert_eq!(half, random_drop(&gt, 0.5, 4).unwrap());
        assert!(half.points.iter().all(|p| gt.points.contains(p)));
        assert!(random_drop(&gt, 1.0, 0).is_err());
    }
}
