//! Analytic shapes sampled uniformly by surface area.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cloud::{Point3, PointCloud};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ShapeFamily {
    Box,
    Sphere,
    Torus,
    LSolid,
    HollowBox,
    Wedge,
}

impl ShapeFamily {
    pub const ALL: [ShapeFamily; 6] = [
        ShapeFamily::Box,
        ShapeFamily::Sphere,
        ShapeFamily::Torus,
        ShapeFamily::LSolid,
        ShapeFamily::HollowBox,
        ShapeFamily::Wedge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeFamily::Box => "box",
            ShapeFamily::Sphere => "sphere",
            ShapeFamily::Torus => "torus",
            ShapeFamily::LSolid => "l-solid",
            ShapeFamily::HollowBox => "hollow-box",
            ShapeFamily::Wedge => "wedge",
        }
    }

    /// Number of dimensional parameters, see [`SyntheticShapeSpec::dims`].
    pub fn arity(self) -> usize {
        match self {
            ShapeFamily::Sphere => 1,
            ShapeFamily::Torus => 2,
            ShapeFamily::Box | ShapeFamily::Wedge => 3,
            ShapeFamily::LSolid | ShapeFamily::HollowBox => 5,
        }
    }
}

impl fmt::Display for ShapeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ShapeFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown shape family '{s}'")))
    }
}

/// One analytic shape, centred at the origin.
///
/// `dims` per family:
/// - box: sides `(a, b, c)`
/// - sphere: `(radius)`
/// - torus: `(major, minor)` radii, ring in the xy plane
/// - l-solid: outer `(a, b)`, arm thicknesses `(ta, tb)`, depth `c`; the L is in xy
/// - hollow-box: outer `(a, b, c)`, hole `(ha, hb)` running through z
/// - wedge: `(a, b, c)`; right triangle of legs `a` (x) and `c` (z), extruded `b` along y
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticShapeSpec {
    pub family: ShapeFamily,
    pub dims: Vec<f64>,
    pub count: usize,
    pub seed: u64,
}

impl SyntheticShapeSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("{}: {m}", self.family)));
        if self.count < 64 {
            return bad(format!("sample count {} is below 64", self.count));
        }
        if self.dims.len() != self.family.arity() {
            return bad(format!("expected {} dimensions, got {}", self.family.arity(), self.dims.len()));
        }
        if self.dims.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return bad("dimensions must be positive".into());
        }
        let d = &self.dims;
        match self.family {
            ShapeFamily::Torus if d[1] >= d[0] => bad("minor radius must be below the major radius".into()),
            ShapeFamily::LSolid if d[2] >= d[0] || d[3] >= d[1] => bad("arm thickness exceeds the outline".into()),
            ShapeFamily::HollowBox if d[3] >= d[0] || d[4] >= d[1] => bad("hole exceeds the outline".into()),
            _ => Ok(()),
        }
    }

    /// Random dimensions of a shape fitting well inside `[-0.5, 0.5]^3`.
    pub fn random(family: ShapeFamily, count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_0F_5A4E);
        let mut u = |lo: f64, hi: f64| rng.gen_range(lo..hi);
        let dims = match family {
            ShapeFamily::Box | ShapeFamily::Wedge => vec![u(0.4, 0.9), u(0.4, 0.9), u(0.4, 0.9)],
            ShapeFamily::Sphere => vec![u(0.25, 0.45)],
            ShapeFamily::Torus => {
                let major = u(0.25, 0.35);
                vec![major, u(0.06, 0.12)]
            }
            ShapeFamily::LSolid => {
                let (a, b) = (u(0.5, 0.9), u(0.5, 0.9));
                vec![a, b, u(0.2, 0.45) * a, u(0.2, 0.45) * b, u(0.3, 0.7)]
            }
            ShapeFamily::HollowBox => {
                let (a, b) = (u(0.5, 0.9), u(0.5, 0.9));
                vec![a, b, u(0.3, 0.7), u(0.4, 0.7) * a, u(0.4, 0.7) * b]
            }
        };
        Self { family, dims, count, seed }
    }
}

/// Planar parallelogram `origin + s*u + t*v`, or the triangle `s + t <= 1`.
#[derive(Debug, Clone, Copy)]
struct Patch {
    origin: Point3,
    u: Point3,
    v: Point3,
    triangle: bool,
}

impl Patch {
    fn rect(origin: Point3, u: Point3, v: Point3) -> Self {
        Self { origin, u, v, triangle: false }
    }

    fn tri(origin: Point3, u: Point3, v: Point3) -> Self {
        Self { origin, u, v, triangle: true }
    }

    fn area(&self) -> f64 {
        let a = self.u.cross(self.v).norm();
        if self.triangle {
            a * 0.5
        } else {
            a
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> Point3 {
        let (mut s, mut t): (f64, f64) = (rng.gen(), rng.gen());
        if self.triangle && s + t > 1.0 {
            s = 1.0 - s;
            t = 1.0 - t;
        }
        self.origin + self.u * s + self.v * t
    }
}

fn p(x: f64, y: f64, z: f64) -> Point3 {
    Point3::new(x, y, z)
}

/// Axis-aligned rectangle in the plane `axis = value` over `[lo, hi]` on the other two axes.
fn axis_rect(axis: usize, value: f64, lo: [f64; 2], hi: [f64; 2]) -> Patch {
    let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
    let mut o = [0.0; 3];
    o[axis] = value;
    o[a] = lo[0];
    o[b] = lo[1];
    let mut u = [0.0; 3];
    u[a] = hi[0] - lo[0];
    let mut v = [0.0; 3];
    v[b] = hi[1] - lo[1];
    Patch::rect(Point3::from_array(o), Point3::from_array(u), Point3::from_array(v))
}

fn box_patches(min: Point3, max: Point3) -> Vec<Patch> {
    let mut out = Vec::with_capacity(6);
    for axis in 0..3 {
        let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
        for value in [min[axis], max[axis]] {
            out.push(axis_rect(axis, value, [min[a], min[b]], [max[a], max[b]]));
        }
    }
    out
}

/// Surfaces of the extrusion along z of a union of disjoint xy rectangles
/// whose outline is given by `edges` (segments with their own z-extrusion).
fn extrusion_patches(rects: &[([f64; 2], [f64; 2])], edges: &[([f64; 2], [f64; 2])], half_c: f64) -> Vec<Patch> {
    let mut out = Vec::new();
    for &(lo, hi) in rects {
        for z in [-half_c, half_c] {
            out.push(Patch::rect(p(lo[0], lo[1], z), p(hi[0] - lo[0], 0.0, 0.0), p(0.0, hi[1] - lo[1], 0.0)));
        }
    }
    for &(a, b) in edges {
        out.push(Patch::rect(p(a[0], a[1], -half_c), p(b[0] - a[0], b[1] - a[1], 0.0), p(0.0, 0.0, 2.0 * half_c)));
    }
    out
}

fn polygon_edges(poly: &[[f64; 2]]) -> Vec<([f64; 2], [f64; 2])> {
    (0..poly.len()).map(|i| (poly[i], poly[(i + 1) % poly.len()])).collect()
}

fn patches(spec: &SyntheticShapeSpec) -> Vec<Patch> {
    let d = &spec.dims;
    match spec.family {
        ShapeFamily::Box => box_patches(p(-d[0], -d[1], -d[2]) * 0.5, p(d[0], d[1], d[2]) * 0.5),
        ShapeFamily::LSolid => {
            let (a, b, ta, tb, c) = (d[0], d[1], d[2], d[3], d[4]);
            let (x0, y0) = (-a / 2.0, -b / 2.0);
            let poly = [
                [x0, y0],
                [x0 + a, y0],
                [x0 + a, y0 + tb],
                [x0 + ta, y0 + tb],
                [x0 + ta, y0 + b],
                [x0, y0 + b],
            ];
            let rects = [([x0, y0], [x0 + a, y0 + tb]), ([x0, y0 + tb], [x0 + ta, y0 + b])];
            extrusion_patches(&rects, &polygon_edges(&poly), c / 2.0)
        }
        ShapeFamily::HollowBox => {
            let (a, b, c, ha, hb) = (d[0], d[1], d[2], d[3], d[4]);
            let (ox, oy, ix, iy) = (a / 2.0, b / 2.0, ha / 2.0, hb / 2.0);
            let rects = [
                ([-ox, -oy], [ox, -iy]),
                ([-ox, iy], [ox, oy]),
                ([-ox, -iy], [-ix, iy]),
                ([ix, -iy], [ox, iy]),
            ];
            let mut edges = polygon_edges(&[[-ox, -oy], [ox, -oy], [ox, oy], [-ox, oy]]);
            edges.extend(polygon_edges(&[[-ix, -iy], [-ix, iy], [ix, iy], [ix, -iy]]));
            extrusion_patches(&rects, &edges, c / 2.0)
        }
        ShapeFamily::Wedge => {
            let (a, b, c) = (d[0], d[1], d[2]);
            let o = p(-a / 2.0, -b / 2.0, -c / 2.0);
            let (ex, ey, ez) = (p(a, 0.0, 0.0), p(0.0, b, 0.0), p(0.0, 0.0, c));
            vec![
                Patch::rect(o, ex, ey),
                Patch::rect(o, ey, ez),
                Patch::rect(o + ex, ez - ex, ey),
                Patch::tri(o, ex, ez),
                Patch::tri(o + ey, ex, ez),
            ]
        }
        ShapeFamily::Sphere | ShapeFamily::Torus => unreachable!("curved families are sampled directly"),
    }
}

fn sample_patches(patches: &[Patch], count: usize, rng: &mut impl Rng) -> Vec<Point3> {
    let mut cumulative = Vec::with_capacity(patches.len());
    let mut total = 0.0;
    for patch in patches {
        total += patch.area();
        cumulative.push(total);
    }
    (0..count)
        .map(|_| {
            let r = rng.gen::<f64>() * total;
            let i = cumulative.partition_point(|&c| c <= r).min(patches.len() - 1);
            patches[i].sample(rng)
        })
        .collect()
}

/// Samples `spec.count` surface points. Returns the cloud and its family label.
pub fn gen_shape(spec: &SyntheticShapeSpec) -> Result<(PointCloud, String)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = &spec.dims;
    let points = match spec.family {
        ShapeFamily::Sphere => (0..spec.count)
            .map(|_| loop {
                let g = p(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
                let n = g.norm();
                if n > 1e-9 {
                    break g * (d[0] / n);
                }
            })
            .collect(),
        ShapeFamily::Torus => {
            let (big, small) = (d[0], d[1]);
            // Area element is proportional to big + small*cos(v): rejection on v.
            (0..spec.count)
                .map(|_| {
                    let v = loop {
                        let v = rng.gen::<f64>() * TAU;
                        if rng.gen::<f64>() * (big + small) <= big + small * v.cos() {
                            break v;
                        }
                    };
                    let u = rng.gen::<f64>() * TAU;
                    let ring = big + small * v.cos();
                    p(ring * u.cos(), ring * u.sin(), small * v.sin())
                })
                .collect()
        }
        _ => sample_patches(&patches(spec), spec.count, &mut rng),
    };
    Ok((PointCloud::new(points), spec.family.name().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_points_on_surface() {
        let spec = SyntheticShapeSpec { family: ShapeFamily::Sphere, dims: vec![0.5], count: 4096, seed: 1 };
        let (cloud, label) = gen_shape(&spec).unwrap();
        assert_eq!(label, "sphere");
        assert_eq!(cloud.len(), 4096);
        assert!(cloud.points.iter().all(|q| (q.norm() - 0.5).abs() < 1e-9));
    }

    fn box_face(q: Point3, half: Point3) -> Vec<usize> {
        (0..6)
            .filter(|&f| {
                let axis = f / 2;
                let s = if f % 2 == 0 { -1.0 } else { 1.0 };
                (q[axis] - s * half[axis]).abs() < 1e-9
            })
            .collect()
    }

    #[test]
    fn box_faces_and_area_uniformity() {
        let dims = vec![0.8, 0.5, 0.3];
        let spec = SyntheticShapeSpec { family: ShapeFamily::Box, dims: dims.clone(), count: 20_000, seed: 2 };
        let (cloud, _) = gen_shape(&spec).unwrap();
        let half = Point3::new(0.4, 0.25, 0.15);
        let mut counts = [0usize; 6];
        for &q in &cloud.points {
            let faces = box_face(q, half);
            assert_eq!(faces.len(), 1, "{q:?}");
            counts[faces[0]] += 1;
        }
        let areas = [dims[1] * dims[2], dims[0] * dims[2], dims[0] * dims[1]];
        let total: f64 = 2.0 * areas.iter().sum::<f64>();
        let n = cloud.len() as f64;
        for (f, &c) in counts.iter().enumerate() {
            let pr = areas[f / 2] / total;
            let sigma = (n * pr * (1.0 - pr)).sqrt();
            assert!((c as f64 - n * pr).abs() < 5.0 * sigma, "face {f}: {c}");
        }
    }

    #[test]
    fn torus_on_surface() {
        let spec = SyntheticShapeSpec { family: ShapeFamily::Torus, dims: vec![0.3, 0.1], count: 2000, seed: 3 };
        let (cloud, _) = gen_shape(&spec).unwrap();
        for q in &cloud.points {
            let ring = (q.x * q.x + q.y * q.y).sqrt() - 0.3;
            assert!((ring * ring + q.z * q.z).sqrt() - 0.1 < 1e-9);
        }
    }

    #[test]
    fn hollow_box_has_a_through_hole() {
        let spec = SyntheticShapeSpec {
            family: ShapeFamily::HollowBox,
            dims: vec![0.8, 0.8, 0.4, 0.4, 0.4],
            count: 5000,
            seed: 4,
        };
        let (cloud, _) = gen_shape(&spec).unwrap();
        // Nothing strictly inside the hole column.
        assert!(cloud.points.iter().all(|q| q.x.abs() >= 0.2 - 1e-12 || q.y.abs() >= 0.2 - 1e-12));
        assert!(cloud.points.iter().all(|q| q.z.abs() <= 0.2 + 1e-12));
    }

    #[test]
    fn every_family_is_seeded_and_bounded() {
        for (i, family) in ShapeFamily::ALL.into_iter().enumerate() {
            let spec = SyntheticShapeSpec::random(family, 512, i as u64);
            let (a, _) = gen_shape(&spec).unwrap();
            let (b, _) = gen_shape(&spec).unwrap();
            assert_eq!(a, b);
            assert!(a.points.iter().all(|q| q.x.abs() <= 0.5 && q.y.abs() <= 0.5 && q.z.abs() <= 0.5));
            assert_eq!(family.name().parse::<ShapeFamily>().unwrap(), family);
        }
    }

    #[test]
    fn invalid_specs() {
        let mut spec = SyntheticShapeSpec::random(ShapeFamily::Box, 63, 0);
        assert!(gen_shape(&spec).is_err());
        spec.count = 64;
        spec.dims[0] = -1.0;
        assert!(gen_shape(&spec).is_err());
        assert!("cone".parse::<ShapeFamily>().is_err());
    }
}
