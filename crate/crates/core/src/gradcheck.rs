//! Central finite-difference checks of every analytic gradient.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::carve::{cell_conv, cell_conv_grads, Architecture, CarveParams, KernelField};
use crate::chamfer::{chamfer, chamfer_grad, nearest_neighbors};
use crate::cloud::{BoundingRange, Point3, PointCloud, SampleMode};
use crate::grid::{feature_sample, feature_sample_grad, feature_sample_position_grad, gridding_reverse_traced, gridding_reverse_grad, FeatureGrid, GridGeometry, VoxelGrid};
use crate::pipeline::{sample_loss, BlockConstruction, LossInputs, PipelineOptions};
use crate::refine::{refine, refine_grads, RefineHeadParams};

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
pub const CHAMFER_TOLERANCE: f64 = 1e-3;
pub const INSTANCES: usize = 20;

/// Outcome of one family of checks.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub instances: usize,
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.worst < self.tolerance
    }
}

/// `max |a - n| / max(|a|, |n|)` over all entries, with a tiny floor.
pub fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic
        .iter()
        .chain(numeric)
        .fold(1e-12f64, |m, v| m.max(v.abs()));
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Central difference of `f` with respect to every entry of `x`.
pub fn numeric_grad(x: &mut [f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let v = x[i];
            x[i] = v + STEP;
            let up = f(x);
            x[i] = v - STEP;
            let down = f(x);
            x[i] = v;
            (up - down) / (2.0 * STEP)
        })
        .collect()
}

fn unit_range() -> BoundingRange {
    BoundingRange::new(Point3::splat(-0.5), Point3::splat(0.5)).unwrap()
}

fn random_dims(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> [usize; 3] {
    [rng.gen_range(lo..=hi), rng.gen_range(lo..=hi), rng.gen_range(lo..=hi)]
}

/// Random point whose grid coordinates stay at least `margin` cells away
/// from node planes, where trilinear interpolation has kinks.
fn interior_point(rng: &mut ChaCha8Rng, geo: &GridGeometry, margin: f64) -> Point3 {
    loop {
        let p = Point3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
        let ok = (0..3).all(|a| {
            let u = (p[a] + 0.5) * (geo.dims[a] - 1) as f64;
            let f = u - u.floor();
            f > margin && f < 1.0 - margin
        });
        if ok {
            return p;
        }
    }
}

fn dot_points(a: &[Point3], b: &[Point3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(*y)).sum()
}

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3> {
    (0..n)
        .map(|_| Point3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

pub fn check_gridding_reverse(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = 0.1;
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < INSTANCES {
        let geo = GridGeometry::new(random_dims(&mut rng, 3, 5), unit_range()).unwrap();
        let values: Vec<f64> = (0..geo.node_count())
            .map(|_| loop {
                let v: f64 = rng.gen_range(-1.0..1.0);
                if (v - theta).abs() >= 1e-3 {
                    break v;
                }
            })
            .collect();
        let mut grid = VoxelGrid::from_values(geo, values).unwrap();
        let cells = geo.cell_dims().iter().product::<usize>();
        let m = rng.gen_range(1..=cells.min(64) + 8);
        let Ok((cloud, sel)) = gridding_reverse_traced(&grid, m, theta) else { continue };
        let up = random_points(&mut rng, cloud.len());
        let analytic = gridding_reverse_grad(&grid, m, theta, &up).unwrap().values;
        let mut stable = true;
        let numeric = numeric_grad(&mut grid.values.clone(), |v| {
            grid.values.copy_from_slice(v);
            match gridding_reverse_traced(&grid, m, theta) {
                Ok((c, s)) if s == sel => dot_points(&c.points, &up),
                _ => {
                    stable = false;
                    0.0
                }
            }
        });
        // Perturbations that change the selected cells leave the carve-through
        // regime; such instances are redrawn.
        if !stable {
            continue;
        }
        worst = worst.max(rel_err(&analytic, &numeric));
        done += 1;
    }
    CheckResult { name: "gridding_reverse", instances: done, worst, tolerance: TOLERANCE }
}

fn random_feature_case(rng: &mut ChaCha8Rng) -> (FeatureGrid, PointCloud, Vec<f64>) {
    let geo = GridGeometry::new(random_dims(rng, 2, 6), unit_range()).unwrap();
    let ch = rng.gen_range(1..=4);
    let vals = (0..geo.node_count() * ch).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let grid = FeatureGrid::from_values(geo, ch, vals).unwrap();
    let n = rng.gen_range(1..=64);
    let q = PointCloud::new((0..n).map(|_| interior_point(rng, &geo, 1e-3)).collect());
    let up = (0..n * ch).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (grid, q, up)
}

fn feature_objective(grid: &FeatureGrid, q: &PointCloud, up: &[f64]) -> f64 {
    let s = feature_sample(grid, q);
    s.features.unwrap().values.iter().zip(up).map(|(a, b)| a * b).sum()
}

pub fn check_feature_sample(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..INSTANCES {
        let (mut grid, q, up) = random_feature_case(&mut rng);
        let analytic = feature_sample_grad(&grid, &q, &up).unwrap().values;
        let numeric = numeric_grad(&mut grid.values.clone(), |v| {
            grid.values.copy_from_slice(v);
            feature_objective(&grid, &q, &up)
        });
        worst = worst.max(rel_err(&analytic, &numeric));

        let analytic: Vec<f64> = feature_sample_position_grad(&grid, &q, &up)
            .unwrap()
            .iter()
            .flat_map(|p| p.to_array())
            .collect();
        let mut coords: Vec<f64> = q.points.iter().flat_map(|p| p.to_array()).collect();
        let numeric = numeric_grad(&mut coords, |c| {
            let pts = c.chunks_exact(3).map(|w| Point3::new(w[0], w[1], w[2])).collect();
            feature_objective(&grid, &PointCloud::new(pts), &up)
        });
        worst = worst.max(rel_err(&analytic, &numeric));
    }
    CheckResult { name: "feature_sample", instances: INSTANCES, worst, tolerance: TOLERANCE }
}

fn conv_case(rng: &mut ChaCha8Rng) -> (VoxelGrid, KernelField, Vec<f64>) {
    let geo = GridGeometry::new(random_dims(rng, 2, 6), unit_range()).unwrap();
    let grid = VoxelGrid::from_values(geo, (0..geo.node_count()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let k = KernelField::new(geo.dims, 3, (0..geo.node_count() * 27).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let up = (0..geo.node_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (grid, k, up)
}

fn conv_objective(grid: &VoxelGrid, k: &KernelField, up: &[f64]) -> f64 {
    cell_conv(grid, k).unwrap().values.iter().zip(up).map(|(a, b)| a * b).sum()
}

pub fn check_cell_conv_grid(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..INSTANCES {
        let (mut grid, k, up) = conv_case(&mut rng);
        let (analytic, _) = cell_conv_grads(&grid, &k, &up).unwrap();
        let numeric = numeric_grad(&mut grid.values.clone(), |v| {
            grid.values.copy_from_slice(v);
            conv_objective(&grid, &k, &up)
        });
        worst = worst.max(rel_err(&analytic, &numeric));
    }
    CheckResult { name: "cell_conv (grid)", instances: INSTANCES, worst, tolerance: TOLERANCE }
}

pub fn check_cell_conv_kernels(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..INSTANCES {
        let (grid, mut k, up) = conv_case(&mut rng);
        let (_, analytic) = cell_conv_grads(&grid, &k, &up).unwrap();
        let numeric = numeric_grad(&mut k.values.clone(), |v| {
            k.values.copy_from_slice(v);
            conv_objective(&grid, &k, &up)
        });
        worst = worst.max(rel_err(&analytic.values, &numeric));
    }
    CheckResult { name: "cell_conv (kernels)", instances: INSTANCES, worst, tolerance: TOLERANCE }
}

pub fn check_refine(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..INSTANCES {
        let geo = GridGeometry::new(random_dims(&mut rng, 2, 5), unit_range()).unwrap();
        let f = rng.gen_range(1..=4);
        let mut grid = FeatureGrid::from_values(geo, f, (0..geo.node_count() * f).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let widths = [rng.gen_range(3..=8), 3 * rng.gen_range(1..=3)];
        let mut head = RefineHeadParams::zeros(f + 3, &widths).unwrap();
        head.values.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        let n = rng.gen_range(1..=16);
        let coarse = PointCloud::new((0..n).map(|_| interior_point(&mut rng, &geo, 1e-3)).collect());
        let up = random_points(&mut rng, n * head.expansion());
        let g = refine_grads(&coarse, &grid, &head, &up).unwrap();
        let obj = |c: &PointCloud, grid: &FeatureGrid, h: &RefineHeadParams| dot_points(&refine(c, grid, h).unwrap().points, &up);

        let numeric = numeric_grad(&mut head.values.clone(), |v| {
            let mut h = head.clone();
            h.values.copy_from_slice(v);
            obj(&coarse, &grid, &h)
        });
        worst = worst.max(rel_err(&g.params, &numeric));

        let numeric = numeric_grad(&mut grid.values.clone(), |v| {
            grid.values.copy_from_slice(v);
            obj(&coarse, &grid, &head)
        });
        worst = worst.max(rel_err(&g.features.values, &numeric));

        let analytic: Vec<f64> = g.coarse.iter().flat_map(|p| p.to_array()).collect();
        let mut coords: Vec<f64> = coarse.points.iter().flat_map(|p| p.to_array()).collect();
        let numeric = numeric_grad(&mut coords, |c| {
            let pts = c.chunks_exact(3).map(|w| Point3::new(w[0], w[1], w[2])).collect();
            obj(&PointCloud::new(pts), &grid, &head)
        });
        worst = worst.max(rel_err(&analytic, &numeric));
    }
    CheckResult { name: "refine head", instances: INSTANCES, worst, tolerance: TOLERANCE }
}

pub fn check_chamfer(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < INSTANCES {
        let na = rng.gen_range(1..=64);
        let a = PointCloud::new(random_points(&mut rng, na));
        let nb = rng.gen_range(1..=64);
        let b = PointCloud::new(random_points(&mut rng, nb));
        let assign = |a: &[Point3], b: &[Point3]| {
            let f: Vec<usize> = nearest_neighbors(a, b).iter().map(|n| n.0).collect();
            let r: Vec<usize> = nearest_neighbors(b, a).iter().map(|n| n.0).collect();
            (f, r)
        };
        let base = assign(&a.points, &b.points);
        let (ga, gb) = chamfer_grad(&a, &b, 1.0).unwrap();
        let analytic: Vec<f64> = ga.iter().chain(&gb).flat_map(|p| p.to_array()).collect();
        let mut coords: Vec<f64> = a.points.iter().chain(&b.points).flat_map(|p| p.to_array()).collect();
        let mut stable = true;
        let numeric = numeric_grad(&mut coords, |c| {
            let pts: Vec<Point3> = c.chunks_exact(3).map(|w| Point3::new(w[0], w[1], w[2])).collect();
            let (pa, pb) = pts.split_at(na);
            stable &= assign(pa, pb) == base;
            chamfer(&PointCloud::new(pa.to_vec()), &PointCloud::new(pb.to_vec())).unwrap()
        });
        // A nearest-neighbour switch within the step is a kink; redraw.
        if !stable {
            continue;
        }
        worst = worst.max(rel_err(&analytic, &numeric));
        done += 1;
    }
    CheckResult { name: "chamfer", instances: done, worst, tolerance: CHAMFER_TOLERANCE }
}

/// True when `f` bends at `x[i]` more than a smooth function can over one
/// step, i.e. a kink lies within the finite-difference stencil.
fn kinked(x: &mut [f64], i: usize, f: &mut impl FnMut(&[f64]) -> f64) -> bool {
    let v = x[i];
    let mid = f(x);
    x[i] = v + STEP;
    let up = f(x) - mid;
    x[i] = v - STEP;
    let down = mid - f(x);
    x[i] = v;
    (up - down).abs() > 1e-3 * (up.abs() + down.abs()) + 1e-14
}

/// Tiny end-to-end model: 8^3 grid, 64 coarse points, expansion 2.
pub fn tiny_architecture() -> Architecture {
    Architecture {
        resolution: [8; 3],
        stages: 1,
        base_width: 4,
        kernel_size: 3,
        feature_dim: 4,
        refine_widths: vec![8, 6],
    }
}

/// Total loss (completion plus similarity over two fixed views) against a
/// random 16-parameter subset.
pub fn check_end_to_end(seed: u64, instances: usize) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = PipelineOptions {
        construction: BlockConstruction::Uniform { n_per_axis: 5, mode: SampleMode::Lattice },
        m: 64,
        ..Default::default()
    };
    let mut worst: f64 = 0.0;
    let mut done = 0;
    let mut attempts = 0;
    while done < instances && attempts < instances * 10 {
        attempts += 1;
        let mut params = CarveParams::init(tiny_architecture(), rng.gen()).unwrap();
        let n_head = params.head.values.len();
        params.head.values[n_head - 6..].iter_mut().for_each(|v| *v = rng.gen_range(-0.05..0.05));
        let gt = PointCloud::new(
            (0..96)
                .map(|_| Point3::new(rng.gen_range(-0.4..0.4), rng.gen_range(-0.3..0.3), rng.gen_range(-0.35..0.35)))
                .collect(),
        );
        let half = |rng: &mut ChaCha8Rng, axis: usize| {
            let keep: Vec<usize> = (0..gt.len()).filter(|&i| gt.points[i][axis] > rng.gen_range(-0.1..0.1)).collect();
            gt.select(&keep)
        };
        let partial = half(&mut rng, 0);
        let variants = [half(&mut rng, 1), half(&mut rng, 2)];
        let inputs = LossInputs { partial: &partial, gt: &gt, variants: &variants, alpha: 0.5, detach_anchors: false };
        let Ok((_, Some(g))) = sample_loss(&params, inputs, &opts, true) else { continue };
        let flat = params.to_flat();
        let gflat = g.to_flat();
        let idx = sample(&mut rng, flat.len(), 16).into_vec();
        let mut sub: Vec<f64> = idx.iter().map(|&i| flat[i]).collect();
        let analytic: Vec<f64> = idx.iter().map(|&i| gflat[i]).collect();
        let mut ok = true;
        let mut total = |s: &[f64]| {
            let mut f = flat.clone();
            for (&i, &v) in idx.iter().zip(s) {
                f[i] = v;
            }
            let mut p = params.clone();
            p.assign_flat(&f).unwrap();
            match sample_loss(&p, inputs, &opts, false) {
                Ok((l, _)) => l.total,
                Err(_) => {
                    ok = false;
                    0.0
                }
            }
        };
        // Selection changes, nearest-neighbour switches and activation kinks
        // make the loss non-differentiable; such instances are redrawn.
        if (0..sub.len()).any(|i| kinked(&mut sub, i, &mut total)) {
            continue;
        }
        let numeric = numeric_grad(&mut sub, &mut total);
        if !ok {
            continue;
        }
        worst = worst.max(rel_err(&analytic, &numeric));
        done += 1;
    }
    CheckResult { name: "end-to-end loss", instances: done, worst, tolerance: CHAMFER_TOLERANCE }
}

/// Every check, each seeded from `seed`.
pub fn run_suite(seed: u64) -> Vec<CheckResult> {
    vec![
        check_gridding_reverse(seed),
        check_feature_sample(seed.wrapping_add(1)),
        check_cell_conv_grid(seed.wrapping_add(2)),
        check_cell_conv_kernels(seed.wrapping_add(3)),
        check_refine(seed.wrapping_add(4)),
        check_chamfer(seed.wrapping_add(5)),
        check_end_to_end(seed.wrapping_add(6), 10),
    ]
}
