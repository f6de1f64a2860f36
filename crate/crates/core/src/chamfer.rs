//! Exact nearest neighbours and the Chamfer distance.

use crate::cloud::{Point3, PointCloud};
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Static 3D k-d tree over a borrowed point set.
///
/// Queries return the lowest index among equidistant nearest points, so the
/// result is identical to a linear scan with `<` comparisons.
#[derive(Debug, Clone)]
pub struct KdTree<'a> {
    points: &'a [Point3],
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a [Point3]) -> Self {
        let mut tree = KdTree {
            points,
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build_node(0, points.len());
        }
        tree
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let (mut lo, mut hi) = (Point3::splat(f64::INFINITY), Point3::splat(f64::NEG_INFINITY));
        for &i in &self.order[start..end] {
            lo = lo.min(self.points[i]);
            hi = hi.max(self.points[i]);
        }
        let e = hi - lo;
        let axis = if e.x >= e.y && e.x >= e.z {
            0
        } else if e.y >= e.z {
            1
        } else {
            2
        };
        let mid = (start + end) / 2;
        let pts = self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| pts[a][axis].total_cmp(&pts[b][axis]));
        let value = pts[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// Index and squared distance of the nearest point to `q`.
    pub fn nearest(&self, q: Point3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, q, &mut best);
        Some(best)
    }

    fn search(&self, node: usize, q: Point3, best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = q.dist_sq(self.points[i]);
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                // `<=` keeps equidistant candidates on the far side reachable for tie-breaking.
                if diff * diff <= best.1 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

/// For every query point, the nearest reference index and squared distance.
pub fn nearest_neighbors(query: &[Point3], reference: &[Point3]) -> Vec<(usize, f64)> {
    let tree = KdTree::build(reference);
    query.iter().map(|&q| tree.nearest(q).unwrap()).collect()
}

fn check(x1: &PointCloud, x2: &PointCloud) -> Result<()> {
    if x1.is_empty() || x2.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// Mean nearest squared distance from `x1` to `x2` plus the reverse direction.
pub fn chamfer(x1: &PointCloud, x2: &PointCloud) -> Result<f64> {
    check(x1, x2)?;
    let a: f64 = nearest_neighbors(&x1.points, &x2.points).iter().map(|n| n.1).sum();
    let b: f64 = nearest_neighbors(&x2.points, &x1.points).iter().map(|n| n.1).sum();
    Ok(a / x1.len() as f64 + b / x2.len() as f64)
}

/// [`chamfer`] by exhaustive search, for testing.
pub fn chamfer_brute_force(x1: &PointCloud, x2: &PointCloud) -> Result<f64> {
    check(x1, x2)?;
    let one_way = |a: &[Point3], b: &[Point3]| {
        a.iter()
            .map(|p| b.iter().map(|q| p.dist_sq(*q)).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / a.len() as f64
    };
    Ok(one_way(&x1.points, &x2.points) + one_way(&x2.points, &x1.points))
}

/// Gradients of `upstream * chamfer(x1, x2)` with nearest-neighbour
/// assignments held fixed.
pub fn chamfer_grad(x1: &PointCloud, x2: &PointCloud, upstream: f64) -> Result<(Vec<Point3>, Vec<Point3>)> {
    check(x1, x2)?;
    let mut g1 = vec![Point3::ZERO; x1.len()];
    let mut g2 = vec![Point3::ZERO; x2.len()];
    let s1 = 2.0 * upstream / x1.len() as f64;
    for (i, (j, _)) in nearest_neighbors(&x1.points, &x2.points).into_iter().enumerate() {
        let d = (x1.points[i] - x2.points[j]) * s1;
        g1[i] += d;
        g2[j] -= d;
    }
    let s2 = 2.0 * upstream / x2.len() as f64;
    for (j, (i, _)) in nearest_neighbors(&x2.points, &x1.points).into_iter().enumerate() {
        let d = (x2.points[j] - x1.points[i]) * s2;
        g2[j] += d;
        g1[i] -= d;
    }
    Ok((g1, g2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(x: f64, y: f64, z: f64) -> Point3 {
        Point3::new(x, y, z)
    }

    #[test]
    fn singleton_pair() {
        let a = PointCloud::new(vec![p(0.0, 0.0, 0.0)]);
        let b = PointCloud::new(vec![p(1.0, 0.0, 0.0)]);
        assert_eq!(chamfer(&a, &b).unwrap(), 2.0);
        let (g1, g2) = chamfer_grad(&a, &b, 1.0).unwrap();
        assert_eq!(g1[0], p(-4.0, 0.0, 0.0));
        assert_eq!(g2[0], p(4.0, 0.0, 0.0));
    }

    #[test]
    fn identical_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = PointCloud::new((0..100).map(|_| p(rng.gen(), rng.gen(), rng.gen())).collect());
        assert_eq!(chamfer(&a, &a).unwrap(), 0.0);
        let (g1, g2) = chamfer_grad(&a, &a, 1.0).unwrap();
        assert!(g1.iter().chain(&g2).all(|&g| g == Point3::ZERO));
    }

    #[test]
    fn empty_is_an_error() {
        let a = PointCloud::new(vec![Point3::ZERO]);
        assert!(chamfer(&a, &PointCloud::default()).is_err());
        assert!(chamfer_grad(&PointCloud::default(), &a, 1.0).is_err());
    }

    #[test]
    fn ties_go_to_lower_index() {
        let reference = vec![p(1.0, 0.0, 0.0), p(-1.0, 0.0, 0.0), p(0.0, 1.0, 0.0)];
        let nn = nearest_neighbors(&[Point3::ZERO], &reference);
        assert_eq!(nn[0], (0, 1.0));
        // Many duplicates force ties across leaves.
        let dupes = vec![p(0.5, 0.5, 0.5); 40];
        assert_eq!(nearest_neighbors(&[Point3::ZERO], &dupes)[0].0, 0);
    }
}
