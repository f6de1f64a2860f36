//! Dense grid representation of point clouds.
//!
//! Values live on the nodes of an `H x W x M` lattice whose corner nodes sit
//! exactly on the corners of the grid's [`BoundingRange`]. Points scatter
//! into the 8 nodes around them with trilinear weights (gridding); a scalar
//! field maps back to points through score-weighted centroids of the
//! `(H-1) x (W-1) x (M-1)` cubes spanned by neighbouring nodes (gridding
//! reverse); node features are read at arbitrary positions by trilinear
//! interpolation (feature sampling). Each operation has an exact adjoint.

use crate::cloud::{BoundingRange, Point3, PointCloud};
use crate::error::{Error, Result};

/// Node lattice geometry shared by scalar and feature grids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub dims: [usize; 3],
    pub range: BoundingRange,
}

/// The 8 trilinear corners of a position: base node and fractional offsets.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Corners {
    pub base: [usize; 3],
    pub frac: [f64; 3],
}

impl Corners {
    /// Weight of corner `c` (bit 2 = x, bit 1 = y, bit 0 = z).
    #[inline]
    pub fn weight(&self, c: usize) -> f64 {
        let f = |bit: usize, t: f64| if bit == 1 { t } else { 1.0 - t };
        f((c >> 2) & 1, self.frac[0]) * f((c >> 1) & 1, self.frac[1]) * f(c & 1, self.frac[2])
    }

    /// Derivative of corner `c`'s weight with respect to the fractional coordinate on `axis`.
    #[inline]
    pub fn weight_dfrac(&self, c: usize, axis: usize) -> f64 {
        let mut w = 1.0;
        for a in 0..3 {
            let bit = (c >> (2 - a)) & 1;
            if a == axis {
                w *= if bit == 1 { 1.0 } else { -1.0 };
            } else {
                w *= if bit == 1 { self.frac[a] } else { 1.0 - self.frac[a] };
            }
        }
        w
    }
}

impl GridGeometry {
    pub fn new(dims: [usize; 3], range: BoundingRange) -> Result<Self> {
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidArgument(format!(
                "grid resolution {dims:?} has a component below 2"
            )));
        }
        Ok(Self { dims, range })
    }

    pub fn node_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn cell_dims(&self) -> [usize; 3] {
        [self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1]
    }

    #[inline]
    pub fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    /// Spacing between neighbouring nodes along each axis.
    pub fn spacing(&self) -> Point3 {
        let e = self.range.extent();
        Point3::new(
            e.x / (self.dims[0] - 1) as f64,
            e.y / (self.dims[1] - 1) as f64,
            e.z / (self.dims[2] - 1) as f64,
        )
    }

    pub fn node_position(&self, i: usize, j: usize, k: usize) -> Point3 {
        let s = self.spacing();
        let lo = self.range.min();
        Point3::new(
            lo.x + i as f64 * s.x,
            lo.y + j as f64 * s.y,
            lo.z + k as f64 * s.z,
        )
    }

    /// Trilinear corners of `p` after clamping it into the range.
    #[inline]
    pub(crate) fn corners(&self, p: Point3) -> Corners {
        let p = self.range.clamp(p);
        let lo = self.range.min();
        let ext = self.range.extent();
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let cells = (self.dims[a] - 1) as f64;
            let u = (p[a] - lo[a]) / ext[a] * cells;
            let b = (u.floor().max(0.0) as usize).min(self.dims[a] - 2);
            base[a] = b;
            frac[a] = (u - b as f64).clamp(0.0, 1.0);
        }
        Corners { base, frac }
    }

    #[inline]
    pub(crate) fn corner_node(&self, c: &Corners, corner: usize) -> usize {
        self.node_index(
            c.base[0] + ((corner >> 2) & 1),
            c.base[1] + ((corner >> 1) & 1),
            c.base[2] + (corner & 1),
        )
    }
}

/// A scalar field over grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub geometry: GridGeometry,
    pub values: Vec<f64>,
}

impl VoxelGrid {
    pub fn zeros(geometry: GridGeometry) -> Self {
        Self {
            values: vec![0.0; geometry.node_count()],
            geometry,
        }
    }

    pub fn from_values(geometry: GridGeometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.node_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {:?} grid",
                values.len(),
                geometry.dims
            )));
        }
        Ok(Self { geometry, values })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geometry.dims
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.geometry.node_index(i, j, k)]
    }
}

/// A multi-channel field over grid nodes, channels contiguous per node.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    pub geometry: GridGeometry,
    pub channels: usize,
    pub values: Vec<f64>,
}

impl FeatureGrid {
    pub fn from_values(geometry: GridGeometry, channels: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.node_count() * channels {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {:?}x{channels} feature grid",
                values.len(),
                geometry.dims
            )));
        }
        Ok(Self {
            geometry,
            channels,
            values,
        })
    }

    pub fn node(&self, n: usize) -> &[f64] {
        &self.values[n * self.channels..(n + 1) * self.channels]
    }
}

/// Partial derivatives with the same layout as the grid they differentiate.
#[derive(Debug, Clone, PartialEq)]
pub struct GridGradient {
    pub dims: [usize; 3],
    pub channels: usize,
    pub values: Vec<f64>,
}

impl GridGradient {
    pub fn zeros(dims: [usize; 3], channels: usize) -> Self {
        Self {
            dims,
            channels,
            values: vec![0.0; dims[0] * dims[1] * dims[2] * channels],
        }
    }
}

/// Scatters each point's unit mass to its 8 surrounding nodes.
pub fn gridding(cloud: &PointCloud, dims: [usize; 3], range: BoundingRange) -> Result<VoxelGrid> {
    let geometry = GridGeometry::new(dims, range)?;
    let mut grid = VoxelGrid::zeros(geometry);
    for &p in &cloud.points {
        let c = geometry.corners(p);
        for corner in 0..8 {
            grid.values[geometry.corner_node(&c, corner)] += c.weight(corner);
        }
    }
    Ok(grid)
}

/// Which cubes produced the points of a gridding-reverse output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReverseSelection {
    /// Selected cubes, as linear indices over the cube lattice, in ascending order.
    pub cells: Vec<usize>,
    /// Output point `o` comes from `cells[source[o]]`.
    pub source: Vec<usize>,
}

fn cube_nodes(g: &GridGeometry, cell: usize) -> [usize; 8] {
    let cd = g.cell_dims();
    let k = cell % cd[2];
    let j = (cell / cd[2]) % cd[1];
    let i = cell / (cd[1] * cd[2]);
    let mut out = [0; 8];
    for (c, slot) in out.iter_mut().enumerate() {
        *slot = g.node_index(i + ((c >> 2) & 1), j + ((c >> 1) & 1), k + (c & 1));
    }
    out
}

/// Ranks cubes by total above-threshold score and keeps the best `m`.
pub fn select_cells(grid: &VoxelGrid, m: usize, theta: f64) -> Result<ReverseSelection> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let g = &grid.geometry;
    let cd = g.cell_dims();
    let mut scored: Vec<(f64, usize)> = Vec::new();
    for cell in 0..cd[0] * cd[1] * cd[2] {
        let total: f64 = cube_nodes(g, cell)
            .iter()
            .map(|&n| (grid.values[n] - theta).max(0.0))
            .sum();
        if total > 0.0 {
            scored.push((total, cell));
        }
    }
    if scored.is_empty() {
        return Err(Error::EmptyCarve);
    }
    let by_rank = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    if scored.len() > m {
        scored.select_nth_unstable_by(m - 1, by_rank);
        scored.truncate(m);
    }
    let mut cells: Vec<usize> = scored.into_iter().map(|(_, c)| c).collect();
    cells.sort_unstable();
    let source = (0..m).map(|o| o % cells.len()).collect();
    Ok(ReverseSelection { cells, source })
}

fn cube_centroid(grid: &VoxelGrid, cell: usize, theta: f64) -> (Point3, f64, [usize; 8]) {
    let g = &grid.geometry;
    let nodes = cube_nodes(g, cell);
    let mut acc = Point3::ZERO;
    let mut total = 0.0;
    for &n in &nodes {
        let w = (grid.values[n] - theta).max(0.0);
        if w > 0.0 {
            acc += node_pos_linear(g, n) * w;
            total += w;
        }
    }
    (acc * (1.0 / total), total, nodes)
}

fn node_pos_linear(g: &GridGeometry, n: usize) -> Point3 {
    let k = n % g.dims[2];
    let j = (n / g.dims[2]) % g.dims[1];
    let i = n / (g.dims[1] * g.dims[2]);
    g.node_position(i, j, k)
}

/// Emits one point per selected cube at its score-weighted node centroid.
pub fn gridding_reverse_with_selection(
    grid: &VoxelGrid,
    selection: &ReverseSelection,
    theta: f64,
) -> PointCloud {
    let emitted: Vec<Point3> = selection
        .cells
        .iter()
        .map(|&cell| cube_centroid(grid, cell, theta).0)
        .collect();
    PointCloud::new(selection.source.iter().map(|&s| emitted[s]).collect())
}

/// Maps a scalar field back to exactly `m` points.
pub fn gridding_reverse(grid: &VoxelGrid, m: usize, theta: f64) -> Result<PointCloud> {
    Ok(gridding_reverse_traced(grid, m, theta)?.0)
}

pub fn gridding_reverse_traced(
    grid: &VoxelGrid,
    m: usize,
    theta: f64,
) -> Result<(PointCloud, ReverseSelection)> {
    let sel = select_cells(grid, m, theta)?;
    Ok((gridding_reverse_with_selection(grid, &sel, theta), sel))
}

/// Adjoint of [`gridding_reverse_with_selection`] with the selection held fixed.
pub fn gridding_reverse_grad_with_selection(
    grid: &VoxelGrid,
    selection: &ReverseSelection,
    theta: f64,
    upstream: &[Point3],
) -> Result<GridGradient> {
    if upstream.len() != selection.source.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} upstream gradients for {} reversed points",
            upstream.len(),
            selection.source.len()
        )));
    }
    let g = &grid.geometry;
    // Padding repeats a cube's point, so its upstream is summed first.
    let mut per_cell = vec![Point3::ZERO; selection.cells.len()];
    for (&s, &u) in selection.source.iter().zip(upstream) {
        per_cell[s] += u;
    }
    let mut out = GridGradient::zeros(g.dims, 1);
    for (&cell, &u) in selection.cells.iter().zip(&per_cell) {
        if u == Point3::ZERO {
            continue;
        }
        let (centroid, total, nodes) = cube_centroid(grid, cell, theta);
        for &n in &nodes {
            if grid.values[n] > theta {
                out.values[n] += u.dot(node_pos_linear(g, n) - centroid) / total;
            }
        }
    }
    Ok(out)
}

pub fn gridding_reverse_grad(
    grid: &VoxelGrid,
    m: usize,
    theta: f64,
    upstream: &[Point3],
) -> Result<GridGradient> {
    let sel = select_cells(grid, m, theta)?;
    gridding_reverse_grad_with_selection(grid, &sel, theta, upstream)
}

/// Trilinearly interpolated node features at each query point.
pub fn feature_sample(features: &FeatureGrid, query: &PointCloud) -> PointCloud {
    let g = &features.geometry;
    let ch = features.channels;
    let mut values = vec![0.0; query.len() * ch];
    for (row, &p) in values.chunks_exact_mut(ch.max(1)).zip(&query.points) {
        let c = g.corners(p);
        for corner in 0..8 {
            let w = c.weight(corner);
            if w == 0.0 {
                continue;
            }
            let node = features.node(g.corner_node(&c, corner));
            for (o, &f) in row.iter_mut().zip(node) {
                *o += w * f;
            }
        }
    }
    PointCloud {
        points: query.points.clone(),
        features: Some(crate::cloud::Features { dim: ch, values }),
    }
}

fn check_upstream(features: &FeatureGrid, query: &PointCloud, upstream: &[f64]) -> Result<()> {
    if upstream.len() != query.len() * features.channels {
        return Err(Error::ShapeMismatch(format!(
            "{} upstream values for {} queries of {} channels",
            upstream.len(),
            query.len(),
            features.channels
        )));
    }
    Ok(())
}

/// Adjoint of [`feature_sample`] with respect to the grid values.
/// `upstream` holds one row of `channels` values per query.
pub fn feature_sample_grad(
    features: &FeatureGrid,
    query: &PointCloud,
    upstream: &[f64],
) -> Result<GridGradient> {
    check_upstream(features, query, upstream)?;
    let g = &features.geometry;
    let ch = features.channels;
    let mut out = GridGradient::zeros(g.dims, ch);
    for (up, &p) in upstream.chunks_exact(ch.max(1)).zip(&query.points) {
        let c = g.corners(p);
        for corner in 0..8 {
            let w = c.weight(corner);
            if w == 0.0 {
                continue;
            }
            let n = g.corner_node(&c, corner);
            for (o, &u) in out.values[n * ch..(n + 1) * ch].iter_mut().zip(up) {
                *o += w * u;
            }
        }
    }
    Ok(out)
}

/// Derivative of [`feature_sample`] with respect to the query positions.
/// Queries outside the range are clamped and get zero gradient on the clamped axes.
pub fn feature_sample_position_grad(
    features: &FeatureGrid,
    query: &PointCloud,
    upstream: &[f64],
) -> Result<Vec<Point3>> {
    check_upstream(features, query, upstream)?;
    let g = &features.geometry;
    let ch = features.channels;
    let spacing = g.spacing();
    let lo = g.range.min();
    let hi = g.range.max();
    let mut out = Vec::with_capacity(query.len());
    for (up, &p) in upstream.chunks_exact(ch.max(1)).zip(&query.points) {
        let c = g.corners(p);
        let mut grad = Point3::ZERO;
        for corner in 0..8 {
            let node = features.node(g.corner_node(&c, corner));
            let dot: f64 = node.iter().zip(up).map(|(f, u)| f * u).sum();
            if dot == 0.0 {
                continue;
            }
            for a in 0..3 {
                grad[a] += dot * c.weight_dfrac(corner, a) / spacing[a];
            }
        }
        for a in 0..3 {
            if p[a] < lo[a] || p[a] > hi[a] {
                grad[a] = 0.0;
            }
        }
        out.push(grad);
    }
    Ok(out)
}
