//! Point-block engraving: a network predicts one convolution kernel per grid
//! node from the partial cloud, and those kernels carve the gridded block.

pub mod checkpoint;
pub mod params;
pub mod unet;

use crate::cloud::{PointBlock, PointCloud};
use crate::error::{Error, Result};
use crate::grid::{gridding, gridding_reverse, FeatureGrid, VoxelGrid};
use crate::nn::Volume;

pub use params::{Architecture, CarveGrads, CarveParams};
pub use unet::{Unet, UnetCache};

/// One `K^3` kernel per grid node, offsets ordered `(dx, dy, dz)` lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelField {
    pub dims: [usize; 3],
    pub ksize: usize,
    pub values: Vec<f64>,
}

impl KernelField {
    pub fn new(dims: [usize; 3], ksize: usize, values: Vec<f64>) -> Result<Self> {
        if ksize % 2 == 0 {
            return Err(Error::InvalidArgument(format!("kernel size {ksize} is not odd")));
        }
        let taps = ksize.pow(3);
        if values.len() != dims[0] * dims[1] * dims[2] * taps {
            return Err(Error::ShapeMismatch(format!(
                "{} kernel values for {dims:?} nodes of {taps} taps",
                values.len()
            )));
        }
        Ok(Self { dims, ksize, values })
    }

    pub fn zeros(dims: [usize; 3], ksize: usize) -> Self {
        Self {
            dims,
            ksize,
            values: vec![0.0; dims[0] * dims[1] * dims[2] * ksize.pow(3)],
        }
    }

    /// Every node keeps only its own value.
    pub fn identity(dims: [usize; 3], ksize: usize) -> Self {
        let mut k = Self::zeros(dims, ksize);
        let taps = ksize.pow(3);
        for n in 0..dims[0] * dims[1] * dims[2] {
            k.values[n * taps + taps / 2] = 1.0;
        }
        k
    }

    pub fn taps(&self) -> usize {
        self.ksize.pow(3)
    }
}

fn check_shapes(grid: &VoxelGrid, kernels: &KernelField) -> Result<()> {
    if grid.dims() != kernels.dims {
        return Err(Error::ShapeMismatch(format!(
            "grid {:?} vs kernel field {:?}",
            grid.dims(),
            kernels.dims
        )));
    }
    if kernels.ksize % 2 == 0 {
        return Err(Error::InvalidArgument(format!("kernel size {} is not odd", kernels.ksize)));
    }
    Ok(())
}

/// Visits `(tap, neighbour node)` for every in-bounds tap of node `(i, j, k)`.
#[inline]
fn for_each_tap(dims: [usize; 3], ksize: usize, i: usize, j: usize, k: usize, mut f: impl FnMut(usize, usize)) {
    let h = (ksize / 2) as isize;
    let mut tap = 0;
    for dx in -h..=h {
        let x = i as isize + dx;
        for dy in -h..=h {
            let y = j as isize + dy;
            for dz in -h..=h {
                let z = k as isize + dz;
                if x >= 0
                    && y >= 0
                    && z >= 0
                    && (x as usize) < dims[0]
                    && (y as usize) < dims[1]
                    && (z as usize) < dims[2]
                {
                    f(tap, (x as usize * dims[1] + y as usize) * dims[2] + z as usize);
                }
                tap += 1;
            }
        }
    }
}

/// Node-wise convolution: each node applies its own kernel to its
/// neighbourhood, with zeros outside the grid.
pub fn cell_conv(block_grid: &VoxelGrid, kernels: &KernelField) -> Result<VoxelGrid> {
    check_shapes(block_grid, kernels)?;
    let dims = block_grid.dims();
    let taps = kernels.taps();
    let mut out = VoxelGrid::zeros(block_grid.geometry);
    let mut n = 0;
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let w = &kernels.values[n * taps..(n + 1) * taps];
                let mut s = 0.0;
                for_each_tap(dims, kernels.ksize, i, j, k, |t, m| s += w[t] * block_grid.values[m]);
                out.values[n] = s;
                n += 1;
            }
        }
    }
    Ok(out)
}

/// Reference [`cell_conv`]: six nested loops over nodes and offsets, using
/// only `VoxelGrid::get`. Slow; meant for testing.
pub fn cell_conv_reference(block_grid: &VoxelGrid, kernels: &KernelField) -> Result<VoxelGrid> {
    check_shapes(block_grid, kernels)?;
    let [h, w, m] = block_grid.dims();
    let (k, r) = (kernels.ksize, (kernels.ksize / 2) as isize);
    let mut out = VoxelGrid::zeros(block_grid.geometry);
    for i in 0..h {
        for j in 0..w {
            for l in 0..m {
                let node = block_grid.geometry.node_index(i, j, l);
                let mut s = 0.0;
                for a in 0..k {
                    for b in 0..k {
                        for c in 0..k {
                            let (x, y, z) = (i as isize + a as isize - r, j as isize + b as isize - r, l as isize + c as isize - r);
                            if x < 0 || y < 0 || z < 0 || x >= h as isize || y >= w as isize || z >= m as isize {
                                continue;
                            }
                            let tap = (a * k + b) * k + c;
                            s += kernels.values[node * k * k * k + tap] * block_grid.get(x as usize, y as usize, z as usize);
                        }
                    }
                }
                out.values[node] = s;
            }
        }
    }
    Ok(out)
}

/// Adjoints of [`cell_conv`]: `(d/d block_grid, d/d kernels)`.
pub fn cell_conv_grads(
    block_grid: &VoxelGrid,
    kernels: &KernelField,
    upstream: &[f64],
) -> Result<(Vec<f64>, KernelField)> {
    check_shapes(block_grid, kernels)?;
    if upstream.len() != block_grid.values.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} upstream values for {} nodes",
            upstream.len(),
            block_grid.values.len()
        )));
    }
    let dims = block_grid.dims();
    let taps = kernels.taps();
    let mut ginput = vec![0.0; block_grid.values.len()];
    let mut gk = KernelField::zeros(dims, kernels.ksize);
    let mut n = 0;
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let g = upstream[n];
                if g != 0.0 {
                    let w = &kernels.values[n * taps..(n + 1) * taps];
                    let gw = &mut gk.values[n * taps..(n + 1) * taps];
                    for_each_tap(dims, kernels.ksize, i, j, k, |t, m| {
                        gw[t] += g * block_grid.values[m];
                        ginput[m] += g * w[t];
                    });
                }
                n += 1;
            }
        }
    }
    Ok((ginput, gk))
}

fn grid_to_volume(grid: &VoxelGrid) -> Volume {
    Volume {
        dims: grid.dims(),
        channels: 1,
        data: grid.values.clone(),
    }
}

/// Runs the kernel-predicting network on a gridded partial cloud.
pub fn predict_kernels(partial_grid: &VoxelGrid, params: &CarveParams) -> Result<(KernelField, FeatureGrid)> {
    let (k, f, _) = predict_kernels_traced(partial_grid, params)?;
    Ok((k, f))
}

pub fn predict_kernels_traced(
    partial_grid: &VoxelGrid,
    params: &CarveParams,
) -> Result<(KernelField, FeatureGrid, UnetCache)> {
    if partial_grid.dims() != params.arch.resolution {
        return Err(Error::ShapeMismatch(format!(
            "grid {:?} vs model resolution {:?}",
            partial_grid.dims(),
            params.arch.resolution
        )));
    }
    let net = Unet::new(&params.arch);
    let (out, cache) = net.forward(&params.unet, grid_to_volume(partial_grid));
    let kernels = KernelField::new(out.kernels.dims, params.arch.kernel_size, out.kernels.data)?;
    let features = FeatureGrid::from_values(partial_grid.geometry, out.features.channels, out.features.data)?;
    Ok((kernels, features, cache))
}

/// Grids the block and its partial cloud over the block range, carves the
/// block grid with predicted kernels and reverses the result to `m` points.
pub fn engrave(block: &PointBlock, params: &CarveParams, theta: f64, m: usize) -> Result<(PointCloud, FeatureGrid)> {
    let res = params.arch.resolution;
    let block_grid = gridding(&block.points(), res, block.range)?;
    let partial_grid = gridding(&block.partial, res, block.range)?;
    let (kernels, features) = predict_kernels(&partial_grid, params)?;
    let carved = cell_conv(&block_grid, &kernels)?;
    let coarse = gridding_reverse(&carved, m, theta)?;
    Ok((coarse, features))
}
