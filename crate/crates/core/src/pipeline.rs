//! Full completion pass (block construction, engraving, refinement) and its
//! reverse-mode gradient.

use std::fmt;
use std::str::FromStr;

use crate::carve::{cell_conv, cell_conv_grads, predict_kernels_traced, CarveGrads, CarveParams, KernelField, Unet, UnetCache};
use crate::chamfer::{chamfer, chamfer_grad};
use crate::cloud::{
    assemble_block, build_point_block, compute_bounds, default_min_extent, mirror_symmetric_block, subsample_fixed,
    BoundingRange, Point3, PointBlock, PointCloud, SampleMode, SubsampleMethod,
};
use crate::error::{Error, Result};
use crate::grid::{
    gridding, gridding_reverse_grad_with_selection, gridding_reverse_with_selection, select_cells, FeatureGrid,
    ReverseSelection, VoxelGrid,
};
use crate::loss::LossBreakdown;
use crate::nn::Volume;
use crate::refine::{refine, refine_grads};

/// How the filler points of the block are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockConstruction {
    /// The block is the partial cloud alone.
    None,
    /// Partial plus its mirror image across the range centre on `axis`.
    Symmetric { axis: usize },
    /// Partial plus `n_per_axis^3` uniform points.
    Uniform { n_per_axis: usize, mode: SampleMode },
    /// Partial plus `count` points drawn from the ground truth.
    GroundTruth { count: usize },
}

impl fmt::Display for BlockConstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockConstruction::None => f.write_str("none"),
            BlockConstruction::Symmetric { .. } => f.write_str("symmetric"),
            BlockConstruction::Uniform { .. } => f.write_str("uniform"),
            BlockConstruction::GroundTruth { .. } => f.write_str("ground-truth"),
        }
    }
}

/// Where the block range comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeSource {
    GroundTruth,
    Partial,
}

impl RangeSource {
    pub fn default_padding(self) -> f64 {
        match self {
            RangeSource::GroundTruth => 0.0,
            RangeSource::Partial => 0.15,
        }
    }
}

impl fmt::Display for RangeSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RangeSource::GroundTruth => "gt",
            RangeSource::Partial => "partial",
        })
    }
}

impl FromStr for RangeSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gt" => Ok(RangeSource::GroundTruth),
            "partial" => Ok(RangeSource::Partial),
            _ => Err(Error::InvalidArgument(format!("range source '{s}' is not gt or partial"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub construction: BlockConstruction,
    pub m: usize,
    pub theta: f64,
    pub range_source: RangeSource,
    pub range_padding: f64,
    /// Seed for random filler points.
    pub block_seed: u64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            construction: BlockConstruction::Uniform { n_per_axis: 16, mode: SampleMode::Lattice },
            m: 2048,
            theta: 0.0,
            range_source: RangeSource::GroundTruth,
            range_padding: 0.0,
            block_seed: 0,
        }
    }
}

/// Block range for a sample. Falls back to the partial cloud when no ground
/// truth is available.
pub fn block_range(partial: &PointCloud, gt: Option<&PointCloud>, opts: &PipelineOptions) -> Result<BoundingRange> {
    let src = match (opts.range_source, gt) {
        (RangeSource::GroundTruth, Some(g)) => g,
        _ => partial,
    };
    compute_bounds(src, opts.range_padding, default_min_extent(src))
}

pub fn construct_block(
    partial: &PointCloud,
    range: BoundingRange,
    gt: Option<&PointCloud>,
    opts: &PipelineOptions,
) -> Result<PointBlock> {
    match opts.construction {
        BlockConstruction::None => Ok(assemble_block(partial, PointCloud::default(), range)),
        BlockConstruction::Symmetric { axis } => {
            let both = mirror_symmetric_block(partial, axis, range.center()[axis])?;
            let mirrored = PointCloud::new(both.points[partial.len()..].to_vec());
            Ok(assemble_block(partial, mirrored, range))
        }
        BlockConstruction::Uniform { n_per_axis, mode } => {
            build_point_block(partial, range, n_per_axis, mode, opts.block_seed)
        }
        BlockConstruction::GroundTruth { count } => {
            let gt = gt.ok_or_else(|| Error::InvalidArgument("ground-truth block construction needs a ground truth".into()))?;
            let sampled = subsample_fixed(gt, count, SubsampleMethod::Random, opts.block_seed)?;
            Ok(assemble_block(partial, sampled, range))
        }
    }
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    pub block: PointBlock,
    pub block_grid: VoxelGrid,
    pub kernels: KernelField,
    pub features: FeatureGrid,
    pub cache: UnetCache,
    pub carved: VoxelGrid,
    pub selection: ReverseSelection,
    pub theta: f64,
    pub coarse: PointCloud,
    pub dense: PointCloud,
}

/// Coarse and dense completions of one partial cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub coarse: PointCloud,
    pub dense: PointCloud,
}

pub fn forward(
    params: &CarveParams,
    partial: &PointCloud,
    range: BoundingRange,
    gt: Option<&PointCloud>,
    opts: &PipelineOptions,
) -> Result<Trace> {
    let res = params.arch.resolution;
    let block = construct_block(partial, range, gt, opts)?;
    let block_grid = gridding(&block.points(), res, range)?;
    let partial_grid = gridding(&block.partial, res, range)?;
    let (kernels, features, cache) = predict_kernels_traced(&partial_grid, params)?;
    let carved = cell_conv(&block_grid, &kernels)?;
    let selection = select_cells(&carved, opts.m, opts.theta)?;
    let coarse = gridding_reverse_with_selection(&carved, &selection, opts.theta);
    let dense = refine(&coarse, &features, &params.head)?;
    Ok(Trace {
        block,
        block_grid,
        kernels,
        features,
        cache,
        carved,
        selection,
        theta: opts.theta,
        coarse,
        dense,
    })
}

/// Completes a partial cloud; the range comes from `gt` when requested and available.
pub fn complete(
    params: &CarveParams,
    partial: &PointCloud,
    gt: Option<&PointCloud>,
    opts: &PipelineOptions,
) -> Result<Completion> {
    let range = block_range(partial, gt, opts)?;
    let t = forward(params, partial, range, gt, opts)?;
    Ok(Completion { coarse: t.coarse, dense: t.dense })
}

/// Parameter gradients given loss gradients on the coarse and dense points.
/// The cell selection of the forward pass is held fixed.
pub fn backward(params: &CarveParams, trace: &Trace, grad_coarse: &[Point3], grad_dense: &[Point3]) -> Result<CarveGrads> {
    let rg = refine_grads(&trace.coarse, &trace.features, &params.head, grad_dense)?;
    if grad_coarse.len() != trace.coarse.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} coarse gradients for {} points",
            grad_coarse.len(),
            trace.coarse.len()
        )));
    }
    let gc: Vec<Point3> = grad_coarse.iter().zip(&rg.coarse).map(|(&a, &b)| a + b).collect();
    let gcarved = gridding_reverse_grad_with_selection(&trace.carved, &trace.selection, trace.theta, &gc)?;
    let (_, gk) = cell_conv_grads(&trace.block_grid, &trace.kernels, &gcarved.values)?;
    let grad_kernels = Volume {
        dims: gk.dims,
        channels: gk.taps(),
        data: gk.values,
    };
    let grad_features = Volume {
        dims: rg.features.dims,
        channels: rg.features.channels,
        data: rg.features.values,
    };
    let mut grads = CarveGrads::zeros(params);
    Unet::new(&params.arch).backward(&params.unet, &trace.cache, &grad_kernels, &grad_features, &mut grads.unet);
    grads.head = rg.params;
    Ok(grads)
}

/// One training example together with its augmented views.
#[derive(Debug, Clone, Copy)]
pub struct LossInputs<'a> {
    pub partial: &'a PointCloud,
    pub gt: &'a PointCloud,
    pub variants: &'a [PointCloud],
    pub alpha: f64,
    /// Stop similarity gradients at the anchor completions.
    pub detach_anchors: bool,
}

/// Total loss for one sample and, when requested, its parameter gradient.
pub fn sample_loss(
    params: &CarveParams,
    inputs: LossInputs<'_>,
    opts: &PipelineOptions,
    want_grads: bool,
) -> Result<(LossBreakdown, Option<CarveGrads>)> {
    let LossInputs { partial, gt, variants, alpha, detach_anchors } = inputs;
    let anchor = forward(params, partial, block_range(partial, Some(gt), opts)?, Some(gt), opts)?;
    let cd_c = chamfer(&anchor.coarse, gt)?;
    let cd_q = chamfer(&anchor.dense, gt)?;
    let mut views = Vec::with_capacity(variants.len());
    let mut sim_terms = Vec::with_capacity(variants.len());
    for v in variants {
        let t = forward(params, v, block_range(v, Some(gt), opts)?, Some(gt), opts)?;
        sim_terms.push((chamfer(&t.coarse, &anchor.coarse)?, chamfer(&t.dense, &anchor.dense)?));
        views.push(t);
    }
    let loss = LossBreakdown::new(cd_c, cd_q, sim_terms, alpha);
    if !want_grads {
        return Ok((loss, None));
    }
    let (mut gc, _) = chamfer_grad(&anchor.coarse, gt, 1.0)?;
    let (mut gq, _) = chamfer_grad(&anchor.dense, gt, 1.0)?;
    let mut grads = CarveGrads::zeros(params);
    for t in &views {
        let (gvc, gac) = chamfer_grad(&t.coarse, &anchor.coarse, alpha)?;
        let (gvq, gaq) = chamfer_grad(&t.dense, &anchor.dense, alpha)?;
        if !detach_anchors {
            add_into(&mut gc, &gac);
            add_into(&mut gq, &gaq);
        }
        grads.add_assign(&backward(params, t, &gvc, &gvq)?);
    }
    let mut total = backward(params, &anchor, &gc, &gq)?;
    total.add_assign(&grads);
    Ok((loss, Some(total)))
}

fn add_into(a: &mut [Point3], b: &[Point3]) {
    for (x, &y) in a.iter_mut().zip(b) {
        *x += y;
    }
}
