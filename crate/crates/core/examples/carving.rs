//! Carving a point block by hand: kernels that keep only cells near the
//! partial cloud remove the filler elsewhere.

use blockcarve::carve::{cell_conv, KernelField};
use blockcarve::chamfer::chamfer;
use blockcarve::grid::{gridding, gridding_reverse};
use blockcarve::pipeline::{block_range, construct_block, PipelineOptions};
use blockcarve::config::RunConfig;
use blockcarve::train::synth_sample;

fn main() -> blockcarve::Result<()> {
    let cfg = RunConfig::desk();
    let s = synth_sample(&cfg.synth(), &cfg.sensor(), 7)?;
    let opts = PipelineOptions::default();
    let range = block_range(&s.partial, Some(&s.gt), &opts)?;
    let block = construct_block(&s.partial, range, Some(&s.gt), &opts)?;
    let res = [32; 3];
    let block_grid = gridding(&block.points(), res, range)?;

    // Identity kernels leave the block as it is.
    let identity = cell_conv(&block_grid, &KernelField::identity(res, 3))?;
    // Oracle kernels: identity where the ground truth has mass, zero elsewhere.
    let gt_grid = gridding(&s.gt, res, range)?;
    let mut oracle = KernelField::identity(res, 3);
    for (n, v) in gt_grid.values.iter().enumerate() {
        if *v == 0.0 {
            oracle.values[n * 27..(n + 1) * 27].fill(0.0);
        }
    }
    let carved = cell_conv(&block_grid, &oracle)?;
    for (name, g) in [("uncarved", &identity), ("oracle-carved", &carved)] {
        let c = gridding_reverse(g, 256, 0.0)?;
        println!("{name:14} coarse CD {:.5}", chamfer(&c, &s.gt)?);
    }
    println!("partial alone    CD {:.5}", chamfer(&s.partial, &s.gt)?);
    Ok(())
}
