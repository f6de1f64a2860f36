//! The four block constructions around one partial cloud.

use blockcarve::config::RunConfig;
use blockcarve::pipeline::{block_range, construct_block, BlockConstruction, PipelineOptions};
use blockcarve::cloud::SampleMode;
use blockcarve::train::synth_sample;

fn main() -> blockcarve::Result<()> {
    let cfg = RunConfig::desk();
    let s = synth_sample(&cfg.synth(), &cfg.sensor(), 4)?;
    println!("{}: partial {} points, ground truth {}", s.category, s.partial.len(), s.gt.len());
    for construction in [
        BlockConstruction::None,
        BlockConstruction::Symmetric { axis: 0 },
        BlockConstruction::Uniform { n_per_axis: 11, mode: SampleMode::Lattice },
        BlockConstruction::Uniform { n_per_axis: 16, mode: SampleMode::Random },
        BlockConstruction::GroundTruth { count: 512 },
    ] {
        let opts = PipelineOptions { construction, ..Default::default() };
        let range = block_range(&s.partial, Some(&s.gt), &opts)?;
        let b = construct_block(&s.partial, range, Some(&s.gt), &opts)?;
        println!("{:>12}: {} filler points, {} clamped, range {:?}..{:?}", construction.to_string(), b.sampled.len(), b.clamped, range.min(), range.max());
    }
    Ok(())
}
