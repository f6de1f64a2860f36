//! Consistency, valid-point percentage and a sensitivity sweep.

use blockcarve::carve::CarveParams;
use blockcarve::config::RunConfig;
use blockcarve::metrics::{consistency, format_sweep, sensitivity_sweep, valid_point_percentage, Reduction, TrackedSequence};
use blockcarve::pipeline::complete;
use blockcarve::sensor::generate_partials;
use blockcarve::train::synth_dataset;

fn main() -> blockcarve::Result<()> {
    let cfg = RunConfig::desk();
    let params = CarveParams::init(cfg.architecture(), 0)?;
    let opts = cfg.pipeline()?;
    let data = synth_dataset(&cfg.synth(), &cfg.sensor(), 180..186)?;
    for s in &data {
        println!("{:10} valid-point percentage {:.3}", s.category, valid_point_percentage(&s.partial, &s.gt)?);
    }

    // A "tracked object": completions of three sensor views of one shape.
    let s = &data[0];
    let frames = generate_partials(&s.gt, 3, 5, &cfg.sensor())?
        .iter()
        .map(|v| Ok(complete(&params, v, Some(&s.gt), &opts)?.dense))
        .collect::<blockcarve::Result<Vec<_>>>()?;
    println!("consistency over 3 frames: {:.5}", consistency(&TrackedSequence { object: s.category.clone(), frames })?);

    let sweep = sensitivity_sweep(&params, &data, &[0.4, 0.7, 1.0], &opts, Reduction::Random, 0)?;
    print!("{}", format_sweep(&sweep));
    Ok(())
}
