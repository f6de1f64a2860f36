//! Trains briefly with each block construction and compares held-out CD.
//!
//! `cargo run --release --example block_ablation -- [steps]`

use blockcarve::config::RunConfig;
use blockcarve::train::{synth_dataset, train_toy, validation_cd};

fn main() -> blockcarve::Result<()> {
    let steps: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(40);
    let mut base = RunConfig::desk();
    base.max_steps = steps;
    base.alpha = 0.0;
    base.synth_train = 40;
    base.synth_val = 8;
    let sensor = base.sensor();
    let train = synth_dataset(&base.synth(), &sensor, 0..base.synth_train)?;
    let val = synth_dataset(&base.synth(), &sensor, base.synth_train..base.synth_train + base.synth_val)?;
    println!("construction   coarse    dense");
    for construction in ["none", "symmetric", "uniform", "ground-truth"] {
        let mut cfg = base.clone();
        cfg.construction = construction.into();
        let tc = cfg.train_config(1)?;
        let out = train_toy(&train, &val, &tc, |_| Ok(()))?;
        let (c, q) = validation_cd(&out.params, &val, &tc.pipeline)?;
        println!("{construction:12}  {c:.5}  {q:.5}");
    }
    Ok(())
}
