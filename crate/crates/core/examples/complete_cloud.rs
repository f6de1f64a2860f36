//! Completes one synthetic partial cloud with a checkpoint, or with a freshly
//! initialized model when none is given, and writes the results.
//!
//! `cargo run --release --example complete_cloud -- [model.ckpt]`

use blockcarve::carve::{checkpoint, CarveParams};
use blockcarve::chamfer::chamfer;
use blockcarve::config::RunConfig;
use blockcarve::io::write_cloud;
use blockcarve::pipeline::complete;
use blockcarve::train::synth_sample;

fn main() -> blockcarve::Result<()> {
    let cfg = RunConfig::desk();
    let params = match std::env::args().nth(1) {
        Some(p) => checkpoint::load(p.as_ref())?,
        None => CarveParams::init(cfg.architecture(), 0)?,
    };
    let s = synth_sample(&cfg.synth(), &cfg.sensor(), 190)?;
    let q = complete(&params, &s.partial, Some(&s.gt), &cfg.pipeline()?)?;
    println!("{}: partial {} -> coarse {} -> dense {}", s.category, s.partial.len(), q.coarse.len(), q.dense.len());
    println!("CD to ground truth: partial {:.5}, coarse {:.5}, dense {:.5}", chamfer(&s.partial, &s.gt)?, chamfer(&q.coarse, &s.gt)?, chamfer(&q.dense, &s.gt)?);
    let dir = std::env::temp_dir();
    for (name, c) in [("partial", &s.partial), ("coarse", &q.coarse), ("dense", &q.dense), ("gt", &s.gt)] {
        write_cloud(&dir.join(format!("blockcarve_{name}.ply")), c)?;
    }
    println!("clouds written to {}", dir.display());
    Ok(())
}
