//! Generates one shape of every family and writes each as `.xyz`.
//!
//! `cargo run --release --example synth_shapes -- out_dir`

use std::path::PathBuf;

use blockcarve::io::write_cloud;
use blockcarve::synth::{gen_shape, ShapeFamily, SyntheticShapeSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "shapes".into()));
    std::fs::create_dir_all(&dir)?;
    for (i, family) in ShapeFamily::ALL.into_iter().enumerate() {
        let spec = SyntheticShapeSpec::random(family, 4096, i as u64);
        let (cloud, name) = gen_shape(&spec)?;
        let path = dir.join(format!("{name}.xyz"));
        write_cloud(&path, &cloud)?;
        println!("{name:10} dims {:?} -> {}", spec.dims, path.display());
    }
    Ok(())
}
