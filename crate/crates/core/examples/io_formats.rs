//! Writing and reading `.xyz` and both PLY encodings.

use blockcarve::io::{read_cloud, read_ply, write_cloud, write_ply, PlyFormat};
use blockcarve::synth::{gen_shape, ShapeFamily, SyntheticShapeSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (cloud, _) = gen_shape(&SyntheticShapeSpec::random(ShapeFamily::Wedge, 1000, 0))?;
    let dir = std::env::temp_dir().join("blockcarve_io_example");
    std::fs::create_dir_all(&dir)?;
    let xyz = dir.join("wedge.xyz");
    write_cloud(&xyz, &cloud)?;
    let ascii = dir.join("wedge_ascii.ply");
    write_ply(&ascii, &cloud, PlyFormat::Ascii)?;
    let binary = dir.join("wedge.ply");
    write_cloud(&binary, &cloud)?;
    for p in [&xyz, &ascii, &binary] {
        let back = if p.extension().is_some_and(|e| e == "ply") { read_ply(p)? } else { read_cloud(p)? };
        let err = cloud.points.iter().zip(&back.points).map(|(a, b)| a.dist_sq(*b).sqrt()).fold(0.0, f64::max);
        let bytes = std::fs::metadata(p)?.len();
        println!("{:18} {bytes:6} bytes, max round-trip error {err:.1e}", p.file_name().unwrap().to_string_lossy());
    }
    Ok(())
}
