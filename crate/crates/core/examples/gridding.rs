//! Gridding a cloud and reading it back with gridding reverse.

use blockcarve::chamfer::chamfer;
use blockcarve::cloud::compute_bounds;
use blockcarve::grid::{gridding, gridding_reverse};
use blockcarve::synth::{gen_shape, ShapeFamily, SyntheticShapeSpec};

fn main() -> blockcarve::Result<()> {
    let (torus, _) = gen_shape(&SyntheticShapeSpec::random(ShapeFamily::Torus, 8192, 3))?;
    let range = compute_bounds(&torus, 0.05, 1e-3)?;
    for res in [16, 32, 64] {
        let t = std::time::Instant::now();
        let grid = gridding(&torus, [res; 3], range)?;
        let ms = t.elapsed().as_secs_f64() * 1e3;
        let mass: f64 = grid.values.iter().sum();
        let back = gridding_reverse(&grid, 2048, 0.0)?;
        println!("{res:2}^3: {ms:6.2} ms, total mass {mass:.1}, reverse CD to input {:.2e}", chamfer(&back, &torus)?);
    }
    Ok(())
}
