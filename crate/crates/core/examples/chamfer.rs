//! Chamfer distance with the kd-tree against exhaustive search.

use blockcarve::chamfer::{chamfer, chamfer_brute_force};
use blockcarve::cloud::{Point3, PointCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> blockcarve::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut cloud = |n: usize| PointCloud::new((0..n).map(|_| Point3::new(rng.gen(), rng.gen(), rng.gen())).collect());
    for n in [100, 1000, 4000] {
        let (a, b) = (cloud(n), cloud(n));
        let t = std::time::Instant::now();
        let fast = chamfer(&a, &b)?;
        let tf = t.elapsed();
        let t = std::time::Instant::now();
        let slow = chamfer_brute_force(&a, &b)?;
        let ts = t.elapsed();
        println!("n {n:5}: kd {fast:.6e} in {tf:?}, brute {slow:.6e} in {ts:?}, equal {}", fast == slow);
    }
    Ok(())
}
