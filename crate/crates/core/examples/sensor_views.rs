//! Virtual range-sensor views of a sphere: how much of the surface each pose
//! sees, and how the depth-buffer resolution changes it.

use blockcarve::sensor::{frustum_cull, generate_partials, random_sensor, visible_points, SensorAugConfig, VisibilityConfig};
use blockcarve::synth::{gen_shape, ShapeFamily, SyntheticShapeSpec};

fn main() -> blockcarve::Result<()> {
    let (sphere, _) = gen_shape(&SyntheticShapeSpec { family: ShapeFamily::Sphere, dims: vec![0.5], count: 4096, seed: 1 })?;
    let fov = 49.1f64.to_radians();
    println!("pose  in-frustum  visible@160  visible@16");
    for seed in 0..5 {
        let pose = random_sensor(seed, fov, fov);
        let fine = visible_points(&sphere, &pose, &VisibilityConfig::default());
        let coarse = visible_points(&sphere, &pose, &VisibilityConfig { resolution: 16, depth_tolerance: 0.01 });
        let n = sphere.len() as f64;
        println!(
            "{seed:4}  {:10.3}  {:11.3}  {:10.3}",
            frustum_cull(&sphere, &pose).len() as f64 / n,
            fine.len() as f64 / n,
            coarse.len() as f64 / n
        );
    }
    let views = generate_partials(&sphere, 3, 42, &SensorAugConfig::default())?;
    println!("three augmented views: {:?} points", views.iter().map(|v| v.len()).collect::<Vec<_>>());
    Ok(())
}
