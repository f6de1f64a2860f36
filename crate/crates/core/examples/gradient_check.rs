//! Finite-difference checks of every analytic gradient.

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    for r in blockcarve::gradcheck::run_suite(seed) {
        println!("{:20} {:3} instances  worst {:.2e}  limit {:.0e}  {}", r.name, r.instances, r.worst, r.tolerance, if r.passed() { "ok" } else { "FAILED" });
    }
}
