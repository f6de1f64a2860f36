mod common;

use std::path::Path;

use blockcarve::config::RunConfig;
use blockcarve::io::{read_cloud, read_ply, write_cloud, write_ply, PlyFormat};
use common::cloud;
use proptest::prelude::*;

proptest! {
    #[test]
    fn config_text_round_trips(
        preset in prop::sample::select(vec!["default", "desk", "paper"]),
        lr in 1e-6..1e-1f64,
        alpha in 0.0..2.0f64,
        theta in 0.0..0.5f64,
        seed in any::<u64>(),
        pad in prop::option::of(0.0..0.5f64),
        t in 0usize..5,
    ) {
        let mut c = RunConfig::preset(preset).unwrap();
        c.lr = lr;
        c.alpha = alpha;
        c.theta = theta;
        c.seed = seed;
        c.range_padding = pad;
        c.t = t;
        let back = RunConfig::parse(&c.to_text(), Path::new(""), Path::new("<mem>")).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn xyz_round_trip_is_tight(c in cloud(1..50)) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.xyz");
        write_cloud(&p, &c).unwrap();
        let back = read_cloud(&p).unwrap();
        prop_assert_eq!(back.len(), c.len());
        for (a, b) in c.points.iter().zip(&back.points) {
            prop_assert!(a.dist_sq(*b).sqrt() < 1e-8);
        }
    }

    #[test]
    fn ply_formats_agree(c in cloud(1..50)) {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.ply"), dir.path().join("b.ply"));
        write_ply(&a, &c, PlyFormat::Ascii).unwrap();
        write_ply(&b, &c, PlyFormat::BinaryLittleEndian).unwrap();
        let (ca, cb) = (read_ply(&a).unwrap(), read_ply(&b).unwrap());
        prop_assert_eq!(&ca, &cb);
        for (p, q) in c.points.iter().zip(&cb.points) {
            prop_assert!((p.x - q.x).abs() < 1e-6 && (p.y - q.y).abs() < 1e-6 && (p.z - q.z).abs() < 1e-6);
        }
    }
}

#[test]
fn config_rejects_bad_input() {
    let parse = |s: &str| RunConfig::parse(s, Path::new(""), Path::new("<mem>"));
    assert!(parse("bogus = 1").is_err());
    assert!(parse("lr = 1e-3\nlr = 1e-4").is_err());
    assert!(parse("lr = 1e-3\npreset = desk").is_err());
    assert!(parse("lr = abc").is_err());
    assert!(parse("kernel_size = 4").is_err());
    let desk = parse("preset = desk # comment\n\nseed = 3").unwrap();
    assert_eq!(desk.m, 256);
    assert_eq!(desk.seed, 3);
}
