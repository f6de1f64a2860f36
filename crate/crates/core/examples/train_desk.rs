//! Short desk-scale training run that writes a checkpoint and its metrics log.
//!
//! `cargo run --release --example train_desk -- [steps] [out.ckpt]`

use std::path::PathBuf;

use blockcarve::carve::{checkpoint, CarveParams};
use blockcarve::config::RunConfig;
use blockcarve::train::{metrics_logger, synth_dataset, train_toy, validation_cd};

fn main() -> blockcarve::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(60);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "desk.ckpt".into()));
    let mut cfg = RunConfig::desk();
    cfg.max_steps = steps;
    cfg.synth_train = 60;
    cfg.synth_val = 10;
    let tc = cfg.train_config(1)?;
    let train = synth_dataset(&cfg.synth(), &tc.sensor, 0..cfg.synth_train)?;
    let val = synth_dataset(&cfg.synth(), &tc.sensor, cfg.synth_train..cfg.synth_train + cfg.synth_val)?;
    let (c0, q0) = validation_cd(&CarveParams::init(tc.arch.clone(), tc.seed)?, &val, &tc.pipeline)?;
    println!("untrained: coarse {c0:.5} dense {q0:.5}");
    let mut log_path = out.clone().into_os_string();
    log_path.push(".log");
    let mut log = metrics_logger(log_path.as_ref())?;
    let outcome = train_toy(&train, &val, &tc, |r| {
        println!("epoch {:2}  train {:.5}  val coarse {:.5}  dense {:.5}", r.epoch, r.train_total, r.val_cd_coarse, r.val_cd_dense);
        log(r)
    })?;
    checkpoint::save(&outcome.params, &out)?;
    println!("{} steps, checkpoint {}", outcome.steps, out.display());
    Ok(())
}
