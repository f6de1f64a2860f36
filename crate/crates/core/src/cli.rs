//! Command-line surface. Diagnostics go to stderr, data to files or stdout.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::carve::checkpoint;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::gradcheck::run_suite;
use crate::io::{read_cloud, write_cloud};
use crate::metrics::{consistency, evaluate, format_sweep, read_sequence_manifest, sensitivity_sweep, Reduction};
use crate::pipeline::{complete, RangeSource};
use crate::sensor::generate_partials;
use crate::synth::ShapeFamily;
use crate::train::{load_dataset, metrics_logger, synth_dataset, synth_sample, train_toy, SynthConfig};

#[derive(Debug, Parser)]
#[command(name = "blockcarve", version, about = "Point cloud completion by carving point blocks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReductionArg {
    Random,
    Directional,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic shapes with one virtual-sensor partial each.
    GenSynth {
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated families: box, sphere, torus, l-solid, hollow-box, wedge.
        #[arg(long, value_delimiter = ',', default_value = "box,sphere,torus,l-solid,hollow-box,wedge")]
        families: Vec<ShapeFamily>,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Point counts and sensor settings come from this config.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write T virtual-sensor partials of a complete cloud.
    Augment {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        t: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train from a seeded initialization and write a checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; results do not depend on it.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Complete one partial cloud.
    Complete {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Ground truth used for the block range when the config asks for it.
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Also write the coarse cloud here.
        #[arg(long)]
        coarse: Option<PathBuf>,
    },
    /// Per-category CD report over a dataset manifest.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Weight the overall mean by sample count.
        #[arg(long)]
        weighted: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Temporal consistency of tracked completions.
    Consistency {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// CD as a function of the valid-point level, as CSV on stdout.
    Sweep {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<f64>,
        /// Dataset manifest; defaults to the config's validation shapes.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "random")]
        reduction: ReductionArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the finite-difference gradient suite.
    CheckGrads {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

/// Parses `argv` (program name first) and runs the command. Returns the
/// process exit code: 0 on success, 1 on runtime failure, 2 on usage errors.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn mkdir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn stdout_text(text: &str) -> Result<()> {
    std::io::stdout()
        .write_all(text.as_bytes())
        .map_err(|e| Error::io(Path::new("<stdout>"), e))
}

fn run(cmd: Command) -> Result<bool> {
    match cmd {
        Command::GenSynth { out, families, count, seed, config } => {
            let cfg = load_config(config.as_deref())?;
            let synth = SynthConfig { families, seed, ..cfg.synth() };
            mkdir(&out)?;
            let mut manifest = String::new();
            for i in 0..count {
                let s = synth_sample(&synth, &cfg.sensor(), i)?;
                let (p, g) = (format!("{i:05}_{}_partial.xyz", s.category), format!("{i:05}_{}_gt.xyz", s.category));
                write_cloud(&out.join(&p), &s.partial)?;
                write_cloud(&out.join(&g), &s.gt)?;
                writeln!(manifest, "{} {p} {g}", s.category).unwrap();
            }
            write_text(&out.join("manifest.txt"), &manifest)?;
            log::info!("wrote {count} samples to {}", out.display());
            Ok(true)
        }
        Command::Augment { input, t, seed, out, config } => {
            let cfg = load_config(config.as_deref())?;
            let gt = read_cloud(&input)?;
            mkdir(&out)?;
            for (i, v) in generate_partials(&gt, t, seed, &cfg.sensor())?.iter().enumerate() {
                write_cloud(&out.join(format!("view_{i:03}.xyz")), v)?;
            }
            Ok(true)
        }
        Command::Train { config, out, jobs } => {
            let cfg = load_config(Some(&config))?;
            let tc = cfg.train_config(jobs)?;
            let synth = cfg.synth();
            let train = match &cfg.train_manifest {
                Some(m) => load_dataset(m)?,
                None => synth_dataset(&synth, &tc.sensor, 0..cfg.synth_train)?,
            };
            let val = match &cfg.val_manifest {
                Some(m) => load_dataset(m)?,
                None => synth_dataset(&synth, &tc.sensor, cfg.synth_train..cfg.synth_train + cfg.synth_val)?,
            };
            let log_path = cfg.metrics_log.clone().unwrap_or_else(|| {
                let mut p = out.clone().into_os_string();
                p.push(".log");
                PathBuf::from(p)
            });
            let outcome = train_toy(&train, &val, &tc, metrics_logger(&log_path)?)?;
            checkpoint::save(&outcome.params, &out)?;
            log::info!("{} steps; checkpoint {}", outcome.steps, out.display());
            Ok(true)
        }
        Command::Complete { ckpt, input, out, config, gt, coarse } => {
            let cfg = load_config(config.as_deref())?;
            let params = checkpoint::load(&ckpt)?;
            let partial = read_cloud(&input)?;
            let gt = gt.map(|g| read_cloud(&g)).transpose()?;
            let mut opts = cfg.pipeline()?;
            if gt.is_none() && opts.range_source == RangeSource::GroundTruth {
                opts.range_source = RangeSource::Partial;
                opts.range_padding = cfg.range_padding.unwrap_or(RangeSource::Partial.default_padding());
            }
            let c = complete(&params, &partial, gt.as_ref(), &opts)?;
            write_cloud(&out, &c.dense)?;
            if let Some(p) = coarse {
                write_cloud(&p, &c.coarse)?;
            }
            Ok(true)
        }
        Command::Eval { ckpt, manifest, report, config, weighted, seed } => {
            let cfg = load_config(config.as_deref())?;
            let params = checkpoint::load(&ckpt)?;
            let data = load_dataset(&manifest)?;
            let r = evaluate(&params, &data, &cfg.pipeline()?, weighted, cfg.hash(), seed)?;
            r.save(&report)?;
            stdout_text(&r.to_text())?;
            Ok(true)
        }
        Command::Consistency { manifest } => {
            let seqs = read_sequence_manifest(&manifest)?;
            let mut text = String::from("object,frames,consistency\n");
            let mut sum = 0.0;
            for s in &seqs {
                let c = consistency(s)?;
                sum += c;
                writeln!(text, "{},{},{c}", s.object, s.frames.len()).unwrap();
            }
            if !seqs.is_empty() {
                writeln!(text, "mean,,{}", sum / seqs.len() as f64).unwrap();
            }
            stdout_text(&text)?;
            Ok(true)
        }
        Command::Sweep { ckpt, levels, manifest, config, reduction, seed } => {
            let cfg = load_config(config.as_deref())?;
            let params = checkpoint::load(&ckpt)?;
            let data = match manifest {
                Some(m) => load_dataset(&m)?,
                None => synth_dataset(&cfg.synth(), &cfg.sensor(), cfg.synth_train..cfg.synth_train + cfg.synth_val)?,
            };
            let how = match reduction {
                ReductionArg::Random => Reduction::Random,
                ReductionArg::Directional => Reduction::Directional,
            };
            let points = sensitivity_sweep(&params, &data, &levels, &cfg.pipeline()?, how, seed)?;
            stdout_text(&format_sweep(&points))?;
            Ok(true)
        }
        Command::CheckGrads { seed } => {
            let results = run_suite(seed);
            let mut text = String::new();
            for r in &results {
                writeln!(
                    text,
                    "{} {}: {} instances, worst relative error {:.3e} (tolerance {:.0e})",
                    if r.passed() { "PASS" } else { "FAIL" },
                    r.name,
                    r.instances,
                    r.worst,
                    r.tolerance
                )
                .unwrap();
            }
            stdout_text(&text)?;
            Ok(results.iter().all(|r| r.passed()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(cli_main(["blockcarve", "frobnicate"]), 2);
        assert_eq!(cli_main(["blockcarve"]), 2);
        assert_eq!(cli_main(["blockcarve", "train"]), 2);
        assert_eq!(cli_main(["blockcarve", "sweep", "--ckpt", "x", "--levels", "a"]), 2);
    }

    #[test]
    fn runtime_errors_exit_one() {
        assert_eq!(cli_main(["blockcarve", "complete", "--ckpt", "/nonexistent/c", "--in", "a", "--out", "b"]), 1);
    }
}
