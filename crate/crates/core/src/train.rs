//! Datasets and the seeded training loop.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::carve::{Architecture, CarveGrads, CarveParams};
use crate::chamfer::chamfer;
use crate::cloud::{subsample_fixed, PointCloud, SubsampleMethod};
use crate::error::{Error, Result};
use crate::io::read_cloud;
use crate::loss::LossBreakdown;
use crate::optim::{lr_schedule, optimizer_step, AdamHyper, OptimizerState};
use crate::pipeline::{complete, sample_loss, LossInputs, PipelineOptions};
use crate::sensor::{generate_partials, SensorAugConfig};
use crate::synth::{gen_shape, ShapeFamily, SyntheticShapeSpec};

/// A partial cloud with its complete counterpart.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub category: String,
    pub partial: PointCloud,
    pub gt: PointCloud,
}

/// Reads a manifest of `category partial_path gt_path` lines. Relative paths
/// are resolved against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(Error::parse(path, n + 1, format!("expected 'category partial gt', found {} fields", f.len())));
        }
        out.push((f[0].to_string(), base.join(f[1]), base.join(f[2])));
    }
    Ok(out)
}

pub fn load_dataset(manifest: &Path) -> Result<Vec<Sample>> {
    read_manifest(manifest)?
        .into_iter()
        .map(|(category, p, g)| {
            Ok(Sample {
                category,
                partial: read_cloud(&p)?,
                gt: read_cloud(&g)?,
            })
        })
        .collect()
}

/// Parameters of an in-memory synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub families: Vec<ShapeFamily>,
    pub gt_points: usize,
    pub partial_points: usize,
    pub seed: u64,
}

/// Shape `index` of a synthetic dataset: families cycle, dimensions and the
/// viewing pose are seeded by `(seed, index)`.
pub fn synth_sample(cfg: &SynthConfig, aug: &SensorAugConfig, index: usize) -> Result<Sample> {
    if cfg.families.is_empty() {
        return Err(Error::InvalidArgument("no shape families".into()));
    }
    let family = cfg.families[index % cfg.families.len()];
    let s = cfg.seed.wrapping_mul(1_000_003).wrapping_add(index as u64);
    let (gt, category) = gen_shape(&SyntheticShapeSpec::random(family, cfg.gt_points, s))?;
    let view = generate_partials(&gt, 1, s ^ 0xA5A5, aug)?.remove(0);
    let partial = subsample_fixed(&view, cfg.partial_points, SubsampleMethod::Random, s)?;
    Ok(Sample { category, partial, gt })
}

pub fn synth_dataset(cfg: &SynthConfig, aug: &SensorAugConfig, range: std::ops::Range<usize>) -> Result<Vec<Sample>> {
    range.map(|i| synth_sample(cfg, aug, i)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub arch: Architecture,
    pub pipeline: PipelineOptions,
    pub alpha: f64,
    /// Augmented views per sample for the similarity term.
    pub t: usize,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop after this many optimizer steps; 0 means no limit.
    pub max_steps: usize,
    pub adam: AdamHyper,
    pub lr_period: usize,
    pub seed: u64,
    pub detach_anchors: bool,
    pub sensor: SensorAugConfig,
    /// Worker threads per batch; results are reduced in sample order.
    pub jobs: usize,
}

impl TrainConfig {
    /// Whether augmented views are generated at all. With a zero weight
    /// they cannot affect the loss, so they are skipped.
    pub fn uses_views(&self) -> bool {
        self.t > 0 && self.alpha != 0.0
    }
}

/// One line of the metrics log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_comp: f64,
    pub train_sim: f64,
    pub train_total: f64,
    pub val_cd_coarse: f64,
    pub val_cd_dense: f64,
}

/// `printf("%.6g")`-style formatting.
pub fn fmt_g6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { format!("{v}") };
    }
    let sci = format!("{v:.5e}");
    let (mant, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    let trim = |s: String| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if !(-4..6).contains(&exp) {
        format!("{}e{}{:02}", trim(mant.to_string()), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        trim(format!("{:.*}", (5 - exp) as usize, v))
    }
}

impl EpochRecord {
    pub fn to_line(&self) -> String {
        format!(
            "{}, {}, {}, {}, {}, {}, {}",
            self.epoch,
            fmt_g6(self.lr),
            fmt_g6(self.train_comp),
            fmt_g6(self.train_sim),
            fmt_g6(self.train_total),
            fmt_g6(self.val_cd_coarse),
            fmt_g6(self.val_cd_dense)
        )
    }
}

/// Mean coarse and dense CD over a dataset.
pub fn validation_cd(params: &CarveParams, data: &[Sample], opts: &PipelineOptions) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let (mut c, mut q) = (0.0, 0.0);
    for s in data {
        let out = complete(params, &s.partial, Some(&s.gt), opts)?;
        c += chamfer(&out.coarse, &s.gt)?;
        q += chamfer(&out.dense, &s.gt)?;
    }
    Ok((c / data.len() as f64, q / data.len() as f64))
}

fn view_seed(seed: u64, step: usize, sample: usize) -> u64 {
    seed ^ (step as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (sample as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
}

fn sample_step(
    params: &CarveParams,
    cfg: &TrainConfig,
    sample: &Sample,
    seed: u64,
) -> Result<(LossBreakdown, CarveGrads)> {
    let variants = if cfg.uses_views() {
        generate_partials(&sample.gt, cfg.t, seed, &cfg.sensor)?
            .iter()
            .enumerate()
            .map(|(i, v)| subsample_fixed(v, sample.partial.len(), SubsampleMethod::Random, seed.wrapping_add(i as u64)))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let inputs = LossInputs {
        partial: &sample.partial,
        gt: &sample.gt,
        variants: &variants,
        alpha: cfg.alpha,
        detach_anchors: cfg.detach_anchors,
    };
    let (loss, grads) = sample_loss(params, inputs, &cfg.pipeline, true)?;
    Ok((loss, grads.expect("gradients requested")))
}

/// Runs `f` over `items` on up to `jobs` threads, returning results in item order.
pub fn ordered_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(usize, &T) -> R + Sync) -> Vec<R> {
    if jobs <= 1 || items.len() <= 1 {
        return items.iter().enumerate().map(|(i, x)| f(i, x)).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .enumerate()
            .map(|(c, part)| s.spawn(move || part.iter().enumerate().map(|(i, x)| f(c * chunk + i, x)).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: CarveParams,
    pub records: Vec<EpochRecord>,
    pub steps: usize,
    /// Loss breakdown of every optimizer step, averaged over its batch.
    pub step_losses: Vec<LossBreakdown>,
}

/// Trains from a seeded initialization. Each epoch's record is passed to
/// `on_epoch` as soon as it is complete.
pub fn train_toy(
    train: &[Sample],
    val: &[Sample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord) -> Result<()>,
) -> Result<TrainOutcome> {
    if train.is_empty() {
        return Err(Error::EmptyInput);
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let mut params = CarveParams::init(cfg.arch.clone(), cfg.seed)?;
    let mut state = OptimizerState::new(params.len());
    let mut records = Vec::new();
    let mut step_losses = Vec::new();
    let mut step = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();
    'epochs: for epoch in 0..cfg.epochs {
        if cfg.max_steps > 0 && step >= cfg.max_steps {
            break;
        }
        let lr = lr_schedule(epoch, cfg.adam.lr, cfg.lr_period);
        let hyper = AdamHyper { lr, ..cfg.adam };
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed ^ (epoch as u64 + 1).wrapping_mul(0x2545_F491_4F6C_DD1D)));
        let (mut comp, mut sim, mut total, mut batches) = (0.0, 0.0, 0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let results = ordered_map(batch, cfg.jobs, |_, &i| {
                sample_step(&params, cfg, &train[i], view_seed(cfg.seed, step, i))
            });
            let mut grads = CarveGrads::zeros(&params);
            let (mut bc, mut bs, mut bt, mut terms) = (0.0, 0.0, 0.0, Vec::new());
            let (mut bcc, mut bcq) = (0.0, 0.0);
            for (r, &i) in results.into_iter().zip(batch) {
                let (loss, g) = r?;
                if !loss.total.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        step,
                        detail: format!("sample {i} ({}): {loss:?}", train[i].category),
                    });
                }
                bc += loss.comp;
                bs += loss.sim;
                bt += loss.total;
                bcc += loss.cd_coarse;
                bcq += loss.cd_dense;
                terms.extend(loss.sim_terms);
                grads.add_assign(&g);
            }
            let n = batch.len() as f64;
            grads.scale(1.0 / n);
            let mut flat = params.to_flat();
            optimizer_step(&mut flat, &grads.to_flat(), &mut state, &hyper)?;
            params.assign_flat(&flat)?;
            let mut avg = LossBreakdown::new(bcc / n, bcq / n, Vec::new(), cfg.alpha);
            avg.sim = bs / n;
            avg.total = bt / n;
            avg.sim_terms = terms;
            step_losses.push(avg);
            comp += bc / n;
            sim += bs / n;
            total += bt / n;
            batches += 1;
            step += 1;
            log::debug!("epoch {epoch} step {step}: total {:.6}", bt / n);
            if cfg.max_steps > 0 && step >= cfg.max_steps {
                let rec = finish_epoch(&params, val, cfg, epoch, lr, comp, sim, total, batches)?;
                on_epoch(&rec)?;
                records.push(rec);
                break 'epochs;
            }
        }
        let rec = finish_epoch(&params, val, cfg, epoch, lr, comp, sim, total, batches)?;
        on_epoch(&rec)?;
        records.push(rec);
    }
    Ok(TrainOutcome { params, records, steps: step, step_losses })
}

#[allow(clippy::too_many_arguments)]
fn finish_epoch(
    params: &CarveParams,
    val: &[Sample],
    cfg: &TrainConfig,
    epoch: usize,
    lr: f64,
    comp: f64,
    sim: f64,
    total: f64,
    batches: usize,
) -> Result<EpochRecord> {
    let (vc, vq) = validation_cd(params, val, &cfg.pipeline)?;
    let b = batches.max(1) as f64;
    let rec = EpochRecord {
        epoch,
        lr,
        train_comp: comp / b,
        train_sim: sim / b,
        train_total: total / b,
        val_cd_coarse: vc,
        val_cd_dense: vq,
    };
    log::info!("{}", rec.to_line());
    Ok(rec)
}

/// Truncates `path` and returns a callback appending one record per call.
pub fn metrics_logger(path: &Path) -> Result<impl FnMut(&EpochRecord) -> Result<()> + '_> {
    fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(move |rec: &EpochRecord| {
        let mut f = fs::OpenOptions::new().append(true).open(path).map_err(|e| Error::io(path, e))?;
        writeln!(f, "{}", rec.to_line()).map_err(|e| Error::io(path, e))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::SampleMode;
    use crate::pipeline::BlockConstruction;

    #[test]
    fn g6_formatting() {
        assert_eq!(fmt_g6(0.0), "0");
        assert_eq!(fmt_g6(1e-4), "0.0001");
        assert_eq!(fmt_g6(5e-5), "5e-05");
        assert_eq!(fmt_g6(0.123456789), "0.123457");
        assert_eq!(fmt_g6(123456.7), "123457");
        assert_eq!(fmt_g6(1234567.0), "1.23457e+06");
        assert_eq!(fmt_g6(-2.5), "-2.5");
        assert_eq!(fmt_g6(999999.5), "1e+06");
    }

    pub(crate) fn tiny_config() -> TrainConfig {
        TrainConfig {
            arch: Architecture {
                resolution: [8; 3],
                stages: 1,
                base_width: 2,
                kernel_size: 3,
                feature_dim: 3,
                refine_widths: vec![6, 6],
            },
            pipeline: PipelineOptions {
                construction: BlockConstruction::Uniform { n_per_axis: 4, mode: SampleMode::Lattice },
                m: 16,
                ..Default::default()
            },
            alpha: 0.5,
            t: 2,
            batch_size: 2,
            epochs: 1,
            max_steps: 0,
            adam: AdamHyper { lr: 1e-3, ..Default::default() },
            lr_period: 40,
            seed: 3,
            detach_anchors: false,
            sensor: SensorAugConfig {
                visibility: crate::sensor::VisibilityConfig { resolution: 16, depth_tolerance: 0.02 },
                ..Default::default()
            },
            jobs: 1,
        }
    }

    fn tiny_data() -> Vec<Sample> {
        let synth = SynthConfig {
            families: vec![ShapeFamily::Box, ShapeFamily::Sphere],
            gt_points: 128,
            partial_points: 48,
            seed: 1,
        };
        synth_dataset(&synth, &SensorAugConfig::default(), 0..3).unwrap()
    }

    #[test]
    fn one_epoch_smoke_and_determinism() {
        let data = tiny_data();
        let cfg = tiny_config();
        let a = train_toy(&data[..2], &data[2..], &cfg, |_| Ok(())).unwrap();
        assert_eq!(a.records.len(), 1);
        assert_eq!(a.steps, 1);
        let r = a.records[0];
        assert!(r.train_total.is_finite() && r.val_cd_dense.is_finite());
        let b = train_toy(&data[..2], &data[2..], &TrainConfig { jobs: 2, ..cfg }, |_| Ok(())).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn step_cap() {
        let data = tiny_data();
        let cfg = TrainConfig { epochs: 10, max_steps: 3, batch_size: 1, t: 0, ..tiny_config() };
        let out = train_toy(&data, &data, &cfg, |_| Ok(())).unwrap();
        assert_eq!(out.steps, 3);
        assert_eq!(out.records.len(), 1);
        for l in &out.step_losses {
            assert!((l.total - l.comp).abs() < 1e-12);
        }
    }

    #[test]
    fn manifest_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.txt");
        fs::write(&m, "# c\nchair a.xyz b.xyz\n\n").unwrap();
        let rows = read_manifest(&m).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].1, dir.path().join("a.xyz"));
        fs::write(&m, "chair a.xyz\n").unwrap();
        assert!(read_manifest(&m).is_err());
    }
}
