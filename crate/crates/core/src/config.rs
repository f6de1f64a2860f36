//! Run configuration: a flat `key = value` text format with named presets.
//!
//! A file may start with `preset = default|desk|paper`; later keys override
//! the preset. Unknown keys, duplicate keys and invalid values are errors.
//! Relative paths are resolved against the file's directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::carve::Architecture;
use crate::cloud::SampleMode;
use crate::error::{Error, Result};
use crate::optim::AdamHyper;
use crate::pipeline::{BlockConstruction, PipelineOptions, RangeSource};
use crate::sensor::{SensorAugConfig, VisibilityConfig};
use crate::synth::ShapeFamily;
use crate::train::{SynthConfig, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    // Network.
    pub grid: [usize; 3],
    pub stages: usize,
    pub base_width: usize,
    pub kernel_size: usize,
    pub feature_dim: usize,
    pub refine_widths: Vec<usize>,
    // Block and engraving.
    pub construction: String,
    pub n_per_axis: usize,
    pub block_mode: SampleMode,
    pub symmetric_axis: usize,
    pub gt_block_count: usize,
    pub m: usize,
    pub theta: f64,
    pub range_source: RangeSource,
    /// `None` means the source's default padding.
    pub range_padding: Option<f64>,
    // Objective and optimizer.
    pub alpha: f64,
    pub t: usize,
    pub detach_anchors: bool,
    pub batch_size: usize,
    pub epochs: usize,
    pub max_steps: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr_period: usize,
    pub seed: u64,
    // Virtual sensor.
    pub sensor_vfov_deg: f64,
    pub sensor_hfov_deg: f64,
    pub depth_resolution: usize,
    pub depth_tolerance: f64,
    pub min_visible_fraction: f64,
    // Data.
    pub train_manifest: Option<PathBuf>,
    pub val_manifest: Option<PathBuf>,
    pub synth_families: Vec<ShapeFamily>,
    pub synth_train: usize,
    pub synth_val: usize,
    pub synth_gt_points: usize,
    pub synth_partial_points: usize,
    pub synth_seed: u64,
    pub metrics_log: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: [32; 3],
            stages: 3,
            base_width: 8,
            kernel_size: 3,
            feature_dim: 32,
            refine_widths: vec![256, 128, 64, 24],
            construction: "uniform".into(),
            n_per_axis: 16,
            block_mode: SampleMode::Lattice,
            symmetric_axis: 0,
            gt_block_count: 2048,
            m: 2048,
            theta: 0.0,
            range_source: RangeSource::GroundTruth,
            range_padding: None,
            alpha: 0.5,
            t: 2,
            detach_anchors: false,
            batch_size: 4,
            epochs: 100,
            max_steps: 0,
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr_period: 40,
            seed: 0,
            sensor_vfov_deg: crate::sensor::DEFAULT_FOV_DEG,
            sensor_hfov_deg: crate::sensor::DEFAULT_FOV_DEG,
            depth_resolution: 160,
            depth_tolerance: 0.01,
            min_visible_fraction: 0.05,
            train_manifest: None,
            val_manifest: None,
            synth_families: ShapeFamily::ALL.to_vec(),
            synth_train: 180,
            synth_val: 20,
            synth_gt_points: 16384,
            synth_partial_points: 2048,
            synth_seed: 0,
            metrics_log: None,
        }
    }
}

fn cfg_err(m: impl Into<String>) -> Error {
    Error::Config(m.into())
}

fn parse_list<T>(v: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    v.split(',').map(|s| f(s.trim())).collect()
}

fn usize_of(v: &str) -> Result<usize> {
    v.parse().map_err(|_| cfg_err(format!("'{v}' is not a non-negative integer")))
}

fn f64_of(v: &str) -> Result<f64> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| cfg_err(format!("'{v}' is not a finite number")))
}

fn bool_of(v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(cfg_err(format!("'{v}' is not true or false"))),
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn opt_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "none".into())
}

impl RunConfig {
    /// Small network and clouds for single-CPU training.
    pub fn desk() -> Self {
        Self {
            refine_widths: vec![256, 128, 64, 12],
            n_per_axis: 24,
            m: 256,
            t: 1,
            lr: 1e-3,
            eps: 1e-4,
            lr_period: 4,
            depth_resolution: 16,
            synth_gt_points: 1024,
            synth_partial_points: 256,
            ..Self::default()
        }
    }

    /// 64^3 grid with the large refinement stack.
    pub fn paper() -> Self {
        let a = Architecture::paper();
        Self {
            grid: a.resolution,
            stages: a.stages,
            base_width: a.base_width,
            refine_widths: a.refine_widths,
            ..Self::default()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "default" => Ok(Self::default()),
            "desk" => Ok(Self::desk()),
            "paper" => Ok(Self::paper()),
            _ => Err(cfg_err(format!("unknown preset '{name}'"))),
        }
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, v: &str, base: &Path) -> Result<()> {
        let path = |v: &str| -> Option<PathBuf> { (v != "none").then(|| base.join(v)) };
        match key {
            "grid" => {
                let d = parse_list(v, usize_of)?;
                self.grid = match d.as_slice() {
                    [n] => [*n; 3],
                    [a, b, c] => [*a, *b, *c],
                    _ => return Err(cfg_err("grid takes one or three sizes")),
                };
            }
            "stages" => self.stages = usize_of(v)?,
            "base_width" => self.base_width = usize_of(v)?,
            "kernel_size" => self.kernel_size = usize_of(v)?,
            "feature_dim" => self.feature_dim = usize_of(v)?,
            "refine_widths" => self.refine_widths = parse_list(v, usize_of)?,
            "construction" => self.construction = v.to_string(),
            "n_per_axis" => self.n_per_axis = usize_of(v)?,
            "block_mode" => {
                self.block_mode = match v {
                    "lattice" => SampleMode::Lattice,
                    "random" => SampleMode::Random,
                    _ => return Err(cfg_err(format!("block_mode '{v}' is not lattice or random"))),
                }
            }
            "symmetric_axis" => self.symmetric_axis = usize_of(v)?,
            "gt_block_count" => self.gt_block_count = usize_of(v)?,
            "m" => self.m = usize_of(v)?,
            "theta" => self.theta = f64_of(v)?,
            "range_source" => self.range_source = v.parse().map_err(|e: Error| cfg_err(e.to_string()))?,
            "range_padding" => self.range_padding = if v == "auto" { None } else { Some(f64_of(v)?) },
            "alpha" => self.alpha = f64_of(v)?,
            "t" => self.t = usize_of(v)?,
            "detach_anchors" => self.detach_anchors = bool_of(v)?,
            "batch_size" => self.batch_size = usize_of(v)?,
            "epochs" => self.epochs = usize_of(v)?,
            "max_steps" => self.max_steps = usize_of(v)?,
            "lr" => self.lr = f64_of(v)?,
            "beta1" => self.beta1 = f64_of(v)?,
            "beta2" => self.beta2 = f64_of(v)?,
            "eps" => self.eps = f64_of(v)?,
            "lr_period" => self.lr_period = usize_of(v)?,
            "seed" => self.seed = v.parse().map_err(|_| cfg_err(format!("bad seed '{v}'")))?,
            "sensor_vfov_deg" => self.sensor_vfov_deg = f64_of(v)?,
            "sensor_hfov_deg" => self.sensor_hfov_deg = f64_of(v)?,
            "depth_resolution" => self.depth_resolution = usize_of(v)?,
            "depth_tolerance" => self.depth_tolerance = f64_of(v)?,
            "min_visible_fraction" => self.min_visible_fraction = f64_of(v)?,
            "train_manifest" => self.train_manifest = path(v),
            "val_manifest" => self.val_manifest = path(v),
            "synth_families" => self.synth_families = parse_list(v, |s| s.parse())?,
            "synth_train" => self.synth_train = usize_of(v)?,
            "synth_val" => self.synth_val = usize_of(v)?,
            "synth_gt_points" => self.synth_gt_points = usize_of(v)?,
            "synth_partial_points" => self.synth_partial_points = usize_of(v)?,
            "synth_seed" => self.synth_seed = v.parse().map_err(|_| cfg_err(format!("bad seed '{v}'")))?,
            "metrics_log" => self.metrics_log = path(v),
            _ => return Err(cfg_err(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Parses config text; `base` anchors relative paths.
    pub fn parse(text: &str, base: &Path, origin: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, n + 1, "expected 'key = value'"))?;
            let (k, v) = (k.trim(), v.trim());
            if !seen.insert(k.to_string()) {
                return Err(Error::parse(origin, n + 1, format!("duplicate key '{k}'")));
            }
            if k == "preset" {
                if seen.len() != 1 {
                    return Err(Error::parse(origin, n + 1, "preset must be the first key"));
                }
                cfg = Self::preset(v).map_err(|e| Error::parse(origin, n + 1, e.to_string()))?;
                continue;
            }
            cfg.set(k, v, base).map_err(|e| Error::parse(origin, n + 1, e.to_string()))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new("")), path)
    }

    /// Every key, in a fixed order, so that loading the output reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("grid", join(&self.grid));
        kv("stages", self.stages.to_string());
        kv("base_width", self.base_width.to_string());
        kv("kernel_size", self.kernel_size.to_string());
        kv("feature_dim", self.feature_dim.to_string());
        kv("refine_widths", join(&self.refine_widths));
        kv("construction", self.construction.clone());
        kv("n_per_axis", self.n_per_axis.to_string());
        kv("block_mode", match self.block_mode {
            SampleMode::Lattice => "lattice".into(),
            SampleMode::Random => "random".into(),
        });
        kv("symmetric_axis", self.symmetric_axis.to_string());
        kv("gt_block_count", self.gt_block_count.to_string());
        kv("m", self.m.to_string());
        kv("theta", format!("{:?}", self.theta));
        kv("range_source", self.range_source.to_string());
        kv("range_padding", self.range_padding.map(|p| format!("{p:?}")).unwrap_or_else(|| "auto".into()));
        kv("alpha", format!("{:?}", self.alpha));
        kv("t", self.t.to_string());
        kv("detach_anchors", self.detach_anchors.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("epochs", self.epochs.to_string());
        kv("max_steps", self.max_steps.to_string());
        kv("lr", format!("{:?}", self.lr));
        kv("beta1", format!("{:?}", self.beta1));
        kv("beta2", format!("{:?}", self.beta2));
        kv("eps", format!("{:?}", self.eps));
        kv("lr_period", self.lr_period.to_string());
        kv("seed", self.seed.to_string());
        kv("sensor_vfov_deg", format!("{:?}", self.sensor_vfov_deg));
        kv("sensor_hfov_deg", format!("{:?}", self.sensor_hfov_deg));
        kv("depth_resolution", self.depth_resolution.to_string());
        kv("depth_tolerance", format!("{:?}", self.depth_tolerance));
        kv("min_visible_fraction", format!("{:?}", self.min_visible_fraction));
        kv("train_manifest", opt_path(&self.train_manifest));
        kv("val_manifest", opt_path(&self.val_manifest));
        kv("synth_families", join(&self.synth_families));
        kv("synth_train", self.synth_train.to_string());
        kv("synth_val", self.synth_val.to_string());
        kv("synth_gt_points", self.synth_gt_points.to_string());
        kv("synth_partial_points", self.synth_partial_points.to_string());
        kv("synth_seed", self.synth_seed.to_string());
        kv("metrics_log", opt_path(&self.metrics_log));
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// 16 hex digits identifying the configuration.
    pub fn hash(&self) -> String {
        crate::metrics::fnv1a_hex(self.to_text().as_bytes())
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            resolution: self.grid,
            stages: self.stages,
            base_width: self.base_width,
            kernel_size: self.kernel_size,
            feature_dim: self.feature_dim,
            refine_widths: self.refine_widths.clone(),
        }
    }

    pub fn block_construction(&self) -> Result<BlockConstruction> {
        Ok(match self.construction.as_str() {
            "none" => BlockConstruction::None,
            "symmetric" => BlockConstruction::Symmetric { axis: self.symmetric_axis },
            "uniform" => BlockConstruction::Uniform { n_per_axis: self.n_per_axis, mode: self.block_mode },
            "ground-truth" => BlockConstruction::GroundTruth { count: self.gt_block_count },
            c => return Err(cfg_err(format!("construction '{c}' is not none, symmetric, uniform or ground-truth"))),
        })
    }

    pub fn pipeline(&self) -> Result<PipelineOptions> {
        Ok(PipelineOptions {
            construction: self.block_construction()?,
            m: self.m,
            theta: self.theta,
            range_source: self.range_source,
            range_padding: self.range_padding.unwrap_or(self.range_source.default_padding()),
            block_seed: self.seed,
        })
    }

    pub fn sensor(&self) -> SensorAugConfig {
        SensorAugConfig {
            vfov: self.sensor_vfov_deg.to_radians(),
            hfov: self.sensor_hfov_deg.to_radians(),
            visibility: VisibilityConfig {
                resolution: self.depth_resolution,
                depth_tolerance: self.depth_tolerance,
            },
            min_visible_fraction: self.min_visible_fraction,
            max_attempts: 16,
        }
    }

    pub fn synth(&self) -> SynthConfig {
        SynthConfig {
            families: self.synth_families.clone(),
            gt_points: self.synth_gt_points,
            partial_points: self.synth_partial_points,
            seed: self.synth_seed,
        }
    }

    pub fn train_config(&self, jobs: usize) -> Result<TrainConfig> {
        Ok(TrainConfig {
            arch: self.architecture(),
            pipeline: self.pipeline()?,
            alpha: self.alpha,
            t: self.t,
            batch_size: self.batch_size,
            epochs: self.epochs,
            max_steps: self.max_steps,
            adam: AdamHyper { lr: self.lr, beta1: self.beta1, beta2: self.beta2, eps: self.eps },
            lr_period: self.lr_period,
            seed: self.seed,
            detach_anchors: self.detach_anchors,
            sensor: self.sensor(),
            jobs: jobs.max(1),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.architecture().validate().map_err(|e| cfg_err(e.to_string()))?;
        self.block_construction()?;
        self.sensor().visibility.validate().map_err(|e| cfg_err(e.to_string()))?;
        let checks: [(bool, &str); 18] = [
            (self.m >= 1, "m must be at least 1"),
            (self.n_per_axis >= 2, "n_per_axis must be at least 2"),
            (self.symmetric_axis <= 2, "symmetric_axis must be 0, 1 or 2"),
            (self.gt_block_count >= 1, "gt_block_count must be at least 1"),
            (self.range_padding.is_none_or(|p| p >= 0.0), "range_padding must be non-negative"),
            (self.alpha >= 0.0, "alpha must be non-negative"),
            (self.batch_size >= 1, "batch_size must be at least 1"),
            (self.lr > 0.0, "lr must be positive"),
            ((0.0..1.0).contains(&self.beta1), "beta1 must be in [0, 1)"),
            ((0.0..1.0).contains(&self.beta2), "beta2 must be in [0, 1)"),
            (self.eps > 0.0, "eps must be positive"),
            (self.lr_period >= 1, "lr_period must be at least 1"),
            (self.sensor_vfov_deg > 0.0 && self.sensor_vfov_deg < 180.0, "sensor_vfov_deg must be in (0, 180)"),
            (self.sensor_hfov_deg > 0.0 && self.sensor_hfov_deg < 180.0, "sensor_hfov_deg must be in (0, 180)"),
            ((0.0..=1.0).contains(&self.min_visible_fraction), "min_visible_fraction must be in [0, 1]"),
            (!self.synth_families.is_empty(), "synth_families is empty"),
            (self.synth_gt_points >= 64, "synth_gt_points must be at least 64"),
            (self.synth_partial_points >= 1, "synth_partial_points must be at least 1"),
        ];
        match checks.iter().find(|c| !c.0) {
            Some((_, msg)) => Err(cfg_err(*msg)),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["default", "desk", "paper"] {
            let mut c = RunConfig::preset(name).unwrap();
            c.validate().unwrap();
            c.metrics_log = Some(dir.path().join("m.log"));
            let p = dir.path().join(format!("{name}.cfg"));
            c.save(&p).unwrap();
            let back = RunConfig::load(&p).unwrap();
            assert_eq!(back, c);
            back.save(&p).unwrap();
            assert_eq!(RunConfig::load(&p).unwrap(), c);
        }
    }

    #[test]
    fn preset_then_overrides() {
        let c = RunConfig::parse("preset = desk\nm = 128 # fewer\n\nalpha=0\n", Path::new("/base"), Path::new("x.cfg")).unwrap();
        assert_eq!(c.m, 128);
        assert_eq!(c.alpha, 0.0);
        assert_eq!(c.refine_widths, vec![256, 128, 64, 12]);
        let p = RunConfig::parse("metrics_log = out/m.log\n", Path::new("/base"), Path::new("x.cfg")).unwrap();
        assert_eq!(p.metrics_log, Some(PathBuf::from("/base/out/m.log")));
    }

    #[test]
    fn rejects_bad_input() {
        let bad = |t: &str| RunConfig::parse(t, Path::new(""), Path::new("x.cfg")).unwrap_err();
        for t in [
            "bogus = 1",
            "m = -1",
            "m = 1\nm = 2",
            "alpha = x",
            "m = 4\npreset = desk",
            "grid = 30",
            "construction = carve",
            "depth_resolution = 8",
            "refine_widths = 8,7",
            "just text",
        ] {
            let e = bad(t);
            assert!(matches!(e, Error::Parse { .. } | Error::Config(_)), "{t}: {e}");
        }
    }

    #[test]
    fn full_scale_preset_values() {
        let p = RunConfig::paper();
        assert_eq!(p.grid, [64; 3]);
        assert_eq!(p.refine_widths, vec![1792, 2448, 112, 24]);
        assert_eq!((p.alpha, p.t, p.lr, p.lr_period), (0.5, 2, 1e-4, 40));
    }
}
