//! Evaluation metrics, sensitivity sweeps and result reports.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::carve::CarveParams;
use crate::chamfer::chamfer;
use crate::cloud::{compute_bounds, Point3, PointCloud};
use crate::error::{Error, Result};
use crate::io::read_cloud;
use crate::pipeline::{complete, PipelineOptions};
use crate::train::Sample;

/// Chamfer distance multiplied by 1000.
pub fn cd_scaled(q: &PointCloud, g: &PointCloud) -> Result<f64> {
    Ok(chamfer(q, g)? * 1e3)
}

/// Completions of one tracked object, in frame order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedSequence {
    pub object: String,
    pub frames: Vec<PointCloud>,
}

/// Mean CD between adjacent frames.
pub fn consistency(seq: &TrackedSequence) -> Result<f64> {
    let n = seq.frames.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("sequence '{}' has {n} frame(s), need 2", seq.object)));
    }
    let mut s = 0.0;
    for w in seq.frames.windows(2) {
        s += chamfer(&w[0], &w[1])?;
    }
    Ok(s / (n - 1) as f64)
}

/// Reads `object_id frame_index path` lines into per-object sequences,
/// ordered by object id and then frame index. Paths are relative to the manifest.
pub fn read_sequence_manifest(path: &Path) -> Result<Vec<TrackedSequence>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut objects: BTreeMap<String, Vec<(u64, PathBuf, usize)>> = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(Error::parse(path, n + 1, "expected 'object_id frame_index path'"));
        }
        let frame = f[1]
            .parse::<u64>()
            .map_err(|_| Error::parse(path, n + 1, format!("bad frame index '{}'", f[1])))?;
        objects.entry(f[0].to_string()).or_default().push((frame, base.join(f[2]), n + 1));
    }
    let mut out = Vec::new();
    for (object, mut frames) in objects {
        frames.sort_by_key(|f| f.0);
        if let Some(w) = frames.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::parse(path, w[1].2, format!("duplicate frame {} for '{object}'", w[1].0)));
        }
        let clouds = frames.iter().map(|(_, p, _)| read_cloud(p)).collect::<Result<Vec<_>>>()?;
        out.push(TrackedSequence { object, frames: clouds });
    }
    Ok(out)
}

pub const OCCUPANCY_RES: usize = 64;

fn occupied_cells(cloud: &PointCloud, lo: Point3, ext: Point3) -> HashSet<usize> {
    let n = OCCUPANCY_RES;
    let bin = |v: f64, l: f64, e: f64| (((v - l) / e * n as f64).floor().max(0.0) as usize).min(n - 1);
    cloud
        .points
        .iter()
        .map(|p| (bin(p.x, lo.x, ext.x) * n + bin(p.y, lo.y, ext.y)) * n + bin(p.z, lo.z, ext.z))
        .collect()
}

/// Fraction of the ground truth's occupied cells, in a 64^3 grid over its
/// tight bounds, that also hold a partial point.
pub fn valid_point_percentage(partial: &PointCloud, gt: &PointCloud) -> Result<f64> {
    if gt.is_empty() {
        return Err(Error::EmptyInput);
    }
    let range = compute_bounds(gt, 0.0, crate::cloud::default_min_extent(gt).max(1e-12))?;
    let (lo, ext) = (range.min(), range.extent());
    let g = occupied_cells(gt, lo, ext);
    let p = occupied_cells(partial, lo, ext);
    Ok(p.intersection(&g).count() as f64 / g.len() as f64)
}

/// How points are removed to reach a sweep level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    /// Uniformly random removal.
    Random,
    /// Removal in order of a random direction, like a sensor losing a side.
    Directional,
}

pub const SWEEP_TOLERANCE: f64 = 0.02;

/// Removal order for a partial cloud: keeping a prefix of the returned
/// indices yields the reduced input.
fn removal_order(partial: &PointCloud, how: Reduction, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..partial.len()).collect();
    match how {
        Reduction::Random => idx.shuffle(&mut rng),
        Reduction::Directional => {
            let d = crate::sensor::random_sensor(seed, 1.0, 1.0).position;
            let key = |i: &usize| partial.points[*i].dot(d);
            idx.sort_by(|a, b| key(b).total_cmp(&key(a)).then(a.cmp(b)));
        }
    }
    idx
}

/// Shrinks `partial` until its valid-point percentage relative to the
/// original is within [`SWEEP_TOLERANCE`] of `level`. Returns `None` when no
/// prefix of the removal order gets close enough.
pub fn reduce_to_level(partial: &PointCloud, gt: &PointCloud, level: f64, how: Reduction, seed: u64) -> Result<Option<PointCloud>> {
    let base = valid_point_percentage(partial, gt)?;
    if base == 0.0 {
        return Ok(None);
    }
    let order = removal_order(partial, how, seed);
    let rel = |k: usize| -> Result<f64> {
        let mut idx = order[..k].to_vec();
        idx.sort_unstable();
        Ok(valid_point_percentage(&partial.select(&idx), gt)? / base)
    };
    // Relative percentage is non-decreasing in the prefix length.
    let (mut lo, mut hi) = (1usize, partial.len());
    while lo < hi {
        let mid = (lo + hi) / 2;
        if rel(mid)? >= level {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let mut best: Option<(f64, usize)> = None;
    for k in [lo.saturating_sub(1).max(1), lo] {
        let err = (rel(k)? - level).abs();
        if err <= SWEEP_TOLERANCE && best.is_none_or(|b| err < b.0) {
            best = Some((err, k));
        }
    }
    Ok(best.map(|(_, k)| {
        let mut idx = order[..k].to_vec();
        idx.sort_unstable();
        partial.select(&idx)
    }))
}

/// One point of a sensitivity curve; `mean_cd` is `None` when no sample
/// could be reduced to the level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub level: f64,
    pub mean_cd: Option<f64>,
    pub samples: usize,
}

/// Mean CD x 1000 of completions at each valid-point level, in ascending
/// level order. Levels are relative to each partial's own percentage.
pub fn sensitivity_sweep(
    params: &CarveParams,
    data: &[Sample],
    levels: &[f64],
    opts: &PipelineOptions,
    how: Reduction,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    if let Some(l) = levels.iter().find(|l| !(**l > 0.0 && **l <= 1.0)) {
        return Err(Error::InvalidArgument(format!("sweep level {l} outside (0, 1]")));
    }
    let mut sorted = levels.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut out = Vec::new();
    for level in sorted {
        let (mut sum, mut n) = (0.0, 0usize);
        for (i, s) in data.iter().enumerate() {
            let reduced = if level == 1.0 {
                Some(s.partial.clone())
            } else {
                reduce_to_level(&s.partial, &s.gt, level, how, seed.wrapping_add(i as u64))?
            };
            if let Some(p) = reduced {
                let q = complete(params, &p, Some(&s.gt), opts)?;
                sum += cd_scaled(&q.dense, &s.gt)?;
                n += 1;
            }
        }
        out.push(SweepPoint { level, mean_cd: (n > 0).then(|| sum / n as f64), samples: n });
    }
    Ok(out)
}

/// Comma-separated `level,mean_cd,samples` rows; missing points leave `mean_cd` empty.
pub fn format_sweep(points: &[SweepPoint]) -> String {
    let mut s = String::from("level,mean_cd,samples\n");
    for p in points {
        let cd = p.mean_cd.map(|v| v.to_string()).unwrap_or_default();
        s.push_str(&format!("{},{},{}\n", p.level, cd, p.samples));
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryResult {
    pub name: String,
    pub samples: usize,
    /// Mean CD x 1000.
    pub mean_cd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Sorted by name.
    pub categories: Vec<CategoryResult>,
    pub overall: f64,
    /// Overall is the sample-weighted mean instead of the mean of category means.
    pub weighted: bool,
    pub config_hash: String,
    pub seed: u64,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

/// 64-bit FNV-1a, hex encoded.
pub fn fnv1a_hex(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// `SOURCE_DATE_EPOCH` when set, otherwise the current time.
pub fn report_timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0))
}

impl EvalReport {
    /// Aggregates per-sample `(category, CD x 1000)` values.
    pub fn from_scores(scores: &[(String, f64)], weighted: bool, config_hash: String, seed: u64, timestamp: u64) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut by: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
        for (c, v) in scores {
            let e = by.entry(c).or_default();
            e.0 += v;
            e.1 += 1;
        }
        let categories: Vec<CategoryResult> = by
            .into_iter()
            .map(|(name, (s, n))| CategoryResult { name: name.to_string(), samples: n, mean_cd: s / n as f64 })
            .collect();
        let mut r = Self { categories, overall: 0.0, weighted, config_hash, seed, timestamp };
        r.overall = r.recompute_overall();
        Ok(r)
    }

    pub fn recompute_overall(&self) -> f64 {
        if self.weighted {
            let n: usize = self.categories.iter().map(|c| c.samples).sum();
            self.categories.iter().map(|c| c.mean_cd * c.samples as f64).sum::<f64>() / n as f64
        } else {
            self.categories.iter().map(|c| c.mean_cd).sum::<f64>() / self.categories.len() as f64
        }
    }

    /// Text form, one `key: value` per line; see the format docs.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("format: blockcarve-eval-report 1\n");
        s.push_str(&format!("config_hash: {}\n", self.config_hash));
        s.push_str(&format!("seed: {}\n", self.seed));
        s.push_str(&format!("timestamp: {}\n", self.timestamp));
        s.push_str(&format!("weighted: {}\n", self.weighted));
        s.push_str(&format!("categories: {}\n", self.categories.len()));
        for c in &self.categories {
            s.push_str(&format!("category.{}.samples: {}\n", c.name, c.samples));
            s.push_str(&format!("category.{}.mean_cd_x1000: {:?}\n", c.name, c.mean_cd));
        }
        s.push_str(&format!("overall_cd_x1000: {:?}\n", self.overall));
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut kv: BTreeMap<String, (String, usize)> = BTreeMap::new();
        let mut order = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once(": ")
                .ok_or_else(|| Error::parse(path, n + 1, "expected 'key: value'"))?;
            if kv.insert(k.to_string(), (v.to_string(), n + 1)).is_some() {
                return Err(Error::parse(path, n + 1, format!("duplicate key '{k}'")));
            }
            order.push(k.to_string());
        }
        let get = |k: &str| kv.get(k).map(|(v, _)| v.as_str()).ok_or_else(|| Error::parse(path, 0, format!("missing key '{k}'")));
        let num = |k: &str| -> Result<f64> {
            let v = get(k)?;
            v.parse().map_err(|_| Error::parse(path, kv[k].1, format!("bad number '{v}'")))
        };
        let int = |k: &str| -> Result<u64> {
            let v = get(k)?;
            v.parse().map_err(|_| Error::parse(path, kv[k].1, format!("bad integer '{v}'")))
        };
        if get("format")? != "blockcarve-eval-report 1" {
            return Err(Error::parse(path, 1, "unknown report format"));
        }
        let mut categories = Vec::new();
        for k in &order {
            if let Some(name) = k.strip_prefix("category.").and_then(|r| r.strip_suffix(".samples")) {
                categories.push(CategoryResult {
                    name: name.to_string(),
                    samples: int(k)? as usize,
                    mean_cd: num(&format!("category.{name}.mean_cd_x1000"))?,
                });
            }
        }
        if categories.len() as u64 != int("categories")? {
            return Err(Error::parse(path, 0, "category count does not match"));
        }
        let weighted = match get("weighted")? {
            "true" => true,
            "false" => false,
            v => return Err(Error::parse(path, kv["weighted"].1, format!("bad boolean '{v}'"))),
        };
        Ok(Self {
            categories,
            overall: num("overall_cd_x1000")?,
            weighted,
            config_hash: get("config_hash")?.to_string(),
            seed: int("seed")?,
            timestamp: int("timestamp")?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

/// Per-sample CD x 1000 of the dense completion.
pub fn evaluate_scores(params: &CarveParams, data: &[Sample], opts: &PipelineOptions) -> Result<Vec<(String, f64)>> {
    data.iter()
        .map(|s| {
            let q = complete(params, &s.partial, Some(&s.gt), opts)?;
            Ok((s.category.clone(), cd_scaled(&q.dense, &s.gt)?))
        })
        .collect()
}

pub fn evaluate(
    params: &CarveParams,
    data: &[Sample],
    opts: &PipelineOptions,
    weighted: bool,
    config_hash: String,
    seed: u64,
) -> Result<EvalReport> {
    let scores = evaluate_scores(params, data, opts)?;
    EvalReport::from_scores(&scores, weighted, config_hash, seed, report_timestamp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn single(x: f64) -> PointCloud {
        PointCloud::new(vec![Point3::new(x, 0.0, 0.0)])
    }

    #[test]
    fn scaled_cd() {
        assert_eq!(cd_scaled(&single(0.0), &single(1.0)).unwrap(), 2000.0);
        assert_eq!(cd_scaled(&single(0.3), &single(0.3)).unwrap(), 0.0);
    }

    #[test]
    fn consistency_cases() {
        let seq = |xs: &[f64]| TrackedSequence { object: "car".into(), frames: xs.iter().map(|&x| single(x)).collect() };
        assert_eq!(consistency(&seq(&[0.5, 0.5, 0.5])).unwrap(), 0.0);
        assert_eq!(consistency(&seq(&[0.0, 1.0])).unwrap(), 2.0);
        // Pair CDs 2*0.1^2 and 2*0.3^2.
        let c = consistency(&seq(&[0.0, 0.1, 0.4])).unwrap();
        assert!((c - (0.02 + 0.18) / 2.0).abs() < 1e-12);
        assert_eq!(consistency(&seq(&[0.0, 0.1, 0.4])).unwrap(), consistency(&seq(&[0.4, 0.1, 0.0])).unwrap());
        assert!(consistency(&seq(&[0.0])).is_err());
    }

    fn random_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointCloud::new((0..n).map(|_| Point3::new(rng.gen(), rng.gen(), rng.gen())).collect())
    }

    #[test]
    fn valid_points() {
        let g = random_cloud(3000, 1);
        assert_eq!(valid_point_percentage(&g, &g).unwrap(), 1.0);
        assert!(valid_point_percentage(&g, &PointCloud::default()).is_err());
        // Two well-separated clusters: keeping one of them keeps half the cells.
        let mut pts = Vec::new();
        for i in 0..10 {
            pts.push(Point3::new(0.0, i as f64 / 9.0, 0.0));
            pts.push(Point3::new(1.0, i as f64 / 9.0, 0.0));
        }
        let gt = PointCloud::new(pts);
        let half = PointCloud::new(gt.points.iter().copied().filter(|p| p.x == 0.0).collect());
        assert_eq!(valid_point_percentage(&half, &gt).unwrap(), 0.5);
        assert_eq!(valid_point_percentage(&PointCloud::default(), &gt).unwrap(), 0.0);
    }

    #[test]
    fn reduce_hits_level() {
        let g = random_cloud(4000, 2);
        let p = PointCloud::new(g.points[..2000].to_vec());
        let base = valid_point_percentage(&p, &g).unwrap();
        for how in [Reduction::Random, Reduction::Directional] {
            let r = reduce_to_level(&p, &g, 0.5, how, 7).unwrap().unwrap();
            let rel = valid_point_percentage(&r, &g).unwrap() / base;
            assert!((rel - 0.5).abs() <= SWEEP_TOLERANCE, "{rel}");
            assert!(r.points.iter().all(|q| p.points.contains(q)));
        }
    }

    #[test]
    fn report_round_trip_and_overall() {
        let scores = vec![("b".to_string(), 1.0), ("a".to_string(), 2.0), ("a".to_string(), 4.0)];
        let r = EvalReport::from_scores(&scores, false, fnv1a_hex(b"cfg"), 7, 12).unwrap();
        assert_eq!(r.categories[0].name, "a");
        assert_eq!(r.overall, (3.0 + 1.0) / 2.0);
        let w = EvalReport::from_scores(&scores, true, "x".into(), 7, 12).unwrap();
        assert!((w.overall - 7.0 / 3.0).abs() < 1e-12);
        let back = EvalReport::parse(&r.to_text(), Path::new("r.txt")).unwrap();
        assert_eq!(back, r);
        assert!((back.recompute_overall() - back.overall).abs() < 1e-12);
        let one = EvalReport::from_scores(&scores[..1], false, "x".into(), 0, 0).unwrap();
        assert_eq!(one.overall, one.categories[0].mean_cd);
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a_hex(b""), "cbf29ce484222325");
        assert_eq!(fnv1a_hex(b"a"), "af63dc4c8601ec8c");
    }
}
