//! Point cloud refinement: per-point offsets predicted from sampled grid
//! features and coordinates expand the coarse cloud into the dense one.

use rand::Rng;

use crate::cloud::{Point3, PointCloud};
use crate::error::{Error, Result};
use crate::grid::{feature_sample, feature_sample_grad, feature_sample_position_grad, FeatureGrid, GridGradient};
use crate::nn::{leaky, Dense, LEAKY_SLOPE};

/// Weights of the fully connected offset head.
#[derive(Debug, Clone, PartialEq)]
pub struct RefineHeadParams {
    pub input_dim: usize,
    pub widths: Vec<usize>,
    pub values: Vec<f64>,
}

impl RefineHeadParams {
    pub fn zeros(input_dim: usize, widths: &[usize]) -> Result<Self> {
        let last = *widths
            .last()
            .ok_or_else(|| Error::InvalidArgument("refine head needs at least one layer".into()))?;
        if last == 0 || last % 3 != 0 || widths.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "refine widths {widths:?}: final width must be a positive multiple of 3"
            )));
        }
        let mut p = Self {
            input_dim,
            widths: widths.to_vec(),
            values: Vec::new(),
        };
        p.values = vec![0.0; p.layers().iter().map(Dense::param_len).sum()];
        Ok(p)
    }

    /// Hidden layers get fan-in scaled uniform weights; the output layer starts at zero.
    pub fn init(&mut self, rng: &mut impl Rng) {
        let layers = self.layers();
        let mut off = 0;
        for (l, layer) in layers.iter().enumerate() {
            let span = off..off + layer.param_len();
            let gain = if l + 1 == layers.len() { 0.0 } else { 1.0 };
            layer.init(&mut self.values[span], gain, rng);
            off += layer.param_len();
        }
    }

    pub fn layers(&self) -> Vec<Dense> {
        let mut input = self.input_dim;
        self.widths
            .iter()
            .map(|&w| {
                let d = Dense { input, output: w };
                input = w;
                d
            })
            .collect()
    }

    /// Number of dense points emitted per coarse point.
    pub fn expansion(&self) -> usize {
        self.widths.last().copied().unwrap_or(0) / 3
    }

    fn check(&self, features: &FeatureGrid) -> Result<()> {
        if features.channels + 3 != self.input_dim {
            return Err(Error::ShapeMismatch(format!(
                "refine head expects {} inputs, got {} features + 3 coordinates",
                self.input_dim, features.channels
            )));
        }
        Ok(())
    }
}

/// Per-point activations of the offset head (input first, raw output last).
fn run_head(params: &RefineHeadParams, layers: &[Dense], input: Vec<f64>) -> Vec<Vec<f64>> {
    let mut acts = vec![input];
    let mut off = 0;
    for (l, layer) in layers.iter().enumerate() {
        let mut out = vec![0.0; layer.output];
        layer.forward(&params.values[off..off + layer.param_len()], acts.last().unwrap(), &mut out);
        if l + 1 < layers.len() {
            out.iter_mut().for_each(|x| *x = leaky(*x));
        }
        off += layer.param_len();
        acts.push(out);
    }
    acts
}

fn head_input(sampled: &PointCloud, i: usize) -> Vec<f64> {
    let f = sampled.features.as_ref().expect("sampled features");
    let mut x = f.row(i).to_vec();
    x.extend_from_slice(&sampled.points[i].to_array());
    x
}

/// Expands each coarse point into `r` points at `coordinate + offset`.
/// Output index is `coarse_index * r + offset_index`.
pub fn refine(coarse: &PointCloud, features: &FeatureGrid, params: &RefineHeadParams) -> Result<PointCloud> {
    if coarse.is_empty() {
        return Err(Error::EmptyInput);
    }
    params.check(features)?;
    let layers = params.layers();
    let r = params.expansion();
    let sampled = feature_sample(features, coarse);
    let mut dense = Vec::with_capacity(coarse.len() * r);
    for (i, &c) in coarse.points.iter().enumerate() {
        let acts = run_head(params, &layers, head_input(&sampled, i));
        let offsets = acts.last().unwrap();
        for k in 0..r {
            dense.push(c + Point3::new(offsets[3 * k], offsets[3 * k + 1], offsets[3 * k + 2]));
        }
    }
    Ok(PointCloud::new(dense))
}

/// Gradients of a scalar loss through [`refine`].
#[derive(Debug, Clone, PartialEq)]
pub struct RefineGrads {
    pub params: Vec<f64>,
    pub features: GridGradient,
    /// Includes the direct identity path and the feature-sampling path.
    pub coarse: Vec<Point3>,
}

pub fn refine_grads(
    coarse: &PointCloud,
    features: &FeatureGrid,
    params: &RefineHeadParams,
    upstream: &[Point3],
) -> Result<RefineGrads> {
    if coarse.is_empty() {
        return Err(Error::EmptyInput);
    }
    params.check(features)?;
    let r = params.expansion();
    if upstream.len() != coarse.len() * r {
        return Err(Error::ShapeMismatch(format!(
            "{} upstream gradients for {} dense points",
            upstream.len(),
            coarse.len() * r
        )));
    }
    let layers = params.layers();
    let fdim = features.channels;
    let sampled = feature_sample(features, coarse);
    let mut gparams = vec![0.0; params.values.len()];
    let mut gfeat_rows = vec![0.0; coarse.len() * fdim];
    let mut gcoarse = vec![Point3::ZERO; coarse.len()];

    let offsets: Vec<usize> = layers
        .iter()
        .scan(0, |acc, l| {
            let o = *acc;
            *acc += l.param_len();
            Some(o)
        })
        .collect();

    for i in 0..coarse.len() {
        let up = &upstream[i * r..(i + 1) * r];
        let mut g: Vec<f64> = up.iter().flat_map(|u| u.to_array()).collect();
        for u in up {
            gcoarse[i] += *u;
        }
        if g.iter().all(|&v| v == 0.0) {
            continue;
        }
        let acts = run_head(params, &layers, head_input(&sampled, i));
        for (l, layer) in layers.iter().enumerate().rev() {
            if l + 1 < layers.len() {
                for (gv, &y) in g.iter_mut().zip(&acts[l + 1]) {
                    if y <= 0.0 {
                        *gv *= LEAKY_SLOPE;
                    }
                }
            }
            let span = offsets[l]..offsets[l] + layer.param_len();
            let mut gx = vec![0.0; layer.input];
            layer.backward(&params.values[span.clone()], &acts[l], &g, &mut gparams[span], &mut gx);
            g = gx;
        }
        gfeat_rows[i * fdim..(i + 1) * fdim].copy_from_slice(&g[..fdim]);
        gcoarse[i] += Point3::new(g[fdim], g[fdim + 1], g[fdim + 2]);
    }

    let gfeatures = feature_sample_grad(features, coarse, &gfeat_rows)?;
    let through_sampling = feature_sample_position_grad(features, coarse, &gfeat_rows)?;
    for (gc, s) in gcoarse.iter_mut().zip(through_sampling) {
        *gc += s;
    }
    Ok(RefineGrads {
        params: gparams,
        features: gfeatures,
        coarse: gcoarse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::BoundingRange;
    use crate::grid::GridGeometry;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64) -> (PointCloud, FeatureGrid, RefineHeadParams) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let geo = GridGeometry::new([4, 4, 4], BoundingRange::new(Point3::splat(-0.5), Point3::splat(0.5)).unwrap()).unwrap();
        let fv = (0..64 * 5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let features = FeatureGrid::from_values(geo, 5, fv).unwrap();
        let coarse = PointCloud::new(
            (0..6)
                .map(|_| Point3::new(rng.gen_range(-0.45..0.45), rng.gen_range(-0.45..0.45), rng.gen_range(-0.45..0.45)))
                .collect(),
        );
        let mut head = RefineHeadParams::zeros(8, &[7, 5, 6]).unwrap();
        head.values.iter_mut().for_each(|x| *x = rng.gen_range(-0.8..0.8));
        (coarse, features, head)
    }

    #[test]
    fn zero_output_layer_repeats_points() {
        let (coarse, features, mut head) = setup(0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        head.init(&mut rng);
        let dense = refine(&coarse, &features, &head).unwrap();
        assert_eq!(dense.len(), coarse.len() * 2);
        for (i, p) in dense.points.iter().enumerate() {
            assert_eq!(*p, coarse.points[i / 2]);
        }
    }

    #[test]
    fn full_scale_count() {
        let geo = GridGeometry::new([2, 2, 2], BoundingRange::new(Point3::splat(-0.5), Point3::splat(0.5)).unwrap()).unwrap();
        let features = FeatureGrid::from_values(geo, 1, vec![0.0; 8]).unwrap();
        let head = RefineHeadParams::zeros(4, &[8, 24]).unwrap();
        let coarse = PointCloud::new(vec![Point3::ZERO; 2048]);
        assert_eq!(refine(&coarse, &features, &head).unwrap().len(), 16384);
    }

    #[test]
    fn refine_is_deterministic_and_checks_dims() {
        let (coarse, features, head) = setup(2);
        assert_eq!(refine(&coarse, &features, &head).unwrap(), refine(&coarse, &features, &head).unwrap());
        let bad = RefineHeadParams::zeros(9, &[3]).unwrap();
        assert!(refine(&coarse, &features, &bad).is_err());
        assert!(RefineHeadParams::zeros(8, &[4, 5]).is_err());
    }

    #[test]
    fn zero_upstream_zero_grads() {
        let (coarse, features, head) = setup(3);
        let g = refine_grads(&coarse, &features, &head, &vec![Point3::ZERO; 12]).unwrap();
        assert!(g.params.iter().all(|&v| v == 0.0));
        assert!(g.features.values.iter().all(|&v| v == 0.0));
        assert!(g.coarse.iter().all(|&v| v == Point3::ZERO));
    }

    #[test]
    fn coarse_gradient_includes_sampling_path() {
        let (coarse, features, head) = setup(4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let up: Vec<Point3> = (0..12).map(|_| Point3::new(rng.gen(), rng.gen(), rng.gen())).collect();
        let g = refine_grads(&coarse, &features, &head, &up).unwrap();
        let loss = |c: &PointCloud| -> f64 {
            refine(c, &features, &head).unwrap().points.iter().zip(&up).map(|(p, u)| p.dot(*u)).sum()
        };
        let h = 1e-6;
        for i in 0..coarse.len() {
            for a in 0..3 {
                let mut c = coarse.clone();
                c.points[i][a] += h;
                let lp = loss(&c);
                c.points[i][a] -= 2.0 * h;
                let lm = loss(&c);
                let fd = (lp - lm) / (2.0 * h);
                assert!((fd - g.coarse[i][a]).abs() < 1e-5 * (1.0 + fd.abs()), "{fd} vs {}", g.coarse[i][a]);
                let direct = up[2 * i][a] + up[2 * i + 1][a];
                assert!((fd - direct).abs() > 1e-6, "feature path should contribute");
            }
        }
    }
}
