//! Volumetric encoder-decoder predicting per-cell kernels and features.
//!
//! Layout, for `E` stages and base width `C0` (`C_s = C0 * 2^s`):
//!
//! ```text
//! enc0: 3^3 conv 1 -> C0                     (full resolution)
//! enc s = 1..E: 3^3 stride-2 conv C_{s-1} -> C_s
//! dec s = E..1: upsample x2, concat skip from enc s-1,
//!               conv (C_s + C_{s-1}) -> C_{s-1}   (3^3, or 1^3 at full resolution)
//! kernel head: 1^3 conv C0 -> K^3   (raw output)
//! feature head: 1^3 conv C0 -> F    (raw output)
//! ```
//!
//! Every hidden conv is followed by a leaky rectifier.

use rand::Rng;

use crate::nn::{
    concat_channels, leaky_backward, leaky_inplace, split_channels, upsample2, upsample2_backward, Conv3d, Volume,
};

use super::params::Architecture;

#[derive(Debug, Clone)]
pub struct Unet {
    pub encoder: Vec<Conv3d>,
    /// Decoder convs in execution order (deepest first).
    pub decoder: Vec<Conv3d>,
    pub kernel_head: Conv3d,
    pub feature_head: Conv3d,
    widths: Vec<usize>,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct UnetCache {
    input: Volume,
    enc: Vec<Volume>,
    dec_in: Vec<Volume>,
    dec_out: Vec<Volume>,
}

pub struct UnetOutput {
    pub kernels: Volume,
    pub features: Volume,
}

impl Unet {
    pub fn new(arch: &Architecture) -> Self {
        let e = arch.stages;
        let widths: Vec<usize> = (0..=e).map(|s| arch.base_width << s).collect();
        let mut encoder = vec![Conv3d { cin: 1, cout: widths[0], ksize: 3, stride: 1 }];
        for s in 1..=e {
            encoder.push(Conv3d { cin: widths[s - 1], cout: widths[s], ksize: 3, stride: 2 });
        }
        let decoder = (1..=e)
            .rev()
            .map(|s| Conv3d {
                cin: widths[s] + widths[s - 1],
                cout: widths[s - 1],
                ksize: if s == 1 { 1 } else { 3 },
                stride: 1,
            })
            .collect();
        Self {
            encoder,
            decoder,
            kernel_head: Conv3d { cin: widths[0], cout: arch.kernel_size.pow(3), ksize: 1, stride: 1 },
            feature_head: Conv3d { cin: widths[0], cout: arch.feature_dim, ksize: 1, stride: 1 },
            widths,
        }
    }

    fn layers(&self) -> impl Iterator<Item = &Conv3d> {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .chain([&self.kernel_head, &self.feature_head])
    }

    pub fn param_len(&self) -> usize {
        self.layers().map(Conv3d::param_len).sum()
    }

    fn offsets(&self) -> Vec<usize> {
        self.layers()
            .scan(0, |acc, l| {
                let o = *acc;
                *acc += l.param_len();
                Some(o)
            })
            .collect()
    }

    pub fn tensor_names(&self) -> Vec<(String, usize)> {
        let e = self.encoder.len();
        let d = self.decoder.len();
        let mut out = Vec::new();
        for (i, l) in self.layers().enumerate() {
            let name = if i < e {
                format!("enc.{i}")
            } else if i < e + d {
                format!("dec.{}", d - (i - e))
            } else if i == e + d {
                "kernel_head".to_string()
            } else {
                "feature_head".to_string()
            };
            out.push((format!("{name}.weight"), l.weight_len()));
            out.push((format!("{name}.bias"), l.cout));
        }
        out
    }

    /// Fan-in scaled uniform weights, zero biases; the kernel head starts
    /// near the identity (a centre tap bias of 1) with small weights.
    pub fn init(&self, params: &mut [f64], rng: &mut impl Rng) {
        let offs = self.offsets();
        let n_layers = offs.len();
        for (i, (l, &o)) in self.layers().zip(&offs).enumerate() {
            let slice = &mut params[o..o + l.param_len()];
            let gain = if i + 2 == n_layers { 0.1 } else { 1.0 };
            l.init(slice, gain, rng);
        }
        let kh = &self.kernel_head;
        let o = offs[n_layers - 2] + kh.weight_len();
        params[o + kh.cout / 2] = 1.0;
    }

    fn split<'a>(&self, params: &'a [f64]) -> Vec<&'a [f64]> {
        self.layers()
            .zip(self.offsets())
            .map(|(l, o)| &params[o..o + l.param_len()])
            .collect()
    }

    pub fn forward(&self, params: &[f64], input: Volume) -> (UnetOutput, UnetCache) {
        let p = self.split(params);
        let e = self.encoder.len() - 1;
        let mut enc = Vec::with_capacity(e + 1);
        let mut x = self.encoder[0].forward(p[0], &input);
        leaky_inplace(&mut x);
        enc.push(x);
        for s in 1..=e {
            let mut x = self.encoder[s].forward(p[s], &enc[s - 1]);
            leaky_inplace(&mut x);
            enc.push(x);
        }
        let mut dec_in = Vec::with_capacity(e);
        let mut dec_out: Vec<Volume> = Vec::with_capacity(e);
        for (t, conv) in self.decoder.iter().enumerate() {
            let s = e - t;
            let below = dec_out.last().unwrap_or(&enc[e]);
            let cat = concat_channels(&upsample2(below), &enc[s - 1]);
            let mut y = conv.forward(p[e + 1 + t], &cat);
            leaky_inplace(&mut y);
            dec_in.push(cat);
            dec_out.push(y);
        }
        let top = dec_out.last().unwrap_or(&enc[0]);
        let kernels = self.kernel_head.forward(p[2 * e + 1], top);
        let features = self.feature_head.forward(p[2 * e + 2], top);
        (
            UnetOutput { kernels, features },
            UnetCache { input, enc, dec_in, dec_out },
        )
    }

    /// Accumulates parameter gradients given gradients of both head outputs.
    pub fn backward(
        &self,
        params: &[f64],
        cache: &UnetCache,
        grad_kernels: &Volume,
        grad_features: &Volume,
        grads: &mut [f64],
    ) {
        let p = self.split(params);
        let offs = self.offsets();
        let e = self.encoder.len() - 1;
        let top = cache.dec_out.last().unwrap_or(&cache.enc[0]);

        let mut gslices: Vec<&mut [f64]> = Vec::with_capacity(offs.len());
        let mut rest = grads;
        for l in self.layers() {
            let (a, b) = rest.split_at_mut(l.param_len());
            gslices.push(a);
            rest = b;
        }

        let mut gy = self
            .kernel_head
            .backward(p[2 * e + 1], top, grad_kernels, gslices[2 * e + 1], true)
            .unwrap();
        let gf = self
            .feature_head
            .backward(p[2 * e + 2], top, grad_features, gslices[2 * e + 2], true)
            .unwrap();
        for (a, b) in gy.data.iter_mut().zip(&gf.data) {
            *a += b;
        }

        let mut genc: Vec<Option<Volume>> = vec![None; e + 1];
        let add_into = |slot: &mut Option<Volume>, v: Volume| match slot {
            Some(acc) => acc.data.iter_mut().zip(&v.data).for_each(|(a, b)| *a += b),
            None => *slot = Some(v),
        };
        for t in (0..self.decoder.len()).rev() {
            let s = e - t;
            leaky_backward(&cache.dec_out[t], &mut gy);
            let gcat = self.decoder[t]
                .backward(p[e + 1 + t], &cache.dec_in[t], &gy, gslices[e + 1 + t], true)
                .unwrap();
            let (gup, gskip) = split_channels(&gcat, self.widths[s]);
            add_into(&mut genc[s - 1], gskip);
            gy = upsample2_backward(&gup);
        }
        add_into(&mut genc[e], gy);

        for s in (0..=e).rev() {
            let mut g = genc[s].take().expect("encoder gradient");
            leaky_backward(&cache.enc[s], &mut g);
            let input = if s == 0 { &cache.input } else { &cache.enc[s - 1] };
            let gin = self.encoder[s].backward(p[s], input, &g, gslices[s], s > 0);
            if let Some(gin) = gin {
                add_into(&mut genc[s - 1], gin);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> Architecture {
        Architecture {
            resolution: [4, 4, 4],
            stages: 2,
            base_width: 2,
            kernel_size: 3,
            feature_dim: 3,
            refine_widths: vec![6],
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let arch = tiny();
        let net = Unet::new(&arch);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut params = vec![0.0; net.param_len()];
        net.init(&mut params, &mut rng);
        // Perturb biases away from zero so no rectifier sits exactly at a kink.
        params.iter_mut().for_each(|x| *x += rng.gen_range(-0.05..0.05));
        let mut input = Volume::zeros([4, 4, 4], 1);
        input.data.iter_mut().for_each(|x| *x = rng.gen_range(0.0..1.0));
        let (out, cache) = net.forward(&params, input.clone());
        let mut pk = out.kernels.clone();
        pk.data.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
        let mut pf = out.features.clone();
        pf.data.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
        let loss = |p: &[f64]| {
            let (o, _) = net.forward(p, input.clone());
            let a: f64 = o.kernels.data.iter().zip(&pk.data).map(|(x, y)| x * y).sum();
            let b: f64 = o.features.data.iter().zip(&pf.data).map(|(x, y)| x * y).sum();
            a + b
        };
        let mut grads = vec![0.0; params.len()];
        net.backward(&params, &cache, &pk, &pf, &mut grads);
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for idx in (0..params.len()).step_by(3) {
            let mut q = params.clone();
            q[idx] += h;
            let up = loss(&q);
            q[idx] -= 2.0 * h;
            let dn = loss(&q);
            let fd = (up - dn) / (2.0 * h);
            worst = worst.max((fd - grads[idx]).abs() / (1.0 + fd.abs()));
        }
        assert!(worst < 1e-5, "worst error {worst}");
    }

    #[test]
    fn output_shapes_desk_config() {
        let arch = Architecture::desk();
        let net = Unet::new(&arch);
        let params = vec![0.0; net.param_len()];
        let (out, _) = net.forward(&params, Volume::zeros([32; 3], 1));
        assert_eq!((out.kernels.dims, out.kernels.channels), ([32; 3], 27));
        assert_eq!((out.features.dims, out.features.channels), ([32; 3], 32));
    }
}
