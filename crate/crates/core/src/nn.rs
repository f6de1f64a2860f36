//! Minimal dense volumetric layers with hand-written backward passes.
//!
//! Volumes are channels-last: value `(i, j, k, c)` lives at
//! `((i * d1 + j) * d2 + k) * channels + c`. Convolution weights are laid
//! out `[offset][cin][cout]` followed by `cout` biases, so the innermost
//! loops run over contiguous output channels.

use rand::Rng;

/// Slope of the leaky rectifier used by every hidden layer.
pub const LEAKY_SLOPE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    pub dims: [usize; 3],
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Volume {
    pub fn zeros(dims: [usize; 3], channels: usize) -> Self {
        Self {
            dims,
            channels,
            data: vec![0.0; dims[0] * dims[1] * dims[2] * channels],
        }
    }

    pub fn voxels(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn voxel(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }
}

#[inline]
pub fn leaky(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

pub fn leaky_inplace(v: &mut Volume) {
    v.data.iter_mut().for_each(|x| *x = leaky(*x));
}

/// Multiplies `grad` by the rectifier derivative, read off the activated output.
pub fn leaky_backward(output: &Volume, grad: &mut Volume) {
    for (g, &y) in grad.data.iter_mut().zip(&output.data) {
        if y <= 0.0 {
            *g *= LEAKY_SLOPE;
        }
    }
}

/// Shape of one 3D convolution with "same"-style padding `ksize / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv3d {
    pub cin: usize,
    pub cout: usize,
    pub ksize: usize,
    pub stride: usize,
}

impl Conv3d {
    pub fn weight_len(&self) -> usize {
        self.ksize.pow(3) * self.cin * self.cout
    }

    pub fn param_len(&self) -> usize {
        self.weight_len() + self.cout
    }

    pub fn out_dims(&self, d: [usize; 3]) -> [usize; 3] {
        d.map(|x| x.div_ceil(self.stride))
    }

    /// Fan-in scaled uniform weights for a leaky-rectified layer, zero biases.
    pub fn init(&self, params: &mut [f64], gain: f64, rng: &mut impl Rng) {
        let fan_in = (self.ksize.pow(3) * self.cin) as f64;
        let bound = gain * (6.0 / ((1.0 + LEAKY_SLOPE * LEAKY_SLOPE) * fan_in)).sqrt();
        let (w, b) = params.split_at_mut(self.weight_len());
        for x in w {
            *x = if bound > 0.0 { rng.gen_range(-bound..bound) } else { 0.0 };
        }
        b.fill(0.0);
    }

    /// Iterates `(offset index, input voxel)` pairs feeding output voxel `(oi, oj, ok)`.
    #[inline]
    fn taps(&self, input: [usize; 3], o: [usize; 3], mut f: impl FnMut(usize, usize)) {
        let k = self.ksize as isize;
        let pad = k / 2;
        let s = self.stride as isize;
        let mut off = 0;
        for a in 0..k {
            let i = o[0] as isize * s + a - pad;
            let row_ok = i >= 0 && i < input[0] as isize;
            for b in 0..k {
                let j = o[1] as isize * s + b - pad;
                let col_ok = row_ok && j >= 0 && j < input[1] as isize;
                for c in 0..k {
                    let l = o[2] as isize * s + c - pad;
                    if col_ok && l >= 0 && l < input[2] as isize {
                        f(off, (i as usize * input[1] + j as usize) * input[2] + l as usize);
                    }
                    off += 1;
                }
            }
        }
    }

    pub fn forward(&self, params: &[f64], input: &Volume) -> Volume {
        debug_assert_eq!(input.channels, self.cin);
        let (w, bias) = params.split_at(self.weight_len());
        let od = self.out_dims(input.dims);
        let mut out = Volume::zeros(od, self.cout);
        let (cin, cout) = (self.cin, self.cout);
        let mut ov = 0;
        for oi in 0..od[0] {
            for oj in 0..od[1] {
                for ok in 0..od[2] {
                    let acc = &mut out.data[ov * cout..(ov + 1) * cout];
                    acc.copy_from_slice(bias);
                    self.taps(input.dims, [oi, oj, ok], |off, iv| {
                        let x = &input.data[iv * cin..(iv + 1) * cin];
                        let wo = &w[off * cin * cout..(off + 1) * cin * cout];
                        for (&a, wrow) in x.iter().zip(wo.chunks_exact(cout)) {
                            if a != 0.0 {
                                for (o, &wv) in acc.iter_mut().zip(wrow) {
                                    *o += a * wv;
                                }
                            }
                        }
                    });
                    ov += 1;
                }
            }
        }
        out
    }

    /// Accumulates parameter gradients into `grad_params` and returns the
    /// input gradient when `want_input` is set.
    pub fn backward(
        &self,
        params: &[f64],
        input: &Volume,
        grad_out: &Volume,
        grad_params: &mut [f64],
        want_input: bool,
    ) -> Option<Volume> {
        let (w, _) = params.split_at(self.weight_len());
        let (gw, gb) = grad_params.split_at_mut(self.weight_len());
        let (cin, cout) = (self.cin, self.cout);
        let od = grad_out.dims;
        let mut gin = want_input.then(|| Volume::zeros(input.dims, cin));
        let mut ov = 0;
        for oi in 0..od[0] {
            for oj in 0..od[1] {
                for ok in 0..od[2] {
                    let g = &grad_out.data[ov * cout..(ov + 1) * cout];
                    ov += 1;
                    if g.iter().all(|&v| v == 0.0) {
                        continue;
                    }
                    for (b, &gv) in gb.iter_mut().zip(g) {
                        *b += gv;
                    }
                    self.taps(input.dims, [oi, oj, ok], |off, iv| {
                        let x = &input.data[iv * cin..(iv + 1) * cin];
                        let span = off * cin * cout..(off + 1) * cin * cout;
                        for (&a, gwrow) in x.iter().zip(gw[span.clone()].chunks_exact_mut(cout)) {
                            if a != 0.0 {
                                for (o, &gv) in gwrow.iter_mut().zip(g) {
                                    *o += a * gv;
                                }
                            }
                        }
                        if let Some(gin) = gin.as_mut() {
                            let gi = &mut gin.data[iv * cin..(iv + 1) * cin];
                            for (o, wrow) in gi.iter_mut().zip(w[span].chunks_exact(cout)) {
                                let mut s = 0.0;
                                for (&wv, &gv) in wrow.iter().zip(g) {
                                    s += wv * gv;
                                }
                                *o += s;
                            }
                        }
                    });
                }
            }
        }
        gin
    }
}

/// Nearest-neighbour upsampling by 2 along every axis.
pub fn upsample2(v: &Volume) -> Volume {
    let d = v.dims.map(|x| x * 2);
    let ch = v.channels;
    let mut out = Volume::zeros(d, ch);
    for i in 0..d[0] {
        for j in 0..d[1] {
            for k in 0..d[2] {
                let src = v.voxel(i / 2, j / 2, k / 2);
                let dst = out.voxel(i, j, k);
                out.data[dst * ch..(dst + 1) * ch].copy_from_slice(&v.data[src * ch..(src + 1) * ch]);
            }
        }
    }
    out
}

/// Adjoint of [`upsample2`]: sums each 2x2x2 block.
pub fn upsample2_backward(grad: &Volume) -> Volume {
    let d = grad.dims.map(|x| x / 2);
    let ch = grad.channels;
    let mut out = Volume::zeros(d, ch);
    for i in 0..grad.dims[0] {
        for j in 0..grad.dims[1] {
            for k in 0..grad.dims[2] {
                let src = grad.voxel(i, j, k);
                let dst = out.voxel(i / 2, j / 2, k / 2);
                for (o, &g) in out.data[dst * ch..(dst + 1) * ch]
                    .iter_mut()
                    .zip(&grad.data[src * ch..(src + 1) * ch])
                {
                    *o += g;
                }
            }
        }
    }
    out
}

/// Channel concatenation `[a | b]` per voxel.
pub fn concat_channels(a: &Volume, b: &Volume) -> Volume {
    debug_assert_eq!(a.dims, b.dims);
    let ch = a.channels + b.channels;
    let mut data = Vec::with_capacity(a.voxels() * ch);
    for (ra, rb) in a.data.chunks_exact(a.channels).zip(b.data.chunks_exact(b.channels)) {
        data.extend_from_slice(ra);
        data.extend_from_slice(rb);
    }
    Volume {
        dims: a.dims,
        channels: ch,
        data,
    }
}

/// Splits a concatenated gradient back into its two parts.
pub fn split_channels(v: &Volume, first: usize) -> (Volume, Volume) {
    let second = v.channels - first;
    let mut a = Volume::zeros(v.dims, first);
    let mut b = Volume::zeros(v.dims, second);
    for ((row, ra), rb) in v
        .data
        .chunks_exact(v.channels)
        .zip(a.data.chunks_exact_mut(first))
        .zip(b.data.chunks_exact_mut(second.max(1)))
    {
        ra.copy_from_slice(&row[..first]);
        rb.copy_from_slice(&row[first..]);
    }
    (a, b)
}

/// A fully connected layer: `out = W x + b` with `W` stored `[out][in]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dense {
    pub input: usize,
    pub output: usize,
}

impl Dense {
    pub fn param_len(&self) -> usize {
        self.input * self.output + self.output
    }

    pub fn forward(&self, params: &[f64], x: &[f64], out: &mut [f64]) {
        let (w, b) = params.split_at(self.input * self.output);
        for ((o, row), &bias) in out.iter_mut().zip(w.chunks_exact(self.input)).zip(b) {
            let mut s = bias;
            for (&wv, &xv) in row.iter().zip(x) {
                s += wv * xv;
            }
            *o = s;
        }
    }

    /// Accumulates parameter gradients and adds the input gradient into `gx`.
    pub fn backward(&self, params: &[f64], x: &[f64], g: &[f64], grad_params: &mut [f64], gx: &mut [f64]) {
        let (w, _) = params.split_at(self.input * self.output);
        let (gw, gb) = grad_params.split_at_mut(self.input * self.output);
        for (((&go, row), grow), b) in g
            .iter()
            .zip(w.chunks_exact(self.input))
            .zip(gw.chunks_exact_mut(self.input))
            .zip(gb.iter_mut())
        {
            if go == 0.0 {
                continue;
            }
            *b += go;
            for ((gwv, &xv), (gxv, &wv)) in grow.iter_mut().zip(x).zip(gx.iter_mut().zip(row)) {
                *gwv += go * xv;
                *gxv += go * wv;
            }
        }
    }

    pub fn init(&self, params: &mut [f64], gain: f64, rng: &mut impl Rng) {
        let bound = gain * (6.0 / ((1.0 + LEAKY_SLOPE * LEAKY_SLOPE) * self.input as f64)).sqrt();
        let (w, b) = params.split_at_mut(self.input * self.output);
        for x in w {
            *x = if bound > 0.0 { rng.gen_range(-bound..bound) } else { 0.0 };
        }
        b.fill(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_volume(dims: [usize; 3], ch: usize, rng: &mut ChaCha8Rng) -> Volume {
        let mut v = Volume::zeros(dims, ch);
        v.data.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
        v
    }

    /// Direct nested-loop convolution used as a reference.
    fn conv_reference(c: &Conv3d, params: &[f64], x: &Volume) -> Volume {
        let od = c.out_dims(x.dims);
        let mut out = Volume::zeros(od, c.cout);
        let pad = (c.ksize / 2) as isize;
        for oi in 0..od[0] {
            for oj in 0..od[1] {
                for ok in 0..od[2] {
                    for co in 0..c.cout {
                        let mut s = params[c.weight_len() + co];
                        for a in 0..c.ksize {
                            for b in 0..c.ksize {
                                for d in 0..c.ksize {
                                    let i = (oi * c.stride + a) as isize - pad;
                                    let j = (oj * c.stride + b) as isize - pad;
                                    let l = (ok * c.stride + d) as isize - pad;
                                    if i < 0 || j < 0 || l < 0 {
                                        continue;
                                    }
                                    let (i, j, l) = (i as usize, j as usize, l as usize);
                                    if i >= x.dims[0] || j >= x.dims[1] || l >= x.dims[2] {
                                        continue;
                                    }
                                    let off = (a * c.ksize + b) * c.ksize + d;
                                    for ci in 0..c.cin {
                                        s += params[(off * c.cin + ci) * c.cout + co]
                                            * x.data[x.voxel(i, j, l) * c.cin + ci];
                                    }
                                }
                            }
                        }
                        let v = out.voxel(oi, oj, ok);
                        out.data[v * c.cout + co] = s;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (ksize, stride) in [(3, 1), (3, 2), (1, 1)] {
            let c = Conv3d { cin: 3, cout: 5, ksize, stride };
            let mut p = vec![0.0; c.param_len()];
            p.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
            let x = random_volume([4, 6, 5], 3, &mut rng);
            let a = c.forward(&p, &x);
            let b = conv_reference(&c, &p, &x);
            assert_eq!(a.dims, b.dims);
            for (u, v) in a.data.iter().zip(&b.data) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = Conv3d { cin: 2, cout: 3, ksize: 3, stride: 2 };
        let mut p = vec![0.0; c.param_len()];
        p.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
        let x = random_volume([4, 4, 4], 2, &mut rng);
        let probe = random_volume(c.out_dims(x.dims), 3, &mut rng);
        let loss = |p: &[f64], x: &Volume| -> f64 {
            c.forward(p, x).data.iter().zip(&probe.data).map(|(a, b)| a * b).sum()
        };
        let mut gp = vec![0.0; p.len()];
        let gx = c.backward(&p, &x, &probe, &mut gp, true).unwrap();
        let h = 1e-6;
        for idx in (0..p.len()).step_by(7) {
            let mut pp = p.clone();
            pp[idx] += h;
            let up = loss(&pp, &x);
            pp[idx] -= 2.0 * h;
            let dn = loss(&pp, &x);
            assert!(((up - dn) / (2.0 * h) - gp[idx]).abs() < 1e-6);
        }
        for idx in (0..x.data.len()).step_by(5) {
            let mut xx = x.clone();
            xx.data[idx] += h;
            let up = loss(&p, &xx);
            xx.data[idx] -= 2.0 * h;
            let dn = loss(&p, &xx);
            assert!(((up - dn) / (2.0 * h) - gx.data[idx]).abs() < 1e-6);
        }
    }

    #[test]
    fn upsample_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_volume([2, 3, 2], 2, &mut rng);
        let b = random_volume([4, 6, 4], 2, &mut rng);
        let lhs: f64 = upsample2(&a).data.iter().zip(&b.data).map(|(x, y)| x * y).sum();
        let rhs: f64 = a.data.iter().zip(&upsample2_backward(&b).data).map(|(x, y)| x * y).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn concat_split_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_volume([2, 2, 2], 3, &mut rng);
        let b = random_volume([2, 2, 2], 2, &mut rng);
        let (x, y) = split_channels(&concat_channels(&a, &b), 3);
        assert_eq!((x, y), (a, b));
    }
}
