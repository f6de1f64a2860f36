use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::refine::RefineHeadParams;

use super::unet::Unet;

/// Hyperparameters fixing the shape of every learnable tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    /// Grid nodes per axis (H, W, M).
    pub resolution: [usize; 3],
    /// Number of stride-2 encoder stages (E).
    pub stages: usize,
    /// Channels after the first encoder layer (C0); doubled per stage.
    pub base_width: usize,
    /// Per-cell kernel side (K, odd).
    pub kernel_size: usize,
    /// Feature channels handed to refinement (F).
    pub feature_dim: usize,
    /// Widths of the refinement layers; the last one is `3 * r`.
    pub refine_widths: Vec<usize>,
}

impl Architecture {
    /// 32^3 desk-scale network.
    pub fn desk() -> Self {
        Self {
            resolution: [32; 3],
            stages: 3,
            base_width: 8,
            kernel_size: 3,
            feature_dim: 32,
            refine_widths: vec![256, 128, 64, 12],
        }
    }

    /// 64^3 scale-up with the large refinement widths.
    pub fn paper() -> Self {
        Self {
            resolution: [64; 3],
            stages: 4,
            base_width: 16,
            kernel_size: 3,
            feature_dim: 32,
            refine_widths: vec![1792, 2448, 112, 24],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_size % 2 == 0 {
            return Err(Error::InvalidArgument(format!("kernel size {} is not odd", self.kernel_size)));
        }
        if self.base_width == 0 || self.feature_dim == 0 {
            return Err(Error::InvalidArgument("zero channel width".into()));
        }
        let step = 1usize << self.stages;
        for &r in &self.resolution {
            if r < 2 || r % step != 0 || r / step == 0 {
                return Err(Error::InvalidArgument(format!(
                    "resolution {:?} not divisible by 2^{}",
                    self.resolution, self.stages
                )));
            }
        }
        RefineHeadParams::zeros(self.feature_dim + 3, &self.refine_widths)?;
        Ok(())
    }

    pub fn expansion(&self) -> usize {
        self.refine_widths.last().copied().unwrap_or(0) / 3
    }
}

/// All learnable weights: the kernel-predicting network and the refinement head.
#[derive(Debug, Clone, PartialEq)]
pub struct CarveParams {
    pub arch: Architecture,
    pub unet: Vec<f64>,
    pub head: RefineHeadParams,
}

impl CarveParams {
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let net = Unet::new(&arch);
        let head = RefineHeadParams::zeros(arch.feature_dim + 3, &arch.refine_widths)?;
        Ok(Self {
            unet: vec![0.0; net.param_len()],
            head,
            arch,
        })
    }

    /// Seeded initialization; see [`Unet::init`] and [`RefineHeadParams::init`].
    pub fn init(arch: Architecture, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Unet::new(&p.arch).init(&mut p.unet, &mut rng);
        p.head.init(&mut rng);
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.unet.len() + self.head.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat view: network weights followed by head weights.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.unet.clone();
        v.extend_from_slice(&self.head.values);
        v
    }

    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} parameters",
                flat.len(),
                self.len()
            )));
        }
        let (a, b) = flat.split_at(self.unet.len());
        self.unet.copy_from_slice(a);
        self.head.values.copy_from_slice(b);
        Ok(())
    }

    /// Named tensors in declaration order with their flat offsets.
    pub fn layout(&self) -> Vec<(String, usize, usize)> {
        let mut out = Vec::new();
        let mut off = 0;
        for (name, len) in Unet::new(&self.arch).tensor_names() {
            out.push((name, off, len));
            off += len;
        }
        for (l, d) in self.head.layers().iter().enumerate() {
            out.push((format!("refine.{l}.weight"), off, d.input * d.output));
            off += d.input * d.output;
            out.push((format!("refine.{l}.bias"), off, d.output));
            off += d.output;
        }
        out
    }
}

/// Gradient buffers matching [`CarveParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct CarveGrads {
    pub unet: Vec<f64>,
    pub head: Vec<f64>,
}

impl CarveGrads {
    pub fn zeros(params: &CarveParams) -> Self {
        Self {
            unet: vec![0.0; params.unet.len()],
            head: vec![0.0; params.head.values.len()],
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.unet.clone();
        v.extend_from_slice(&self.head);
        v
    }

    pub fn add_assign(&mut self, o: &CarveGrads) {
        for (a, b) in self.unet.iter_mut().zip(&o.unet) {
            *a += b;
        }
        for (a, b) in self.head.iter_mut().zip(&o.head) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.unet.iter_mut().chain(self.head.iter_mut()).for_each(|x| *x *= s);
    }
}
