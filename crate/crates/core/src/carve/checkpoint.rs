//! Binary parameter checkpoints.
//!
//! All integers and floats are little-endian:
//!
//! | bytes | field |
//! |-------|-------|
//! | 8     | magic `BLKCARVE` |
//! | 4     | format version (u32, currently 1) |
//! | 4 x 4 | stages E, base width C0, kernel size K, feature dim F (u32) |
//! | 3 x 4 | resolution H, W, M (u32) |
//! | 4     | refinement layer count L (u32) |
//! | L x 4 | refinement widths (u32) |
//! | 8     | parameter count P (u64) |
//! | P x 4 | parameters as f32, network tensors then refinement tensors, in [`CarveParams::layout`] order |

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::params::{Architecture, CarveParams};

pub const MAGIC: &[u8; 8] = b"BLKCARVE";
pub const VERSION: u32 = 1;

pub fn encode(params: &CarveParams) -> Vec<u8> {
    let a = &params.arch;
    let mut out = Vec::with_capacity(64 + 4 * params.len());
    out.extend_from_slice(MAGIC);
    let mut put = |v: u32| out.extend_from_slice(&v.to_le_bytes());
    put(VERSION);
    put(a.stages as u32);
    put(a.base_width as u32);
    put(a.kernel_size as u32);
    put(a.feature_dim as u32);
    for r in a.resolution {
        put(r as u32);
    }
    put(a.refine_widths.len() as u32);
    for &w in &a.refine_widths {
        put(w as u32);
    }
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for v in params.unet.iter().chain(&params.head.values) {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
}

pub fn decode(bytes: &[u8]) -> Result<CarveParams> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = c.u32()?;
    if version != VERSION as usize {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let stages = c.u32()?;
    let base_width = c.u32()?;
    let kernel_size = c.u32()?;
    let feature_dim = c.u32()?;
    let resolution = [c.u32()?, c.u32()?, c.u32()?];
    let n_layers = c.u32()?;
    if n_layers > 64 {
        return Err(Error::Checkpoint(format!("{n_layers} refinement layers")));
    }
    let refine_widths = (0..n_layers).map(|_| c.u32()).collect::<Result<Vec<_>>>()?;
    let arch = Architecture {
        resolution,
        stages,
        base_width,
        kernel_size,
        feature_dim,
        refine_widths,
    };
    let mut params = CarveParams::zeros(arch).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let count = u64::from_le_bytes(c.take(8)?.try_into().unwrap()) as usize;
    if count != params.len() {
        return Err(Error::Checkpoint(format!(
            "{count} parameters stored, architecture needs {}",
            params.len()
        )));
    }
    let raw = c.take(4 * count)?;
    let flat: Vec<f64> = raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    if c.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    params.assign_flat(&flat)?;
    Ok(params)
}

pub fn save(params: &CarveParams, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode(params)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<CarveParams> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    decode(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CarveParams {
        let mut arch = Architecture::desk();
        arch.resolution = [8, 8, 16];
        arch.stages = 2;
        arch.refine_widths = vec![10, 6];
        CarveParams::init(arch, 11).unwrap()
    }

    #[test]
    fn round_trip_rounds_to_f32() {
        let p = small();
        let q = decode(&encode(&p)).unwrap();
        assert_eq!(q.arch, p.arch);
        for (a, b) in p.to_flat().iter().zip(q.to_flat()) {
            assert_eq!(*a as f32 as f64, b);
        }
        // Re-encoding a decoded checkpoint is byte-identical.
        assert_eq!(encode(&q), encode(&p));
    }

    #[test]
    fn layout_size() {
        let p = small();
        let header = 8 + 4 + 16 + 12 + 4 + 4 * 2 + 8;
        assert_eq!(encode(&p).len(), header + 4 * p.len());
    }

    #[test]
    fn rejects_corruption() {
        let p = small();
        let bytes = encode(&p);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(decode(&extra).is_err());
    }
}
