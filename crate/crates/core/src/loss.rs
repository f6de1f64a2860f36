//! Completion and similarity objectives.

use crate::chamfer::chamfer;
use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// Values of one evaluation of the training objective.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub comp: f64,
    pub sim: f64,
    pub alpha: f64,
    /// CD(coarse, gt) and CD(dense, gt).
    pub cd_coarse: f64,
    pub cd_dense: f64,
    /// Per variant: (CD(C_i, C), CD(Q_i, Q)).
    pub sim_terms: Vec<(f64, f64)>,
}

impl LossBreakdown {
    pub fn new(cd_coarse: f64, cd_dense: f64, sim_terms: Vec<(f64, f64)>, alpha: f64) -> Self {
        let comp = cd_coarse + cd_dense;
        let sim: f64 = sim_terms.iter().map(|(a, b)| a + b).sum();
        Self {
            total: comp + alpha * sim,
            comp,
            sim,
            alpha,
            cd_coarse,
            cd_dense,
            sim_terms,
        }
    }
}

/// `CD(coarse, gt) + CD(dense, gt)`.
pub fn loss_comp(coarse: &PointCloud, dense: &PointCloud, gt: &PointCloud) -> Result<f64> {
    Ok(chamfer(coarse, gt)? + chamfer(dense, gt)?)
}

/// Sum over variants of `CD(C_i, C) + CD(Q_i, Q)`.
pub fn loss_sim(
    variant_coarse: &[PointCloud],
    variant_dense: &[PointCloud],
    anchor_coarse: &PointCloud,
    anchor_dense: &PointCloud,
) -> Result<f64> {
    if variant_coarse.is_empty() || variant_coarse.len() != variant_dense.len() {
        return Err(Error::InvalidArgument(format!(
            "{} coarse and {} dense variants",
            variant_coarse.len(),
            variant_dense.len()
        )));
    }
    let mut s = 0.0;
    for (c, q) in variant_coarse.iter().zip(variant_dense) {
        s += chamfer(c, anchor_coarse)? + chamfer(q, anchor_dense)?;
    }
    Ok(s)
}
