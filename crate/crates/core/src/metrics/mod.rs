//! Fixation-prediction metrics: NSS, the AUC family, SIM, CC, KL and EMD.
//!
//! Location metrics take a raw map and a [`FixationSet`]; fixations recorded on
//! an image of another size are rescaled onto the map first. Distribution
//! metrics take [`DensityMap`]s and renormalize them to unit mass.

mod auc;
mod emd;
mod report;

pub use auc::{auc_borji, auc_judd, roc_area, sauc};
pub use emd::{emd, EMD_MAX_SIDE};
pub use report::{evaluate, EvalItem, EvalOptions, ImageScores, Metric, MetricReport};

use crate::error::{Error, Result};
use crate::fixation::FixationSet;
use crate::raster::{normalize, DensityMap, Grid, Normalization};

/// KL smoothing constant.
pub const KL_EPS: f64 = 2.2e-16;

/// Default number of resampling splits for the Borji and shuffled AUCs.
pub const DEFAULT_SPLITS: usize = 100;

/// NSS together with a flag set when the map was constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NssScore {
    pub value: f64,
    pub degenerate: bool,
}

/// Row-major indices of each fixation on `map`.
pub(crate) fn fixation_pixels(map: &Grid, fix: &FixationSet) -> Result<Vec<usize>> {
    if fix.is_empty() {
        return Err(Error::NoFixations);
    }
    let (w, h) = map.shape();
    let fix = if (fix.width(), fix.height()) == (w, h) {
        fix.clone()
    } else {
        fix.rescaled(w, h)
    };
    Ok(fix
        .points()
        .iter()
        .map(|p| p.y as usize * w + p.x as usize)
        .collect())
}

/// Mean z-score of the map at the fixations, with population statistics.
/// A constant map scores 0 and is flagged degenerate.
pub fn nss_score(map: &Grid, fix: &FixationSet) -> Result<NssScore> {
    let pixels = fixation_pixels(map, fix)?;
    let n = map.data().len() as f64;
    let mean = map.sum() / n;
    let var = map.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std > 0.0) || std <= 1e-12 * mean.abs().max(1e-300) {
        return Ok(NssScore {
            value: 0.0,
            degenerate: true,
        });
    }
    let total: f64 = pixels.iter().map(|&i| (map.data()[i] - mean) / std).sum();
    Ok(NssScore {
        value: total / pixels.len() as f64,
        degenerate: false,
    })
}

pub fn nss(map: &Grid, fix: &FixationSet) -> Result<f64> {
    nss_score(map, fix).map(|s| s.value)
}

fn unit_mass(d: &DensityMap) -> Result<DensityMap> {
    match d.normalization() {
        Normalization::SumsToOne => Ok(d.clone()),
        _ => normalize(d.grid(), Normalization::SumsToOne),
    }
}

/// Histogram intersection of the two maps at unit mass.
pub fn sim(p: &DensityMap, q: &DensityMap) -> Result<f64> {
    p.grid().ensure_same_shape(q.grid())?;
    let (p, q) = (unit_mass(p)?, unit_mass(q)?);
    Ok(p.grid()
        .data()
        .iter()
        .zip(q.grid().data())
        .map(|(a, b)| a.min(*b))
        .sum())
}

/// Pearson correlation over pixels.
pub fn cc(a: &Grid, b: &Grid) -> Result<f64> {
    a.ensure_same_shape(b)?;
    let n = a.data().len() as f64;
    let (ma, mb) = (a.sum() / n, b.sum() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.data().iter().zip(b.data()) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// `sum p log((p + eps) / (q + eps))` with `p` the ground truth.
pub fn kl(p: &DensityMap, q: &DensityMap) -> Result<f64> {
    p.grid().ensure_same_shape(q.grid())?;
    let (p, q) = (unit_mass(p)?, unit_mass(q)?);
    Ok(p.grid()
        .data()
        .iter()
        .zip(q.grid().data())
        .map(|(a, b)| a * ((a + KL_EPS) / (b + KL_EPS)).ln())
        .sum())
}
