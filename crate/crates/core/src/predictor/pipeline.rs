use log::warn;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{aggregate, SpatialPrior};
use crate::bank::{retrieve_top_n, SceneBank};
use crate::error::{Error, Result};
use crate::features::{FeatureMap, FeatureSource, RawDescriptor};
use crate::raster::{gaussian_smooth, normalize, resize_bilinear, DensityMap, Grid, ImageBuffer, Normalization};

/// Ensemble size, attenuation exponent, smoothing and prior switch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n: usize,
    pub alpha: f64,
    pub sigma_smooth: f64,
    pub use_prior: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n: 697,
            alpha: 6.0,
            sigma_smooth: 13.0,
            use_prior: true,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("ensemble size must be at least 1".into()));
        }
        if !(self.alpha >= 1.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be at least 1, got {}", self.alpha)));
        }
        if !(self.sigma_smooth >= 0.0 && self.sigma_smooth.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "smoothing sigma must be non-negative, got {}",
                self.sigma_smooth
            )));
        }
        Ok(())
    }
}

/// A query image with its features and raw descriptor already computed.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedQuery {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub features: FeatureMap,
    pub descriptor: RawDescriptor,
}

impl PreparedQuery {
    pub fn from_image(source: &FeatureSource, id: &str, image: &ImageBuffer) -> Result<Self> {
        Ok(PreparedQuery {
            id: id.to_string(),
            width: image.width(),
            height: image.height(),
            features: source.features(id, image)?,
            descriptor: source.descriptor(id, image)?,
        })
    }
}

/// Where a saliency map came from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub bank_id: Option<String>,
    pub query_id: String,
    pub config: EnsembleConfig,
    /// Ids of the retrieved units, nearest first.
    pub retrieved: Vec<String>,
    pub prior_applied: bool,
    /// True when the prediction was all zero and replaced by the uniform map.
    pub fallback: bool,
}

/// A saliency map at source-image resolution with values in `[0, 1]` and maximum 1.
#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyMap {
    grid: Grid,
    provenance: Provenance,
}

impl SaliencyMap {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn into_grid(self) -> Grid {
        self.grid
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn density(&self) -> DensityMap {
        DensityMap::new(self.grid.clone(), Normalization::MaxOne).expect("saliency maps are max-one")
    }
}

/// Raw outputs of the `n` nearest units on the query's feature grid, nearest first.
pub fn unit_outputs(bank: &SceneBank, query: &PreparedQuery, n: usize) -> Result<Vec<(String, Grid)>> {
    if query.features.dim() != bank.feature_dim() {
        return Err(Error::DimensionMismatch {
            expected: bank.feature_dim(),
            actual: query.features.dim(),
        });
    }
    if query.descriptor.len() != bank.descriptor_dim() {
        return Err(Error::DimensionMismatch {
            expected: bank.descriptor_dim(),
            actual: query.descriptor.len(),
        });
    }
    let descriptor = bank.describe(&query.descriptor)?;
    let retrieved = retrieve_top_n(bank, &descriptor.combined, n)?;
    let fm = &query.features;
    let x = DMatrix::from_row_slice(fm.cells(), fm.dim(), fm.data());
    retrieved
        .par_iter()
        .map(|r| {
            let y = r.entry.unit.predict(&x)?;
            Ok((r.entry.id.clone(), Grid::from_vec(fm.grid_w(), fm.grid_h(), y.as_slice().to_vec())?))
        })
        .collect()
}

/// Aggregates unit outputs and applies resizing, prior, smoothing and
/// max-one normalization. Returns the map and whether it fell back to uniform.
pub fn compose(
    outputs: &[Grid],
    width: usize,
    height: usize,
    prior: Option<&DensityMap>,
    alpha: f64,
    sigma_smooth: f64,
) -> Result<(Grid, bool)> {
    let agg = aggregate(outputs, alpha)?;
    let mut map = resize_bilinear(&agg, width, height);
    if let Some(p) = prior {
        map = map.mul(p.grid())?;
    }
    let smoothed = gaussian_smooth(&map, sigma_smooth);
    match normalize(&smoothed, Normalization::MaxOne) {
        Ok(d) => Ok((d.into_grid(), false)),
        Err(Error::DegenerateMap(_)) => Ok((Grid::filled(width, height, 1.0), true)),
        Err(e) => Err(e),
    }
}

/// Full prediction for one query. The prior is applied when `cfg.use_prior`
/// is set and a prior is supplied.
pub fn predict_saliency(
    bank: &SceneBank,
    query: &PreparedQuery,
    prior: Option<&SpatialPrior>,
    cfg: &EnsembleConfig,
) -> Result<SaliencyMap> {
    cfg.validate()?;
    let outputs = unit_outputs(bank, query, cfg.n)?;
    let prior_map = match prior {
        Some(p) if cfg.use_prior => Some(p.render(query.width, query.height)?),
        _ => None,
    };
    let grids: Vec<Grid> = outputs.iter().map(|(_, g)| g.clone()).collect();
    let (grid, fallback) = compose(
        &grids,
        query.width,
        query.height,
        prior_map.as_deref(),
        cfg.alpha,
        cfg.sigma_smooth,
    )?;
    if fallback {
        warn!("prediction for {:?} is all zero; using the uniform map", query.id);
    }
    Ok(SaliencyMap {
        grid,
        provenance: Provenance {
            bank_id: None,
            query_id: query.id.clone(),
            config: *cfg,
            retrieved: outputs.into_iter().map(|(id, _)| id).collect(),
            prior_applied: prior_map.is_some(),
            fallback,
        },
    })
}

impl SaliencyMap {
    /// Records which bank produced the map.
    pub fn with_bank_id(mut self, bank_id: impl Into<String>) -> Self {
        self.provenance.bank_id = Some(bank_id.into());
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_and_validation() {
        let c = EnsembleConfig::default();
        assert_eq!((c.n, c.alpha, c.sigma_smooth, c.use_prior), (697, 6.0, 13.0, true));
        assert!(EnsembleConfig { n: 0, ..c }.validate().is_err());
        assert!(EnsembleConfig { alpha: 0.9, ..c }.validate().is_err());
        assert!(EnsembleConfig { sigma_smooth: -1.0, ..c }.validate().is_err());
    }

    #[test]
    fn constant_aggregate_times_prior_is_the_prior() {
        let prior = super::super::fit_prior(&[crate::fixation::FixationSet::new(
            "p",
            30,
            20,
            vec![crate::fixation::Fixation::new(7, 5), crate::fixation::Fixation::new(20, 12)],
        )
        .unwrap()])
        .unwrap();
        let p = prior.render(30, 20).unwrap();
        let outputs = [Grid::filled(4, 3, 0.7)];
        let (with, fb) = compose(&outputs, 30, 20, Some(&p), 6.0, 0.0).unwrap();
        assert!(!fb);
        for (a, b) in with.data().iter().zip(p.grid().data()) {
            assert!((a - b).abs() < 1e-12);
        }
        let (without, _) = compose(&outputs, 30, 20, None, 6.0, 0.0).unwrap();
        assert!(without.data().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn all_negative_outputs_fall_back_to_uniform() {
        let (g, fb) = compose(&[Grid::filled(3, 3, -1.0)], 10, 8, None, 2.0, 1.0).unwrap();
        assert!(fb);
        assert!(g.data().iter().all(|v| *v == 1.0));
    }
}
