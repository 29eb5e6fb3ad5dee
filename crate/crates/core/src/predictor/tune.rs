use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use super::{compose, unit_outputs, EnsembleConfig, PreparedQuery, SpatialPrior};
use crate::bank::SceneBank;
use crate::corpus::CorpusItem;
use crate::error::{Error, Result};
use crate::features::FeatureSource;
use crate::fixation::{default_sigma_gt, fixations_to_density};
use crate::metrics::kl;
use crate::raster::{normalize, DensityMap, Grid, Normalization};

/// Candidate values for each tuned parameter; the search is their product.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchSpace {
    pub n: Vec<usize>,
    pub alpha: Vec<f64>,
    pub sigma_smooth: Vec<f64>,
}

impl SearchSpace {
    pub fn configs(&self, use_prior: bool) -> Vec<EnsembleConfig> {
        let mut out = Vec::new();
        for &n in &self.n {
            for &alpha in &self.alpha {
                for &sigma_smooth in &self.sigma_smooth {
                    out.push(EnsembleConfig {
                        n,
                        alpha,
                        sigma_smooth,
                        use_prior,
                    });
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TuneResult {
    pub best: EnsembleConfig,
    pub best_kl: f64,
    /// Every evaluated configuration with its mean KL, in search order.
    pub table: Vec<(EnsembleConfig, f64)>,
    pub validation_images: usize,
}

fn same_score(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

/// Lowest score wins; scores equal up to rounding fall back to smaller `n`,
/// then smaller alpha, then smaller sigma.
pub fn select_config(scored: &[(EnsembleConfig, f64)]) -> Result<(EnsembleConfig, f64)> {
    let mut best: Option<(EnsembleConfig, f64)> = None;
    for &(cfg, score) in scored {
        if !score.is_finite() {
            continue;
        }
        let better = match best {
            None => true,
            Some((b, bs)) if same_score(score, bs) => {
                (cfg.n, cfg.alpha, cfg.sigma_smooth)
                    .partial_cmp(&(b.n, b.alpha, b.sigma_smooth))
                    .is_some_and(|o| o.is_lt())
            }
            Some((_, bs)) => score < bs,
        };
        if better {
            best = Some((cfg, score));
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("search space is empty".into()))
}

struct Validation {
    outputs: Vec<Grid>,
    truth: DensityMap,
    prior: Option<std::sync::Arc<DensityMap>>,
    width: usize,
    height: usize,
}

/// Grid search over `space` minimizing mean KL between ground-truth fixation
/// densities and predicted maps on `validation`.
pub fn tune(
    bank: &SceneBank,
    validation: &[CorpusItem],
    source: &FeatureSource,
    prior: Option<&SpatialPrior>,
    space: &SearchSpace,
    use_prior: bool,
    sigma_gt: Option<f64>,
) -> Result<TuneResult> {
    let configs = space.configs(use_prior);
    if configs.is_empty() {
        return Err(Error::InvalidArgument("search space is empty".into()));
    }
    for c in &configs {
        c.validate()?;
    }
    let usable: Vec<&CorpusItem> = validation
        .iter()
        .filter(|it| {
            if it.fixations.is_empty() {
                warn!("skipping validation image {:?}: no fixations", it.id);
            }
            !it.fixations.is_empty()
        })
        .collect();
    if usable.is_empty() {
        return Err(Error::InvalidArgument("validation set has no image with fixations".into()));
    }
    let max_n = configs.iter().map(|c| c.n).max().unwrap_or(1);
    let prepared = usable
        .par_iter()
        .map(|it| {
            let q = PreparedQuery::from_image(source, &it.id, &it.image)?;
            let outputs = unit_outputs(bank, &q, max_n)?.into_iter().map(|(_, g)| g).collect();
            let (w, h) = (q.width, q.height);
            let sigma = sigma_gt.unwrap_or_else(|| default_sigma_gt(w, h));
            Ok(Validation {
                outputs,
                truth: fixations_to_density(&it.fixations, w, h, sigma)?,
                prior: match prior {
                    Some(p) if use_prior => Some(p.render(w, h)?),
                    _ => None,
                },
                width: w,
                height: h,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let table = configs
        .par_iter()
        .map(|cfg| {
            let total = prepared
                .iter()
                .map(|v| {
                    let n = cfg.n.min(v.outputs.len());
                    let (map, _) = compose(
                        &v.outputs[..n],
                        v.width,
                        v.height,
                        v.prior.as_deref(),
                        cfg.alpha,
                        cfg.sigma_smooth,
                    )?;
                    kl(&v.truth, &normalize(&map, Normalization::SumsToOne)?)
                })
                .sum::<Result<f64>>()?;
            Ok((*cfg, total / prepared.len() as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    let (best, best_kl) = select_config(&table)?;
    Ok(TuneResult {
        best,
        best_kl,
        table,
        validation_images: prepared.len(),
    })
}
