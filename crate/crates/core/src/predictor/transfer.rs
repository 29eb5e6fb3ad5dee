use rayon::prelude::*;
use serde::Serialize;

use crate::bank::{descriptor_distance, standardize};
use crate::corpus::{seed_for, CorpusItem};
use crate::error::{Error, Result};
use crate::features::{FeatureSource, Standardization};
use crate::fixation::{default_sigma_gt, fixations_to_density, FixationSet};
use crate::metrics::{cc, nss, sauc};
use crate::raster::DensityMap;

/// Mean scores of one pairing rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct TransferScores {
    pub sauc: f64,
    pub cc: f64,
    pub nss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransferPair {
    pub image_id: String,
    pub similar: String,
    pub similar_distance: f64,
    pub dissimilar: String,
    pub dissimilar_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransferReport {
    pub images: usize,
    pub splits: usize,
    pub seed: u64,
    /// Each image predicted by its nearest neighbour's fixation density.
    pub similar: TransferScores,
    /// Each image predicted by its farthest neighbour's fixation density.
    pub dissimilar: TransferScores,
    /// Each image predicted by its own fixation density, for reference.
    pub self_prediction: TransferScores,
    pub pairs: Vec<TransferPair>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransferOptions {
    pub splits: usize,
    pub seed: u64,
    pub sigma_gt: Option<f64>,
}

impl Default for TransferOptions {
    fn default() -> Self {
        TransferOptions {
            splits: crate::metrics::DEFAULT_SPLITS,
            seed: 0,
            sigma_gt: None,
        }
    }
}

fn score(
    predicted: &DensityMap,
    target: &FixationSet,
    target_density: &DensityMap,
    others: &[FixationSet],
    opts: &TransferOptions,
) -> Result<TransferScores> {
    let seed = seed_for(opts.seed, target.image_id());
    Ok(TransferScores {
        sauc: sauc(predicted.grid(), target, others, opts.splits, seed)?,
        cc: cc(predicted.grid(), target_density.grid())?,
        nss: nss(predicted.grid(), target)?,
    })
}

fn mean(scores: &[TransferScores]) -> TransferScores {
    let n = scores.len() as f64;
    TransferScores {
        sauc: scores.iter().map(|s| s.sauc).sum::<f64>() / n,
        cc: scores.iter().map(|s| s.cc).sum::<f64>() / n,
        nss: scores.iter().map(|s| s.nss).sum::<f64>() / n,
    }
}

/// How well one image's fixations predict another's, for most-similar versus
/// most-dissimilar partners under descriptor distance.
///
/// Descriptors are standardized over the corpus. Each image's partner
/// fixation density (rendered at the image's size) is scored against the
/// image's own fixations; the shuffled-AUC negatives are all other images'
/// fixations. Ties in distance go to the smaller id.
pub fn similarity_transfer_experiment(
    corpus: &[CorpusItem],
    source: &FeatureSource,
    opts: &TransferOptions,
) -> Result<TransferReport> {
    let items: Vec<&CorpusItem> = corpus.iter().filter(|c| !c.fixations.is_empty()).collect();
    if items.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "the experiment needs at least 4 images with fixations, got {}",
            items.len()
        )));
    }
    let raw = items
        .par_iter()
        .map(|it| source.descriptor(&it.id, &it.image).map(|d| d.concat()))
        .collect::<Result<Vec<_>>>()?;
    let stats = Standardization::fit(raw.iter().map(|r| r.as_slice()))?;
    let combined: Vec<Vec<f64>> = raw.iter().map(|r| standardize(&stats, r)).collect();

    let densities = items
        .par_iter()
        .map(|it| {
            let (w, h) = (it.image.width(), it.image.height());
            let sigma = opts.sigma_gt.unwrap_or_else(|| default_sigma_gt(w, h));
            fixations_to_density(&it.fixations, w, h, sigma)
        })
        .collect::<Result<Vec<_>>>()?;

    let results = (0..items.len())
        .into_par_iter()
        .map(|i| {
            let mut dists = Vec::with_capacity(items.len() - 1);
            for j in (0..items.len()).filter(|&j| j != i) {
                dists.push((descriptor_distance(&combined[i], &combined[j])?, j));
            }
            let key = |a: &(f64, usize), b: &(f64, usize)| {
                a.0.total_cmp(&b.0).then_with(|| items[a.1].id.cmp(&items[b.1].id))
            };
            let near = *dists.iter().min_by(|a, b| key(a, b)).expect("non-empty");
            let far = *dists
                .iter()
                .min_by(|a, b| b.0.total_cmp(&a.0).then_with(|| items[a.1].id.cmp(&items[b.1].id)))
                .expect("non-empty");

            let target = &items[i].fixations;
            let (w, h) = (items[i].image.width(), items[i].image.height());
            let sigma = opts.sigma_gt.unwrap_or_else(|| default_sigma_gt(w, h));
            let others: Vec<FixationSet> = items
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, it)| it.fixations.clone())
                .collect();
            let render = |j: usize| fixations_to_density(&items[j].fixations, w, h, sigma);
            let similar = score(&render(near.1)?, target, &densities[i], &others, opts)?;
            let dissimilar = score(&render(far.1)?, target, &densities[i], &others, opts)?;
            let own = score(&densities[i], target, &densities[i], &others, opts)?;
            let pair = TransferPair {
                image_id: items[i].id.clone(),
                similar: items[near.1].id.clone(),
                similar_distance: near.0,
                dissimilar: items[far.1].id.clone(),
                dissimilar_distance: far.0,
            };
            Ok((similar, dissimilar, own, pair))
        })
        .collect::<Result<Vec<_>>>()?;

    let similar: Vec<_> = results.iter().map(|r| r.0).collect();
    let dissimilar: Vec<_> = results.iter().map(|r| r.1).collect();
    let own: Vec<_> = results.iter().map(|r| r.2).collect();
    Ok(TransferReport {
        images: items.len(),
        splits: opts.splits,
        seed: opts.seed,
        similar: mean(&similar),
        dissimilar: mean(&dissimilar),
        self_prediction: mean(&own),
        pairs: results.into_iter().map(|r| r.3).collect(),
    })
}
