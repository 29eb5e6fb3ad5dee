use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::fixation_pixels;
use crate::error::{Error, Result};
use crate::fixation::FixationSet;
use crate::raster::Grid;

/// Area under the ROC curve with thresholds at the distinct positive values.
///
/// At threshold `t` the curve passes through (fraction of negatives `>= t`,
/// fraction of positives `>= t`); (0, 0) and (1, 1) close it. Tied scores
/// therefore contribute one half.
pub fn roc_area(positives: &[f64], negatives: &[f64]) -> Result<f64> {
    if positives.is_empty() {
        return Err(Error::NoFixations);
    }
    if negatives.is_empty() {
        return Err(Error::InvalidArgument("empty negative pool".into()));
    }
    let mut pos = positives.to_vec();
    let mut neg = negatives.to_vec();
    pos.sort_by(|a, b| b.total_cmp(a));
    neg.sort_by(|a, b| b.total_cmp(a));
    let (np, nn) = (pos.len() as f64, neg.len() as f64);

    let mut area = 0.0;
    let (mut prev_fp, mut prev_tp) = (0.0, 0.0);
    let (mut ip, mut in_) = (0, 0);
    while ip < pos.len() {
        let t = pos[ip];
        while ip < pos.len() && pos[ip] >= t {
            ip += 1;
        }
        while in_ < neg.len() && neg[in_] >= t {
            in_ += 1;
        }
        let (fp, tp) = (in_ as f64 / nn, ip as f64 / np);
        area += (fp - prev_fp) * (tp + prev_tp) / 2.0;
        (prev_fp, prev_tp) = (fp, tp);
    }
    area += (1.0 - prev_fp) * (1.0 + prev_tp) / 2.0;
    Ok(area)
}

/// ROC area with every non-fixated pixel as a negative.
pub fn auc_judd(map: &Grid, fix: &FixationSet) -> Result<f64> {
    let pixels = fixation_pixels(map, fix)?;
    let mut fixated = vec![false; map.data().len()];
    let positives: Vec<f64> = pixels
        .iter()
        .map(|&i| {
            fixated[i] = true;
            map.data()[i]
        })
        .collect();
    let negatives: Vec<f64> = map
        .data()
        .iter()
        .zip(&fixated)
        .filter(|(_, f)| !**f)
        .map(|(v, _)| *v)
        .collect();
    roc_area(&positives, &negatives)
}

/// ROC area against uniformly drawn pixels, as many per split as there are
/// fixations, averaged over `splits`.
pub fn auc_borji(map: &Grid, fix: &FixationSet, splits: usize, seed: u64) -> Result<f64> {
    check_splits(splits)?;
    let pixels = fixation_pixels(map, fix)?;
    let positives: Vec<f64> = pixels.iter().map(|&i| map.data()[i]).collect();
    let total = map.data().len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    for _ in 0..splits {
        let negatives: Vec<f64> = (0..positives.len())
            .map(|_| map.data()[rng.gen_range(0..total)])
            .collect();
        sum += roc_area(&positives, &negatives)?;
    }
    Ok(sum / splits as f64)
}

/// Shuffled AUC: negatives are fixations from other images, rescaled onto this
/// map and resampled per split to match the number of positives (without
/// replacement when the pool is large enough).
pub fn sauc(map: &Grid, fix: &FixationSet, others: &[FixationSet], splits: usize, seed: u64) -> Result<f64> {
    check_splits(splits)?;
    let pixels = fixation_pixels(map, fix)?;
    let positives: Vec<f64> = pixels.iter().map(|&i| map.data()[i]).collect();
    let pool = negative_pool(map, others)?;
    if pool.is_empty() {
        return Err(Error::InvalidArgument("empty negative pool".into()));
    }
    let k = positives.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    for _ in 0..splits {
        let negatives: Vec<f64> = if pool.len() >= k {
            sample(&mut rng, pool.len(), k).iter().map(|i| pool[i]).collect()
        } else {
            (0..k).map(|_| pool[rng.gen_range(0..pool.len())]).collect()
        };
        sum += roc_area(&positives, &negatives)?;
    }
    Ok(sum / splits as f64)
}

/// Map values at every fixation of `others`, each set rescaled to the map.
pub(crate) fn negative_pool(map: &Grid, others: &[FixationSet]) -> Result<Vec<f64>> {
    let mut pool = Vec::new();
    for set in others {
        if set.is_empty() {
            continue;
        }
        pool.extend(fixation_pixels(map, set)?.into_iter().map(|i| map.data()[i]));
    }
    Ok(pool)
}

fn check_splits(splits: usize) -> Result<()> {
    if splits == 0 {
        return Err(Error::InvalidArgument("at least one split is required".into()));
    }
    Ok(())
}
