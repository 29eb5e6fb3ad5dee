use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use super::{auc_borji, auc_judd, cc, emd, kl, nss_score, sauc, sim, DEFAULT_SPLITS, EMD_MAX_SIDE};
use crate::corpus::seed_for;
use crate::error::{Error, Result};
use crate::fixation::{default_sigma_gt, fixations_to_density, FixationSet};
use crate::raster::{normalize, Grid, Normalization};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Nss,
    Sauc,
    AucJudd,
    AucBorji,
    Sim,
    Cc,
    Kl,
    Emd,
}

impl Metric {
    pub const ALL: [Metric; 8] = [
        Metric::Nss,
        Metric::Sauc,
        Metric::AucJudd,
        Metric::AucBorji,
        Metric::Sim,
        Metric::Cc,
        Metric::Kl,
        Metric::Emd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Nss => "nss",
            Metric::Sauc => "sauc",
            Metric::AucJudd => "auc-judd",
            Metric::AucBorji => "auc-borji",
            Metric::Sim => "sim",
            Metric::Cc => "cc",
            Metric::Kl => "kl",
            Metric::Emd => "emd",
        }
    }

    /// Whether larger scores mean a better prediction.
    pub fn higher_is_better(self) -> bool {
        !matches!(self, Metric::Kl | Metric::Emd)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| {
                let names: Vec<&str> = Metric::ALL.iter().map(|m| m.name()).collect();
                Error::InvalidArgument(format!("unknown metric {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

impl Serialize for Metric {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

/// A predicted map and the fixations it is scored against.
#[derive(Clone, Debug)]
pub struct EvalItem {
    pub id: String,
    pub map: Grid,
    pub fixations: FixationSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EvalOptions {
    pub splits: usize,
    pub seed: u64,
    /// Ground-truth bandwidth for the distribution metrics; `None` uses the default.
    pub sigma_gt: Option<f64>,
    pub emd_max_side: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            splits: DEFAULT_SPLITS,
            seed: 0,
            sigma_gt: None,
            emd_max_side: EMD_MAX_SIDE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImageScores {
    pub image_id: String,
    pub scores: BTreeMap<Metric, f64>,
    /// Set when NSS hit a constant map.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    pub metrics: Vec<Metric>,
    pub images: Vec<ImageScores>,
    pub means: BTreeMap<Metric, f64>,
    pub seed: u64,
    pub splits: usize,
    /// Negatives drawn per split, summed over images, for each sampled metric.
    pub negative_samples: BTreeMap<Metric, usize>,
    pub skipped: Vec<String>,
}

impl MetricReport {
    /// `image_id,metric,score` rows in image then metric order.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::InvalidData(e.to_string());
        w.write_record(["image_id", "metric", "score"]).map_err(io)?;
        for img in &self.images {
            for m in &self.metrics {
                let score = format!("{}", img.scores[m]);
                w.write_record([img.image_id.as_str(), m.name(), score.as_str()]).map_err(io)?;
            }
        }
        w.into_inner().map_err(|e| Error::InvalidData(e.to_string()))
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn mean(&self, metric: Metric) -> Option<f64> {
        self.means.get(&metric).copied()
    }
}

fn score_one(
    item: &EvalItem,
    others: &[FixationSet],
    metrics: &[Metric],
    opts: &EvalOptions,
) -> Result<ImageScores> {
    let (w, h) = item.map.shape();
    let seed = seed_for(opts.seed, &item.id);
    let needs_density = metrics
        .iter()
        .any(|m| matches!(m, Metric::Sim | Metric::Cc | Metric::Kl | Metric::Emd));
    let (truth, model) = if needs_density {
        let sigma = opts.sigma_gt.unwrap_or_else(|| default_sigma_gt(w, h));
        (
            Some(fixations_to_density(&item.fixations, w, h, sigma)?),
            Some(normalize(&item.map, Normalization::SumsToOne)?),
        )
    } else {
        (None, None)
    };
    let mut scores = BTreeMap::new();
    let mut degenerate = false;
    for &m in metrics {
        let score = match m {
            Metric::Nss => {
                let s = nss_score(&item.map, &item.fixations)?;
                degenerate = s.degenerate;
                s.value
            }
            Metric::Sauc => sauc(&item.map, &item.fixations, others, opts.splits, seed)?,
            Metric::AucJudd => auc_judd(&item.map, &item.fixations)?,
            Metric::AucBorji => auc_borji(&item.map, &item.fixations, opts.splits, seed)?,
            Metric::Sim => sim(truth.as_ref().unwrap(), model.as_ref().unwrap())?,
            Metric::Cc => cc(truth.as_ref().unwrap().grid(), &item.map)?,
            Metric::Kl => kl(truth.as_ref().unwrap(), model.as_ref().unwrap())?,
            Metric::Emd => emd(truth.as_ref().unwrap(), model.as_ref().unwrap(), opts.emd_max_side)?,
        };
        if !score.is_finite() {
            return Err(Error::Numerical(format!("{m} for {:?} is not finite", item.id)));
        }
        scores.insert(m, score);
    }
    Ok(ImageScores {
        image_id: item.id.clone(),
        scores,
        degenerate,
    })
}

/// Scores every item with fixations; items without any are skipped with a
/// warning. Seeded metrics use a per-image seed derived from `opts.seed`, so
/// results do not depend on item order or parallelism. The shuffled-AUC pool
/// for an image is the union of every other item's fixations.
pub fn evaluate(items: &[EvalItem], metrics: &[Metric], opts: &EvalOptions) -> Result<MetricReport> {
    if metrics.is_empty() {
        return Err(Error::InvalidArgument("no metrics requested".into()));
    }
    let mut skipped = Vec::new();
    let usable: Vec<&EvalItem> = items
        .iter()
        .filter(|it| {
            if it.fixations.is_empty() {
                warn!("skipping {:?}: no fixations", it.id);
                skipped.push(it.id.clone());
                false
            } else {
                true
            }
        })
        .collect();
    if usable.is_empty() {
        return Err(Error::NoFixations);
    }
    let mut seen = std::collections::HashSet::new();
    let metrics: Vec<Metric> = metrics.iter().copied().filter(|m| seen.insert(*m)).collect();

    let images = usable
        .par_iter()
        .enumerate()
        .map(|(i, item)| {
            let others: Vec<FixationSet> = usable
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, o)| o.fixations.clone())
                .collect();
            score_one(item, &others, &metrics, opts)
        })
        .collect::<Result<Vec<_>>>()?;

    let n = images.len() as f64;
    let means = metrics
        .iter()
        .map(|m| (*m, images.iter().map(|s| s.scores[m]).sum::<f64>() / n))
        .collect();
    let mut negative_samples = BTreeMap::new();
    for &m in &metrics {
        let count: usize = match m {
            Metric::Sauc | Metric::AucBorji => usable.iter().map(|it| it.fixations.len()).sum(),
            Metric::AucJudd => usable
                .iter()
                .map(|it| {
                    let (w, h) = it.map.shape();
                    let fixated: std::collections::HashSet<(u32, u32)> = it
                        .fixations
                        .rescaled(w, h)
                        .points()
                        .iter()
                        .map(|p| (p.x, p.y))
                        .collect();
                    w * h - fixated.len()
                })
                .sum(),
            _ => continue,
        };
        negative_samples.insert(m, count);
    }
    Ok(MetricReport {
        metrics,
        images,
        means,
        seed: opts.seed,
        splits: opts.splits,
        negative_samples,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixation::Fixation;

    fn item(id: &str, pts: &[(u32, u32)]) -> EvalItem {
        let fix = FixationSet::new(id, 24, 18, pts.iter().map(|&(x, y)| Fixation::new(x, y)).collect()).unwrap();
        let map = fixations_to_density(&fix, 24, 18, default_sigma_gt(24, 18))
            .unwrap()
            .renormalize(Normalization::MaxOne)
            .unwrap()
            .into_grid();
        EvalItem {
            id: id.into(),
            map,
            fixations: fix,
        }
    }

    #[test]
    fn ground_truth_maps_score_perfectly() {
        let items = [item("a", &[(3, 3), (20, 10)]), item("b", &[(12, 9)]), item("c", &[(5, 15), (6, 15)])];
        let r = evaluate(&items, &Metric::ALL, &EvalOptions::default()).unwrap();
        assert!(r.mean(Metric::Kl).unwrap().abs() < 1e-9);
        assert!((r.mean(Metric::Sim).unwrap() - 1.0).abs() < 1e-9);
        assert!((r.mean(Metric::Cc).unwrap() - 1.0).abs() < 1e-9);
        assert!(r.mean(Metric::Emd).unwrap().abs() < 1e-9);
        assert!(r.mean(Metric::Nss).unwrap() > 0.0);
        let csv = String::from_utf8(r.to_csv().unwrap()).unwrap();
        assert!(csv.starts_with("image_id,metric,score\n"));
        assert_eq!(csv.lines().count(), 1 + 3 * 8);
        assert!(r.summary_json().contains("\"auc-judd\""));
    }

    #[test]
    fn order_does_not_change_scores() {
        let items = vec![item("a", &[(3, 3)]), item("b", &[(12, 9)]), item("c", &[(5, 15)])];
        let mut rev = items.clone();
        rev.reverse();
        let opts = EvalOptions { splits: 10, ..Default::default() };
        let r1 = evaluate(&items, &[Metric::Sauc, Metric::AucBorji], &opts).unwrap();
        let r2 = evaluate(&rev, &[Metric::Sauc, Metric::AucBorji], &opts).unwrap();
        for a in &r1.images {
            let b = r2.images.iter().find(|b| b.image_id == a.image_id).unwrap();
            assert_eq!(a.scores, b.scores);
        }
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!("auc".parse::<Metric>().is_err());
    }
}
