use log::{info, warn};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::{BankEntry, FeatureFingerprint, SceneBank};
use crate::corpus::{seed_for, CorpusItem};
use crate::elm::{train_with, ElmConfig, TrainingSet};
use crate::error::{Error, Result};
use crate::features::{DescriptorWeights, FeatureMap, FeatureSource, Standardization};
use crate::fixation::{default_sigma_gt, fixations_to_density, FixationSet};
use crate::io::{quantize, quantize_all};
use crate::raster::Normalization;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BankConfig {
    pub features: FeatureSource,
    /// Hidden size, base seed, activation and ridge; each unit's seed is derived
    /// from the base seed and its image id.
    pub elm: ElmConfig,
    pub weights: DescriptorWeights,
    /// Ground-truth bandwidth in pixels; `None` uses 3% of the longer image side.
    pub sigma_gt: Option<f64>,
}

/// Fit quality of one unit on its own training image.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UnitResidual {
    pub id: String,
    /// RMS training residual of the stored unit.
    pub unit_rms: f64,
    /// RMS residual of the best constant predictor (the target mean).
    pub constant_rms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BuildSummary {
    pub entries: usize,
    pub skipped: Vec<String>,
    pub descriptor_dim: usize,
    pub feature_dim: usize,
    pub residuals: Vec<UnitResidual>,
}

/// Feature rows (one per cell, row-major) and the max-one ground-truth density
/// sampled bilinearly at each cell center.
pub fn training_set_for(
    features: &FeatureMap,
    fixations: &FixationSet,
    sigma_gt: Option<f64>,
) -> Result<TrainingSet> {
    let (w, h) = (features.source_w(), features.source_h());
    let sigma = sigma_gt.unwrap_or_else(|| default_sigma_gt(w, h));
    let density = fixations_to_density(fixations, w, h, sigma)?.renormalize(Normalization::MaxOne)?;
    let n = features.cells();
    let x = DMatrix::from_row_slice(n, features.dim(), features.data());
    let mut y = DVector::zeros(n);
    for cy in 0..features.grid_h() {
        for cx in 0..features.grid_w() {
            let (px, py) = features.cell_center(cx, cy);
            y[cy * features.grid_w() + cx] = density.grid().sample_bilinear(px, py).clamp(0.0, 1.0);
        }
    }
    TrainingSet::new(x, y)
}

struct Trained {
    entry: BankEntry,
    classemes_len: usize,
    residual: UnitResidual,
}

fn train_one(item: &CorpusItem, cfg: &BankConfig) -> Result<Trained> {
    let features = cfg.features.features(&item.id, &item.image)?;
    if (features.source_w(), features.source_h()) != (item.image.width(), item.image.height()) {
        return Err(Error::InvalidData(format!(
            "features for {:?} describe a {}x{} image, not {}x{}",
            item.id,
            features.source_w(),
            features.source_h(),
            item.image.width(),
            item.image.height()
        )));
    }
    let raw = cfg.features.descriptor(&item.id, &item.image)?;
    let ts = training_set_for(&features, &item.fixations, cfg.sigma_gt)?;
    let unit_cfg = ElmConfig {
        seed: seed_for(cfg.elm.seed, &item.id),
        ..cfg.elm
    };
    let unit = train_with(&ts, &unit_cfg)?.quantized();

    let fit = unit.predict(ts.x())?;
    let n = ts.len() as f64;
    let unit_rms = ((fit - ts.y()).norm_squared() / n).sqrt();
    let mean = ts.y().mean();
    let constant_rms = (ts.y().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();

    Ok(Trained {
        entry: BankEntry {
            id: item.id.clone(),
            raw: quantize_all(&raw.concat()),
            combined: Vec::new(),
            unit,
        },
        classemes_len: raw.classemes.len(),
        residual: UnitResidual {
            id: item.id.clone(),
            unit_rms,
            constant_rms,
        },
    })
}

/// Trains one unit per image with fixations (in parallel on the ambient rayon
/// pool) and standardizes descriptors with bank-wide statistics.
///
/// Images without fixations are skipped with a warning. All stored values are
/// rounded to `f32`, so a saved and reloaded bank predicts bit-identically.
pub fn build_bank(corpus: &[CorpusItem], cfg: &BankConfig) -> Result<(SceneBank, BuildSummary)> {
    let mut skipped = Vec::new();
    let usable: Vec<&CorpusItem> = corpus
        .iter()
        .filter(|item| {
            if item.fixations.is_empty() {
                warn!("skipping {:?}: no fixations", item.id);
                skipped.push(item.id.clone());
                false
            } else {
                true
            }
        })
        .collect();
    if usable.is_empty() {
        return Err(Error::InvalidData("no training image has fixations".into()));
    }

    let trained = usable
        .par_iter()
        .map(|item| train_one(item, cfg))
        .collect::<Result<Vec<_>>>()?;

    let classemes_len = trained[0].classemes_len;
    if let Some(t) = trained.iter().find(|t| t.classemes_len != classemes_len) {
        return Err(Error::InvalidData(format!(
            "descriptor of {:?} has {} classemes, expected {classemes_len}",
            t.entry.id, t.classemes_len
        )));
    }

    let stats = Standardization::fit(trained.iter().map(|t| t.entry.raw.as_slice()))?;
    // fold block weights into the per-dimension scale: w (x - m) / s = (x - m) / (s / w)
    let std = stats
        .std
        .iter()
        .enumerate()
        .map(|(d, s)| {
            let w = if d < classemes_len {
                cfg.weights.classemes
            } else {
                cfg.weights.gist
            };
            quantize(s / w)
        })
        .collect();
    let standardization = Standardization {
        mean: quantize_all(&stats.mean),
        std,
    };

    let fingerprint = Some(FeatureFingerprint {
        scales: match &cfg.features {
            FeatureSource::Standin { scales } => Some(*scales),
            FeatureSource::Ingest { .. } => None,
        },
        stride: match &cfg.features {
            FeatureSource::Standin { .. } => crate::features::STANDIN_STRIDE,
            FeatureSource::Ingest { .. } => 0,
        },
    });

    let mut residuals: Vec<UnitResidual> = trained.iter().map(|t| t.residual.clone()).collect();
    residuals.sort_by(|a, b| a.id.cmp(&b.id));
    let entries = trained.into_iter().map(|t| t.entry).collect();
    let bank = SceneBank::from_parts(entries, standardization, cfg.elm.activation, fingerprint)?;
    info!(
        "built bank: {} entries, descriptor dim {}, feature dim {}",
        bank.len(),
        bank.descriptor_dim(),
        bank.feature_dim()
    );
    let summary = BuildSummary {
        entries: bank.len(),
        skipped,
        descriptor_dim: bank.descriptor_dim(),
        feature_dim: bank.feature_dim(),
        residuals,
    };
    Ok((bank, summary))
}
