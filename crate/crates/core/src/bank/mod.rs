//! The scene bank: one trained unit per training image, keyed by that image's
//! scene descriptor, with nearest-neighbour retrieval in descriptor space.

mod build;
mod file;

pub use build::{build_bank, training_set_for, BankConfig, BuildSummary, UnitResidual};
pub use file::{decode_bank, encode_bank, load_bank, save_bank, BANK_MAGIC, BANK_VERSION};

use std::collections::HashSet;

use crate::elm::{Activation, ElmUnit};
use crate::error::{Error, Result};
use crate::features::{make_descriptor, DescriptorWeights, RawDescriptor, SceneDescriptor, Standardization};

/// One training image's descriptor and unit.
#[derive(Clone, Debug, PartialEq)]
pub struct BankEntry {
    pub id: String,
    /// Raw concatenated classemes and gist, at `f32` precision.
    pub raw: Vec<f64>,
    /// `raw` after the bank's standardization; what retrieval compares.
    pub combined: Vec<f64>,
    pub unit: ElmUnit,
}

/// Feature configuration a bank was built with, when known.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureFingerprint {
    pub scales: Option<usize>,
    pub stride: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneBank {
    entries: Vec<BankEntry>,
    descriptor_dim: usize,
    feature_dim: usize,
    hidden: usize,
    activation: Activation,
    /// Per-dimension mean and scale; the scale folds in the block weights.
    standardization: Standardization,
    fingerprint: Option<FeatureFingerprint>,
}

impl SceneBank {
    /// Assembles a bank, sorting entries by id and checking every invariant.
    /// Entry `combined` vectors are recomputed from `raw`.
    pub fn from_parts(
        mut entries: Vec<BankEntry>,
        standardization: Standardization,
        activation: Activation,
        fingerprint: Option<FeatureFingerprint>,
    ) -> Result<Self> {
        let first = entries.first().ok_or(Error::EmptyBank)?;
        let descriptor_dim = first.raw.len();
        let feature_dim = first.unit.input_dim();
        let hidden = first.unit.hidden();
        if standardization.dim() != descriptor_dim || standardization.std.len() != descriptor_dim {
            return Err(Error::DimensionMismatch {
                expected: descriptor_dim,
                actual: standardization.dim(),
            });
        }
        if standardization.std.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidData("standardization scales must be positive".into()));
        }
        let mut seen = HashSet::new();
        for e in &mut entries {
            if !seen.insert(e.id.clone()) {
                return Err(Error::InvalidData(format!("duplicate bank id {:?}", e.id)));
            }
            if e.raw.len() != descriptor_dim {
                return Err(Error::DimensionMismatch {
                    expected: descriptor_dim,
                    actual: e.raw.len(),
                });
            }
            if e.unit.input_dim() != feature_dim {
                return Err(Error::DimensionMismatch {
                    expected: feature_dim,
                    actual: e.unit.input_dim(),
                });
            }
            if e.unit.hidden() != hidden || e.unit.activation() != activation {
                return Err(Error::InvalidData(format!(
                    "unit {:?} disagrees with the bank's hidden layer shape",
                    e.id
                )));
            }
            if e.raw.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("bank descriptor"));
            }
            e.combined = standardize(&standardization, &e.raw);
        }
        entries.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(SceneBank {
            entries,
            descriptor_dim,
            feature_dim,
            hidden,
            activation,
            standardization,
            fingerprint,
        })
    }

    pub fn entries(&self) -> &[BankEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn descriptor_dim(&self) -> usize {
        self.descriptor_dim
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn standardization(&self) -> &Standardization {
        &self.standardization
    }

    pub fn fingerprint(&self) -> Option<&FeatureFingerprint> {
        self.fingerprint.as_ref()
    }

    pub fn get(&self, id: &str) -> Option<&BankEntry> {
        self.entries
            .binary_search_by(|e| e.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.entries[i])
    }

    /// Standardizes a query's raw descriptor exactly as the stored ones were.
    pub fn describe(&self, raw: &RawDescriptor) -> Result<SceneDescriptor> {
        make_descriptor(
            &raw.classemes,
            &raw.gist,
            DescriptorWeights::default(),
            &self.standardization,
        )
    }

    /// The bank re-expressed in permuted bases: `raw2[d] = raw[descriptor_perm[d]]`
    /// and units rewired for features `x2[c] = x[feature_perm[c]]`.
    ///
    /// Mirroring every training image permutes the built-in features this way,
    /// so this produces the bank of the mirrored corpus.
    pub fn permuted(&self, descriptor_perm: &[usize], feature_perm: &[usize]) -> Result<SceneBank> {
        if descriptor_perm.len() != self.descriptor_dim {
            return Err(Error::DimensionMismatch {
                expected: self.descriptor_dim,
                actual: descriptor_perm.len(),
            });
        }
        if feature_perm.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                actual: feature_perm.len(),
            });
        }
        let gather = |v: &[f64]| descriptor_perm.iter().map(|&p| v[p]).collect::<Vec<_>>();
        let entries = self
            .entries
            .iter()
            .map(|e| BankEntry {
                id: e.id.clone(),
                raw: gather(&e.raw),
                combined: Vec::new(),
                unit: e.unit.with_permuted_inputs(feature_perm),
            })
            .collect();
        let standardization = Standardization {
            mean: gather(&self.standardization.mean),
            std: gather(&self.standardization.std),
        };
        SceneBank::from_parts(entries, standardization, self.activation, self.fingerprint.clone())
    }
}

pub(crate) fn standardize(stats: &Standardization, raw: &[f64]) -> Vec<f64> {
    raw.iter()
        .zip(&stats.mean)
        .zip(&stats.std)
        .map(|((x, m), s)| (x - m) / s)
        .collect()
}

/// Euclidean distance between two combined descriptor vectors.
pub fn descriptor_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

impl SceneDescriptor {
    pub fn distance(&self, other: &SceneDescriptor) -> Result<f64> {
        descriptor_distance(&self.combined, &other.combined)
    }
}

/// A retrieved entry and its distance to the query.
#[derive(Clone, Copy, Debug)]
pub struct Retrieved<'a> {
    pub entry: &'a BankEntry,
    pub distance: f64,
}

/// The `n` entries closest to `query` (fewer if the bank is smaller),
/// ascending by distance with ties broken by id.
pub fn retrieve_top_n<'a>(
    bank: &'a SceneBank,
    query: &[f64],
    n: usize,
) -> Result<Vec<Retrieved<'a>>> {
    if bank.is_empty() {
        return Err(Error::EmptyBank);
    }
    if n == 0 {
        return Err(Error::InvalidArgument("retrieval size must be at least 1".into()));
    }
    let mut scored = bank
        .entries
        .iter()
        .map(|entry| {
            Ok(Retrieved {
                entry,
                distance: descriptor_distance(query, &entry.combined)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then_with(|| a.entry.id.cmp(&b.entry.id))
    });
    scored.truncate(n);
    Ok(scored)
}
