use serde::{Deserialize, Serialize};

use super::{classemes_flip_permutation, gist_flip_permutation, CLASSEMES_DIM};
use crate::error::{Error, Result};

/// Standard deviations below this are treated as zero and clamped to one.
const MIN_STD: f64 = 1e-12;

/// Per-dimension mean and standard deviation of raw concatenated descriptors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    /// Population statistics over a set of raw vectors of equal length.
    pub fn fit<'a>(raw: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let rows: Vec<&[f64]> = raw.into_iter().collect();
        let Some(first) = rows.first() else {
            return Err(Error::InvalidArgument("no descriptors to standardize".into()));
        };
        let dim = first.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: bad.len(),
            });
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in &rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in &rows {
            for ((s, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd < MIN_STD {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Standardization { mean, std })
    }

    /// Zero mean and unit scale: leaves vectors unchanged.
    pub fn identity(dim: usize) -> Self {
        Standardization {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn apply(&self, offset: usize, v: &[f64]) -> Vec<f64> {
        let mean = &self.mean[offset..offset + v.len()];
        let std = &self.std[offset..offset + v.len()];
        v.iter()
            .zip(mean)
            .zip(std)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }
}

/// Relative weights of the classemes and gist blocks in the combined vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescriptorWeights {
    pub classemes: f64,
    pub gist: f64,
}

impl Default for DescriptorWeights {
    fn default() -> Self {
        DescriptorWeights {
            classemes: 1.0,
            gist: 1.0,
        }
    }
}

/// Classemes and gist of one image together with the vector used for retrieval.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneDescriptor {
    pub classemes: Vec<f64>,
    pub gist: Vec<f64>,
    pub combined: Vec<f64>,
}

/// `combined = [w_c * standardized(classemes), w_g * standardized(gist)]`.
pub fn make_descriptor(
    classemes: &[f64],
    gist: &[f64],
    weights: DescriptorWeights,
    stats: &Standardization,
) -> Result<SceneDescriptor> {
    if classemes.is_empty() || gist.is_empty() {
        return Err(Error::InvalidArgument("descriptor blocks must be non-empty".into()));
    }
    if !(weights.classemes > 0.0 && weights.gist > 0.0) {
        return Err(Error::InvalidArgument("descriptor weights must be positive".into()));
    }
    if stats.dim() != classemes.len() + gist.len() {
        return Err(Error::DimensionMismatch {
            expected: stats.dim(),
            actual: classemes.len() + gist.len(),
        });
    }
    if classemes.iter().any(|v| *v < 0.0) {
        return Err(Error::InvalidData("classemes must be non-negative".into()));
    }
    if classemes.iter().chain(gist).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("descriptor"));
    }
    let mut combined: Vec<f64> = stats
        .apply(0, classemes)
        .into_iter()
        .map(|v| weights.classemes * v)
        .collect();
    combined.extend(stats.apply(classemes.len(), gist).into_iter().map(|v| weights.gist * v));
    Ok(SceneDescriptor {
        classemes: classemes.to_vec(),
        gist: gist.to_vec(),
        combined,
    })
}

/// Mirror permutation of a built-in raw descriptor (classemes then gist).
pub fn descriptor_flip_permutation() -> Vec<usize> {
    let mut perm = classemes_flip_permutation();
    perm.extend(gist_flip_permutation().into_iter().map(|p| p + CLASSEMES_DIM));
    perm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_variance_dimensions_vanish() {
        let rows = [vec![0.5, 1.0, 3.0], vec![0.5, 2.0, 3.0], vec![0.5, 3.0, 3.0]];
        let stats = Standardization::fit(rows.iter().map(|r| r.as_slice())).unwrap();
        assert_eq!(stats.std[0], 1.0);
        assert_eq!(stats.std[2], 1.0);
        let d = make_descriptor(&rows[0][..1], &rows[0][1..], DescriptorWeights::default(), &stats)
            .unwrap();
        assert_eq!(d.combined[0], 0.0);
        assert_eq!(d.combined[2], 0.0);
        assert_eq!(d.combined.len(), 3);
    }

    #[test]
    fn gist_weight_scales_gist_block_only() {
        let stats = Standardization::fit([[0.1, 0.2, 5.0, -1.0].as_slice(), &[0.3, 0.4, 1.0, 2.0]])
            .unwrap();
        let c = [0.2, 0.1];
        let g = [3.0, 0.5];
        let one = make_descriptor(&c, &g, DescriptorWeights::default(), &stats).unwrap();
        let two = make_descriptor(
            &c,
            &g,
            DescriptorWeights {
                classemes: 1.0,
                gist: 2.0,
            },
            &stats,
        )
        .unwrap();
        assert_eq!(one.combined[..2], two.combined[..2]);
        for i in 2..4 {
            assert_eq!(two.combined[i], 2.0 * one.combined[i]);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let stats = Standardization::identity(2);
        let w = DescriptorWeights::default();
        assert!(make_descriptor(&[], &[1.0, 2.0], w, &stats).is_err());
        assert!(make_descriptor(&[-0.1], &[1.0], w, &stats).is_err());
        let zero = DescriptorWeights {
            classemes: 0.0,
            gist: 1.0,
        };
        assert!(make_descriptor(&[0.1], &[1.0], zero, &stats).is_err());
    }
}
