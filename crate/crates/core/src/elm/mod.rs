//! Extreme learning machines: single-hidden-layer regressors whose hidden
//! weights are drawn at random from a seed and whose output weights are the
//! least-squares solution `gamma = pinv(H) Y`.
//!
//! ```
//! use iseel::elm::{train, Activation, TrainingSet};
//! use nalgebra::{DMatrix, DVector};
//!
//! let x = DMatrix::from_fn(30, 2, |i, j| ((i * 7 + j * 3) % 11) as f64 / 10.0);
//! let y = DVector::from_fn(30, |i, _| 0.5 + 0.4 * (x[(i, 0)] - x[(i, 1)]));
//! let ts = TrainingSet::new(x.clone(), y.clone()).unwrap();
//! let unit = train(&ts, 20, 7, Activation::Sigmoid).unwrap();
//! let fit = unit.predict(&x).unwrap();
//! assert!((fit - y).amax() < 1e-6);
//! ```

mod pinv;

pub use pinv::{pseudoinverse, solve_least_squares, RCOND};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hidden-node nonlinearity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Tanh => z.tanh(),
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Activation::Sigmoid => 0,
            Activation::Tanh => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Activation::Sigmoid),
            1 => Ok(Activation::Tanh),
            other => Err(Error::InvalidData(format!("unknown activation code {other}"))),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::InvalidArgument(format!("unknown activation {other:?}"))),
        }
    }
}

/// Feature rows and scalar targets in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl TrainingSet {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidArgument("training set is empty".into()));
        }
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                actual: y.len(),
            });
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("training set"));
        }
        if y.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidData("training targets must lie in [0, 1]".into()));
        }
        Ok(TrainingSet { x, y })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Input weights (`hidden x input_dim`) and biases of a hidden layer.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenLayer {
    pub omega: DMatrix<f64>,
    pub bias: DVector<f64>,
}

/// Draws hidden weights and biases i.i.d. uniform on `[-1, 1]` from
/// ChaCha8 seeded with `seed`.
///
/// Values are drawn as `f32` so they survive serialization exactly. Node `j`
/// consumes `input_dim + 1` draws (its weights, then its bias), so a wider
/// layer with the same seed extends a narrower one.
pub fn init_hidden(input_dim: usize, hidden: usize, seed: u64) -> HiddenLayer {
    assert!(input_dim >= 1 && hidden >= 1, "layer dimensions must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut omega = DMatrix::zeros(hidden, input_dim);
    let mut bias = DVector::zeros(hidden);
    for j in 0..hidden {
        for i in 0..input_dim {
            omega[(j, i)] = rng.gen_range(-1.0f32..=1.0) as f64;
        }
        bias[j] = rng.gen_range(-1.0f32..=1.0) as f64;
    }
    HiddenLayer { omega, bias }
}

/// `H[i][j] = f(omega_j . x_i + b_j)`.
pub fn hidden_matrix(
    x: &DMatrix<f64>,
    layer: &HiddenLayer,
    activation: Activation,
) -> Result<DMatrix<f64>> {
    if x.ncols() != layer.omega.ncols() {
        return Err(Error::DimensionMismatch {
            expected: layer.omega.ncols(),
            actual: x.ncols(),
        });
    }
    if layer.bias.len() != layer.omega.nrows() {
        return Err(Error::DimensionMismatch {
            expected: layer.omega.nrows(),
            actual: layer.bias.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("input features"));
    }
    let mut h = x * layer.omega.transpose();
    for (j, mut col) in h.column_iter_mut().enumerate() {
        let b = layer.bias[j];
        col.apply(|z| *z = activation.apply(*z + b));
    }
    Ok(h)
}

/// `Gamma = pinv(H) Y` via the SVD with the [`RCOND`] cutoff.
pub fn solve_output_weights(h: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    solve_least_squares(h, y, 0.0)
}

/// Training knobs beyond the hidden-layer size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElmConfig {
    pub hidden: usize,
    pub seed: u64,
    pub activation: Activation,
    /// Tikhonov term added to each squared singular value; 0 disables it.
    pub ridge: f64,
}

impl Default for ElmConfig {
    fn default() -> Self {
        ElmConfig {
            hidden: 20,
            seed: 0,
            activation: Activation::Sigmoid,
            ridge: 0.0,
        }
    }
}

/// A trained regressor. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct ElmUnit {
    layer: HiddenLayer,
    gamma: DVector<f64>,
    activation: Activation,
    seed: Option<u64>,
}

impl ElmUnit {
    /// Assembles a unit from explicit weights (used when loading from disk).
    pub fn from_parts(
        layer: HiddenLayer,
        gamma: DVector<f64>,
        activation: Activation,
        seed: Option<u64>,
    ) -> Result<Self> {
        let l = layer.omega.nrows();
        if layer.bias.len() != l || gamma.len() != l {
            return Err(Error::DimensionMismatch {
                expected: l,
                actual: if layer.bias.len() != l { layer.bias.len() } else { gamma.len() },
            });
        }
        if layer
            .omega
            .iter()
            .chain(layer.bias.iter())
            .chain(gamma.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("unit weights"));
        }
        Ok(ElmUnit {
            layer,
            gamma,
            activation,
            seed,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer.omega.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.layer.omega.nrows()
    }

    pub fn layer(&self) -> &HiddenLayer {
        &self.layer
    }

    pub fn gamma(&self) -> &DVector<f64> {
        &self.gamma
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Seed the hidden layer was drawn from, when known.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Raw outputs `H(X) Gamma`, one per row of `x`; no clamping.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        let h = hidden_matrix(x, &self.layer, self.activation)?;
        Ok(h * &self.gamma)
    }

    /// Same unit with output weights rounded to `f32`, the on-disk precision.
    pub fn quantized(&self) -> ElmUnit {
        ElmUnit {
            gamma: self.gamma.map(crate::io::quantize),
            ..self.clone()
        }
    }

    /// Same unit with every output weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> ElmUnit {
        ElmUnit {
            gamma: &self.gamma * factor,
            ..self.clone()
        }
    }

    /// Same unit re-wired for permuted inputs: if `x2[c] = x[perm[c]]` then
    /// `permuted.predict(x2)` equals `predict(x)`.
    pub fn with_permuted_inputs(&self, perm: &[usize]) -> ElmUnit {
        assert_eq!(perm.len(), self.input_dim());
        let mut omega = DMatrix::zeros(self.hidden(), self.input_dim());
        for (c, &p) in perm.iter().enumerate() {
            omega.set_column(c, &self.layer.omega.column(p));
        }
        ElmUnit {
            layer: HiddenLayer {
                omega,
                bias: self.layer.bias.clone(),
            },
            ..self.clone()
        }
    }
}

/// Draws a hidden layer from `seed`, then solves the output weights on `ts`.
pub fn train(ts: &TrainingSet, hidden: usize, seed: u64, activation: Activation) -> Result<ElmUnit> {
    train_with(
        ts,
        &ElmConfig {
            hidden,
            seed,
            activation,
            ridge: 0.0,
        },
    )
}

pub fn train_with(ts: &TrainingSet, cfg: &ElmConfig) -> Result<ElmUnit> {
    if cfg.hidden == 0 {
        return Err(Error::InvalidArgument("hidden layer needs at least one node".into()));
    }
    let layer = init_hidden(ts.x.ncols(), cfg.hidden, cfg.seed);
    let h = hidden_matrix(&ts.x, &layer, cfg.activation)?;
    let y = DMatrix::from_column_slice(ts.len(), 1, ts.y.as_slice());
    let gamma = solve_least_squares(&h, &y, cfg.ridge)?;
    ElmUnit::from_parts(
        layer,
        gamma.column(0).into_owned(),
        cfg.activation,
        Some(cfg.seed),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = init_hidden(5, 8, 42);
        assert_eq!(a, init_hidden(5, 8, 42));
        assert!(a.omega.iter().chain(a.bias.iter()).all(|v| (-1.0..=1.0).contains(v)));
        let one = init_hidden(3, 4, 1);
        let two = init_hidden(3, 4, 2);
        assert_ne!(one, two);
    }

    #[test]
    fn wider_layer_extends_narrower() {
        let narrow = init_hidden(4, 5, 9);
        let wide = init_hidden(4, 12, 9);
        assert_eq!(narrow.omega, wide.omega.rows(0, 5).into_owned());
        assert_eq!(narrow.bias, wide.bias.rows(0, 5).into_owned());
    }

    #[test]
    fn zero_layer_activations() {
        let x = DMatrix::from_fn(3, 2, |i, j| (i + j) as f64);
        let layer = HiddenLayer {
            omega: DMatrix::zeros(4, 2),
            bias: DVector::zeros(4),
        };
        let h = hidden_matrix(&x, &layer, Activation::Tanh).unwrap();
        assert!(h.iter().all(|v| *v == 0.0));
        let h = hidden_matrix(&x, &layer, Activation::Sigmoid).unwrap();
        assert!(h.iter().all(|v| *v == 0.5));
    }

    #[test]
    fn tanh_hidden_matrix_matches_reference_values() {
        // tanh(1), tanh(2) to 32 significant digits
        const TANH_1: f64 = 0.761_594_155_955_764_888_119_458_282_604_79;
        const TANH_2: f64 = 0.964_027_580_075_816_883_946_413_724_100_92;
        let x = DMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
        let layer = HiddenLayer {
            omega: DMatrix::from_element(1, 1, 1.0),
            bias: DVector::zeros(1),
        };
        let h = hidden_matrix(&x, &layer, Activation::Tanh).unwrap();
        assert!((h[(0, 0)] - TANH_1).abs() < 1e-12);
        assert!((h[(1, 0)] - TANH_2).abs() < 1e-12);
    }

    #[test]
    fn hidden_matrix_rejects_nan_and_shape() {
        let layer = init_hidden(2, 3, 0);
        let mut x = DMatrix::zeros(2, 2);
        x[(1, 1)] = f64::NAN;
        assert!(hidden_matrix(&x, &layer, Activation::Sigmoid).is_err());
        assert!(hidden_matrix(&DMatrix::zeros(2, 3), &layer, Activation::Sigmoid).is_err());
    }

    #[test]
    fn zero_targets_give_zero_weights() {
        let h = DMatrix::from_fn(6, 3, |i, j| ((i * 3 + j) as f64).cos());
        let g = solve_output_weights(&h, &DMatrix::zeros(6, 1)).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn orthogonal_h_inverts_by_transpose() {
        // rotation composed with a reflection
        let (c, s) = (0.6f64, 0.8f64);
        let h = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, -1.0]);
        let y = DMatrix::from_column_slice(3, 1, &[0.3, -1.2, 2.5]);
        let g = solve_output_weights(&h, &y).unwrap();
        let expected = h.transpose() * &y;
        assert!((g - expected).amax() < 1e-10);
    }

    #[test]
    fn predict_is_linear_in_gamma_and_zero_gamma_predicts_zero() {
        let x = DMatrix::from_fn(10, 3, |i, j| ((i * 5 + j * 2) % 7) as f64 / 6.0);
        let y = DVector::from_fn(10, |i, _| (i % 4) as f64 / 4.0);
        let unit = train(&TrainingSet::new(x.clone(), y).unwrap(), 6, 3, Activation::Sigmoid).unwrap();
        let base = unit.predict(&x).unwrap();
        assert_eq!(unit.scaled(2.0).predict(&x).unwrap(), &base * 2.0);
        assert!(unit.scaled(0.0).predict(&x).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn duplicated_sample_predicts_identically() {
        let row = [0.2, 0.9, 0.4];
        let x = DMatrix::from_fn(5, 3, |_, j| row[j]);
        let ts = TrainingSet::new(
            DMatrix::from_fn(8, 3, |i, j| ((i + 2 * j) % 5) as f64 / 4.0),
            DVector::from_fn(8, |i, _| (i % 3) as f64 / 2.0),
        )
        .unwrap();
        let unit = train(&ts, 4, 11, Activation::Sigmoid).unwrap();
        let p = unit.predict(&x).unwrap();
        assert!(p.iter().all(|v| *v == p[0]));
    }

    #[test]
    fn training_is_deterministic() {
        let ts = TrainingSet::new(
            DMatrix::from_fn(12, 4, |i, j| ((i * 13 + j * 7) % 10) as f64 / 9.0),
            DVector::from_fn(12, |i, _| (i % 5) as f64 / 4.0),
        )
        .unwrap();
        assert_eq!(
            train(&ts, 7, 5, Activation::Sigmoid).unwrap(),
            train(&ts, 7, 5, Activation::Sigmoid).unwrap()
        );
    }

    #[test]
    fn predict_dimension_mismatch() {
        let ts = TrainingSet::new(DMatrix::zeros(3, 2), DVector::zeros(3)).unwrap();
        let unit = train(&ts, 2, 0, Activation::Sigmoid).unwrap();
        assert!(matches!(
            unit.predict(&DMatrix::zeros(1, 3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn training_set_validation() {
        assert!(TrainingSet::new(DMatrix::zeros(2, 1), DVector::from_element(2, 1.5)).is_err());
        assert!(TrainingSet::new(DMatrix::zeros(2, 1), DVector::zeros(3)).is_err());
        assert!(TrainingSet::new(DMatrix::zeros(0, 1), DVector::zeros(0)).is_err());
    }
}
