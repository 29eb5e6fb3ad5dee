use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative singular-value cutoff below which directions are treated as null.
pub const RCOND: f64 = 1e-10;

struct Factored {
    u: DMatrix<f64>,
    s: Vec<f64>,
    v_t: DMatrix<f64>,
}

fn factor(h: &DMatrix<f64>) -> Result<Factored> {
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("hidden matrix"));
    }
    if h.nrows() == 0 || h.ncols() == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    let svd = h
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("singular value decomposition did not converge".into()))?;
    Ok(Factored {
        u: svd.u.expect("requested U"),
        s: svd.singular_values.iter().copied().collect(),
        v_t: svd.v_t.expect("requested V^T"),
    })
}

/// Reciprocal (or ridge-shrunk reciprocal) singular values with the cutoff applied.
fn inverted_spectrum(s: &[f64], ridge: f64) -> Vec<f64> {
    let s_max = s.iter().copied().fold(0.0, f64::max);
    let cutoff = RCOND * s_max;
    s.iter()
        .map(|&sv| {
            if sv > cutoff && sv > 0.0 {
                sv / (sv * sv + ridge)
            } else {
                0.0
            }
        })
        .collect()
}

/// Moore-Penrose pseudoinverse through the thin SVD, dropping singular
/// values below `RCOND * sigma_max`.
pub fn pseudoinverse(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let f = factor(h)?;
    let inv = inverted_spectrum(&f.s, 0.0);
    // V diag(inv) U^T
    let mut v = f.v_t.transpose();
    for (j, mut col) in v.column_iter_mut().enumerate() {
        col *= inv[j];
    }
    Ok(v * f.u.transpose())
}

/// Minimum-norm least-squares solution of `H G = Y`, optionally ridge-shrunk
/// (`ridge = 0` is the plain pseudoinverse solution).
pub fn solve_least_squares(h: &DMatrix<f64>, y: &DMatrix<f64>, ridge: f64) -> Result<DMatrix<f64>> {
    if h.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch {
            expected: h.nrows(),
            actual: y.nrows(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("targets"));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidArgument(format!("ridge must be non-negative, got {ridge}")));
    }
    let f = factor(h)?;
    let inv = inverted_spectrum(&f.s, ridge);
    // G = V diag(inv) (U^T Y)
    let mut projected = f.u.transpose() * y;
    for (i, mut row) in projected.row_iter_mut().enumerate() {
        row *= inv[i];
    }
    Ok(f.v_t.transpose() * projected)
}
