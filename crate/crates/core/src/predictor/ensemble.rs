use crate::error::{Error, Result};
use crate::raster::Grid;

/// Combines raw unit outputs on a shared feature grid.
///
/// Per cell, `s = sum_j max(tanh(y_j), 0)`; `s` is divided by its maximum over
/// the grid and raised to `alpha`. If every cell is zero the zero grid is
/// returned. Per-cell terms are summed in sorted order, so the result does not
/// depend on the order of `outputs`.
pub fn aggregate(outputs: &[Grid], alpha: f64) -> Result<Grid> {
    let first = outputs
        .first()
        .ok_or_else(|| Error::InvalidArgument("aggregation needs at least one unit output".into()))?;
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be at least 1, got {alpha}")));
    }
    for g in outputs {
        first.ensure_same_shape(g)?;
    }
    let (w, h) = first.shape();
    let mut terms = vec![0.0; outputs.len()];
    let mut sums = Vec::with_capacity(w * h);
    for i in 0..w * h {
        for (t, g) in terms.iter_mut().zip(outputs) {
            *t = g.data()[i].tanh().max(0.0);
        }
        terms.sort_by(f64::total_cmp);
        sums.push(terms.iter().sum::<f64>());
    }
    let max = sums.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Ok(Grid::zeros(w, h));
    }
    let data = sums.into_iter().map(|s| (s / max).powf(alpha)).collect();
    Grid::from_vec(w, h, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(v: &[f64]) -> Grid {
        Grid::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn non_positive_outputs_give_zero_grid() {
        let out = aggregate(&[grid(&[-1.0, 0.0, -0.3]), grid(&[0.0, -2.0, -5.0])], 6.0).unwrap();
        assert_eq!(out.data(), &[0.0; 3]);
    }

    #[test]
    fn single_unit_alpha_one_is_max_normalized() {
        let out = aggregate(&[grid(&[0.2, -1.0, 0.8])], 1.0).unwrap();
        assert_eq!(out.data()[2], 1.0);
        assert_eq!(out.data()[1], 0.0);
        assert!((out.data()[0] - 0.2f64.tanh() / 0.8f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn two_units_match_hand_evaluation() {
        // cell A: units give 0.5 and 1.0; cell B: 0.25 and 0
        let out = aggregate(&[grid(&[0.5, 0.25]), grid(&[1.0, 0.0])], 2.0).unwrap();
        // tanh(0.5) = 0.46211715726000974, tanh(1) = 0.7615941559557649, tanh(0.25) = 0.24491866240370913
        let a = 0.46211715726000974 + 0.7615941559557649;
        let b = 0.24491866240370913;
        assert!((out.data()[0] - 1.0).abs() < 1e-15);
        assert!((out.data()[1] - (b / a) * (b / a)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(aggregate(&[], 1.0).is_err());
        assert!(aggregate(&[grid(&[1.0])], 0.5).is_err());
        assert!(aggregate(&[grid(&[1.0]), grid(&[1.0, 2.0])], 1.0).is_err());
    }

    proptest! {
        #[test]
        fn order_invariant(vals in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 6), 1..6), alpha in 1.0f64..9.0) {
            let grids: Vec<Grid> = vals.iter().map(|v| grid(v)).collect();
            let mut rev = grids.clone();
            rev.reverse();
            prop_assert_eq!(aggregate(&grids, alpha).unwrap(), aggregate(&rev, alpha).unwrap());
        }

        #[test]
        fn larger_alpha_is_contractive(vals in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 6), 1..4), a1 in 1.0f64..5.0, extra in 0.1f64..5.0) {
            let grids: Vec<Grid> = vals.iter().map(|v| grid(v)).collect();
            let lo = aggregate(&grids, a1).unwrap();
            let hi = aggregate(&grids, a1 + extra).unwrap();
            for (l, h) in lo.data().iter().zip(hi.data()) {
                prop_assert!(h <= l);
                if *l == 0.0 || *l == 1.0 {
                    prop_assert_eq!(h, l);
                }
            }
        }
    }
}
