//! Closed-form ridge regression with an unpenalized intercept.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// `y = x · weights + intercept`, one column of `weights` per output.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    /// `[features, outputs]`
    pub weights: Array2<f64>,
    /// `[outputs]`
    pub intercept: Array1<f64>,
}

impl LinearMap {
    pub fn n_features(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_outputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.intercept.len()
    }

    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        x.dot(&self.weights) + &self.intercept
    }

    pub fn apply_one(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        x.dot(&self.weights) + &self.intercept
    }

    /// Parameters as one flat vector: weights row-major, then intercept.
    pub fn to_flat(&self) -> Vec<f64> {
        self.weights
            .iter()
            .chain(self.intercept.iter())
            .copied()
            .collect()
    }

    pub fn from_flat(features: usize, outputs: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != features * outputs + outputs {
            return Err(Error::SchemaMismatch(format!(
                "{} parameters for a {features}x{outputs} linear map",
                flat.len()
            )));
        }
        let (w, b) = flat.split_at(features * outputs);
        Ok(Self {
            weights: Array2::from_shape_vec((features, outputs), w.to_vec())
                .expect("length checked"),
            intercept: Array1::from_vec(b.to_vec()),
        })
    }
}

/// Smallest acceptable ratio between the extreme Cholesky pivots when no
/// ridge penalty is applied (a condition number of roughly 1e14).
const MIN_PIVOT_RATIO: f64 = 1e-7;

/// Solve `min ||Y - X W - 1 b'||² + λ ||W||²` through the normal equations.
pub fn fit_ridge(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, lambda: f64) -> Result<LinearMap> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ridge penalty {lambda} must be >= 0"
        )));
    }
    let n = x.nrows();
    if n == 0 || y.nrows() != n {
        return Err(Error::InvalidArgument("empty or mismatched design".into()));
    }
    let d = x.ncols();
    let x_mean = x.mean_axis(Axis(0)).expect("non-empty");
    let y_mean = y.mean_axis(Axis(0)).expect("non-empty");
    let xc = &x - &x_mean;
    let yc = &y - &y_mean;

    let mut gram = xc.t().dot(&xc);
    for i in 0..d {
        gram[[i, i]] += lambda;
    }
    let rhs = xc.t().dot(&yc);

    let g = DMatrix::from_row_iterator(d, d, gram.iter().copied());
    let chol = g.cholesky().ok_or_else(|| {
        Error::IllConditionedFit("normal equations are not positive definite".into())
    })?;
    if lambda == 0.0 {
        let diag = chol.l_dirty().diagonal();
        let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        });
        if !(lo > hi * MIN_PIVOT_RATIO) {
            return Err(Error::IllConditionedFit(format!(
                "pivot ratio {:.3e} below {MIN_PIVOT_RATIO:e}",
                lo / hi
            )));
        }
    }
    let b = DMatrix::from_row_iterator(d, y.ncols(), rhs.iter().copied());
    let w = chol.solve(&b);
    let weights = Array2::from_shape_fn((d, y.ncols()), |(i, j)| w[(i, j)]);
    let intercept = &y_mean - &x_mean.dot(&weights);
    Ok(LinearMap { weights, intercept })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn exact_recovery() {
        let x = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, -1.0], [3.0, 5.0]];
        let y = x.dot(&array![[2.0], [-3.0]]) + 0.5;
        let m = fit_ridge(x.view(), y.view(), 0.0).unwrap();
        assert!((m.weights[[0, 0]] - 2.0).abs() < 1e-12);
        assert!((m.weights[[1, 0]] + 3.0).abs() < 1e-12);
        assert!((m.intercept[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn collinear_design_needs_penalty() {
        let x = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0], [4.0, 8.0]];
        let y = array![[1.0], [2.0], [3.0], [4.0]];
        assert!(matches!(
            fit_ridge(x.view(), y.view(), 0.0),
            Err(Error::IllConditionedFit(_))
        ));
        let m = fit_ridge(x.view(), y.view(), 1e-3).unwrap();
        let pred = m.apply(x.view());
        assert!((pred[[3, 0]] - 4.0).abs() < 1e-3);
    }

    #[test]
    fn flat_round_trip() {
        let m = LinearMap {
            weights: array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]],
            intercept: array![7.0, 8.0],
        };
        assert_eq!(LinearMap::from_flat(3, 2, &m.to_flat()).unwrap(), m);
        assert!(LinearMap::from_flat(2, 2, &m.to_flat()).is_err());
    }
}
