use ndarray::Array2;

use super::peaks::PeakMask;
use crate::error::{Error, Result};
use crate::frame::is_missing;

fn check_shapes(pred: &Array2<f64>, truth: &Array2<f64>) -> Result<()> {
    if pred.shape() != truth.shape() {
        return Err(Error::SchemaMismatch(format!(
            "prediction shape {:?} vs truth {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    Ok(())
}

/// Mean squared error over all cells with an observed truth value.
pub fn mse(pred: &Array2<f64>, truth: &Array2<f64>) -> Result<f64> {
    check_shapes(pred, truth)?;
    accumulate(pred.iter().zip(truth.iter()))
}

/// MSE restricted to cells whose target time (`origin + 1 + step`) is
/// selected by `mask`. `origins` index into the series the mask was built on.
pub fn mse_masked(
    pred: &Array2<f64>,
    truth: &Array2<f64>,
    origins: &[usize],
    mask: &PeakMask,
) -> Result<f64> {
    check_shapes(pred, truth)?;
    if origins.len() != pred.nrows() {
        return Err(Error::SchemaMismatch(
            "one origin per window required".into(),
        ));
    }
    let cells = origins.iter().enumerate().flat_map(|(w, &o)| {
        (0..pred.ncols())
            .filter(move |s| mask.is_selected(o + 1 + s))
            .map(move |s| (&pred[[w, s]], &truth[[w, s]]))
    });
    accumulate(cells)
}

fn accumulate<'a>(cells: impl Iterator<Item = (&'a f64, &'a f64)>) -> Result<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for (p, t) in cells {
        if is_missing(*t) {
            continue;
        }
        sum += (p - t) * (p - t);
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyEvaluationSet);
    }
    Ok(sum / n as f64)
}
