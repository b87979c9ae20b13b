//! Order statistics shared by the error models and the evaluation.
//!
//! Quantiles use linear interpolation between order statistics: for sorted
//! values `x[0..n]` and probability `p`, with `h = (n - 1) p`,
//! `Q(p) = x[floor h] + (h - floor h) (x[floor h + 1] - x[floor h])`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::is_missing;

/// Quantile of an ascending slice. Panics on empty input or `p` outside `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    assert!((0.0..=1.0).contains(&p), "probability {p} outside [0, 1]");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    match sorted.get(lo + 1) {
        Some(&next) if frac > 0.0 => sorted[lo] + frac * (next - sorted[lo]),
        _ => sorted[lo],
    }
}

/// Observed (non-missing) values, sorted ascending.
pub fn sorted_observed(values: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|v| !is_missing(*v)).collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn quantile(values: &[f64], p: f64) -> Option<f64> {
    let sorted = sorted_observed(values);
    (!sorted.is_empty()).then(|| quantile_sorted(&sorted, p))
}

pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

/// `Q(0.75) - Q(0.25)`.
pub fn iqr(values: &[f64]) -> Option<f64> {
    let sorted = sorted_observed(values);
    (!sorted.is_empty()).then(|| quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25))
}

pub fn mean(values: &[f64]) -> Option<f64> {
    let observed: Vec<f64> = values.iter().copied().filter(|v| !is_missing(*v)).collect();
    (!observed.is_empty()).then(|| observed.iter().sum::<f64>() / observed.len() as f64)
}

/// Tukey fences of one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FenceStats {
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub mean: f64,
    pub lower_fence: f64,
    pub upper_fence: f64,
}

impl FenceStats {
    pub const MIN_OBSERVATIONS: usize = 4;

    pub fn from_values(values: &[f64]) -> Result<Self> {
        let sorted = sorted_observed(values);
        if sorted.len() < Self::MIN_OBSERVATIONS {
            return Err(Error::DegenerateDistribution(format!(
                "{} observations, need {}",
                sorted.len(),
                Self::MIN_OBSERVATIONS
            )));
        }
        let q1 = quantile_sorted(&sorted, 0.25);
        let q3 = quantile_sorted(&sorted, 0.75);
        let iqr = q3 - q1;
        Ok(Self {
            q1,
            q3,
            iqr,
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
            lower_fence: q1 - 1.5 * iqr,
            upper_fence: q3 + 1.5 * iqr,
        })
    }

    pub fn is_outlier(&self, x: f64) -> bool {
        x < self.lower_fence || x > self.upper_fence
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::MISSING;

    #[test]
    fn fences_of_one_to_eight() {
        let s = FenceStats::from_values(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
        assert_eq!(s.q1, 2.75);
        assert_eq!(s.q3, 6.25);
        assert_eq!(s.iqr, 3.5);
        assert_eq!((s.lower_fence, s.upper_fence), (-2.5, 11.5));
        assert_eq!(s.mean, 4.5);
    }

    #[test]
    fn constant_series_has_zero_spread() {
        let s = FenceStats::from_values(&[5.0; 4]).unwrap();
        assert_eq!(s.iqr, 0.0);
        assert_eq!((s.lower_fence, s.upper_fence), (5.0, 5.0));
    }

    #[test]
    fn missing_cells_are_ignored() {
        let s = FenceStats::from_values(&[MISSING, 1.0, 2.0, 3.0, 4.0, MISSING]).unwrap();
        assert_eq!(s.q1, 1.75);
        let few = FenceStats::from_values(&[1.0, MISSING, 2.0, 3.0]);
        assert!(matches!(few, Err(Error::DegenerateDistribution(_))));
    }

    #[test]
    fn quantile_endpoints() {
        let v = [3.0, 1.0, 2.0];
        assert_eq!(quantile(&v, 0.0), Some(1.0));
        assert_eq!(quantile(&v, 1.0), Some(3.0));
        assert_eq!(quantile(&v, 0.5), Some(2.0));
        assert_eq!(quantile(&[], 0.5), None);
    }
}
