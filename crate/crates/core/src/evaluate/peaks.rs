//! Peak-event selection on a target series.
//!
//! `d(t) = |x(t) - x(t-1)|` is smoothed with a rolling mean and the time
//! steps whose smoothed value lies strictly above the `1 - top_fraction`
//! quantile are kept. Index 0 has no difference and is never selected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::is_missing;
use crate::stats::{quantile_sorted, sorted_observed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeakOptions {
    pub window: usize,
    pub top_fraction: f64,
    /// Use `|d|`; signed differences only rank rising edges.
    pub absolute: bool,
    /// Center the rolling window (shrinking at the edges) instead of trailing.
    pub centered: bool,
}

impl Default for PeakOptions {
    fn default() -> Self {
        Self {
            window: 48,
            top_fraction: 0.2,
            absolute: true,
            centered: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakMask {
    pub window: usize,
    pub top_fraction: f64,
    /// One flag per time index of the series.
    pub selected: Vec<bool>,
}

impl PeakMask {
    pub fn is_selected(&self, t: usize) -> bool {
        self.selected.get(t).copied().unwrap_or(false)
    }

    pub fn count(&self) -> usize {
        self.selected.iter().filter(|s| **s).count()
    }

    /// Indices carrying a smoothed difference.
    pub fn valid_len(&self) -> usize {
        self.selected.len().saturating_sub(1)
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / self.valid_len() as f64
    }
}

pub fn peak_mask(target: &[f64], window: usize, top_fraction: f64) -> Result<PeakMask> {
    peak_mask_with(
        target,
        &PeakOptions {
            window,
            top_fraction,
            ..PeakOptions::default()
        },
    )
}

pub fn peak_mask_with(target: &[f64], opts: &PeakOptions) -> Result<PeakMask> {
    let n = target.len();
    if opts.window == 0 {
        return Err(Error::InvalidArgument(
            "peak window must be positive".into(),
        ));
    }
    if !(opts.top_fraction > 0.0 && opts.top_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "top fraction {} outside (0, 1]",
            opts.top_fraction
        )));
    }
    if n <= opts.window + 1 {
        return Err(Error::InvalidArgument(format!(
            "series of {n} steps is too short for a window of {}",
            opts.window
        )));
    }
    let smoothed = smoothed_differences(target, opts);
    let mut selected = vec![false; n];
    if opts.top_fraction >= 1.0 {
        for (t, r) in smoothed.iter().enumerate().skip(1) {
            selected[t] = !is_missing(*r);
        }
    } else {
        let sorted = sorted_observed(&smoothed[1..]);
        if sorted.is_empty() || sorted[0] == sorted[sorted.len() - 1] {
            return Err(Error::NoPeaks);
        }
        let threshold = quantile_sorted(&sorted, 1.0 - opts.top_fraction);
        for (t, r) in smoothed.iter().enumerate().skip(1) {
            selected[t] = *r > threshold;
        }
        if !selected.contains(&true) {
            return Err(Error::NoPeaks);
        }
    }
    Ok(PeakMask {
        window: opts.window,
        top_fraction: opts.top_fraction,
        selected,
    })
}

/// Rolling mean of consecutive differences; entry 0 is `NaN`.
pub fn smoothed_differences(target: &[f64], opts: &PeakOptions) -> Vec<f64> {
    let n = target.len();
    let mut diff = vec![f64::NAN; n];
    for t in 1..n {
        let d = target[t] - target[t - 1];
        diff[t] = if opts.absolute { d.abs() } else { d };
    }
    // prefix sums over observed differences
    let mut sum = vec![0.0; n + 1];
    let mut count = vec![0usize; n + 1];
    for t in 0..n {
        let ok = !is_missing(diff[t]);
        sum[t + 1] = sum[t] + if ok { diff[t] } else { 0.0 };
        count[t + 1] = count[t] + usize::from(ok);
    }
    let (left, right) = if opts.centered {
        (opts.window / 2, opts.window - 1 - opts.window / 2)
    } else {
        (opts.window - 1, 0)
    };
    let mut out = vec![f64::NAN; n];
    for t in 1..n {
        let lo = t.saturating_sub(left).max(1);
        let hi = (t + right).min(n - 1) + 1;
        let c = count[hi] - count[lo];
        if c > 0 {
            out[t] = (sum[hi] - sum[lo]) / c as f64;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_selection() {
        let x: Vec<f64> = (0..100).map(|i| (i as f64 * 0.3).sin()).collect();
        let m = peak_mask(&x, 10, 1.0).unwrap();
        assert_eq!(m.count(), 99);
        assert!(!m.is_selected(0));
    }

    #[test]
    fn ramp_has_no_peaks() {
        let x: Vec<f64> = (0..100).map(|i| 2.0 * i as f64).collect();
        assert!(matches!(peak_mask(&x, 48, 0.2), Err(Error::NoPeaks)));
        assert!(matches!(
            peak_mask(&[1.0; 100], 48, 0.2),
            Err(Error::NoPeaks)
        ));
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            peak_mask(&[0.0; 49], 48, 0.2),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn signed_and_trailing_variants() {
        let mut x = vec![0.0; 60];
        for v in x.iter_mut().skip(30) {
            *v = -5.0;
        }
        // a pure drop has no rising edge to rank
        let opts = PeakOptions {
            window: 4,
            top_fraction: 0.2,
            absolute: false,
            centered: false,
        };
        assert!(matches!(peak_mask_with(&x, &opts), Err(Error::NoPeaks)));
        let m = peak_mask_with(
            &x,
            &PeakOptions {
                absolute: true,
                ..opts
            },
        )
        .unwrap();
        assert!((30..34).all(|t| m.is_selected(t)));
        assert_eq!(m.count(), 4);
    }
}
