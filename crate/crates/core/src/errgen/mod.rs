//! Parametric sensor-error models applied to one channel of a frame.
//!
//! Three kinds are supported: outliers shifted past the Tukey fences,
//! missing cells, and clipping to quantile bounds. Affected cells are
//! placed in contiguous clusters (see [`sample_clusters`]). All statistics
//! are taken from the unperturbed channel, by default the window being
//! corrupted; [`perturb_with_reference`] takes them from another series
//! instead (e.g. the training period).

mod sampling;

use std::io::Write;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{is_missing, TimeSeriesFrame, MISSING};
use crate::rng;
use crate::stats::{quantile_sorted, sorted_observed, FenceStats};

pub use sampling::{runs, sample_clusters, sample_clusters_with, target_count};

pub const DEFAULT_CLUSTER_MEAN_LEN: f64 = 24.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorKind {
    /// Shift by `alpha` times the mean-to-fence distance plus
    /// `N(0, beta * IQR)` noise.
    Outlier {
        alpha: f64,
        beta: f64,
    },
    Missing,
    /// Clamp to the `q_lower` / `q_upper` quantiles.
    Clip {
        q_lower: f64,
        q_upper: f64,
    },
}

impl ErrorKind {
    pub fn label(&self) -> &'static str {
        match self {
            ErrorKind::Outlier { .. } => "outlier",
            ErrorKind::Missing => "missing",
            ErrorKind::Clip { .. } => "clip",
        }
    }

    /// Outlier, missing and clipping errors with the default parameters
    /// (alpha 1.1, beta 0.1, quantile bounds 0.2 / 0.8).
    pub fn default_grid() -> Vec<ErrorKind> {
        vec![
            ErrorKind::Outlier {
                alpha: 1.1,
                beta: 0.1,
            },
            ErrorKind::Missing,
            ErrorKind::Clip {
                q_lower: 0.2,
                q_upper: 0.8,
            },
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSpec {
    #[serde(flatten)]
    pub kind: ErrorKind,
    pub rate: f64,
    #[serde(default = "default_cluster_len")]
    pub cluster_mean_len: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_cluster_len() -> f64 {
    DEFAULT_CLUSTER_MEAN_LEN
}

impl ErrorSpec {
    pub fn new(kind: ErrorKind, rate: f64, seed: u64) -> Self {
        Self {
            kind,
            rate,
            cluster_mean_len: DEFAULT_CLUSTER_MEAN_LEN,
            seed,
        }
    }

    pub fn with_cluster_mean_len(mut self, len: f64) -> Self {
        self.cluster_mean_len = len;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(Error::InvalidArgument(format!(
                "error rate {} outside [0, 1]",
                self.rate
            )));
        }
        if !(self.cluster_mean_len >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "cluster mean length {} below 1",
                self.cluster_mean_len
            )));
        }
        match self.kind {
            ErrorKind::Outlier { alpha, beta } => {
                if !(alpha.is_finite() && beta.is_finite() && beta >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "outlier parameters alpha {alpha}, beta {beta}"
                    )));
                }
            }
            ErrorKind::Clip { q_lower, q_upper } => {
                if !(0.0 <= q_lower && q_lower < q_upper && q_upper <= 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "clip quantiles ({q_lower}, {q_upper})"
                    )));
                }
            }
            ErrorKind::Missing => {}
        }
        Ok(())
    }

    /// Cell placement for a channel of length `n`.
    pub fn sample_indices(&self, channel: &str, n: usize) -> Vec<usize> {
        let mut stream = rng::stream(self.seed, &[channel, self.kind.label(), "placement"]);
        sample_clusters_with(n, self.rate, self.cluster_mean_len, &mut stream)
    }
}

/// Cells targeted and actually changed by one perturbation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorMask {
    pub channel: String,
    /// Series length the indices refer to.
    pub len: usize,
    pub indices: Vec<usize>,
    pub effective_indices: Vec<usize>,
}

impl ErrorMask {
    pub fn requested_rate(&self) -> f64 {
        ratio(self.indices.len(), self.len)
    }

    pub fn effective_rate(&self) -> f64 {
        ratio(self.effective_indices.len(), self.len)
    }

    /// Share of the targeted cells of `perturbed` that lie outside
    /// `fences`. With outlier noise (`beta > 0`) a shifted value can land
    /// back inside; this measures how often it did. NaN for an empty mask.
    pub fn out_of_fence_fraction(&self, perturbed: &[f64], fences: &FenceStats) -> f64 {
        if self.indices.is_empty() {
            return f64::NAN;
        }
        let outside = self
            .indices
            .iter()
            .filter(|&&i| fences.is_outlier(perturbed[i]))
            .count();
        outside as f64 / self.indices.len() as f64
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Audit export: one `channel,index,effective` line per targeted cell.
pub fn write_masks_csv<W: Write>(masks: &[ErrorMask], writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    wtr.write_record(["channel", "index", "effective"])?;
    for mask in masks {
        let mut effective = mask.effective_indices.iter().peekable();
        for &i in &mask.indices {
            let hit = effective.next_if_eq(&&i).is_some();
            wtr.write_record([
                mask.channel.as_str(),
                &i.to_string(),
                if hit { "1" } else { "0" },
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Quantile bounds used by clipping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipBounds {
    pub lower: f64,
    pub upper: f64,
}

impl ClipBounds {
    pub fn from_values(values: &[f64], q_lower: f64, q_upper: f64) -> Result<Self> {
        let sorted = sorted_observed(values);
        if sorted.is_empty() {
            return Err(Error::DegenerateDistribution(
                "no observations to clip against".into(),
            ));
        }
        Ok(Self {
            lower: quantile_sorted(&sorted, q_lower),
            upper: quantile_sorted(&sorted, q_upper),
        })
    }
}

pub fn fence_stats(frame: &TimeSeriesFrame, channel: &str) -> Result<FenceStats> {
    let idx = frame.require(channel)?;
    FenceStats::from_values(frame.column(idx))
}

fn expect_kind(spec: &ErrorSpec, want: &str) -> Result<()> {
    spec.validate()?;
    if spec.kind.label() != want {
        return Err(Error::InvalidArgument(format!(
            "{} spec passed to the {want} model",
            spec.kind.label()
        )));
    }
    Ok(())
}

pub fn apply_outliers(
    frame: &TimeSeriesFrame,
    channel: &str,
    spec: &ErrorSpec,
    stats: &FenceStats,
) -> Result<(TimeSeriesFrame, ErrorMask)> {
    expect_kind(spec, "outlier")?;
    let ErrorKind::Outlier { alpha, beta } = spec.kind else {
        unreachable!()
    };
    if stats.iqr <= 0.0 {
        return Err(Error::DegenerateDistribution(format!(
            "channel `{channel}` has zero interquartile range"
        )));
    }
    let idx = frame.require(channel)?;
    let indices = spec.sample_indices(channel, frame.len());
    let noise =
        Normal::new(0.0, beta * stats.iqr).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut noise_rng = rng::stream(spec.seed, &[channel, "outlier", "noise"]);

    let mut values = frame.column(idx).to_vec();
    for &i in &indices {
        let eps = noise.sample(&mut noise_rng);
        let x = values[i];
        if is_missing(x) {
            continue;
        }
        values[i] = if x < stats.mean {
            x - alpha * (stats.mean - stats.lower_fence) + eps
        } else {
            x + alpha * (stats.upper_fence - stats.mean) + eps
        };
    }
    let mask = ErrorMask {
        channel: channel.to_string(),
        len: frame.len(),
        effective_indices: indices.clone(),
        indices,
    };
    Ok((frame.with_values(idx, values)?, mask))
}

pub fn apply_missing(
    frame: &TimeSeriesFrame,
    channel: &str,
    spec: &ErrorSpec,
) -> Result<(TimeSeriesFrame, ErrorMask)> {
    expect_kind(spec, "missing")?;
    let idx = frame.require(channel)?;
    let indices = spec.sample_indices(channel, frame.len());
    let mut values = frame.column(idx).to_vec();
    for &i in &indices {
        values[i] = MISSING;
    }
    let mask = ErrorMask {
        channel: channel.to_string(),
        len: frame.len(),
        effective_indices: indices.clone(),
        indices,
    };
    Ok((frame.with_values(idx, values)?, mask))
}

/// Clip with bounds taken from the channel itself.
pub fn apply_clipping(
    frame: &TimeSeriesFrame,
    channel: &str,
    spec: &ErrorSpec,
) -> Result<(TimeSeriesFrame, ErrorMask)> {
    expect_kind(spec, "clip")?;
    let idx = frame.require(channel)?;
    let ErrorKind::Clip { q_lower, q_upper } = spec.kind else {
        unreachable!()
    };
    let bounds = ClipBounds::from_values(frame.column(idx), q_lower, q_upper)?;
    apply_clipping_with(frame, channel, spec, bounds)
}

pub fn apply_clipping_with(
    frame: &TimeSeriesFrame,
    channel: &str,
    spec: &ErrorSpec,
    bounds: ClipBounds,
) -> Result<(TimeSeriesFrame, ErrorMask)> {
    expect_kind(spec, "clip")?;
    let idx = frame.require(channel)?;
    let indices = spec.sample_indices(channel, frame.len());
    let mut values = frame.column(idx).to_vec();
    let mut effective = Vec::new();
    for &i in &indices {
        let x = values[i];
        if x < bounds.lower {
            values[i] = bounds.lower;
            effective.push(i);
        } else if x > bounds.upper {
            values[i] = bounds.upper;
            effective.push(i);
        }
    }
    let mask = ErrorMask {
        channel: channel.to_string(),
        len: frame.len(),
        indices,
        effective_indices: effective,
    };
    Ok((frame.with_values(idx, values)?, mask))
}

/// Corrupt `channel` according to `spec`, with statistics from the channel
/// being corrupted.
pub fn perturb(
    frame: &TimeSeriesFrame,
    channel: &str,
    spec: &ErrorSpec,
) -> Result<(TimeSeriesFrame, ErrorMask)> {
    let idx = frame.require(channel)?;
    perturb_with_reference(frame, channel, spec, frame.column(idx))
}

/// Corrupt `channel` with fences / quantile bounds computed from `reference`.
pub fn perturb_with_reference(
    frame: &TimeSeriesFrame,
    channel: &str,
    spec: &ErrorSpec,
    reference: &[f64],
) -> Result<(TimeSeriesFrame, ErrorMask)> {
    frame.require(channel)?;
    spec.validate()?;
    match spec.kind {
        ErrorKind::Outlier { .. } => {
            let stats = FenceStats::from_values(reference)?;
            apply_outliers(frame, channel, spec, &stats)
        }
        ErrorKind::Missing => apply_missing(frame, channel, spec),
        ErrorKind::Clip { q_lower, q_upper } => {
            let bounds = ClipBounds::from_values(reference, q_lower, q_upper)?;
            apply_clipping_with(frame, channel, spec, bounds)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{ChannelSpec, Role};
    use chrono::{TimeZone, Utc};

    fn frame(a: Vec<f64>) -> TimeSeriesFrame {
        let b: Vec<f64> = a.iter().map(|v| v * 2.0 + 1.0).collect();
        TimeSeriesFrame::new(
            Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap(),
            1,
            vec![
                ChannelSpec::new("a", Role::Target),
                ChannelSpec::new("b", Role::PastCovariate),
            ],
            vec![a, b],
        )
        .unwrap()
    }

    fn outlier(alpha: f64, beta: f64, rate: f64) -> ErrorSpec {
        ErrorSpec::new(ErrorKind::Outlier { alpha, beta }, rate, 11)
    }

    #[test]
    fn outlier_closed_form_lower_branch() {
        let stats = FenceStats {
            q1: 2.0,
            q3: 8.0,
            iqr: 6.0,
            mean: 5.0,
            lower_fence: 0.0,
            upper_fence: 10.0,
        };
        let f = frame(vec![4.0; 10]);
        let (out, mask) = apply_outliers(&f, "a", &outlier(1.0, 0.0, 1.0), &stats).unwrap();
        assert_eq!(mask.indices.len(), 10);
        assert!(out.channel("a").unwrap().iter().all(|&v| v == -1.0));
        assert!(out.channel("a").unwrap()[0] < stats.lower_fence);
    }

    #[test]
    fn outlier_at_mean_takes_upper_branch() {
        let stats = FenceStats {
            q1: 2.0,
            q3: 8.0,
            iqr: 6.0,
            mean: 5.0,
            lower_fence: 0.0,
            upper_fence: 10.0,
        };
        let f = frame(vec![5.0; 4]);
        let (out, _) = apply_outliers(&f, "a", &outlier(1.0, 0.0, 1.0), &stats).unwrap();
        assert_eq!(out.channel("a").unwrap()[0], 10.0);
    }

    #[test]
    fn outlier_rate_zero_is_identity() {
        let f = frame((0..50).map(|i| (i as f64).sin()).collect());
        let (out, mask) = perturb(&f, "a", &outlier(1.1, 0.1, 0.0)).unwrap();
        assert!(out.bit_identical(&f));
        assert!(mask.indices.is_empty() && mask.effective_indices.is_empty());
    }

    #[test]
    fn outlier_needs_spread() {
        let f = frame(vec![3.0; 20]);
        let r = perturb(&f, "a", &outlier(1.1, 0.1, 0.5));
        assert!(matches!(r, Err(Error::DegenerateDistribution(_))));
    }

    #[test]
    fn outlier_guarantee_without_noise() {
        let f = frame((0..400).map(|i| ((i * 37) % 101) as f64).collect());
        let stats = fence_stats(&f, "a").unwrap();
        let (out, mask) = perturb(&f, "a", &outlier(1.1, 0.0, 0.3)).unwrap();
        let col = out.channel("a").unwrap();
        assert!(mask.indices.iter().all(|&i| stats.is_outlier(col[i])));
    }

    #[test]
    fn missing_full_and_half() {
        let f = frame((0..10).map(f64::from).collect());
        let spec = ErrorSpec::new(ErrorKind::Missing, 1.0, 3);
        let (out, _) = apply_missing(&f, "a", &spec).unwrap();
        assert_eq!(out.missing_count(0), 10);
        assert_eq!(out.channel("b"), f.channel("b"));

        let spec = ErrorSpec::new(ErrorKind::Missing, 0.5, 3);
        let (out, mask) = apply_missing(&f, "a", &spec).unwrap();
        assert_eq!(out.missing_count(0), 5);
        assert_eq!(mask.indices, mask.effective_indices);
        let total: usize = runs(&mask.indices).iter().map(|r| r.1).sum();
        assert_eq!(total, 5);
    }

    #[test]
    fn clip_zero_to_nine() {
        let f = frame((0..10).map(f64::from).collect());
        let spec = ErrorSpec::new(
            ErrorKind::Clip {
                q_lower: 0.2,
                q_upper: 0.8,
            },
            1.0,
            0,
        );
        let (out, mask) = apply_clipping(&f, "a", &spec).unwrap();
        // Q(0.2) = 1.8 and Q(0.8) = 7.2 by interpolation between order statistics.
        assert_eq!(
            out.channel("a").unwrap(),
            &[1.8, 1.8, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 7.2, 7.2]
        );
        assert_eq!(mask.effective_indices, vec![0, 1, 8, 9]);
        assert!(mask.effective_rate() <= mask.requested_rate());
    }

    #[test]
    fn clip_constant_channel_changes_nothing() {
        let f = frame(vec![2.0; 30]);
        let spec = ErrorSpec::new(
            ErrorKind::Clip {
                q_lower: 0.2,
                q_upper: 0.8,
            },
            0.5,
            0,
        );
        let (out, mask) = perturb(&f, "a", &spec).unwrap();
        assert!(out.bit_identical(&f));
        assert_eq!(mask.indices.len(), 15);
        assert_eq!(mask.effective_rate(), 0.0);
    }

    #[test]
    fn dispatch_and_determinism() {
        let f = frame((0..200).map(|i| (i as f64 * 0.3).cos()).collect());
        let spec = ErrorSpec::new(ErrorKind::Missing, 0.25, 5);
        let direct = apply_missing(&f, "a", &spec).unwrap();
        let dispatched = perturb(&f, "a", &spec).unwrap();
        assert!(direct.0.bit_identical(&dispatched.0));
        assert_eq!(direct.1, dispatched.1);

        let o = outlier(1.1, 0.1, 0.3);
        let (x1, m1) = perturb(&f, "a", &o).unwrap();
        let (x2, m2) = perturb(&f, "a", &o).unwrap();
        assert!(x1.bit_identical(&x2));
        assert_eq!(m1, m2);
    }

    #[test]
    fn unknown_channel_and_bad_specs() {
        let f = frame(vec![1.0, 2.0, 3.0, 4.0]);
        let spec = ErrorSpec::new(ErrorKind::Missing, 0.5, 0);
        assert!(matches!(
            perturb(&f, "zz", &spec),
            Err(Error::NoSuchChannel(_))
        ));
        let bad = ErrorSpec::new(ErrorKind::Missing, 1.5, 0);
        assert!(matches!(
            perturb(&f, "a", &bad),
            Err(Error::InvalidArgument(_))
        ));
        let bad = ErrorSpec::new(
            ErrorKind::Clip {
                q_lower: 0.8,
                q_upper: 0.2,
            },
            0.5,
            0,
        );
        assert!(matches!(
            perturb(&f, "a", &bad),
            Err(Error::InvalidArgument(_))
        ));
        let wrong = apply_missing(&f, "a", &outlier(1.0, 0.0, 0.5));
        assert!(matches!(wrong, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn mask_csv_marks_effective_cells() {
        let mask = ErrorMask {
            channel: "a".into(),
            len: 10,
            indices: vec![1, 2, 3],
            effective_indices: vec![2],
        };
        let mut out = Vec::new();
        write_masks_csv(&[mask], &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "channel,index,effective\na,1,0\na,2,1\na,3,0\n"
        );
    }

    #[test]
    fn spec_toml_shape() {
        let spec: ErrorSpec =
            toml::from_str("kind = \"outlier\"\nalpha = 1.1\nbeta = 0.1\nrate = 0.2\n").unwrap();
        assert_eq!(
            spec.kind,
            ErrorKind::Outlier {
                alpha: 1.1,
                beta: 0.1
            }
        );
        assert_eq!(spec.cluster_mean_len, 24.0);
    }

    #[test]
    fn out_of_fence_fraction_counts_targeted_cells() {
        let values: Vec<f64> = (0..10).map(f64::from).collect();
        let fences = FenceStats::from_values(&values).unwrap();
        let mask = ErrorMask {
            channel: "x".into(),
            len: 10,
            indices: vec![1, 2, 3, 4],
            effective_indices: vec![1, 2, 3, 4],
        };
        let mut after = values.clone();
        after[1] = 100.0;
        after[2] = -100.0;
        assert_eq!(mask.out_of_fence_fraction(&after, &fences), 0.5);
        let empty = ErrorMask {
            indices: vec![],
            effective_indices: vec![],
            ..mask
        };
        assert!(empty.out_of_fence_fraction(&after, &fences).is_nan());
    }
}
