//! Resampling, gap filling, chronological splits and the local-mode
//! placeholder covariate.

use std::collections::HashMap;

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{is_missing, ChannelSpec, Role, TimeSeriesFrame, MISSING};

pub const PLACEHOLDER_SUFFIX: &str = "__placeholder";

const HOUR_MS: i64 = 3_600_000;

/// One raw, irregularly timed sensor reading.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: DateTime<Utc>,
    pub channel: String,
    pub value: f64,
}

impl Event {
    pub fn new(time: DateTime<Utc>, channel: impl Into<String>, value: f64) -> Self {
        Self {
            time,
            channel: channel.into(),
            value,
        }
    }
}

/// Index of the full hour nearest to `t`; the window is `[h - 30min, h + 30min)`.
fn nearest_hour(t: DateTime<Utc>) -> i64 {
    (t.timestamp_millis() + HOUR_MS / 2).div_euclid(HOUR_MS)
}

/// Average raw events onto an hourly grid.
///
/// Every event is assigned to its nearest full hour and each cell is the
/// mean of the events assigned to it. Hours without events are missing.
/// Channels appear in order of first occurrence and are tagged as past
/// covariates; apply a schema afterwards to assign roles.
pub fn resample_hourly(events: &[Event]) -> Result<TimeSeriesFrame> {
    if events.is_empty() {
        return Err(Error::NoData);
    }
    if let Some(e) = events.iter().find(|e| !e.value.is_finite()) {
        return Err(Error::InvalidReading(format!(
            "{} at {} in `{}`",
            e.value, e.time, e.channel
        )));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut slot: HashMap<&str, usize> = HashMap::new();
    for e in events {
        slot.entry(e.channel.as_str()).or_insert_with(|| {
            order.push(e.channel.as_str());
            order.len() - 1
        });
    }
    let first = events.iter().map(|e| nearest_hour(e.time)).min().unwrap();
    let last = events.iter().map(|e| nearest_hour(e.time)).max().unwrap();
    let len = (last - first + 1) as usize;

    let mut sums = vec![vec![0.0; len]; order.len()];
    let mut counts = vec![vec![0u32; len]; order.len()];
    for e in events {
        let c = slot[e.channel.as_str()];
        let t = (nearest_hour(e.time) - first) as usize;
        sums[c][t] += e.value;
        counts[c][t] += 1;
    }
    let data = sums
        .into_iter()
        .zip(counts)
        .map(|(s, n)| {
            s.into_iter()
                .zip(n)
                .map(|(s, n)| if n == 0 { MISSING } else { s / f64::from(n) })
                .collect()
        })
        .collect();
    let start = Utc
        .timestamp_millis_opt(first * HOUR_MS)
        .single()
        .ok_or_else(|| Error::InvalidReading("timestamp out of range".into()))?;
    let channels = order
        .iter()
        .map(|n| ChannelSpec::new(*n, Role::PastCovariate))
        .collect();
    TimeSeriesFrame::new(start, 1, channels, data)
}

/// Fill gaps linearly and append a `<name>__imputed` indicator per channel.
///
/// Interior gaps are interpolated between the nearest observed neighbours;
/// leading and trailing gaps repeat the nearest observation.
pub fn interpolate_missing(frame: &TimeSeriesFrame, channels: &[&str]) -> Result<TimeSeriesFrame> {
    let mut out = frame.clone();
    for name in channels {
        let idx = frame.require(name)?;
        let (filled, flags) = fill_linear(frame.column(idx))
            .ok_or_else(|| Error::UnderdeterminedChannel(name.to_string()))?;
        out = out.with_values(idx, filled)?;
        out = out.with_column(ChannelSpec::indicator_for(name), flags)?;
    }
    Ok(out)
}

/// Returns `None` when fewer than two cells are observed.
fn fill_linear(values: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let observed: Vec<usize> = (0..values.len())
        .filter(|&i| !is_missing(values[i]))
        .collect();
    if observed.len() < 2 {
        return None;
    }
    let mut filled = values.to_vec();
    let mut flags = vec![0.0; values.len()];
    let first = observed[0];
    let last = *observed.last().unwrap();
    for i in 0..first {
        filled[i] = values[first];
        flags[i] = 1.0;
    }
    for i in last + 1..values.len() {
        filled[i] = values[last];
        flags[i] = 1.0;
    }
    for pair in observed.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let span = (hi - lo) as f64;
        for i in lo + 1..hi {
            let w = (i - lo) as f64 / span;
            filled[i] = values[lo] + (values[hi] - values[lo]) * w;
            flags[i] = 1.0;
        }
    }
    Some((filled, flags))
}

/// Chronological train / validation / test boundaries.
///
/// Train holds rows strictly before `train_end`, validation rows in
/// `[train_end, val_end)`, test the rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChronoSplit {
    pub train_end: DateTime<Utc>,
    pub val_end: DateTime<Utc>,
}

impl ChronoSplit {
    pub fn at_rows(frame: &TimeSeriesFrame, train_rows: usize, val_end_row: usize) -> Self {
        Self {
            train_end: frame.time(train_rows),
            val_end: frame.time(val_end_row),
        }
    }

    /// Boundaries at the given cumulative fractions of the frame length.
    pub fn from_fractions(frame: &TimeSeriesFrame, train: f64, val: f64) -> Result<Self> {
        if !(0.0 < train && train < val && val < 1.0) {
            return Err(Error::SplitOutOfRange(format!(
                "fractions must satisfy 0 < {train} < {val} < 1"
            )));
        }
        let n = frame.len() as f64;
        Ok(Self::at_rows(
            frame,
            (n * train).round() as usize,
            (n * val).round() as usize,
        ))
    }
}

pub struct Segments {
    pub train: TimeSeriesFrame,
    pub val: TimeSeriesFrame,
    pub test: TimeSeriesFrame,
}

pub fn split(frame: &TimeSeriesFrame, at: &ChronoSplit) -> Result<Segments> {
    let (a, b) = split_rows(frame, at)?;
    Ok(Segments {
        train: frame.slice_rows(0..a),
        val: frame.slice_rows(a..b),
        test: frame.slice_rows(b..frame.len()),
    })
}

/// Row boundaries `(train_rows, val_end_row)` of a split.
pub fn split_rows(frame: &TimeSeriesFrame, at: &ChronoSplit) -> Result<(usize, usize)> {
    if frame.is_empty() {
        return Err(Error::SplitOutOfRange("empty frame".into()));
    }
    let ordered =
        frame.start() < at.train_end && at.train_end < at.val_end && at.val_end < frame.last_time();
    if !ordered {
        return Err(Error::SplitOutOfRange(format!(
            "need {} < train_end {} < val_end {} < {}",
            frame.start(),
            at.train_end,
            at.val_end,
            frame.last_time()
        )));
    }
    let a = frame.rows_before(at.train_end);
    let b = frame.rows_before(at.val_end);
    if a == b {
        return Err(Error::SplitOutOfRange("validation segment is empty".into()));
    }
    Ok((a, b))
}

/// Name of the placeholder covariate derived from `target`.
pub fn placeholder_name(target: &str) -> String {
    format!("{target}{PLACEHOLDER_SUFFIX}")
}

/// Append the local-mode future covariate `p(t) = target(t - horizon)`.
///
/// The first `horizon` cells have no source value and repeat the first
/// available one.
pub fn make_placeholder_future(frame: &TimeSeriesFrame, horizon: usize) -> Result<TimeSeriesFrame> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    if horizon >= frame.len() {
        return Err(Error::HorizonTooLong {
            horizon,
            len: frame.len(),
        });
    }
    let target_idx = frame.target_index()?;
    let target = frame.column(target_idx);
    let mut values = vec![MISSING; frame.len()];
    values[horizon..].copy_from_slice(&target[..frame.len() - horizon]);
    if let Some(fill) = values.iter().copied().find(|v| !is_missing(*v)) {
        for v in values.iter_mut().take(horizon) {
            *v = fill;
        }
    }
    let spec = ChannelSpec {
        name: placeholder_name(&frame.channels()[target_idx].name),
        role: Role::FutureCovariate,
        unit: frame.channels()[target_idx].unit.clone(),
        source: None,
    };
    frame.with_column(spec, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Duration;

    fn at(h: u32, m: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2023, 1, 1, h, m, 0).unwrap()
    }

    fn series(values: Vec<f64>) -> TimeSeriesFrame {
        TimeSeriesFrame::new(
            at(0, 0),
            1,
            vec![ChannelSpec::new("lvl", Role::Target)],
            vec![values],
        )
        .unwrap()
    }

    #[test]
    fn resample_uses_nearest_hour() {
        // 00:10 belongs to 00:00, 00:50 to 01:00.
        let f = resample_hourly(&[
            Event::new(at(0, 10), "lvl", 2.0),
            Event::new(at(0, 50), "lvl", 4.0),
        ])
        .unwrap();
        assert_eq!(f.start(), at(0, 0));
        assert_eq!(f.channel("lvl").unwrap(), &[2.0, 4.0]);

        let f = resample_hourly(&[
            Event::new(at(0, 20), "lvl", 2.0),
            Event::new(at(0, 0) - Duration::minutes(20), "lvl", 4.0),
        ])
        .unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f.channel("lvl").unwrap(), &[3.0]);
    }

    #[test]
    fn resample_half_hour_goes_up() {
        let f = resample_hourly(&[
            Event::new(at(0, 0), "a", 1.0),
            Event::new(at(0, 30), "a", 5.0),
        ])
        .unwrap();
        assert_eq!(f.channel("a").unwrap(), &[1.0, 5.0]);
    }

    #[test]
    fn resample_single_reading_and_gaps() {
        let f = resample_hourly(&[
            Event::new(at(5, 0), "lvl", 7.5),
            Event::new(at(2, 0), "rain", 0.0),
        ])
        .unwrap();
        assert_eq!(f.len(), 4);
        let lvl = f.channel("lvl").unwrap();
        assert_eq!(lvl[3], 7.5);
        assert!(lvl[..3].iter().all(|v| is_missing(*v)));
    }

    #[test]
    fn resample_errors() {
        assert!(matches!(resample_hourly(&[]), Err(Error::NoData)));
        let bad = [Event::new(at(0, 0), "a", f64::NAN)];
        assert!(matches!(
            resample_hourly(&bad),
            Err(Error::InvalidReading(_))
        ));
    }

    #[test]
    fn interpolate_midpoint() {
        let f = interpolate_missing(&series(vec![1.0, MISSING, 3.0]), &["lvl"]).unwrap();
        assert_eq!(f.channel("lvl").unwrap(), &[1.0, 2.0, 3.0]);
        assert_eq!(f.channel("lvl__imputed").unwrap(), &[0.0, 1.0, 0.0]);
        assert_eq!(f.channels()[1].source.as_deref(), Some("lvl"));
    }

    #[test]
    fn interpolate_edges_extend_nearest() {
        let f = interpolate_missing(&series(vec![MISSING, 2.0, MISSING, 4.0, MISSING]), &["lvl"])
            .unwrap();
        assert_eq!(f.channel("lvl").unwrap(), &[2.0, 2.0, 3.0, 4.0, 4.0]);
        assert_eq!(
            f.channel("lvl__imputed").unwrap(),
            &[1.0, 0.0, 1.0, 0.0, 1.0]
        );
    }

    #[test]
    fn interpolate_no_gaps_adds_zero_indicator() {
        let src = series(vec![1.0, 5.0, 3.0]);
        let f = interpolate_missing(&src, &["lvl"]).unwrap();
        assert_eq!(f.channel("lvl").unwrap(), src.channel("lvl").unwrap());
        assert_eq!(f.channel("lvl__imputed").unwrap(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn interpolate_underdetermined() {
        let r = interpolate_missing(&series(vec![MISSING, 1.0, MISSING]), &["lvl"]);
        assert!(matches!(r, Err(Error::UnderdeterminedChannel(_))));
    }

    #[test]
    fn split_sizes() {
        let f = series((0..100).map(f64::from).collect());
        let s = split(&f, &ChronoSplit::at_rows(&f, 60, 80)).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (60, 20, 20));
        assert_eq!(s.val.start(), f.time(60));
        assert_eq!(s.test.channel("lvl").unwrap()[0], 80.0);
    }

    #[test]
    fn split_rejects_degenerate_boundaries() {
        let f = series((0..100).map(f64::from).collect());
        let last = ChronoSplit::at_rows(&f, 60, 99);
        assert!(matches!(split(&f, &last), Err(Error::SplitOutOfRange(_))));
        let swapped = ChronoSplit::at_rows(&f, 80, 60);
        assert!(matches!(
            split(&f, &swapped),
            Err(Error::SplitOutOfRange(_))
        ));
        let outside = ChronoSplit {
            train_end: f.time(10),
            val_end: f.time(99) + Duration::hours(5),
        };
        assert!(matches!(
            split(&f, &outside),
            Err(Error::SplitOutOfRange(_))
        ));
    }

    #[test]
    fn placeholder_shift_by_one() {
        let f = make_placeholder_future(&series(vec![1.0, 2.0, 3.0, 4.0]), 1).unwrap();
        let p = f.channel("lvl__placeholder").unwrap();
        assert_eq!(p, &[1.0, 1.0, 2.0, 3.0]);
        assert_eq!(f.channels()[1].role, Role::FutureCovariate);
        assert_eq!(f.channel("lvl").unwrap(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn placeholder_contract() {
        let f = series(vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            make_placeholder_future(&f, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            make_placeholder_future(&f, 3),
            Err(Error::HorizonTooLong { .. })
        ));
    }
}
