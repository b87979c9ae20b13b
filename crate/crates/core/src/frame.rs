//! Uniformly sampled multichannel time series.
//!
//! Timestamps are implicit (`start + i * step`). Missing cells hold `NaN`,
//! which is the only non-finite value a frame may contain.

use std::collections::HashSet;
use std::ops::Range;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marker stored in missing cells.
pub const MISSING: f64 = f64::NAN;

#[inline]
pub fn is_missing(v: f64) -> bool {
    v.is_nan()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Target,
    PastCovariate,
    FutureCovariate,
    ImputationIndicator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub name: String,
    pub role: Role,
    #[serde(default)]
    pub unit: String,
    /// Data channel an imputation indicator refers to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl ChannelSpec {
    pub fn new(name: impl Into<String>, role: Role) -> Self {
        Self {
            name: name.into(),
            role,
            unit: String::new(),
            source: None,
        }
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = unit.into();
        self
    }

    pub fn indicator_for(channel: &str) -> Self {
        Self {
            name: format!("{channel}__imputed"),
            role: Role::ImputationIndicator,
            unit: String::new(),
            source: Some(channel.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesFrame {
    start: DateTime<Utc>,
    step_hours: u32,
    channels: Vec<ChannelSpec>,
    /// Column-major storage: `data[channel][time]`.
    data: Vec<Vec<f64>>,
    len: usize,
}

impl TimeSeriesFrame {
    pub fn new(
        start: DateTime<Utc>,
        step_hours: u32,
        channels: Vec<ChannelSpec>,
        data: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if step_hours == 0 {
            return Err(Error::InvalidFrame("step must be at least one hour".into()));
        }
        if channels.len() != data.len() {
            return Err(Error::InvalidFrame(format!(
                "{} channel specs for {} columns",
                channels.len(),
                data.len()
            )));
        }
        let len = data.first().map_or(0, Vec::len);
        let frame = Self {
            start,
            step_hours,
            channels,
            data,
            len,
        };
        frame.validate()?;
        Ok(frame)
    }

    fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        for (spec, column) in self.channels.iter().zip(&self.data) {
            if !names.insert(spec.name.as_str()) {
                return Err(Error::InvalidFrame(format!(
                    "duplicate channel `{}`",
                    spec.name
                )));
            }
            if column.len() != self.len {
                return Err(Error::InvalidFrame(format!(
                    "channel `{}` has {} rows, expected {}",
                    spec.name,
                    column.len(),
                    self.len
                )));
            }
            if let Some(v) = column.iter().find(|v| v.is_infinite()) {
                return Err(Error::InvalidReading(format!(
                    "{v} in channel `{}`",
                    spec.name
                )));
            }
        }
        let targets = self
            .channels
            .iter()
            .filter(|c| c.role == Role::Target)
            .count();
        if targets > 1 {
            return Err(Error::InvalidFrame(format!("{targets} target channels")));
        }
        for (spec, column) in self.channels.iter().zip(&self.data) {
            if spec.role != Role::ImputationIndicator {
                continue;
            }
            let source = spec.source.as_deref().ok_or_else(|| {
                Error::InvalidFrame(format!("indicator `{}` has no source channel", spec.name))
            })?;
            match self.channels.iter().find(|c| c.name == source) {
                Some(c) if c.role != Role::ImputationIndicator => {}
                _ => {
                    return Err(Error::InvalidFrame(format!(
                        "indicator `{}` references unknown data channel `{source}`",
                        spec.name
                    )))
                }
            }
            if column.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::InvalidFrame(format!(
                    "indicator `{}` holds values other than 0/1",
                    spec.name
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn step_hours(&self) -> u32 {
        self.step_hours
    }

    pub fn step(&self) -> Duration {
        Duration::hours(i64::from(self.step_hours))
    }

    pub fn time(&self, index: usize) -> DateTime<Utc> {
        self.start + self.step() * index as i32
    }

    /// Timestamp of the last row. Undefined (returns `start`) for empty frames.
    pub fn last_time(&self) -> DateTime<Utc> {
        self.time(self.len.saturating_sub(1))
    }

    /// Number of rows strictly before `t`.
    pub fn rows_before(&self, t: DateTime<Utc>) -> usize {
        if t <= self.start {
            return 0;
        }
        let step = self.step().num_seconds();
        let secs = (t - self.start).num_seconds();
        let rows = (secs + step - 1) / step;
        (rows as usize).min(self.len)
    }

    pub fn channels(&self) -> &[ChannelSpec] {
        &self.channels
    }

    pub fn width(&self) -> usize {
        self.channels.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c.name == name)
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::NoSuchChannel(name.to_string()))
    }

    pub fn column(&self, index: usize) -> &[f64] {
        &self.data[index]
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.index_of(name).map(|i| self.data[i].as_slice())
    }

    pub fn value(&self, channel: usize, time: usize) -> f64 {
        self.data[channel][time]
    }

    pub fn target_index(&self) -> Result<usize> {
        self.channels
            .iter()
            .position(|c| c.role == Role::Target)
            .ok_or_else(|| Error::InvalidFrame("frame has no target channel".into()))
    }

    pub fn target_name(&self) -> Result<&str> {
        Ok(&self.channels[self.target_index()?].name)
    }

    /// Index of the imputation indicator attached to `channel`, if any.
    pub fn indicator_of(&self, channel: &str) -> Option<usize> {
        self.channels.iter().position(|c| {
            c.role == Role::ImputationIndicator && c.source.as_deref() == Some(channel)
        })
    }

    pub fn missing_count(&self, channel: usize) -> usize {
        self.data[channel]
            .iter()
            .filter(|v| is_missing(**v))
            .count()
    }

    pub fn with_column(&self, spec: ChannelSpec, values: Vec<f64>) -> Result<Self> {
        let mut channels = self.channels.clone();
        let mut data = self.data.clone();
        channels.push(spec);
        data.push(values);
        if self.channels.is_empty() {
            return Self::new(self.start, self.step_hours, channels, data);
        }
        if data.last().map(Vec::len) != Some(self.len) {
            return Err(Error::InvalidFrame(
                "appended column has wrong length".into(),
            ));
        }
        Self::new(self.start, self.step_hours, channels, data)
    }

    /// Copy of the frame with one column's values swapped out.
    pub fn with_values(&self, channel: usize, values: Vec<f64>) -> Result<Self> {
        let mut data = self.data.clone();
        data[channel] = values;
        Self::new(self.start, self.step_hours, self.channels.clone(), data)
    }

    /// Copy keeping only the named channels, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let mut channels = Vec::with_capacity(names.len());
        let mut data = Vec::with_capacity(names.len());
        for name in names {
            let i = self.require(name)?;
            channels.push(self.channels[i].clone());
            data.push(self.data[i].clone());
        }
        Self::new(self.start, self.step_hours, channels, data)
    }

    /// Replace channel roles, units and indicator sources from `specs`
    /// (matched by name). Channels not listed keep their current spec.
    pub fn with_specs(&self, specs: &[ChannelSpec]) -> Result<Self> {
        let channels = self
            .channels
            .iter()
            .map(|c| {
                specs
                    .iter()
                    .find(|s| s.name == c.name)
                    .cloned()
                    .unwrap_or_else(|| c.clone())
            })
            .collect();
        Self::new(self.start, self.step_hours, channels, self.data.clone())
    }

    pub fn slice_rows(&self, rows: Range<usize>) -> Self {
        assert!(
            rows.start <= rows.end && rows.end <= self.len,
            "row range out of bounds"
        );
        Self {
            start: self.time(rows.start),
            step_hours: self.step_hours,
            channels: self.channels.clone(),
            data: self.data.iter().map(|c| c[rows.clone()].to_vec()).collect(),
            len: rows.len(),
        }
    }

    /// Row `i` as a vector across channels.
    pub fn row(&self, index: usize) -> Vec<f64> {
        self.data.iter().map(|c| c[index]).collect()
    }

    /// Bitwise equality, treating missing cells as equal.
    pub fn bit_identical(&self, other: &Self) -> bool {
        self.start == other.start
            && self.step_hours == other.step_hours
            && self.channels == other.channels
            && self.len == other.len
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap()
    }

    #[test]
    fn implicit_timestamps() {
        let f = TimeSeriesFrame::new(
            t0(),
            1,
            vec![ChannelSpec::new("lvl", Role::Target)],
            vec![vec![1.0, 2.0, 3.0]],
        )
        .unwrap();
        assert_eq!(
            f.time(2),
            Utc.with_ymd_and_hms(2023, 1, 1, 2, 0, 0).unwrap()
        );
        assert_eq!(f.rows_before(f.time(2)), 2);
        assert_eq!(f.rows_before(f.time(2) + Duration::minutes(1)), 3);
    }

    #[test]
    fn rejects_duplicate_names_and_bad_indicators() {
        let dup = TimeSeriesFrame::new(
            t0(),
            1,
            vec![
                ChannelSpec::new("a", Role::Target),
                ChannelSpec::new("a", Role::PastCovariate),
            ],
            vec![vec![1.0], vec![2.0]],
        );
        assert!(matches!(dup, Err(Error::InvalidFrame(_))));

        let bad = TimeSeriesFrame::new(
            t0(),
            1,
            vec![
                ChannelSpec::new("a", Role::Target),
                ChannelSpec::indicator_for("a"),
            ],
            vec![vec![1.0, 2.0], vec![0.0, 0.5]],
        );
        assert!(matches!(bad, Err(Error::InvalidFrame(_))));

        let orphan = TimeSeriesFrame::new(
            t0(),
            1,
            vec![
                ChannelSpec::new("a", Role::Target),
                ChannelSpec::indicator_for("b"),
            ],
            vec![vec![1.0], vec![0.0]],
        );
        assert!(matches!(orphan, Err(Error::InvalidFrame(_))));
    }

    #[test]
    fn infinite_values_are_not_missing() {
        let r = TimeSeriesFrame::new(
            t0(),
            1,
            vec![ChannelSpec::new("a", Role::Target)],
            vec![vec![1.0, f64::INFINITY]],
        );
        assert!(matches!(r, Err(Error::InvalidReading(_))));
    }
}
