//! CSV frames and their schema sidecar.
//!
//! The CSV layout is a mandatory header row, a first `timestamp` column in
//! ISO-8601 UTC (`2023-01-01T00:00:00Z`), and one numeric column per
//! channel. Missing cells are empty fields. Values are written with the
//! shortest representation that parses back to the same `f64`, so reading
//! and re-writing a canonical file reproduces it byte for byte.
//!
//! Channel roles live in a TOML sidecar:
//!
//! ```toml
//! version = 1
//! step_hours = 1
//!
//! [[channel]]
//! name = "level"
//! role = "target"
//! unit = "m"
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{is_missing, ChannelSpec, Role, TimeSeriesFrame, MISSING};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_hours: Option<u32>,
    #[serde(default, rename = "channel")]
    pub channels: Vec<ChannelSpec>,
    /// Free-form provenance (config hash, seed, generator version).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl Schema {
    pub fn of(frame: &TimeSeriesFrame) -> Self {
        Self {
            version: SCHEMA_VERSION,
            step_hours: Some(frame.step_hours()),
            channels: frame.channels().to_vec(),
            meta: BTreeMap::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let schema: Schema = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if schema.version != SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "unsupported schema version {}",
                schema.version
            )));
        }
        Ok(schema)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schema is always representable as TOML")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml())?;
        Ok(())
    }
}

pub fn format_timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub fn parse_timestamp(s: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s.trim())
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| Error::Parse(format!("bad timestamp `{s}`: {e}")))
}

pub fn format_value(v: f64) -> String {
    if is_missing(v) {
        String::new()
    } else {
        v.to_string()
    }
}

/// Read a frame. Columns absent from the schema become past covariates.
pub fn read_csv<R: Read>(reader: R, schema: Option<&Schema>) -> Result<TimeSeriesFrame> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("timestamp") {
        return Err(Error::Parse("first column must be `timestamp`".into()));
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut times = Vec::new();
    let mut data = vec![Vec::new(); names.len()];
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != names.len() + 1 {
            return Err(Error::Parse(format!(
                "row {} has {} fields",
                line + 1,
                record.len()
            )));
        }
        times.push(parse_timestamp(&record[0])?);
        for (column, field) in data.iter_mut().zip(record.iter().skip(1)) {
            column.push(parse_cell(field)?);
        }
    }
    let start = *times.first().ok_or(Error::NoData)?;
    let step_hours = match (schema.and_then(|s| s.step_hours), times.get(1)) {
        (Some(h), _) => h,
        (None, Some(t1)) => {
            let secs = (*t1 - start).num_seconds();
            if secs <= 0 || secs % 3600 != 0 {
                return Err(Error::Parse("timestamps are not on an hourly grid".into()));
            }
            (secs / 3600) as u32
        }
        (None, None) => 1,
    };
    let channels = names
        .iter()
        .map(|name| {
            schema
                .and_then(|s| s.channels.iter().find(|c| &c.name == name))
                .cloned()
                .unwrap_or_else(|| ChannelSpec::new(name.clone(), Role::PastCovariate))
        })
        .collect();
    let frame = TimeSeriesFrame::new(start, step_hours, channels, data)?;
    for (i, t) in times.iter().enumerate() {
        if *t != frame.time(i) {
            return Err(Error::Parse(format!(
                "row {} at {} breaks the uniform grid",
                i + 1,
                format_timestamp(*t)
            )));
        }
    }
    Ok(frame)
}

fn parse_cell(field: &str) -> Result<f64> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(MISSING);
    }
    let v: f64 = field
        .parse()
        .map_err(|_| Error::Parse(format!("not a number: `{field}`")))?;
    if !v.is_finite() {
        return Err(Error::InvalidReading(field.to_string()));
    }
    Ok(v)
}

pub fn write_csv<W: Write>(frame: &TimeSeriesFrame, writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let mut header = vec!["timestamp".to_string()];
    header.extend(frame.channels().iter().map(|c| c.name.clone()));
    wtr.write_record(&header)?;
    let mut row = Vec::with_capacity(frame.width() + 1);
    for i in 0..frame.len() {
        row.clear();
        row.push(format_timestamp(frame.time(i)));
        row.extend((0..frame.width()).map(|c| format_value(frame.value(c, i))));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn load_frame(csv_path: &Path, schema_path: Option<&Path>) -> Result<TimeSeriesFrame> {
    let schema = schema_path.map(Schema::load).transpose()?;
    read_csv(fs::File::open(csv_path)?, schema.as_ref())
}

pub fn save_frame(frame: &TimeSeriesFrame, csv_path: &Path, schema_path: &Path) -> Result<()> {
    write_csv(frame, fs::File::create(csv_path)?)?;
    Schema::of(frame).save(schema_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CANONICAL: &str = "timestamp,level,rain\n\
        2023-01-01T00:00:00Z,1.5,0\n\
        2023-01-01T01:00:00Z,,0.25\n\
        2023-01-01T02:00:00Z,-0.000001,1e21\n";

    #[test]
    fn canonical_round_trip_is_byte_identical() {
        let frame = read_csv(CANONICAL.as_bytes(), None).unwrap();
        let mut out = Vec::new();
        write_csv(&frame, &mut out).unwrap();
        // `1e21` is not canonical; everything else must survive verbatim.
        let canonical = CANONICAL.replace("1e21", "1000000000000000000000");
        assert_eq!(String::from_utf8(out.clone()).unwrap(), canonical);

        let again = read_csv(out.as_slice(), None).unwrap();
        let mut out2 = Vec::new();
        write_csv(&again, &mut out2).unwrap();
        assert_eq!(out, out2);
    }

    #[test]
    fn schema_assigns_roles() {
        let schema = Schema::from_toml(
            r#"
            version = 1
            [[channel]]
            name = "level"
            role = "target"
            unit = "m"
            "#,
        )
        .unwrap();
        let frame = read_csv(CANONICAL.as_bytes(), Some(&schema)).unwrap();
        assert_eq!(frame.target_name().unwrap(), "level");
        assert_eq!(frame.channels()[1].role, Role::PastCovariate);
        assert!(is_missing(frame.value(0, 1)));
    }

    #[test]
    fn rejects_gaps_and_non_finite() {
        let gap =
            "timestamp,a\n2023-01-01T00:00:00Z,1\n2023-01-01T01:00:00Z,2\n2023-01-01T03:00:00Z,3\n";
        assert!(matches!(
            read_csv(gap.as_bytes(), None),
            Err(Error::Parse(_))
        ));
        let inf = "timestamp,a\n2023-01-01T00:00:00Z,inf\n";
        assert!(matches!(
            read_csv(inf.as_bytes(), None),
            Err(Error::InvalidReading(_))
        ));
        let empty = "timestamp,a\n";
        assert!(matches!(
            read_csv(empty.as_bytes(), None),
            Err(Error::NoData)
        ));
    }

    #[test]
    fn schema_toml_round_trip() {
        let frame = read_csv(CANONICAL.as_bytes(), None).unwrap();
        let mut schema = Schema::of(&frame);
        schema.meta.insert("seed".into(), "7".into());
        let back = Schema::from_toml(&schema.to_toml()).unwrap();
        assert_eq!(back, schema);
    }
}
