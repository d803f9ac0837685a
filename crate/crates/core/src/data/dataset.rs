use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDateTime, Utc};

use super::features::FeatureSpec;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub id: String,
    pub timestamps: Vec<DateTime<Utc>>,
    pub values: Vec<f64>,
}

impl Series {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `N` series on one shared, gap-free hourly grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesDataset {
    pub series: Vec<Series>,
    pub frequency: Duration,
    pub features: FeatureSpec,
}

/// Header names of the long-format input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnSpec {
    pub id: String,
    pub timestamp: String,
    pub value: String,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        Self {
            id: "series_id".into(),
            timestamp: "timestamp".into(),
            value: "value".into(),
        }
    }
}

pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(|n| n.and_utc())
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

struct Observation {
    time: DateTime<Utc>,
    value: f64,
    line: u64,
}

/// Load `series_id,timestamp,value` rows, grouping by id in order of first appearance.
///
/// Each series is sorted by time; a single missing hour is filled by linear
/// interpolation, longer gaps are rejected. All series must end up on the
/// same grid.
pub fn load_long_csv(path: &Path, columns: &ColumnSpec) -> Result<TimeSeriesDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let parse_err = |line: u64, detail: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        detail,
    };

    let headers = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(1, format!("missing column '{name}'")))
    };
    let (id_col, ts_col, val_col) = (
        find(&columns.id)?,
        find(&columns.timestamp)?,
        find(&columns.value)?,
    );

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<Observation>> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| {
            record
                .get(i)
                .ok_or_else(|| parse_err(line, format!("missing field {}", i + 1)))
        };
        let id = field(id_col)?.to_string();
        if id.is_empty() {
            return Err(parse_err(line, "empty series id".into()));
        }
        let ts_raw = field(ts_col)?;
        let time = parse_timestamp(ts_raw)
            .ok_or_else(|| parse_err(line, format!("bad timestamp '{ts_raw}'")))?;
        let val_raw = field(val_col)?;
        let value: f64 = val_raw
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| parse_err(line, format!("bad value '{val_raw}'")))?;
        groups
            .entry(id.clone())
            .or_insert_with(|| {
                order.push(id);
                Vec::new()
            })
            .push(Observation { time, value, line });
    }

    let frequency = Duration::hours(1);
    let mut series = Vec::with_capacity(order.len());
    for id in order {
        let mut obs = groups.remove(&id).unwrap_or_default();
        obs.sort_by_key(|o| (o.time, o.line));
        series.push(regularize(&id, &obs, frequency, path)?);
    }
    check_alignment(&series)?;
    Ok(TimeSeriesDataset {
        series,
        frequency,
        features: FeatureSpec::default(),
    })
}

fn regularize(id: &str, obs: &[Observation], step: Duration, path: &Path) -> Result<Series> {
    let mut timestamps = Vec::with_capacity(obs.len());
    let mut values = Vec::with_capacity(obs.len());
    for (k, o) in obs.iter().enumerate() {
        if k > 0 {
            let prev = &obs[k - 1];
            let delta = o.time - prev.time;
            if delta.is_zero() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: o.line,
                    detail: format!(
                        "duplicate timestamp {} for series '{id}' (first at line {})",
                        format_timestamp(&o.time),
                        prev.line
                    ),
                });
            }
            let secs = delta.num_seconds();
            if secs % step.num_seconds() != 0 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: o.line,
                    detail: format!("series '{id}' is not on an hourly grid"),
                });
            }
            let steps = secs / step.num_seconds();
            match steps {
                1 => {}
                2 => {
                    timestamps.push(prev.time + step);
                    values.push(0.5 * (prev.value + o.value));
                }
                _ => {
                    return Err(Error::Gap {
                        series: id.to_string(),
                        missing: steps - 1,
                        at: format_timestamp(&o.time),
                    })
                }
            }
        }
        timestamps.push(o.time);
        values.push(o.value);
    }
    Ok(Series {
        id: id.to_string(),
        timestamps,
        values,
    })
}

fn check_alignment(series: &[Series]) -> Result<()> {
    let Some(first) = series.first() else {
        return Ok(());
    };
    for s in &series[1..] {
        if s.timestamps != first.timestamps {
            return Err(Error::Alignment(format!(
                "series '{}' ({} points from {}) and '{}' ({} points from {}) differ",
                first.id,
                first.len(),
                first.timestamps.first().map(format_timestamp).unwrap_or_default(),
                s.id,
                s.len(),
                s.timestamps.first().map(format_timestamp).unwrap_or_default(),
            )));
        }
    }
    Ok(())
}

impl TimeSeriesDataset {
    pub fn new(series: Vec<Series>) -> Result<Self> {
        check_alignment(&series)?;
        Ok(Self {
            series,
            frequency: Duration::hours(1),
            features: FeatureSpec::default(),
        })
    }

    pub fn num_series(&self) -> usize {
        self.series.len()
    }

    /// Shared series length (0 for an empty dataset).
    pub fn len(&self) -> usize {
        self.series.first().map_or(0, Series::len)
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn timestamps(&self) -> &[DateTime<Utc>] {
        self.series.first().map_or(&[], |s| &s.timestamps)
    }

    pub fn find(&self, id: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.id == id)
    }

    /// Write in the long `series_id,timestamp,value` format.
    pub fn write_long_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "series_id,timestamp,value").map_err(io)?;
        for s in &self.series {
            for (t, v) in s.timestamps.iter().zip(&s.values) {
                writeln!(w, "{},{},{}", s.id, format_timestamp(t), v).map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load_str(body: &str) -> Result<TimeSeriesDataset> {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        load_long_csv(f.path(), &ColumnSpec::default())
    }

    #[test]
    fn two_by_three() {
        let ds = load_str(
            "series_id,timestamp,value\n\
             a,2014-01-01T00:00:00Z,1\n\
             b,2014-01-01T00:00:00Z,4\n\
             a,2014-01-01T02:00:00Z,3\n\
             a,2014-01-01T01:00:00Z,2\n\
             b,2014-01-01T01:00:00Z,5\n\
             b,2014-01-01T02:00:00Z,6\n",
        )
        .unwrap();
        assert_eq!(ds.num_series(), 2);
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.series[0].values, vec![1.0, 2.0, 3.0]);
        assert_eq!(ds.series[1].id, "b");
    }

    #[test]
    fn duplicate_is_parse_error() {
        let err = load_str(
            "series_id,timestamp,value\n\
             a,2014-01-01T00:00:00Z,1\n\
             a,2014-01-01T00:00:00Z,2\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn malformed_value_reports_line() {
        let err = load_str(
            "series_id,timestamp,value\n\
             a,2014-01-01T00:00:00Z,1\n\
             a,2014-01-01T01:00:00Z,abc\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn single_gap_is_interpolated() {
        let ds = load_str(
            "series_id,timestamp,value\n\
             a,2014-01-01T00:00:00Z,1\n\
             a,2014-01-01T02:00:00Z,3\n",
        )
        .unwrap();
        assert_eq!(ds.series[0].values, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn long_gap_rejected() {
        let err = load_str(
            "series_id,timestamp,value\n\
             a,2014-01-01T00:00:00Z,1\n\
             a,2014-01-01T03:00:00Z,3\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Gap { missing: 2, ref series, .. } if series == "a"));
    }

    #[test]
    fn misaligned_series_rejected() {
        let err = load_str(
            "series_id,timestamp,value\n\
             a,2014-01-01T00:00:00Z,1\n\
             b,2014-01-01T01:00:00Z,3\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Alignment(_)));
    }

    #[test]
    fn timestamp_formats() {
        let a = parse_timestamp("2014-01-01T05:00:00Z").unwrap();
        assert_eq!(parse_timestamp("2014-01-01 05:00:00").unwrap(), a);
        assert_eq!(parse_timestamp("2014-01-01T06:00:00+01:00").unwrap(), a);
        assert_eq!(format_timestamp(&a), "2014-01-01T05:00:00Z");
        assert!(parse_timestamp("yesterday").is_none());
    }

    #[test]
    fn write_then_reload_is_identical() {
        let ds = load_str(
            "series_id,timestamp,value\n\
             a,2014-01-01T00:00:00Z,0.1\n\
             a,2014-01-01T01:00:00Z,-2.5e-7\n\
             b,2014-01-01T00:00:00Z,12345.678\n\
             b,2014-01-01T01:00:00Z,3\n",
        )
        .unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        ds.write_long_csv(out.path()).unwrap();
        let again = load_long_csv(out.path(), &ColumnSpec::default()).unwrap();
        assert_eq!(ds, again);
    }
}
