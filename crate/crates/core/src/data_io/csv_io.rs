use std::fs::File;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use super::{DayMatrix, Record};
use crate::error::{Error, Result};

/// Column names of an input CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub timestamp_column: String,
    pub power_column: String,
    /// Feature columns in order; empty means every other column.
    pub feature_columns: Vec<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            timestamp_column: "timestamp".into(),
            power_column: "power".into(),
            feature_columns: Vec::new(),
        }
    }
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_utc());
    }
    const FORMATS: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ];
    FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

type Columns = (usize, usize, Vec<(usize, String)>);

fn open_reader(path: &Path) -> Result<(csv::Reader<File>, csv::StringRecord)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::Csv {
            path: path.into(),
            message: e.to_string(),
        })?
        .clone();
    Ok((reader, headers))
}

/// Timestamp, power and feature column indices for `schema`.
fn resolve_columns(
    path: &Path,
    headers: &csv::StringRecord,
    schema: &CsvSchema,
) -> Result<Columns> {
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Csv {
                path: path.into(),
                message: format!("missing column '{name}'"),
            })
    };
    let ts_col = find(&schema.timestamp_column)?;
    let power_col = find(&schema.power_column)?;
    let feature_cols = if schema.feature_columns.is_empty() {
        headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != ts_col && *i != power_col)
            .map(|(i, h)| (i, h.to_string()))
            .collect()
    } else {
        schema
            .feature_columns
            .iter()
            .map(|name| Ok((find(name)?, name.clone())))
            .collect::<Result<_>>()?
    };
    Ok((ts_col, power_col, feature_cols))
}

/// Names of the feature columns `schema` selects, read from the header.
pub fn csv_feature_names(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Vec<String>> {
    let path = path.as_ref();
    let (_, headers) = open_reader(path)?;
    let (_, _, cols) = resolve_columns(path, &headers, schema)?;
    Ok(cols.into_iter().map(|(_, name)| name).collect())
}

/// Reads hourly records. Rows are numbered as file lines (header is line 1).
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Vec<Record>> {
    let path = path.as_ref();
    let (mut reader, headers) = open_reader(path)?;
    let (ts_col, power_col, feature_cols) = resolve_columns(path, &headers, schema)?;

    let mut rows: Vec<(usize, Record)> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            path: path.into(),
            row: line,
            message: e.to_string(),
        })?;
        let parse_err = |message: String| Error::Parse {
            path: path.into(),
            row: line,
            message,
        };
        let field = |col: usize| rec.get(col).unwrap_or("");
        let ts = parse_timestamp(field(ts_col))
            .ok_or_else(|| parse_err(format!("unparseable timestamp '{}'", field(ts_col))))?;
        let number = |col: usize, name: &str| -> Result<f64> {
            let raw = field(col);
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(format!("non-numeric value '{raw}' in column '{name}'")))
        };
        let power = number(power_col, &schema.power_column)?;
        let features = feature_cols
            .iter()
            .map(|(c, name)| number(*c, name))
            .collect::<Result<Vec<_>>>()?;
        rows.push((
            line,
            Record {
                timestamp: ts,
                power,
                features,
            },
        ));
    }

    rows.sort_by_key(|(_, r)| r.timestamp);
    for w in rows.windows(2) {
        if w[0].1.timestamp == w[1].1.timestamp {
            let (a, b) = (w[0].0.min(w[1].0), w[0].0.max(w[1].0));
            return Err(Error::Parse {
                path: path.into(),
                row: b,
                message: format!("duplicate timestamp {} (also on row {a})", w[0].1.timestamp),
            });
        }
    }
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

/// Writes days in the input CSV layout (`timestamp,power,f1..fK`), with
/// power already normalized (capacity 1).
pub fn write_days_csv(path: impl AsRef<Path>, days: &[DayMatrix]) -> Result<()> {
    let path = path.as_ref();
    let k = days.first().map_or(0, DayMatrix::n_features);
    let mut out = String::from("timestamp,power");
    for j in 1..=k {
        out.push_str(&format!(",f{j}"));
    }
    out.push('\n');
    for day in days {
        for (d, p) in day.power.iter().enumerate() {
            let ts = day
                .date
                .and_hms_opt(day.hour_start + d as u32, 0, 0)
                .ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "hour {} out of range",
                        day.hour_start as usize + d
                    ))
                })?;
            out.push_str(&ts.format("%Y-%m-%dT%H:%M:%S").to_string());
            out.push_str(&format!(",{p}"));
            for f in &day.features[d] {
                out.push_str(&format!(",{f}"));
            }
            out.push('\n');
        }
    }
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Reads a file written by [`write_days_csv`] back into days.
pub fn read_days_csv(
    path: impl AsRef<Path>,
    hour_start: u32,
    hour_end: u32,
) -> Result<Vec<DayMatrix>> {
    let records = load_csv(path, &CsvSchema::default())?;
    Ok(super::normalize_and_window(&records, 1.0, hour_start, hour_end)?.days)
}

pub(crate) fn on_the_hour(ts: &NaiveDateTime) -> bool {
    ts.minute() == 0 && ts.second() == 0
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn well_formed_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "a.csv",
            "timestamp,power,f1,f2\n2013-06-01T08:00:00Z,3.5,1,2\n2013-06-01T07:00:00,1.0,0.5,0.25\n2013-06-01 09:00,2,0,0\n",
        );
        let recs = load_csv(&p, &CsvSchema::default()).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(
            recs[0].timestamp,
            NaiveDate::from_ymd_opt(2013, 6, 1)
                .unwrap()
                .and_hms_opt(7, 0, 0)
                .unwrap()
        );
        assert_eq!(recs[0].features, vec![0.5, 0.25]);
        assert_eq!(recs[2].power, 2.0);
        assert_eq!(
            csv_feature_names(&p, &CsvSchema::default()).unwrap(),
            ["f1", "f2"]
        );
    }

    #[test]
    fn non_numeric_power_names_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "b.csv",
            "timestamp,power,f1\n2013-06-01T07:00:00,1,0\n2013-06-01T08:00:00,abc,0\n",
        );
        let err = load_csv(&p, &CsvSchema::default()).unwrap_err();
        match err {
            Error::Parse { row, message, .. } => {
                assert_eq!(row, 3);
                assert!(message.contains("abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_timestamp_names_both_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "c.csv",
            "timestamp,power\n2013-06-01T07:00:00,1\n2013-06-01T08:00:00,1\n2013-06-01T07:00:00,2\n",
        );
        let msg = load_csv(&p, &CsvSchema::default()).unwrap_err().to_string();
        assert!(msg.contains("row 4"), "{msg}");
        assert!(msg.contains("row 2"), "{msg}");
    }

    #[test]
    fn missing_column_and_bad_timestamp() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.csv", "time,power\n2013-06-01T07:00:00,1\n");
        assert!(load_csv(&p, &CsvSchema::default())
            .unwrap_err()
            .to_string()
            .contains("missing column 'timestamp'"));
        let q = write(&dir, "e.csv", "timestamp,power\nyesterday,1\n");
        assert!(matches!(
            load_csv(&q, &CsvSchema::default()),
            Err(Error::Parse { row: 2, .. })
        ));
        let schema = CsvSchema {
            feature_columns: vec!["nwp_irradiance".into()],
            ..CsvSchema::default()
        };
        assert_eq!(
            csv_feature_names(&q, &CsvSchema::default()).unwrap(),
            Vec::<String>::new()
        );
        let r = write(
            &dir,
            "f.csv",
            "timestamp,power,f1\n2013-06-01T07:00:00,1,2\n",
        );
        assert!(load_csv(&r, &schema).is_err());
    }
}
