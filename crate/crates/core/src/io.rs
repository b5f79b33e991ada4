//! CSV ingestion of forecast panels and emission of result tables and traces.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{Metric, SummaryRow};
use crate::series::ForecastPanel;

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.display().to_string(),
            source,
        },
        other => Error::Parse {
            path: path.display().to_string(),
            line,
            reason: format!("{other:?}"),
        },
    }
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    for fmt in [
        TIMESTAMP_FORMAT,
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t);
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
}

/// Hour-of-day grouping when consecutive rows are one hour apart at the
/// smallest gap and all timestamps sit on the hour.
fn hourly_groups(ts: &[NaiveDateTime]) -> Option<Vec<u32>> {
    let min_gap = ts.windows(2).map(|w| w[1] - w[0]).min()?;
    let on_hour = ts.iter().all(|t| t.minute() == 0 && t.second() == 0);
    (min_gap == chrono::Duration::hours(1) && on_hour)
        .then(|| ts.iter().map(|t| t.hour()).collect())
}

/// Reads a `timestamp,y,f1,…,fM` file. Hourly panels are grouped by hour
/// of day.
pub fn ingest_panel(path: &Path) -> Result<ForecastPanel> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let parse = |line: usize, reason: String| Error::Parse {
        path: path.display().to_string(),
        line,
        reason,
    };
    let header = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.len() < 3 || &header[0] != "timestamp" || &header[1] != "y" {
        return Err(parse(
            1,
            format!(
                "expected header `timestamp,y,f1,...`, found `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let m = header.len() - 2;
    let (mut ts, mut y, mut rows) = (Vec::new(), Vec::new(), Vec::new());
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != m + 2 {
            return Err(parse(
                line,
                format!("expected {} fields, found {}", m + 2, rec.len()),
            ));
        }
        let t = parse_timestamp(&rec[0])
            .ok_or_else(|| parse(line, format!("bad timestamp `{}`", &rec[0])))?;
        if let Some(prev) = ts.last() {
            if t <= *prev {
                return Err(parse(line, format!("timestamp {t} does not follow {prev}")));
            }
        }
        let num = |i: usize| -> Result<f64> {
            let v: f64 = rec[i].parse().map_err(|_| {
                parse(
                    line,
                    format!("field {} is not a number: `{}`", i + 1, &rec[i]),
                )
            })?;
            if !v.is_finite() {
                return Err(parse(line, format!("field {} is not finite", i + 1)));
            }
            Ok(v)
        };
        ts.push(t);
        y.push(num(1)?);
        rows.push((2..m + 2).map(num).collect::<Result<Vec<f64>>>()?);
    }
    if ts.is_empty() {
        return Err(Error::InvalidPanel(format!(
            "{}: zero rows",
            path.display()
        )));
    }
    let groups = hourly_groups(&ts);
    ForecastPanel::new(ts, y, rows, groups)
}

/// Writes `panel` in the format read by [`ingest_panel`].
pub fn emit_panel(panel: &ForecastPanel, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = vec!["timestamp".to_string(), "y".to_string()];
    header.extend((1..=panel.n_forecasters()).map(|j| format!("f{j}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for t in 0..panel.len() {
        let mut rec = vec![
            panel.timestamps()[t].format(TIMESTAMP_FORMAT).to_string(),
            panel.y()[t].to_string(),
        ];
        rec.extend(panel.row(t).iter().map(f64::to_string));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Serializes `rows` as CSV with a header derived from the row type.
pub fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Error::Serialize(e.to_string()))?;
    out.write_all(b"\n").map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

/// Placeholder for metrics that are undefined for a row.
pub const MISSING: &str = "--";

/// A rendered metrics table: header plus string cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    /// `method` column followed by one column per metric. Standard deviations
    /// go in separate `<metric>_std` columns, present only when some row has
    /// one; `paper_style` instead renders `value (std)` with two decimals.
    pub fn from_summary(rows: &[SummaryRow], metrics: &[Metric], paper_style: bool) -> Self {
        let has_std = rows
            .iter()
            .any(|r| r.cells.iter().any(|(_, c)| c.std.is_some()));
        let mut header = vec!["method".to_string()];
        for m in metrics {
            header.push(m.column().to_string());
            if has_std && !paper_style {
                header.push(format!("{}_std", m.column()));
            }
        }
        let fmt = |v: Option<f64>| v.map_or_else(|| MISSING.to_string(), |v| v.to_string());
        let body = rows
            .iter()
            .map(|r| {
                let mut line = vec![r.label.clone()];
                for m in metrics {
                    let cell = r.get(*m);
                    let (value, std) = (cell.and_then(|c| c.value), cell.and_then(|c| c.std));
                    if paper_style {
                        line.push(match (value, std) {
                            (None, _) => MISSING.to_string(),
                            (Some(v), None) => format!("{v:.2}"),
                            (Some(v), Some(s)) => format!("{v:.2} ({s:.2})"),
                        });
                    } else {
                        line.push(fmt(value));
                        if has_std {
                            line.push(if value.is_some() {
                                fmt(std)
                            } else {
                                MISSING.to_string()
                            });
                        }
                    }
                }
                line
            })
            .collect();
        Self { header, rows: body }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record(&self.header).map_err(|e| csv_err(path, e))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(io_err(path))
    }

    /// One JSON object per row, keyed by column name.
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let objects: Vec<serde_json::Map<String, serde_json::Value>> = self
            .rows
            .iter()
            .map(|r| {
                self.header
                    .iter()
                    .zip(r)
                    .map(|(k, v)| {
                        let value = match v.parse::<f64>() {
                            Ok(x) if x.is_finite() => serde_json::json!(x),
                            _ if v == MISSING => serde_json::Value::Null,
                            _ => serde_json::Value::String(v.clone()),
                        };
                        (k.clone(), value)
                    })
                    .collect()
            })
            .collect();
        write_json(path, &objects)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Cell;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn reads_hourly_panel_with_groups() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "p.csv",
            "timestamp,y,f1,f2,f3\n2024-01-01T00:00:00,1,2,3,4\n2024-01-01T01:00:00,5,6,7,8\n2024-01-01T02:00:00,9,10,11,12\n",
        );
        let panel = ingest_panel(&p).unwrap();
        assert_eq!(panel.n_forecasters(), 3);
        assert_eq!(panel.len(), 3);
        assert_eq!(panel.group_key(), Some(&[0u32, 1, 2][..]));
        assert_eq!(panel.row(1), &[6.0, 7.0, 8.0]);
    }

    #[test]
    fn daily_panel_has_no_groups() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "p.csv",
            "timestamp,y,f1\n2024-01-01,1,2\n2024-01-02,1,2\n",
        );
        assert_eq!(ingest_panel(&p).unwrap().group_key(), None);
    }

    #[test]
    fn rejections_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let dup = write(
            dir.path(),
            "dup.csv",
            "timestamp,y,f1\n2024-01-01T00:00:00,1,2\n2024-01-01T00:00:00,1,2\n",
        );
        match ingest_panel(&dup).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
        let bad = write(
            dir.path(),
            "bad.csv",
            "timestamp,y,f1\n2024-01-01T00:00:00,1,x\n",
        );
        assert!(matches!(
            ingest_panel(&bad).unwrap_err(),
            Error::Parse { line: 2, .. }
        ));
        let missing = write(
            dir.path(),
            "missing.csv",
            "timestamp,y,f1\n2024-01-01T00:00:00,1\n",
        );
        assert!(ingest_panel(&missing).is_err());
        let empty = write(dir.path(), "empty.csv", "timestamp,y,f1\n");
        let msg = ingest_panel(&empty).unwrap_err().to_string();
        assert!(msg.contains("zero rows"), "{msg}");
        let header = write(dir.path(), "header.csv", "time,y,f1\n2024-01-01,1,2\n");
        assert!(ingest_panel(&header).is_err());
        assert!(matches!(
            ingest_panel(&dir.path().join("nope.csv")).unwrap_err(),
            Error::Io { .. }
        ));
    }

    #[test]
    fn table_layouts() {
        let row = |label: &str, std: Option<f64>| SummaryRow {
            label: label.into(),
            cells: vec![
                (
                    Metric::Coverage,
                    Cell {
                        value: Some(80.123),
                        std,
                    },
                ),
                (
                    Metric::Ils,
                    Cell {
                        value: None,
                        std: None,
                    },
                ),
            ],
        };
        let metrics = [Metric::Coverage, Metric::Ils];
        let plain = Table::from_summary(&[row("a", None)], &metrics, false);
        assert_eq!(plain.header, vec!["method", "coverage", "ils_0.10"]);
        assert_eq!(plain.rows[0], vec!["a", "80.123", "--"]);
        let with_std = Table::from_summary(&[row("a", Some(0.5))], &metrics, false);
        assert_eq!(with_std.header.len(), 5);
        assert_eq!(with_std.rows[0], vec!["a", "80.123", "0.5", "--", "--"]);
        let styled = Table::from_summary(&[row("a", Some(0.5))], &metrics, true);
        assert_eq!(styled.rows[0], vec!["a", "80.12 (0.50)", "--"]);
    }

    mod props {
        use super::*;
        use chrono::Duration;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn emit_then_ingest_round_trips(
                rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..40),
                hourly in any::<bool>(),
                start_min in 0i64..1_000_000,
            ) {
                let step = if hourly { Duration::hours(1) } else { Duration::days(1) };
                let base = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap()
                    + Duration::hours(start_min / 60);
                let ts: Vec<_> = (0..rows.len()).map(|i| base + step * i as i32).collect();
                let y: Vec<f64> = rows.iter().map(|r| r[0] * 0.5).collect();
                let groups = if hourly { hourly_groups(&ts) } else { None };
                let panel = ForecastPanel::new(ts, y, rows, groups).unwrap();
                let dir = tempfile::tempdir().unwrap();
                let p = dir.path().join("panel.csv");
                emit_panel(&panel, &p).unwrap();
                let back = ingest_panel(&p).unwrap();
                if panel.len() > 1 {
                    prop_assert_eq!(back, panel);
                } else {
                    prop_assert_eq!(back.y(), panel.y());
                    prop_assert_eq!(back.row(0), panel.row(0));
                }
            }
        }
    }
}
