//! CSV readers and writers for price observations and session calendars.
//!
//! Prices: header `timestamp,symbol,price`, one observation per row, rows of
//! different symbols may interleave. Calendar: header `open,close`, one
//! session per row. Timestamps are integer epoch seconds or ISO-8601 (an
//! offset-free ISO timestamp is read as UTC).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};

use super::{PriceSeries, Sample, Session, SessionCalendar, Timestamp};
use crate::error::{Error, Result};
use crate::numfmt::fmt_sig;

/// A malformed row that was skipped rather than aborting the read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowIssue {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct Ingested<T> {
    pub value: T,
    pub skipped: Vec<RowIssue>,
}

pub fn parse_timestamp(field: &str) -> Option<Timestamp> {
    let s = field.trim();
    if let Ok(t) = s.parse::<i64>() {
        return Some(t);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp())
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, source: &str, expected: &[&str]) -> Result<()> {
    let header = rdr.headers().map_err(|e| Error::Parse {
        source_name: source.to_string(),
        line: 1,
        message: e.to_string(),
    })?;
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(Error::Parse {
            source_name: source.to_string(),
            line: 1,
            message: format!(
                "expected header `{}`, got `{}`",
                expected.join(","),
                got.join(",")
            ),
        });
    }
    Ok(())
}

/// Iterates data rows, handing `(line, fields)` to `parse_row`. Failures abort
/// with the line number unless `skip_bad_rows` is set, in which case they are
/// collected.
fn for_each_row<R: Read>(
    reader: R,
    source: &str,
    header: &[&str],
    skip_bad_rows: bool,
    mut parse_row: impl FnMut(u64, &csv::StringRecord) -> std::result::Result<(), String>,
) -> Result<Vec<RowIssue>> {
    let mut rdr = csv_reader(reader);
    check_header(&mut rdr, source, header)?;
    let mut skipped = Vec::new();
    for record in rdr.records() {
        let (line, outcome) = match record {
            Ok(rec) => {
                let line = rec.position().map_or(0, |p| p.line());
                if rec.len() != header.len() {
                    (
                        line,
                        Err(format!(
                            "expected {} fields, got {}",
                            header.len(),
                            rec.len()
                        )),
                    )
                } else {
                    (line, parse_row(line, &rec))
                }
            }
            Err(e) => (e.position().map_or(0, |p| p.line()), Err(e.to_string())),
        };
        if let Err(message) = outcome {
            if !skip_bad_rows {
                return Err(Error::Parse {
                    source_name: source.to_string(),
                    line,
                    message,
                });
            }
            skipped.push(RowIssue { line, message });
        }
    }
    Ok(skipped)
}

/// Reads a prices CSV into one [`PriceSeries`] per symbol, sorted by symbol.
/// A repeated timestamp for a symbol is a bad row.
pub fn read_prices<R: Read>(
    reader: R,
    source: &str,
    skip_bad_rows: bool,
) -> Result<Ingested<Vec<PriceSeries>>> {
    let mut rows: BTreeMap<String, BTreeMap<Timestamp, f64>> = BTreeMap::new();
    let skipped = for_each_row(
        reader,
        source,
        &["timestamp", "symbol", "price"],
        skip_bad_rows,
        |_, rec| {
            let ts = parse_timestamp(&rec[0])
                .ok_or_else(|| format!("unparseable timestamp `{}`", &rec[0]))?;
            let symbol = &rec[1];
            if symbol.is_empty() {
                return Err("empty symbol".to_string());
            }
            let price: f64 = rec[2]
                .parse()
                .map_err(|_| format!("unparseable price `{}`", &rec[2]))?;
            if !(price > 0.0 && price.is_finite()) {
                return Err(format!("non-positive price {price}"));
            }
            let per_symbol = rows.entry(symbol.to_string()).or_default();
            if per_symbol.contains_key(&ts) {
                return Err(format!("duplicate timestamp {ts} for {symbol}"));
            }
            per_symbol.insert(ts, price);
            Ok(())
        },
    )?;
    let value = rows
        .into_iter()
        .map(|(sym, obs)| PriceSeries::from_pairs(sym, obs))
        .collect::<Result<Vec<_>>>()?;
    if value.is_empty() {
        return Err(Error::EmptyResult(format!(
            "{source}: no price observations"
        )));
    }
    Ok(Ingested { value, skipped })
}

pub fn read_prices_file(path: &Path, skip_bad_rows: bool) -> Result<Ingested<Vec<PriceSeries>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_prices(file, &path.display().to_string(), skip_bad_rows)
}

pub fn read_calendar<R: Read>(
    reader: R,
    source: &str,
    skip_bad_rows: bool,
) -> Result<Ingested<SessionCalendar>> {
    let mut sessions = Vec::new();
    let skipped = for_each_row(
        reader,
        source,
        &["open", "close"],
        skip_bad_rows,
        |_, rec| {
            let open = parse_timestamp(&rec[0])
                .ok_or_else(|| format!("unparseable open `{}`", &rec[0]))?;
            let close = parse_timestamp(&rec[1])
                .ok_or_else(|| format!("unparseable close `{}`", &rec[1]))?;
            if open >= close {
                return Err(format!("open {open} is not before close {close}"));
            }
            sessions.push(Session { open, close });
            Ok(())
        },
    )?;
    let value = SessionCalendar::new(sessions).map_err(|e| Error::Parse {
        source_name: source.to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    Ok(Ingested { value, skipped })
}

pub fn read_calendar_file(path: &Path, skip_bad_rows: bool) -> Result<Ingested<SessionCalendar>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_calendar(file, &path.display().to_string(), skip_bad_rows)
}

/// Writes observations ordered by timestamp, then symbol, with prices at 12
/// significant digits.
pub fn write_prices<W: Write>(mut out: W, series: &[PriceSeries]) -> std::io::Result<()> {
    let mut rows: Vec<(Timestamp, &str, f64)> = series
        .iter()
        .flat_map(|s| {
            s.samples()
                .iter()
                .map(move |Sample { timestamp, price }| (*timestamp, s.symbol(), *price))
        })
        .collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(b.1)));
    writeln!(out, "timestamp,symbol,price")?;
    for (t, sym, p) in rows {
        writeln!(out, "{t},{sym},{}", fmt_sig(p))?;
    }
    Ok(())
}

pub fn write_calendar<W: Write>(mut out: W, calendar: &SessionCalendar) -> std::io::Result<()> {
    writeln!(out, "open,close")?;
    for s in calendar.sessions() {
        writeln!(out, "{},{}", s.open, s.close)?;
    }
    Ok(())
}
