//! CSV ingestion of quarter-hourly load data and the canonical wide-format
//! store.
//!
//! Two input layouts are accepted:
//! - long: header `timestamp,load_mw`, one row per quarter-hour with an
//!   ISO-8601 local wall-clock timestamp on the :00/:15/:30/:45 grid;
//! - wide: header `date,v1,...,v96`, one row per day.
//!
//! Days that do not come out with exactly 96 samples are dropped whole and
//! listed in the skipped-day report; bad values (unparseable, duplicate,
//! non-positive) are hard errors.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::calendar::day_serial;
use crate::error::{Error, Result};
use crate::series::{DayProfile, LoadSeries};
use crate::{num, Scalar, QUARTERS_PER_DAY};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CsvFormat {
    Long,
    #[default]
    Wide,
}

impl std::str::FromStr for CsvFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "long" => Ok(CsvFormat::Long),
            "wide" => Ok(CsvFormat::Wide),
            other => Err(Error::Config(format!(
                "unknown csv format {other:?}; use long or wide"
            ))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SkippedDay {
    pub date: NaiveDate,
    pub reason: String,
}

/// What ingestion kept and what it dropped.
#[derive(Clone, Debug, Default, Serialize)]
pub struct IngestReport {
    pub days_loaded: usize,
    pub skipped: Vec<SkippedDay>,
}

impl IngestReport {
    /// CSV `date,reason`, one row per skipped day.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "date,reason")?;
        for entry in &self.skipped {
            writeln!(writer, "{},{}", entry.date, entry.reason)?;
        }
        Ok(())
    }

    pub fn write_csv_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(file)
    }
}

pub fn ingest_csv<T: Scalar, P: AsRef<Path>>(
    path: P,
    format: CsvFormat,
) -> Result<(LoadSeries<T>, IngestReport)> {
    let file = std::fs::File::open(path)?;
    ingest_reader(file, format)
}

pub fn ingest_reader<T: Scalar, R: Read>(
    reader: R,
    format: CsvFormat,
) -> Result<(LoadSeries<T>, IngestReport)> {
    match format {
        CsvFormat::Long => ingest_long(reader),
        CsvFormat::Wide => ingest_wide(reader),
    }
}

const TIMESTAMP_FORMATS: [&str; 4] = [
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
];

fn parse_timestamp(raw: &str, line: usize) -> Result<(NaiveDate, usize)> {
    let ts: NaiveDateTime = TIMESTAMP_FORMATS
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(raw, fmt).ok())
        .ok_or_else(|| Error::Csv {
            line,
            message: format!("unparseable timestamp {raw:?}"),
        })?;
    if !ts.minute().is_multiple_of(15) || ts.second() != 0 {
        return Err(Error::Csv {
            line,
            message: format!("timestamp {raw:?} is not on the 15-minute grid"),
        });
    }
    let quarter = (ts.hour() * 4 + ts.minute() / 15) as usize;
    Ok((ts.date(), quarter))
}

fn parse_load<T: Scalar>(raw: &str, line: usize) -> Result<T> {
    let value: f64 = raw.trim().parse().map_err(|_| Error::Csv {
        line,
        message: format!("unparseable load value {raw:?}"),
    })?;
    Ok(num::<T>(value))
}

fn offender_list(offenders: &[(NaiveDate, usize)]) -> String {
    let mut shown: Vec<String> = offenders
        .iter()
        .take(10)
        .map(|(d, q)| format!("{d} q{}", q + 1))
        .collect();
    if offenders.len() > 10 {
        shown.push(format!("... {} total", offenders.len()));
    }
    shown.join(", ")
}

fn ingest_long<T: Scalar, R: Read>(reader: R) -> Result<(LoadSeries<T>, IngestReport)> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    check_header(&mut csv_reader, &["timestamp", "load_mw"])?;

    let mut by_day: BTreeMap<NaiveDate, Vec<Option<T>>> = BTreeMap::new();
    let mut offenders: Vec<(NaiveDate, usize)> = Vec::new();
    for record in csv_reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != 2 {
            return Err(Error::Csv {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let (date, quarter) = parse_timestamp(&record[0], line)?;
        let value = parse_load::<T>(&record[1], line)?;
        let slots = by_day
            .entry(date)
            .or_insert_with(|| vec![None; QUARTERS_PER_DAY]);
        if slots[quarter].is_some() {
            return Err(Error::DuplicateSample {
                date: date.to_string(),
                quarter: quarter + 1,
            });
        }
        if !(num_traits::Float::is_finite(value) && value > T::zero()) {
            offenders.push((date, quarter));
        }
        slots[quarter] = Some(value);
    }
    if !offenders.is_empty() {
        return Err(Error::NonPositiveLoad(offender_list(&offenders)));
    }

    let mut series = LoadSeries::new();
    let mut report = IngestReport::default();
    for (date, slots) in by_day {
        let present = slots.iter().filter(|s| s.is_some()).count();
        if present != QUARTERS_PER_DAY {
            report.skipped.push(SkippedDay {
                date,
                reason: format!("expected {QUARTERS_PER_DAY} samples; found {present}"),
            });
            continue;
        }
        let values: Vec<T> = slots.into_iter().map(|s| s.unwrap()).collect();
        insert_ingested(&mut series, date, values, &mut report)?;
    }
    Ok((series, report))
}

fn ingest_wide<T: Scalar, R: Read>(reader: R) -> Result<(LoadSeries<T>, IngestReport)> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    {
        let headers = csv_reader.headers().map_err(csv_error)?;
        if headers.len() != QUARTERS_PER_DAY + 1
            || !headers[0].eq_ignore_ascii_case("date")
        {
            return Err(Error::Csv {
                line: 1,
                message: format!(
                    "wide header must be date,v1,...,v{QUARTERS_PER_DAY}; found {} fields",
                    headers.len()
                ),
            });
        }
    }

    let mut series = LoadSeries::new();
    let mut report = IngestReport::default();
    let mut offenders: Vec<(NaiveDate, usize)> = Vec::new();
    for record in csv_reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != QUARTERS_PER_DAY + 1 {
            return Err(Error::Csv {
                line,
                message: format!(
                    "expected {} fields, found {}",
                    QUARTERS_PER_DAY + 1,
                    record.len()
                ),
            });
        }
        let date: NaiveDate = record[0].parse().map_err(|_| Error::Csv {
            line,
            message: format!("unparseable date {:?}", &record[0]),
        })?;
        let mut values = Vec::with_capacity(QUARTERS_PER_DAY);
        for q in 0..QUARTERS_PER_DAY {
            let value = parse_load::<T>(&record[q + 1], line)?;
            if !(num_traits::Float::is_finite(value) && value > T::zero()) {
                offenders.push((date, q));
            }
            values.push(value);
        }
        if offenders.is_empty() {
            insert_ingested(&mut series, date, values, &mut report)?;
        }
    }
    if !offenders.is_empty() {
        return Err(Error::NonPositiveLoad(offender_list(&offenders)));
    }
    Ok((series, report))
}

fn insert_ingested<T: Scalar>(
    series: &mut LoadSeries<T>,
    date: NaiveDate,
    values: Vec<T>,
    report: &mut IngestReport,
) -> Result<()> {
    let day = day_serial(date)?;
    if series.contains(day) {
        return Err(Error::DuplicateSample {
            date: date.to_string(),
            quarter: 0,
        });
    }
    series.insert_day(day, DayProfile::new(values)?)?;
    report.days_loaded += 1;
    Ok(())
}

fn check_header<R: Read>(reader: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let headers = reader.headers().map_err(csv_error)?;
    let ok = headers.len() == expected.len()
        && headers
            .iter()
            .zip(expected)
            .all(|(h, e)| h.eq_ignore_ascii_case(e));
    if !ok {
        return Err(Error::Csv {
            line: 1,
            message: format!("expected header {expected:?}"),
        });
    }
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    let line = match e.position() {
        Some(p) => p.line() as usize,
        None => 0,
    };
    Error::Csv {
        line,
        message: e.to_string(),
    }
}

/// Writes the canonical wide store: `date,v1,...,v96`.
pub fn write_wide_csv<T: Scalar, W: Write>(series: &LoadSeries<T>, mut writer: W) -> Result<()> {
    let header: Vec<String> = std::iter::once("date".to_string())
        .chain((1..=QUARTERS_PER_DAY).map(|q| format!("v{q}")))
        .collect();
    writeln!(writer, "{}", header.join(","))?;
    for (day, profile) in series.days() {
        let date = day.date()?;
        let mut row = vec![date.to_string()];
        row.extend(profile.values().iter().map(|v| format!("{v}")));
        writeln!(writer, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_wide_csv_path<T: Scalar, P: AsRef<Path>>(
    series: &LoadSeries<T>,
    path: P,
) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_wide_csv(series, file)
}

/// Masked 7-day-difference export: `date,masked,v1,...,v96`.
pub fn write_diff_csv<T: Scalar, W: Write>(
    diff: &crate::series::DiffSeries<T>,
    mut writer: W,
) -> Result<()> {
    let header: Vec<String> = ["date".to_string(), "masked".to_string()]
        .into_iter()
        .chain((1..=QUARTERS_PER_DAY).map(|q| format!("v{q}")))
        .collect();
    writeln!(writer, "{}", header.join(","))?;
    for (day, entry) in diff.days() {
        let date = day.date()?;
        let mut row = vec![date.to_string(), (entry.masked as u8).to_string()];
        row.extend(entry.values.values().iter().map(|v| format!("{v}")));
        writeln!(writer, "{}", row.join(","))?;
    }
    Ok(())
}

/// Convenience for tests and round trips: ingest a wide store written by
/// [`write_wide_csv`].
pub fn read_wide_string<T: Scalar>(content: &str) -> Result<(LoadSeries<T>, IngestReport)> {
    ingest_reader(content.as_bytes(), CsvFormat::Wide)
}
