//! Applying a fitted weight surface to produce one-day-ahead load forecasts
//! in original units.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DVector;
use num_traits::Float;

use crate::calendar::{day_serial, DaySerial, SpecialDayCalendar};
use crate::error::{Error, Result};
use crate::estimators::WeightSurface;
use crate::series::{log_transform, mask_special, seven_day_diff, DayProfile, LoadSeries};
use crate::{num, Scalar, QUARTERS_PER_DAY};

/// Largest |log-load| fed to the exponential; anything beyond is a unit or
/// data error, not a plausible load.
const EXP_GUARD: f64 = 700.0;

/// Whether day d had everything a forecast needs.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct ContextFlags {
    /// Y(d-1) present and unmasked.
    pub y_prev_ok: bool,
    /// S(d-7) present.
    pub s_lag7_ok: bool,
}

impl ContextFlags {
    pub fn complete(self) -> bool {
        self.y_prev_ok && self.s_lag7_ok
    }
}

/// One forecast day in MW.
#[derive(Clone, Debug)]
pub struct ForecastDay<T> {
    pub day: DaySerial,
    pub values: DayProfile<T>,
    pub context: ContextFlags,
}

/// The one-day-ahead prediction of the differenced series: A y_prev.
pub fn predict_diff<T: Scalar>(surface: &WeightSurface<T>, y_prev: &DVector<T>) -> DVector<T> {
    surface.apply(y_prev)
}

/// Back-transform to megawatts: exp(y_hat + s_lag7), elementwise.
pub fn reconstruct_load<T: Scalar>(
    y_hat: &DVector<T>,
    s_lag7: &DayProfile<T>,
) -> Result<DayProfile<T>> {
    let guard = num::<T>(EXP_GUARD);
    let mut values = Vec::with_capacity(QUARTERS_PER_DAY);
    for (q, &s) in s_lag7.values().iter().enumerate() {
        let exponent = y_hat[q] + s;
        if Float::abs(exponent) > guard {
            return Err(Error::Range(format!(
                "log-load {exponent} at quarter {} exceeds the exp guard",
                q + 1
            )));
        }
        values.push(Float::exp(exponent));
    }
    DayProfile::new(values)
}

/// Forecasts every test day of `year` whose context is complete, using only
/// data before the target day.
pub fn rolling_forecast<T: Scalar>(
    surface: &WeightSurface<T>,
    data: &LoadSeries<T>,
    cal: &SpecialDayCalendar,
    year: i32,
) -> Result<Vec<ForecastDay<T>>> {
    let logs = log_transform(data)?;
    let diff = mask_special(seven_day_diff(&logs), cal)?;
    let mut out = Vec::new();
    for day in cal.test_day_set(year)? {
        let y_prev = diff.usable(day - 1);
        let s_lag7 = logs.get(day - 7);
        let context = ContextFlags {
            y_prev_ok: y_prev.is_some(),
            s_lag7_ok: s_lag7.is_some(),
        };
        if let (Some(prev), Some(lag)) = (y_prev, s_lag7) {
            let y_hat = predict_diff(surface, &prev.to_vector());
            out.push(ForecastDay {
                day,
                values: reconstruct_load(&y_hat, lag)?,
                context,
            });
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyForecast(format!(
            "no test day of {year} has a usable previous day and 7-day-lagged load"
        )));
    }
    Ok(out)
}

/// Collects forecast days into a positive series keyed by day.
pub fn to_series<T: Scalar>(days: &[ForecastDay<T>]) -> Result<LoadSeries<T>> {
    let mut series = LoadSeries::new();
    for fc in days {
        series.insert_day(fc.day, fc.values.clone())?;
    }
    Ok(series)
}

/// Long export `date,q,load_pred_mw`, one row per quarter.
pub fn write_forecast_csv<T: Scalar, W: Write>(
    series: &LoadSeries<T>,
    mut writer: W,
) -> Result<()> {
    writeln!(writer, "date,q,load_pred_mw")?;
    for (day, profile) in series.days() {
        let date = day.date()?;
        for (q, v) in profile.values().iter().enumerate() {
            writeln!(writer, "{date},{},{v}", q + 1)?;
        }
    }
    Ok(())
}

pub fn write_forecast_csv_path<T: Scalar, P: AsRef<Path>>(
    series: &LoadSeries<T>,
    path: P,
) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_forecast_csv(series, file)
}

/// Reads the long forecast export back; every day must carry all 96
/// quarters.
pub fn read_forecast_csv<T: Scalar, R: Read>(reader: R) -> Result<LoadSeries<T>> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    {
        let headers = csv_reader.headers().map_err(|e| Error::Csv {
            line: 1,
            message: e.to_string(),
        })?;
        if headers.len() != 3 || !headers[0].eq_ignore_ascii_case("date") {
            return Err(Error::Csv {
                line: 1,
                message: "expected header date,q,load_pred_mw".into(),
            });
        }
    }
    let mut by_day: BTreeMap<NaiveDate, Vec<Option<T>>> = BTreeMap::new();
    for record in csv_reader.records() {
        let record = record.map_err(|e| Error::Csv {
            line: 0,
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let date: NaiveDate = record[0].parse().map_err(|_| Error::Csv {
            line,
            message: format!("unparseable date {:?}", &record[0]),
        })?;
        let q: usize = record[1].parse().map_err(|_| Error::Csv {
            line,
            message: format!("unparseable quarter {:?}", &record[1]),
        })?;
        if !(1..=QUARTERS_PER_DAY).contains(&q) {
            return Err(Error::Csv {
                line,
                message: format!("quarter {q} out of 1..={QUARTERS_PER_DAY}"),
            });
        }
        let value: f64 = record[2].parse().map_err(|_| Error::Csv {
            line,
            message: format!("unparseable value {:?}", &record[2]),
        })?;
        let slots = by_day
            .entry(date)
            .or_insert_with(|| vec![None; QUARTERS_PER_DAY]);
        if slots[q - 1].is_some() {
            return Err(Error::DuplicateSample {
                date: date.to_string(),
                quarter: q,
            });
        }
        slots[q - 1] = Some(num::<T>(value));
    }
    let mut series = LoadSeries::new();
    for (date, slots) in by_day {
        let values: Option<Vec<T>> = slots.into_iter().collect();
        let values = values.ok_or_else(|| {
            Error::Config(format!("forecast for {date} does not cover all quarters"))
        })?;
        series.insert_day(day_serial(date)?, DayProfile::new(values)?)?;
    }
    Ok(series)
}

pub fn read_forecast_csv_path<T: Scalar, P: AsRef<Path>>(path: P) -> Result<LoadSeries<T>> {
    let file = std::fs::File::open(path)?;
    read_forecast_csv(file)
}
