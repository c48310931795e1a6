//! Day-serial arithmetic and the special-day set with its test-day complement.
//!
//! Day serials count whole days from "January 0, year 0000" of the proleptic
//! Gregorian calendar, so 0000-01-01 has serial 1. Special days are holidays
//! and their influence windows: the winter break (Dec 22 – Jan 6), the summer
//! break (Aug 5 – 24), five national holidays with a ±2-day window each, and
//! a table-driven Thursday-to-Monday Easter window.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Table bundled with the crate; one record per year, extendable via
/// [`SpecialDayCalendar::from_easter_file`].
const BUNDLED_EASTER_TABLE: &str = include_str!("easter_1990_2019.csv");

const MIN_YEAR: i32 = 0;
const MAX_YEAR: i32 = 9999;

/// Days from 0001-01-01 (Rata Die day 1) to the "January 0, 0000" epoch.
/// Year 0 is a leap year in the proleptic Gregorian calendar, so the offset
/// is its full length plus the epoch day itself.
const RATA_DIE_OFFSET: i64 = 366;

/// Whole number of days since January 0, year 0000 (0000-01-01 has serial 1).
#[derive(
    Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize, Default,
)]
pub struct DaySerial(i64);

impl DaySerial {
    pub fn new(value: i64) -> Self {
        DaySerial(value)
    }

    pub fn value(self) -> i64 {
        self.0
    }

    pub fn from_date(date: NaiveDate) -> Result<Self> {
        day_serial(date)
    }

    pub fn from_ymd(year: i32, month: u32, day: u32) -> Result<Self> {
        let date = NaiveDate::from_ymd_opt(year, month, day)
            .ok_or_else(|| Error::DateOutOfRange(format!("{year:04}-{month:02}-{day:02}")))?;
        day_serial(date)
    }

    pub fn date(self) -> Result<NaiveDate> {
        date_of(self)
    }

    pub fn year(self) -> Result<i32> {
        Ok(self.date()?.year())
    }
}

impl std::ops::Add<i64> for DaySerial {
    type Output = DaySerial;
    fn add(self, rhs: i64) -> DaySerial {
        DaySerial(self.0 + rhs)
    }
}

impl std::ops::Sub<i64> for DaySerial {
    type Output = DaySerial;
    fn sub(self, rhs: i64) -> DaySerial {
        DaySerial(self.0 - rhs)
    }
}

impl std::ops::Sub<DaySerial> for DaySerial {
    type Output = i64;
    fn sub(self, rhs: DaySerial) -> i64 {
        self.0 - rhs.0
    }
}

impl fmt::Display for DaySerial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match date_of(*self) {
            Ok(d) => write!(f, "{d}"),
            Err(_) => write!(f, "serial({})", self.0),
        }
    }
}

/// Serial of a calendar date under the January 0, 0000 epoch.
pub fn day_serial(date: NaiveDate) -> Result<DaySerial> {
    if date.year() < MIN_YEAR || date.year() > MAX_YEAR {
        return Err(Error::DateOutOfRange(date.to_string()));
    }
    Ok(DaySerial(i64::from(date.num_days_from_ce()) + RATA_DIE_OFFSET))
}

/// Inverse of [`day_serial`]; round-trips exactly.
pub fn date_of(serial: DaySerial) -> Result<NaiveDate> {
    let days_from_ce = serial.0 - RATA_DIE_OFFSET;
    let date = i32::try_from(days_from_ce)
        .ok()
        .and_then(NaiveDate::from_num_days_from_ce_opt)
        .ok_or_else(|| Error::DateOutOfRange(format!("serial {}", serial.0)))?;
    if date.year() < MIN_YEAR || date.year() > MAX_YEAR {
        return Err(Error::DateOutOfRange(format!("serial {}", serial.0)));
    }
    Ok(date)
}

/// First and last serial of a calendar year.
pub fn year_range(year: i32) -> Result<(DaySerial, DaySerial)> {
    let first = DaySerial::from_ymd(year, 1, 1)?;
    let last = DaySerial::from_ymd(year, 12, 31)?;
    Ok((first, last))
}

/// The five fixed-date Italian national holidays.
#[derive(Copy, Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum NationalHoliday {
    LiberationDay,
    LabourDay,
    RepublicDay,
    AllSaintsDay,
    ImmaculateConception,
}

impl NationalHoliday {
    pub const ALL: [NationalHoliday; 5] = [
        NationalHoliday::LiberationDay,
        NationalHoliday::LabourDay,
        NationalHoliday::RepublicDay,
        NationalHoliday::AllSaintsDay,
        NationalHoliday::ImmaculateConception,
    ];

    pub fn month_day(self) -> (u32, u32) {
        match self {
            NationalHoliday::LiberationDay => (4, 25),
            NationalHoliday::LabourDay => (5, 1),
            NationalHoliday::RepublicDay => (6, 2),
            NationalHoliday::AllSaintsDay => (11, 1),
            NationalHoliday::ImmaculateConception => (12, 8),
        }
    }
}

impl fmt::Display for NationalHoliday {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            NationalHoliday::LiberationDay => "Liberation Day",
            NationalHoliday::LabourDay => "Labour Day",
            NationalHoliday::RepublicDay => "Republic Day",
            NationalHoliday::AllSaintsDay => "All Saints' Day",
            NationalHoliday::ImmaculateConception => "Immaculate Conception",
        };
        f.write_str(name)
    }
}

/// Why a date counts as special; `None` when no window contains it.
#[derive(Copy, Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum SpecialDayReason {
    Winter,
    Summer,
    National(NationalHoliday),
    Easter,
    None,
}

impl SpecialDayReason {
    pub fn is_special(self) -> bool {
        !matches!(self, SpecialDayReason::None)
    }
}

impl fmt::Display for SpecialDayReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecialDayReason::Winter => write!(f, "winter"),
            SpecialDayReason::Summer => write!(f, "summer"),
            SpecialDayReason::National(h) => write!(f, "national ({h})"),
            SpecialDayReason::Easter => write!(f, "easter"),
            SpecialDayReason::None => write!(f, "none"),
        }
    }
}

/// How Easter membership is decided for years outside the loaded table.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum EasterPolicy {
    /// Querying a March/April date of an uncovered year is an error; the
    /// table is data, not an algorithm, so the answer cannot be computed.
    Strict,
    /// Easter windows never match (for synthetic runs on arbitrary years).
    Disabled,
}

/// Special-day rules plus the tabulated Easter windows.
///
/// Immutable after construction; safe for concurrent reads.
#[derive(Clone, Debug)]
pub struct SpecialDayCalendar {
    easter: BTreeMap<i32, (NaiveDate, NaiveDate)>,
    policy: EasterPolicy,
}

impl SpecialDayCalendar {
    /// Calendar with the bundled 1990-2019 Easter table.
    pub fn bundled() -> Self {
        Self::from_easter_reader(BUNDLED_EASTER_TABLE.as_bytes())
            .expect("bundled easter table is valid")
    }

    /// Calendar whose Easter windows come from a `year,start,end` CSV file.
    pub fn from_easter_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_easter_reader(file)
    }

    /// Calendar without Easter exclusion (any year becomes decidable).
    pub fn without_easter() -> Self {
        SpecialDayCalendar {
            easter: BTreeMap::new(),
            policy: EasterPolicy::Disabled,
        }
    }

    pub fn from_easter_reader<R: Read>(reader: R) -> Result<Self> {
        let mut csv_reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut easter = BTreeMap::new();
        for (idx, record) in csv_reader.records().enumerate() {
            let record = record.map_err(|e| Error::EasterTable(e.to_string()))?;
            if record.len() != 3 {
                return Err(Error::EasterTable(format!(
                    "record {}: expected 3 fields, found {}",
                    idx + 1,
                    record.len()
                )));
            }
            let year: i32 = record[0]
                .parse()
                .map_err(|_| Error::EasterTable(format!("record {}: bad year", idx + 1)))?;
            let start: NaiveDate = record[1]
                .parse()
                .map_err(|_| Error::EasterTable(format!("record {}: bad start date", idx + 1)))?;
            let end: NaiveDate = record[2]
                .parse()
                .map_err(|_| Error::EasterTable(format!("record {}: bad end date", idx + 1)))?;
            validate_easter_window(year, start, end)?;
            if easter.insert(year, (start, end)).is_some() {
                return Err(Error::EasterTable(format!("duplicate year {year}")));
            }
        }
        if easter.is_empty() {
            return Err(Error::EasterTable("empty table".into()));
        }
        Ok(SpecialDayCalendar {
            easter,
            policy: EasterPolicy::Strict,
        })
    }

    /// Inclusive year span of the loaded Easter table; `None` when disabled.
    pub fn easter_coverage(&self) -> Option<(i32, i32)> {
        match (self.easter.keys().next(), self.easter.keys().next_back()) {
            (Some(&min), Some(&max)) => Some((min, max)),
            _ => None,
        }
    }

    pub fn easter_window(&self, year: i32) -> Option<(NaiveDate, NaiveDate)> {
        self.easter.get(&year).copied()
    }

    /// First matching reason in the order winter, summer, national, Easter.
    pub fn is_special(&self, date: NaiveDate) -> Result<SpecialDayReason> {
        if in_winter_window(date) {
            return Ok(SpecialDayReason::Winter);
        }
        if in_summer_window(date) {
            return Ok(SpecialDayReason::Summer);
        }
        if let Some(holiday) = self.national_match(date) {
            return Ok(SpecialDayReason::National(holiday));
        }
        if self.easter_match(date)? {
            return Ok(SpecialDayReason::Easter);
        }
        Ok(SpecialDayReason::None)
    }

    pub fn is_special_serial(&self, day: DaySerial) -> Result<SpecialDayReason> {
        self.is_special(date_of(day)?)
    }

    /// Every matching reason, allowing windows to overlap (e.g. an Easter
    /// Monday falling on Liberation Day).
    pub fn reasons(&self, date: NaiveDate) -> Result<Vec<SpecialDayReason>> {
        let mut out = Vec::new();
        if in_winter_window(date) {
            out.push(SpecialDayReason::Winter);
        }
        if in_summer_window(date) {
            out.push(SpecialDayReason::Summer);
        }
        if let Some(holiday) = self.national_match(date) {
            out.push(SpecialDayReason::National(holiday));
        }
        if self.easter_match(date)? {
            out.push(SpecialDayReason::Easter);
        }
        Ok(out)
    }

    /// Membership in the deduplicated special-day set.
    pub fn in_special_set(&self, day: DaySerial) -> Result<bool> {
        Ok(self.is_special_serial(day)?.is_special())
    }

    /// Test days of a year: d such that neither d nor d-7 is special.
    pub fn test_day_set(&self, year: i32) -> Result<BTreeSet<DaySerial>> {
        let (first, last) = year_range(year)?;
        let mut days = BTreeSet::new();
        for value in first.value()..=last.value() {
            let d = DaySerial::new(value);
            if !self.in_special_set(d)? && !self.in_special_set(d - 7)? {
                days.insert(d);
            }
        }
        Ok(days)
    }

    fn national_match(&self, date: NaiveDate) -> Option<NationalHoliday> {
        for holiday in NationalHoliday::ALL {
            let (month, day) = holiday.month_day();
            let holiday_date = NaiveDate::from_ymd_opt(date.year(), month, day)
                .expect("fixed national holiday date");
            let distance = (date - holiday_date).num_days().abs();
            if distance <= 2 {
                return Some(holiday);
            }
        }
        None
    }

    fn easter_match(&self, date: NaiveDate) -> Result<bool> {
        match self.policy {
            EasterPolicy::Disabled => Ok(false),
            EasterPolicy::Strict => {
                if let Some(&(start, end)) = self.easter.get(&date.year()) {
                    return Ok(date >= start && date <= end);
                }
                // Every Thursday-to-Monday window around an Easter Sunday
                // (Mar 22 - Apr 25) lies in March or April; other months are
                // decidable without the table.
                if date.month() == 3 || date.month() == 4 {
                    let (min, max) = self.easter_coverage().unwrap_or((0, -1));
                    return Err(Error::EasterUnknown {
                        year: date.year(),
                        min,
                        max,
                    });
                }
                Ok(false)
            }
        }
    }
}

fn in_winter_window(date: NaiveDate) -> bool {
    (date.month() == 12 && date.day() >= 22) || (date.month() == 1 && date.day() <= 6)
}

fn in_summer_window(date: NaiveDate) -> bool {
    date.month() == 8 && (5..=24).contains(&date.day())
}

fn validate_easter_window(year: i32, start: NaiveDate, end: NaiveDate) -> Result<()> {
    if start.year() != year || end.year() != year {
        return Err(Error::EasterTable(format!(
            "year {year}: window {start}..{end} not within the year"
        )));
    }
    if end - start != Duration::days(4) {
        return Err(Error::EasterTable(format!(
            "year {year}: window must span 5 days, got {start}..{end}"
        )));
    }
    if start.weekday() != Weekday::Thu || end.weekday() != Weekday::Mon {
        return Err(Error::EasterTable(format!(
            "year {year}: window must run Thursday..Monday, got {:?}..{:?}",
            start.weekday(),
            end.weekday()
        )));
    }
    Ok(())
}
