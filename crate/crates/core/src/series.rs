//! Data model and the preprocessing chain: log transform, 7-day difference,
//! special-day masking, and training-pair assembly.

use std::collections::BTreeMap;

use nalgebra::DVector;
use num_traits::Float;

use crate::calendar::{DaySerial, SpecialDayCalendar};
use crate::error::{Error, Result};
use crate::{num, Scalar, QUARTERS_PER_DAY};

/// One day of quarter-hourly values (96 samples).
#[derive(Clone, Debug, PartialEq)]
pub struct DayProfile<T> {
    values: Vec<T>,
}

impl<T: Scalar> DayProfile<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.len() != QUARTERS_PER_DAY {
            return Err(Error::Profile(format!(
                "expected {QUARTERS_PER_DAY} quarter-hour samples, found {}",
                values.len()
            )));
        }
        Ok(DayProfile { values })
    }

    pub fn constant(value: T) -> Self {
        DayProfile {
            values: vec![value; QUARTERS_PER_DAY],
        }
    }

    pub fn from_vector(v: &DVector<T>) -> Result<Self> {
        Self::new(v.iter().copied().collect())
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Value at 0-based quarter index.
    pub fn get(&self, quarter: usize) -> T {
        self.values[quarter]
    }

    pub fn to_vector(&self) -> DVector<T> {
        DVector::from_column_slice(&self.values)
    }

    pub fn map<F: Fn(T) -> T>(&self, f: F) -> Self {
        DayProfile {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn mean(&self) -> T {
        let sum = self.values.iter().fold(T::zero(), |acc, &v| acc + v);
        sum / num::<T>(QUARTERS_PER_DAY as f64)
    }
}

/// Raw loads in MW, strictly positive, exactly 96 samples per stored day.
#[derive(Clone, Debug, Default)]
pub struct LoadSeries<T: Scalar> {
    days: BTreeMap<DaySerial, DayProfile<T>>,
}

impl<T: Scalar> LoadSeries<T> {
    pub fn new() -> Self {
        LoadSeries {
            days: BTreeMap::new(),
        }
    }

    /// Inserts a day after validating positivity; duplicate days are refused.
    pub fn insert_day(&mut self, day: DaySerial, profile: DayProfile<T>) -> Result<()> {
        let offenders: Vec<usize> = profile
            .values()
            .iter()
            .enumerate()
            .filter(|(_, &v)| !(Float::is_finite(v) && v > T::zero()))
            .map(|(q, _)| q + 1)
            .collect();
        if !offenders.is_empty() {
            return Err(Error::NonPositiveLoad(format!(
                "{day} quarters {offenders:?}"
            )));
        }
        if self.days.contains_key(&day) {
            return Err(Error::DuplicateSample {
                date: day.to_string(),
                quarter: 0,
            });
        }
        self.days.insert(day, profile);
        Ok(())
    }

    pub fn get(&self, day: DaySerial) -> Option<&DayProfile<T>> {
        self.days.get(&day)
    }

    pub fn contains(&self, day: DaySerial) -> bool {
        self.days.contains_key(&day)
    }

    pub fn days(&self) -> impl Iterator<Item = (DaySerial, &DayProfile<T>)> {
        self.days.iter().map(|(&d, p)| (d, p))
    }

    pub fn day_set(&self) -> impl Iterator<Item = DaySerial> + '_ {
        self.days.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn first_day(&self) -> Option<DaySerial> {
        self.days.keys().next().copied()
    }

    pub fn last_day(&self) -> Option<DaySerial> {
        self.days.keys().next_back().copied()
    }
}

/// Natural-log loads, same day keys as the source series.
#[derive(Clone, Debug, Default)]
pub struct LogSeries<T: Scalar> {
    days: BTreeMap<DaySerial, DayProfile<T>>,
}

impl<T: Scalar> LogSeries<T> {
    pub fn get(&self, day: DaySerial) -> Option<&DayProfile<T>> {
        self.days.get(&day)
    }

    pub fn contains(&self, day: DaySerial) -> bool {
        self.days.contains_key(&day)
    }

    pub fn days(&self) -> impl Iterator<Item = (DaySerial, &DayProfile<T>)> {
        self.days.iter().map(|(&d, p)| (d, p))
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }
}

/// Elementwise natural log of a load series.
pub fn log_transform<T: Scalar>(loads: &LoadSeries<T>) -> Result<LogSeries<T>> {
    let mut days = BTreeMap::new();
    for (day, profile) in loads.days() {
        if profile.values().iter().any(|&v| v <= T::zero()) {
            return Err(Error::NonPositiveLoad(day.to_string()));
        }
        days.insert(day, profile.map(|v| Float::ln(v)));
    }
    Ok(LogSeries { days })
}

/// A 7-day-differenced day: values plus the special-day mask flag.
#[derive(Clone, Debug)]
pub struct DiffDay<T> {
    pub values: DayProfile<T>,
    pub masked: bool,
}

/// 7-day differences of the log series; days flagged by [`mask_special`]
/// keep their values but are unusable for training and evaluation.
#[derive(Clone, Debug, Default)]
pub struct DiffSeries<T: Scalar> {
    days: BTreeMap<DaySerial, DiffDay<T>>,
}

impl<T: Scalar> DiffSeries<T> {
    pub fn get(&self, day: DaySerial) -> Option<&DiffDay<T>> {
        self.days.get(&day)
    }

    /// Values of a day when present and unmasked.
    pub fn usable(&self, day: DaySerial) -> Option<&DayProfile<T>> {
        self.days
            .get(&day)
            .filter(|d| !d.masked)
            .map(|d| &d.values)
    }

    pub fn days(&self) -> impl Iterator<Item = (DaySerial, &DiffDay<T>)> {
        self.days.iter().map(|(&d, p)| (d, p))
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }
}

/// Per-quarter difference S(d) - S(d-7); a day is present only when both
/// operands exist. No masking is applied here.
pub fn seven_day_diff<T: Scalar>(logs: &LogSeries<T>) -> DiffSeries<T> {
    let mut days = BTreeMap::new();
    for (day, profile) in logs.days() {
        if let Some(lag) = logs.get(day - 7) {
            let values: Vec<T> = profile
                .values()
                .iter()
                .zip(lag.values())
                .map(|(&a, &b)| a - b)
                .collect();
            days.insert(
                day,
                DiffDay {
                    values: DayProfile { values },
                    masked: false,
                },
            );
        }
    }
    DiffSeries { days }
}

/// Flags day d when d or d-7 falls in the special-day set. Values are
/// retained; only the flag changes.
pub fn mask_special<T: Scalar>(
    diff: DiffSeries<T>,
    cal: &SpecialDayCalendar,
) -> Result<DiffSeries<T>> {
    let mut days = diff.days;
    for (&day, entry) in days.iter_mut() {
        entry.masked = cal.in_special_set(day)? || cal.in_special_set(day - 7)?;
    }
    Ok(DiffSeries { days })
}

/// One training pair: the previous day's differenced profile and the target
/// day's, both unmasked.
#[derive(Clone, Debug)]
pub struct TrainingPair<T> {
    pub day: DaySerial,
    pub predictor: DVector<T>,
    pub target: DVector<T>,
}

/// Chronologically ordered training pairs with a shared vector dimension.
#[derive(Clone, Debug)]
pub struct TrainingSet<T> {
    q: usize,
    pairs: Vec<TrainingPair<T>>,
}

impl<T: Scalar> TrainingSet<T> {
    pub fn from_pairs(q: usize, pairs: Vec<TrainingPair<T>>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::NoTrainingPairs);
        }
        for pair in &pairs {
            if pair.predictor.len() != q || pair.target.len() != q {
                return Err(Error::Dimension(format!(
                    "training pair at {} has lengths {}/{}, expected {q}",
                    pair.day,
                    pair.predictor.len(),
                    pair.target.len()
                )));
            }
        }
        Ok(TrainingSet { q, pairs })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[TrainingPair<T>] {
        &self.pairs
    }

    /// First and last target day.
    pub fn window(&self) -> Option<(DaySerial, DaySerial)> {
        match (self.pairs.first(), self.pairs.last()) {
            (Some(a), Some(b)) => Some((a.day, b.day)),
            _ => None,
        }
    }

    /// Keeps only the first `n` pairs.
    pub fn truncate(&mut self, n: usize) {
        self.pairs.truncate(n);
    }
}

/// One pair per day d in `[start, end]` with both Y(d-1) and Y(d) present
/// and unmasked, in chronological order.
pub fn build_training_pairs<T: Scalar>(
    diff: &DiffSeries<T>,
    start: DaySerial,
    end: DaySerial,
) -> Result<TrainingSet<T>> {
    let mut pairs = Vec::new();
    for (day, entry) in diff.days() {
        if day < start || day > end || entry.masked {
            continue;
        }
        if let Some(prev) = diff.usable(day - 1) {
            pairs.push(TrainingPair {
                day,
                predictor: prev.to_vector(),
                target: entry.values.to_vector(),
            });
        }
    }
    TrainingSet::from_pairs(QUARTERS_PER_DAY, pairs)
}
