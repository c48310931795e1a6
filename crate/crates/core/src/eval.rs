//! The six performance indexes, residual statistics, forecast aggregation,
//! and the predicted-MSE algebra for averaged forecasts.
//!
//! Loads stay in MW internally; reports convert to GW. Sample moments use
//! population normalization (divide by n) so the predicted-MSE identity is
//! exact on finite samples.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use num_traits::Float;
use serde::Serialize;

use crate::calendar::DaySerial;
use crate::error::{Error, Result};
use crate::series::{DayProfile, LoadSeries};
use crate::{num, Scalar, QUARTERS_PER_DAY};

const MW_PER_GW: f64 = 1000.0;

/// Quarter-hourly MAPE/RMSE/MAE over a day set.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct QuarterMetrics<T> {
    pub mape_pct: T,
    pub rmse_gw: T,
    pub mae_gw: T,
    /// Number of quarter-hourly test points (96 per day).
    pub n: usize,
}

/// Daily-mean MAPE/RMSE/MAE over the same day set.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DailyMetrics<T> {
    pub mape_daily_pct: T,
    pub rmse_daily_gw: T,
    pub mae_daily_gw: T,
    pub n_day: usize,
}

/// All six performance indexes, counts, and the model complexity.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MetricsReport<T> {
    pub mape_pct: T,
    pub rmse_gw: T,
    pub mae_gw: T,
    pub mape_daily_pct: T,
    pub rmse_daily_gw: T,
    pub mae_daily_gw: T,
    pub n: usize,
    pub n_day: usize,
    pub dof: Option<T>,
}

fn check_coverage<T: Scalar>(
    actual: &LoadSeries<T>,
    pred: &LoadSeries<T>,
    days: &BTreeSet<DaySerial>,
) -> Result<()> {
    if days.is_empty() {
        return Err(Error::Config("empty evaluation day set".into()));
    }
    let missing_pred: Vec<String> = days
        .iter()
        .filter(|d| !pred.contains(**d))
        .take(8)
        .map(|d| d.to_string())
        .collect();
    if !missing_pred.is_empty() {
        return Err(Error::Coverage(missing_pred.join(", ")));
    }
    let missing_actual: Vec<String> = days
        .iter()
        .filter(|d| !actual.contains(**d))
        .take(8)
        .map(|d| d.to_string())
        .collect();
    if !missing_actual.is_empty() {
        return Err(Error::Alignment(format!(
            "actuals missing for {}",
            missing_actual.join(", ")
        )));
    }
    Ok(())
}

/// The three quarter-hourly indexes summed over d in the day set and
/// q = 1..96.
pub fn quarter_metrics<T: Scalar>(
    actual: &LoadSeries<T>,
    pred: &LoadSeries<T>,
    days: &BTreeSet<DaySerial>,
) -> Result<QuarterMetrics<T>> {
    check_coverage(actual, pred, days)?;
    let mut abs_pct = T::zero();
    let mut sq = T::zero();
    let mut abs = T::zero();
    let n = days.len() * QUARTERS_PER_DAY;
    for &day in days {
        let a = actual.get(day).unwrap();
        let p = pred.get(day).unwrap();
        for q in 0..QUARTERS_PER_DAY {
            let err = a.get(q) - p.get(q);
            abs_pct += Float::abs(err / a.get(q));
            sq += err * err;
            abs += Float::abs(err);
        }
    }
    let n_t = num::<T>(n as f64);
    let gw = num::<T>(MW_PER_GW);
    Ok(QuarterMetrics {
        mape_pct: num::<T>(100.0) * abs_pct / n_t,
        rmse_gw: Float::sqrt(sq / n_t) / gw,
        mae_gw: abs / n_t / gw,
        n,
    })
}

/// The three indexes on daily means.
pub fn daily_metrics<T: Scalar>(
    actual: &LoadSeries<T>,
    pred: &LoadSeries<T>,
    days: &BTreeSet<DaySerial>,
) -> Result<DailyMetrics<T>> {
    check_coverage(actual, pred, days)?;
    let mut abs_pct = T::zero();
    let mut sq = T::zero();
    let mut abs = T::zero();
    for &day in days {
        let a = actual.get(day).unwrap().mean();
        let p = pred.get(day).unwrap().mean();
        let err = a - p;
        abs_pct += Float::abs(err / a);
        sq += err * err;
        abs += Float::abs(err);
    }
    let n_day = days.len();
    let n_t = num::<T>(n_day as f64);
    let gw = num::<T>(MW_PER_GW);
    Ok(DailyMetrics {
        mape_daily_pct: num::<T>(100.0) * abs_pct / n_t,
        rmse_daily_gw: Float::sqrt(sq / n_t) / gw,
        mae_daily_gw: abs / n_t / gw,
        n_day,
    })
}

/// Assembles the full six-index report.
pub fn metrics_report<T: Scalar>(
    actual: &LoadSeries<T>,
    pred: &LoadSeries<T>,
    days: &BTreeSet<DaySerial>,
    dof: Option<T>,
) -> Result<MetricsReport<T>> {
    let quarter = quarter_metrics(actual, pred, days)?;
    let daily = daily_metrics(actual, pred, days)?;
    Ok(MetricsReport {
        mape_pct: quarter.mape_pct,
        rmse_gw: quarter.rmse_gw,
        mae_gw: quarter.mae_gw,
        mape_daily_pct: daily.mape_daily_pct,
        rmse_daily_gw: daily.rmse_daily_gw,
        mae_daily_gw: daily.mae_daily_gw,
        n: quarter.n,
        n_day: daily.n_day,
        dof,
    })
}

/// Forecast residuals actual - predicted in GW, keyed by day.
#[derive(Clone, Debug, Default)]
pub struct ResidualSeries<T: Scalar> {
    days: BTreeMap<DaySerial, DayProfile<T>>,
}

impl<T: Scalar> ResidualSeries<T> {
    pub fn days(&self) -> impl Iterator<Item = (DaySerial, &DayProfile<T>)> {
        self.days.iter().map(|(&d, p)| (d, p))
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn day_set(&self) -> BTreeSet<DaySerial> {
        self.days.keys().copied().collect()
    }

    /// CSV `date,q,residual_gw`.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "date,q,residual_gw")?;
        for (day, profile) in self.days() {
            let date = day.date()?;
            for (q, v) in profile.values().iter().enumerate() {
                writeln!(writer, "{date},{},{v}", q + 1)?;
            }
        }
        Ok(())
    }

    pub fn write_csv_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(file)
    }
}

/// Residuals on the given day set, converted to GW.
pub fn residual_series<T: Scalar>(
    actual: &LoadSeries<T>,
    pred: &LoadSeries<T>,
    days: &BTreeSet<DaySerial>,
) -> Result<ResidualSeries<T>> {
    check_coverage(actual, pred, days)?;
    let gw = num::<T>(MW_PER_GW);
    let mut out = BTreeMap::new();
    for &day in days {
        let a = actual.get(day).unwrap();
        let p = pred.get(day).unwrap();
        let values: Vec<T> = (0..QUARTERS_PER_DAY)
            .map(|q| (a.get(q) - p.get(q)) / gw)
            .collect();
        out.insert(day, DayProfile::new(values)?);
    }
    Ok(ResidualSeries { days: out })
}

/// Population moments of a residual series, plus pairwise covariance and
/// correlation when a second series shares its support.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ResidualStats<T> {
    pub bias_gw: T,
    pub mse_gw2: T,
    pub variance_gw2: T,
    pub covariance_gw2: Option<T>,
    pub correlation: Option<T>,
    pub n: usize,
}

pub fn residual_stats<T: Scalar>(
    e1: &ResidualSeries<T>,
    e2: Option<&ResidualSeries<T>>,
) -> Result<ResidualStats<T>> {
    if e1.is_empty() {
        return Err(Error::Alignment("empty residual series".into()));
    }
    let n = e1.len() * QUARTERS_PER_DAY;
    let n_t = num::<T>(n as f64);
    let mut sum1 = T::zero();
    let mut sumsq1 = T::zero();
    for (_, p) in e1.days() {
        for &v in p.values() {
            sum1 += v;
            sumsq1 += v * v;
        }
    }
    let bias = sum1 / n_t;
    let mse = sumsq1 / n_t;
    let variance = mse - bias * bias;

    let (covariance, correlation) = match e2 {
        None => (None, None),
        Some(e2) => {
            if e2.day_set() != e1.day_set() {
                return Err(Error::Alignment(
                    "residual series cover different days".into(),
                ));
            }
            let mut sum2 = T::zero();
            let mut sumsq2 = T::zero();
            let mut cross = T::zero();
            for ((_, p1), (_, p2)) in e1.days().zip(e2.days()) {
                for (&a, &b) in p1.values().iter().zip(p2.values()) {
                    sum2 += b;
                    sumsq2 += b * b;
                    cross += a * b;
                }
            }
            let bias2 = sum2 / n_t;
            let var2 = sumsq2 / n_t - bias2 * bias2;
            let cov = cross / n_t - bias * bias2;
            let denom = Float::sqrt(variance * var2);
            let rho = if denom > T::zero() {
                Some(cov / denom)
            } else {
                None
            };
            (Some(cov), rho)
        }
    };
    Ok(ResidualStats {
        bias_gw: bias,
        mse_gw2: mse,
        variance_gw2: variance,
        covariance_gw2: covariance,
        correlation,
        n,
    })
}

/// Pointwise arithmetic mean of aligned forecast series.
pub fn aggregate_forecasts<T: Scalar>(preds: &[&LoadSeries<T>]) -> Result<LoadSeries<T>> {
    if preds.len() < 2 {
        return Err(Error::Config(
            "aggregation needs at least two forecast series".into(),
        ));
    }
    let reference: Vec<DaySerial> = preds[0].day_set().collect();
    for (i, p) in preds.iter().enumerate().skip(1) {
        let days: Vec<DaySerial> = p.day_set().collect();
        if days != reference {
            return Err(Error::Alignment(format!(
                "forecast {i} covers {} days, expected {} matching days",
                days.len(),
                reference.len()
            )));
        }
    }
    let m = num::<T>(preds.len() as f64);
    let mut out = LoadSeries::new();
    for day in reference {
        let values: Vec<T> = (0..QUARTERS_PER_DAY)
            .map(|q| {
                let sum = preds
                    .iter()
                    .fold(T::zero(), |acc, p| acc + p.get(day).unwrap().get(q));
                sum / m
            })
            .collect();
        out.insert_day(day, DayProfile::new(values)?)?;
    }
    Ok(out)
}

/// Predicted mean squared error of the two-forecast average, from the
/// component moments.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AggregateMsePrediction<T> {
    pub predicted_mse_gw2: T,
    /// Whether averaging is predicted to beat the first forecast:
    /// MSE2 < 3 MSE1 - 2 Cov - 2 b1 b2.
    pub improvement_predicted: bool,
}

/// MSE_avg = MSE1/4 + MSE2/4 + (Cov + b1 b2)/2; requires the pairwise
/// covariance on one of the inputs.
pub fn predicted_mse_pair<T: Scalar>(
    stats1: &ResidualStats<T>,
    stats2: &ResidualStats<T>,
) -> Result<AggregateMsePrediction<T>> {
    let cov = stats1
        .covariance_gw2
        .or(stats2.covariance_gw2)
        .ok_or_else(|| {
            Error::Config("predicted_mse_pair needs the pairwise covariance populated".into())
        })?;
    let quarter = num::<T>(0.25);
    let half = num::<T>(0.5);
    let predicted = quarter * stats1.mse_gw2
        + quarter * stats2.mse_gw2
        + half * (cov + stats1.bias_gw * stats2.bias_gw);
    Ok(AggregateMsePrediction {
        predicted_mse_gw2: predicted,
        improvement_predicted: predicted < stats1.mse_gw2,
    })
}
