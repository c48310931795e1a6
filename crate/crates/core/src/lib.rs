//! One-day-ahead forecasting of a quarter-hourly electric load series.
//!
//! The pipeline: ingest a load series sampled 96 times per day, take natural
//! logs, remove the weekly pattern with a 7-day difference, mask holiday
//! windows, and fit a linear map from yesterday's differenced profile to
//! today's. The 96x96 weight matrix is estimated by six schemes of varying
//! complexity (plain least squares, two Tikhonov penalties, a radial-basis
//! surface model, and two sparse edge models), each reporting its equivalent
//! degrees of freedom. Forecasts are reconstructed in megawatts, scored with
//! quarter-hourly and daily MAPE/RMSE/MAE, and optionally averaged with an
//! external benchmark forecast.
//!
//! Numeric code is generic over the scalar type ([`Scalar`], implemented for
//! `f32` and `f64`); the type aliases at the crate root pin the `f64`
//! instantiations used by the CLI.

use std::fmt::Display;

use nalgebra::RealField;
use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub mod calendar;
pub mod error;
pub mod estimators;
pub mod eval;
pub mod experiment;
pub mod forecast;
pub mod ingest;
pub mod series;
pub mod solver;

pub use error::{Error, Result};

/// Quarter-hours per day; the fixed sampling of the ingested series.
pub const QUARTERS_PER_DAY: usize = 96;

/// Scalar type the numeric core is generic over.
pub trait Scalar:
    RealField + Float + FromPrimitive + ToPrimitive + Copy + Default + Display + Serialize + DeserializeOwned
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Conversion for numeric literals in generic code.
#[inline]
pub(crate) fn num<T: Scalar>(x: f64) -> T {
    <T as FromPrimitive>::from_f64(x).expect("literal representable in scalar type")
}

pub type LoadSeries64 = series::LoadSeries<f64>;
pub type LogSeries64 = series::LogSeries<f64>;
pub type DiffSeries64 = series::DiffSeries<f64>;
pub type TrainingSet64 = series::TrainingSet<f64>;
pub type SolveResult64 = solver::SolveResult<f64>;
pub type WeightSurface64 = estimators::WeightSurface<f64>;
pub type EstimatorKind64 = estimators::EstimatorKind<f64>;
pub type MetricsReport64 = eval::MetricsReport<f64>;
pub type ScenarioReport64 = experiment::ScenarioReport<f64>;
