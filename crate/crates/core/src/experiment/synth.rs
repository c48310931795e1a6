//! Seed-reproducible synthetic load generation: a deterministic weekly
//! profile plus a stochastic component on the log scale, exponentiated to
//! strictly positive loads.

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::calendar::{day_serial, SpecialDayCalendar};
use crate::error::{Error, Result};
use crate::estimators::{SurfaceStorage, WeightSurface};
use crate::series::{DayProfile, LoadSeries};
use crate::{num, Scalar, QUARTERS_PER_DAY};

/// Ground-truth dynamics for the autoregressive noise model.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: serde::de::DeserializeOwned"))]
pub enum VarTruth<T> {
    /// A = value * I.
    DiagonalConstant { value: T },
    /// Smooth diagonal and last-column edges:
    /// diag(k) = diag_level + diag_amplitude * sin(tau k / q), while the
    /// last column stays near last_level (+ a cosine ripple) and blends
    /// smoothly into the shared corner a(q,q) over the final quarters, the
    /// same corner continuity the two-edge curvature penalty assumes.
    TwoEdgeSmooth {
        diag_level: T,
        diag_amplitude: T,
        last_level: T,
        last_amplitude: T,
    },
}

impl<T: Scalar> VarTruth<T> {
    pub fn surface(&self) -> WeightSurface<T> {
        let q = QUARTERS_PER_DAY;
        let tau = num::<T>(std::f64::consts::TAU);
        let qf = num::<T>(q as f64);
        let storage = match *self {
            VarTruth::DiagonalConstant { value } => {
                SurfaceStorage::Diagonal(DVector::from_element(q, value))
            }
            VarTruth::TwoEdgeSmooth {
                diag_level,
                diag_amplitude,
                last_level,
                last_amplitude,
            } => {
                let diag = DVector::from_fn(q, |k, _| {
                    diag_level + diag_amplitude * Float::sin(tau * num::<T>(k as f64) / qf)
                });
                let corner = diag[q - 1];
                let last = DVector::from_fn(q - 1, |k, _| {
                    let base =
                        last_level + last_amplitude * Float::cos(tau * num::<T>(k as f64) / qf);
                    // Logistic ramp into the corner over the final quarters.
                    let t = (num::<T>(k as f64) - (qf - num::<T>(12.0))) / num::<T>(5.0);
                    let mix = T::one() / (T::one() + Float::exp(-t));
                    base + mix * (corner - base)
                });
                SurfaceStorage::TwoEdge { diag, last }
            }
        };
        WeightSurface::from_parts(q, storage, T::zero(), None).expect("valid truth surface")
    }
}

/// Stochastic component of the log-load.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: serde::de::DeserializeOwned"))]
pub enum NoiseModel<T> {
    /// Per-quarter AR(1) across days with cross-quarter Gaussian-kernel
    /// correlation of the innovations.
    Ar1 {
        coefficient: T,
        sd: T,
        length_scale: T,
    },
    /// The 7-day difference of the log-load follows Y(d) = A Y(d-1) + e(d)
    /// with smooth innovations; the weekly component is untouched.
    Var {
        truth: VarTruth<T>,
        innovation_sd: T,
        innovation_length_scale: T,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: serde::de::DeserializeOwned"))]
pub struct SyntheticSpec<T> {
    pub start_date: NaiveDate,
    pub n_days: usize,
    /// Log of the base load level; defaults to ln(30 GW in MW).
    #[serde(default = "default_base_log")]
    pub base_log_level: f64,
    /// Weekday/weekend modulation depth of the deterministic profile.
    #[serde(default = "default_weekly_amplitude")]
    pub weekly_amplitude: f64,
    /// Within-day sinusoidal shape depth.
    #[serde(default = "default_shape_amplitude")]
    pub shape_amplitude: f64,
    pub noise: NoiseModel<T>,
    /// Additive log-scale level shift applied on special days (e.g. -0.1
    /// for a holiday demand drop). None disables the distortion.
    #[serde(default)]
    pub special_distortion: Option<T>,
    pub seed: u64,
}

fn default_base_log() -> f64 {
    (30_000.0f64).ln()
}

fn default_weekly_amplitude() -> f64 {
    0.04
}

fn default_shape_amplitude() -> f64 {
    0.10
}

pub struct SynthOutput<T: Scalar> {
    pub loads: LoadSeries<T>,
    /// Ground-truth surface when the noise model embeds one.
    pub truth: Option<WeightSurface<T>>,
}

/// Relative weekday levels of the deterministic profile, period 7 in the
/// day serial.
const WEEKDAY_LEVELS: [f64; 7] = [1.0, 1.0, 1.0, 1.0, 0.9, 0.55, 0.4];

fn smooth_kernel_root<T: Scalar>(length_scale: T) -> Result<DMatrix<T>> {
    let q = QUARTERS_PER_DAY;
    let jitter = num::<T>(1e-9);
    let kernel = DMatrix::from_fn(q, q, |a, b| {
        let d = num::<T>(a as f64 - b as f64);
        let corr = Float::exp(-(d * d) / (num::<T>(2.0) * length_scale * length_scale));
        if a == b {
            corr + jitter
        } else {
            corr
        }
    });
    nalgebra::Cholesky::new(kernel)
        .map(|c| c.l())
        .ok_or_else(|| Error::Config("smoothness kernel is not positive definite".into()))
}

fn standard_normal_vec<T: Scalar>(rng: &mut ChaCha8Rng) -> DVector<T>
where
    StandardNormal: Distribution<T>,
{
    let mut v = DVector::zeros(QUARTERS_PER_DAY);
    for i in 0..QUARTERS_PER_DAY {
        v[i] = StandardNormal.sample(rng);
    }
    v
}

/// Generates the load series (and the implied ground-truth surface for the
/// VAR noise model). Identical specs produce bit-identical series.
#[allow(clippy::needless_range_loop)] // day/quarter indices feed the profile formulas
pub fn synth_generate<T: Scalar>(
    spec: &SyntheticSpec<T>,
    cal: &SpecialDayCalendar,
) -> Result<SynthOutput<T>>
where
    StandardNormal: Distribution<T>,
{
    if spec.n_days == 0 {
        return Err(Error::Config("synthetic spec needs n_days >= 1".into()));
    }
    let check_sd = |sd: T| {
        if sd < T::zero() || !Float::is_finite(sd) {
            Err(Error::Config("noise sd must be finite and >= 0".into()))
        } else {
            Ok(())
        }
    };
    let q = QUARTERS_PER_DAY;
    let start = day_serial(spec.start_date)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Stochastic log-scale component per day.
    let mut eta: Vec<DVector<T>> = Vec::with_capacity(spec.n_days);
    let truth = match spec.noise {
        NoiseModel::Ar1 {
            coefficient,
            sd,
            length_scale,
        } => {
            check_sd(sd)?;
            if length_scale <= T::zero() {
                return Err(Error::Config("length scale must be > 0".into()));
            }
            let root = smooth_kernel_root(length_scale)?;
            let mut prev = DVector::<T>::zeros(q);
            for _ in 0..spec.n_days {
                let shock = &root * standard_normal_vec::<T>(&mut rng) * sd;
                let current = &prev * coefficient + shock;
                eta.push(current.clone());
                prev = current;
            }
            None
        }
        NoiseModel::Var {
            truth,
            innovation_sd,
            innovation_length_scale,
        } => {
            check_sd(innovation_sd)?;
            if innovation_length_scale <= T::zero() {
                return Err(Error::Config("length scale must be > 0".into()));
            }
            let root = smooth_kernel_root(innovation_length_scale)?;
            let surface = truth.surface();
            // Drive the 7-day difference directly: Y(d) = A Y(d-1) + e(d),
            // then unroll eta(d) = eta(d-7) + Y(d) so the difference of the
            // log series reproduces Y exactly.
            let mut y_prev = DVector::<T>::zeros(q);
            for d in 0..spec.n_days {
                let shock = &root * standard_normal_vec::<T>(&mut rng) * innovation_sd;
                let y = surface.apply(&y_prev) + shock;
                let base = if d >= 7 {
                    eta[d - 7].clone()
                } else {
                    DVector::zeros(q)
                };
                eta.push(base + &y);
                y_prev = y;
            }
            Some(surface)
        }
    };

    let tau = std::f64::consts::TAU;
    let mut loads = LoadSeries::new();
    for d in 0..spec.n_days {
        let day = start + d as i64;
        let weekday = (day.value().rem_euclid(7)) as usize;
        let weekly = num::<T>(spec.weekly_amplitude * (WEEKDAY_LEVELS[weekday] - 0.75));
        let distortion = match spec.special_distortion {
            Some(delta) => {
                if cal.in_special_set(day)? {
                    delta
                } else {
                    T::zero()
                }
            }
            None => T::zero(),
        };
        let mut values = Vec::with_capacity(q);
        for k in 0..q {
            let shape = num::<T>(
                spec.shape_amplitude * (tau * (k as f64 + 1.0) / q as f64 - 0.8).sin(),
            );
            let log_load =
                num::<T>(spec.base_log_level) + weekly + shape + eta[d][k] + distortion;
            let load = Float::exp(log_load);
            if !(Float::is_finite(load) && load > T::zero()) {
                return Err(Error::Config(format!(
                    "synthetic spec implies a non-positive load at {day} quarter {}",
                    k + 1
                )));
            }
            values.push(load);
        }
        loads.insert_day(day, DayProfile::new(values)?)?;
    }
    Ok(SynthOutput { loads, truth })
}
