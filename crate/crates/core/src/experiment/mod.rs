//! Cross-validation, scenario orchestration, and synthetic data generation.
//!
//! A scenario covers three consecutive years: hyperparameters are tuned by
//! fitting on the first year and scoring quarter-hourly MAPE on the second
//! (the validation year), the final model is refit on the validation year
//! (the last full year before the test), and forecasts are scored on the
//! third.

pub mod synth;

use std::collections::BTreeSet;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calendar::{year_range, DaySerial, SpecialDayCalendar};
use crate::error::{Error, Result};
use crate::estimators::{fit, EstimatorKind, WeightSurface};
use crate::eval::{
    aggregate_forecasts, metrics_report, predicted_mse_pair, residual_series, residual_stats,
    MetricsReport,
};
use crate::forecast::{rolling_forecast, to_series};
use crate::ingest::{ingest_csv, CsvFormat};
use crate::series::{
    build_training_pairs, log_transform, mask_special, seven_day_diff, LoadSeries, TrainingSet,
};
use crate::{num, Scalar, QUARTERS_PER_DAY};

/// Default per-parameter grid; covers every selected value reported by the
/// reference tuning runs.
pub const DEFAULT_LAMBDA_GRID: [f64; 7] = [0.01, 0.1, 1.0, 10.0, 100.0, 1000.0, 10_000.0];

/// Estimator families by CLI/config name.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorName {
    Ols,
    Ta,
    Ts,
    Rbf,
    Te,
    One,
}

impl EstimatorName {
    pub const ALL: [EstimatorName; 6] = [
        EstimatorName::Ols,
        EstimatorName::Ta,
        EstimatorName::Ts,
        EstimatorName::Rbf,
        EstimatorName::Te,
        EstimatorName::One,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorName::Ols => "OLS",
            EstimatorName::Ta => "TA",
            EstimatorName::Ts => "TS",
            EstimatorName::Rbf => "RBF",
            EstimatorName::Te => "TE",
            EstimatorName::One => "OnE",
        }
    }
}

impl std::str::FromStr for EstimatorName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ols" => Ok(EstimatorName::Ols),
            "ta" => Ok(EstimatorName::Ta),
            "ts" => Ok(EstimatorName::Ts),
            "rbf" => Ok(EstimatorName::Rbf),
            "te" => Ok(EstimatorName::Te),
            "one" | "one_edge" => Ok(EstimatorName::One),
            other => Err(Error::Config(format!(
                "unknown estimator {other:?}; use ols, ta, ts, rbf, te, one"
            ))),
        }
    }
}

/// The Cartesian hyperparameter candidates of one family over a grid.
pub fn candidate_grid<T: Scalar>(
    name: EstimatorName,
    grid: &[T],
    rbf_sigma: T,
    rbf_m: usize,
) -> Vec<EstimatorKind<T>> {
    match name {
        EstimatorName::Ols => vec![EstimatorKind::Ols],
        EstimatorName::Ta => grid
            .iter()
            .map(|&lambda| EstimatorKind::Ta { lambda })
            .collect(),
        EstimatorName::Ts => grid
            .iter()
            .flat_map(|&lambda1| {
                grid.iter().map(move |&lambda2| EstimatorKind::Ts { lambda1, lambda2 })
            })
            .collect(),
        EstimatorName::Rbf => grid
            .iter()
            .map(|&lambda| EstimatorKind::Rbf {
                lambda,
                sigma: rbf_sigma,
                m: rbf_m,
            })
            .collect(),
        EstimatorName::Te => grid
            .iter()
            .flat_map(|&lambda_diag| {
                grid.iter().map(move |&lambda_last| EstimatorKind::Te {
                    lambda_diag,
                    lambda_last,
                })
            })
            .collect(),
        EstimatorName::One => grid
            .iter()
            .map(|&lambda_diag| EstimatorKind::One { lambda_diag })
            .collect(),
    }
}

fn lambda_sum<T: Scalar>(kind: &EstimatorKind<T>) -> T {
    match *kind {
        EstimatorKind::Ols => T::zero(),
        EstimatorKind::Ta { lambda } | EstimatorKind::Rbf { lambda, .. } => lambda,
        EstimatorKind::Ts { lambda1, lambda2 } => lambda1 + lambda2,
        EstimatorKind::Te {
            lambda_diag,
            lambda_last,
        } => lambda_diag + lambda_last,
        EstimatorKind::One { lambda_diag } => lambda_diag,
    }
}

fn lambda_tuple<T: Scalar>(kind: &EstimatorKind<T>) -> (T, T) {
    match *kind {
        EstimatorKind::Ols => (T::zero(), T::zero()),
        EstimatorKind::Ta { lambda } | EstimatorKind::Rbf { lambda, .. } => (lambda, T::zero()),
        EstimatorKind::Ts { lambda1, lambda2 } => (lambda1, lambda2),
        EstimatorKind::Te {
            lambda_diag,
            lambda_last,
        } => (lambda_diag, lambda_last),
        EstimatorKind::One { lambda_diag } => (lambda_diag, T::zero()),
    }
}

/// One evaluated grid point.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: serde::de::DeserializeOwned"))]
pub struct CVEntry<T> {
    pub kind: EstimatorKind<T>,
    pub validation_mape_pct: T,
    pub dof: T,
}

/// Full grid with the selected point; the winner attains the minimal
/// validation MAPE, ties (within 1e-12) resolving toward the larger total
/// penalty.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: serde::de::DeserializeOwned"))]
pub struct CVResult<T> {
    pub entries: Vec<CVEntry<T>>,
    pub selected: usize,
}

impl<T: Scalar> CVResult<T> {
    pub fn selected_kind(&self) -> &EstimatorKind<T> {
        &self.entries[self.selected].kind
    }

    pub fn selected_entry(&self) -> &CVEntry<T> {
        &self.entries[self.selected]
    }
}

fn select_entry<T: Scalar>(entries: &[CVEntry<T>]) -> usize {
    let tol = num::<T>(1e-12);
    let mut best = 0usize;
    for i in 1..entries.len() {
        let cur = &entries[i];
        let champ = &entries[best];
        if cur.validation_mape_pct < champ.validation_mape_pct - tol {
            best = i;
            continue;
        }
        let tied =
            num_traits::Float::abs(cur.validation_mape_pct - champ.validation_mape_pct) <= tol;
        if tied {
            let (cs, bs) = (lambda_sum(&cur.kind), lambda_sum(&champ.kind));
            if cs > bs || (cs == bs && lambda_tuple(&cur.kind) > lambda_tuple(&champ.kind)) {
                best = i;
            }
        }
    }
    best
}

/// Fits every candidate on the training year and scores quarter-hourly MAPE
/// on the validation year's test days. Grid points run concurrently;
/// results keep grid order.
pub fn grid_search<T: Scalar>(
    data: &LoadSeries<T>,
    cal: &SpecialDayCalendar,
    train_year: i32,
    validation_year: i32,
    candidates: &[EstimatorKind<T>],
) -> Result<CVResult<T>> {
    if candidates.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    let train = training_pairs_for_year(data, cal, train_year)?;
    let entries: Vec<CVEntry<T>> = candidates
        .par_iter()
        .map(|kind| -> Result<CVEntry<T>> {
            let surface = fit(&train, kind)?;
            let mape = validation_mape(&surface, data, cal, validation_year)?;
            Ok(CVEntry {
                kind: *kind,
                validation_mape_pct: mape,
                dof: surface.dof(),
            })
        })
        .collect::<Result<_>>()?;
    let selected = select_entry(&entries);
    Ok(CVResult { entries, selected })
}

/// Training pairs whose target day lies in the given calendar year.
pub fn training_pairs_for_year<T: Scalar>(
    data: &LoadSeries<T>,
    cal: &SpecialDayCalendar,
    year: i32,
) -> Result<TrainingSet<T>> {
    let diff = mask_special(seven_day_diff(&log_transform(data)?), cal)?;
    let (start, end) = year_range(year)?;
    build_training_pairs(&diff, start, end)
}

fn validation_mape<T: Scalar>(
    surface: &WeightSurface<T>,
    data: &LoadSeries<T>,
    cal: &SpecialDayCalendar,
    year: i32,
) -> Result<T> {
    let days = rolling_forecast(surface, data, cal, year)?;
    let pred = to_series(&days)?;
    let day_set: BTreeSet<DaySerial> = pred.day_set().collect();
    Ok(crate::eval::quarter_metrics(data, &pred, &day_set)?.mape_pct)
}

/// Scenario definition: three consecutive years, data sources, estimator
/// selection, and tuning controls.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: serde::de::DeserializeOwned"))]
pub struct ScenarioConfig<T> {
    pub train_year: i32,
    pub validation_year: i32,
    pub test_year: i32,
    pub load_csv: PathBuf,
    #[serde(default)]
    pub load_format: CsvFormat,
    #[serde(default)]
    pub benchmark_csv: Option<PathBuf>,
    #[serde(default)]
    pub benchmark_format: CsvFormat,
    /// Estimator families to run; defaults to all six.
    #[serde(default)]
    pub estimators: Vec<EstimatorName>,
    /// Per-parameter grid; defaults to [`DEFAULT_LAMBDA_GRID`].
    #[serde(default)]
    pub lambda_grid: Option<Vec<T>>,
    /// Pinned hyperparameters; families listed here skip cross-validation.
    #[serde(default)]
    pub pinned: Vec<EstimatorKind<T>>,
    #[serde(default = "default_rbf_sigma")]
    pub rbf_sigma: f64,
    #[serde(default = "default_rbf_m")]
    pub rbf_m: usize,
    /// Extended Easter table; the bundled 1990-2019 table otherwise.
    #[serde(default)]
    pub easter_file: Option<PathBuf>,
    /// Produce benchmark-averaged forecasts and the predicted-MSE block
    /// when a benchmark is present.
    #[serde(default = "default_true")]
    pub include_aggregates: bool,
}

fn default_rbf_sigma() -> f64 {
    crate::estimators::DEFAULT_RBF_SIGMA
}

fn default_rbf_m() -> usize {
    crate::estimators::DEFAULT_RBF_SUBDIVISIONS
}

fn default_true() -> bool {
    true
}

impl<T: Scalar> ScenarioConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.validation_year != self.train_year + 1
            || self.test_year != self.validation_year + 1
        {
            return Err(Error::Config(format!(
                "scenario years must be consecutive: got {}, {}, {}",
                self.train_year, self.validation_year, self.test_year
            )));
        }
        if self.rbf_sigma <= 0.0 || self.rbf_m < 1 {
            return Err(Error::Config("rbf_sigma must be > 0 and rbf_m >= 1".into()));
        }
        Ok(())
    }

    pub fn estimator_names(&self) -> Vec<EstimatorName> {
        if self.estimators.is_empty() {
            EstimatorName::ALL.to_vec()
        } else {
            self.estimators.clone()
        }
    }

    pub fn grid(&self) -> Vec<T> {
        match &self.lambda_grid {
            Some(g) => g.clone(),
            None => DEFAULT_LAMBDA_GRID.iter().map(|&l| num::<T>(l)).collect(),
        }
    }

    fn pinned_for(&self, name: EstimatorName) -> Option<EstimatorKind<T>> {
        self.pinned
            .iter()
            .find(|k| k.name() == name.as_str())
            .copied()
    }

    pub fn calendar(&self) -> Result<SpecialDayCalendar> {
        match &self.easter_file {
            Some(path) => SpecialDayCalendar::from_easter_file(path),
            None => Ok(SpecialDayCalendar::bundled()),
        }
    }
}

/// Percentage change of each index relative to the benchmark
/// (negative is better than the benchmark).
#[derive(Clone, Copy, Debug, Serialize)]
#[serde(bound(serialize = "T: Serialize"))]
pub struct BenchmarkDeltas<T> {
    pub mape_pct: T,
    pub rmse_pct: T,
    pub mae_pct: T,
    pub mape_daily_pct: T,
    pub rmse_daily_pct: T,
    pub mae_daily_pct: T,
}

fn benchmark_deltas<T: Scalar>(
    model: &MetricsReport<T>,
    bench: &MetricsReport<T>,
) -> BenchmarkDeltas<T> {
    let pct = |m: T, b: T| num::<T>(100.0) * (m - b) / b;
    BenchmarkDeltas {
        mape_pct: pct(model.mape_pct, bench.mape_pct),
        rmse_pct: pct(model.rmse_gw, bench.rmse_gw),
        mae_pct: pct(model.mae_gw, bench.mae_gw),
        mape_daily_pct: pct(model.mape_daily_pct, bench.mape_daily_pct),
        rmse_daily_pct: pct(model.rmse_daily_gw, bench.rmse_daily_gw),
        mae_daily_pct: pct(model.mae_daily_gw, bench.mae_daily_gw),
    }
}

/// Per-model block of the scenario report.
#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "T: Serialize"))]
pub struct ModelReport<T> {
    pub name: String,
    pub kind: Option<EstimatorKind<T>>,
    pub metrics: MetricsReport<T>,
    pub vs_benchmark: Option<BenchmarkDeltas<T>>,
    pub cv: Option<CVResult<T>>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "T: Serialize"))]
pub struct AggregateBlock<T> {
    pub name: String,
    pub metrics: MetricsReport<T>,
    pub vs_benchmark: Option<BenchmarkDeltas<T>>,
}

/// Moments of the model/benchmark residual pair and the predicted vs
/// realized MSE of their average.
#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "T: Serialize"))]
pub struct MsePredictionReport<T> {
    pub model: String,
    pub covariance_gw2: T,
    pub bias_model_gw: T,
    pub bias_benchmark_gw: T,
    pub mse_model_gw2: T,
    pub mse_benchmark_gw2: T,
    pub predicted_avg_mse_gw2: T,
    pub realized_avg_mse_gw2: T,
    pub improvement_predicted: bool,
}

#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "T: Serialize"))]
pub struct ScenarioReport<T> {
    pub test_year: i32,
    /// Year the final models were fit on (the validation year of tuning).
    pub fit_year: i32,
    /// Days every model and the benchmark were scored on.
    pub n_days: usize,
    pub benchmark: Option<ModelReport<T>>,
    pub models: Vec<ModelReport<T>>,
    pub aggregates: Vec<AggregateBlock<T>>,
    pub mse_predictions: Vec<MsePredictionReport<T>>,
}

impl<T: Scalar> ScenarioReport<T> {
    /// One line per model for terminal output.
    pub fn summary_lines(&self) -> Vec<String> {
        let fmt = |m: &MetricsReport<T>, name: &str, dof: String| {
            format!(
                "{name:>10}  MAPE {:>6.3}%  RMSE {:>6.3} GW  MAE {:>6.3} GW  daily MAPE {:>6.3}%  dof {dof}",
                m.mape_pct, m.rmse_gw, m.mae_gw, m.mape_daily_pct
            )
        };
        let mut lines = Vec::new();
        if let Some(bench) = &self.benchmark {
            lines.push(fmt(&bench.metrics, &bench.name, "-".into()));
        }
        for model in &self.models {
            let dof = model
                .metrics
                .dof
                .map(|d| format!("{d:.2}"))
                .unwrap_or_else(|| "-".into());
            lines.push(fmt(&model.metrics, &model.name, dof));
        }
        for agg in &self.aggregates {
            lines.push(fmt(&agg.metrics, &agg.name, "-".into()));
        }
        lines
    }
}

fn restrict_days<T: Scalar>(series: &LoadSeries<T>, days: &BTreeSet<DaySerial>) -> LoadSeries<T> {
    let mut out = LoadSeries::new();
    for (day, profile) in series.days() {
        if days.contains(&day) {
            out.insert_day(day, profile.clone()).expect("validated day");
        }
    }
    out
}

/// Runs the full scenario: tune (unless pinned), refit on the validation
/// year, forecast the test year, score all models and the persistence
/// baseline on a common day set, and (with a benchmark) build the averaged
/// forecasts and the predicted-MSE block.
pub fn run_scenario<T: Scalar>(config: &ScenarioConfig<T>) -> Result<ScenarioReport<T>> {
    config.validate()?;
    let cal = config.calendar()?;
    let (data, _) = ingest_csv::<T, _>(&config.load_csv, config.load_format)?;
    let benchmark = match &config.benchmark_csv {
        Some(path) => Some(ingest_csv::<T, _>(path, config.benchmark_format)?.0),
        None => None,
    };
    run_scenario_with(config, &cal, &data, benchmark.as_ref())
}

/// Scenario body over already-loaded series (also used by tests and the
/// conditional external-data acceptance path).
pub fn run_scenario_with<T: Scalar>(
    config: &ScenarioConfig<T>,
    cal: &SpecialDayCalendar,
    data: &LoadSeries<T>,
    benchmark: Option<&LoadSeries<T>>,
) -> Result<ScenarioReport<T>> {
    config.validate()?;
    let fit_year = config.validation_year;
    let final_train = training_pairs_for_year(data, cal, fit_year)?;
    let grid = config.grid();
    let sigma = num::<T>(config.rbf_sigma);

    struct Fitted<T: Scalar> {
        name: String,
        kind: EstimatorKind<T>,
        cv: Option<CVResult<T>>,
        surface: WeightSurface<T>,
        forecast: LoadSeries<T>,
    }

    let mut fitted: Vec<Fitted<T>> = Vec::new();
    for name in config.estimator_names() {
        let (kind, cv) = match config.pinned_for(name) {
            Some(kind) => (kind, None),
            None => {
                let candidates = candidate_grid(name, &grid, sigma, config.rbf_m);
                let cv = grid_search(
                    data,
                    cal,
                    config.train_year,
                    config.validation_year,
                    &candidates,
                )?;
                (*cv.selected_kind(), Some(cv))
            }
        };
        let surface = fit(&final_train, &kind)?;
        let forecast = to_series(&rolling_forecast(&surface, data, cal, config.test_year)?)?;
        fitted.push(Fitted {
            name: name.as_str().to_string(),
            kind,
            cv,
            surface,
            forecast,
        });
    }

    // Persistence baseline: tomorrow's load equals last week's.
    let persistence_surface = WeightSurface::<T>::zeros(QUARTERS_PER_DAY);
    let persistence =
        to_series(&rolling_forecast(&persistence_surface, data, cal, config.test_year)?)?;

    // Common evaluation days: every model emits the same set (same context
    // rule); the benchmark restricts it further.
    let mut days: BTreeSet<DaySerial> = persistence.day_set().collect();
    for f in &fitted {
        days = days.intersection(&f.forecast.day_set().collect()).copied().collect();
    }
    if let Some(bench) = benchmark {
        let bench_days: BTreeSet<DaySerial> = bench.day_set().collect();
        days = days.intersection(&bench_days).copied().collect();
    }
    if days.is_empty() {
        return Err(Error::Coverage(
            "no common evaluation days between models and benchmark".into(),
        ));
    }

    let benchmark_metrics = match benchmark {
        Some(bench) => Some(metrics_report(data, bench, &days, None)?),
        None => None,
    };
    let deltas = |metrics: &MetricsReport<T>| {
        benchmark_metrics
            .as_ref()
            .map(|b| benchmark_deltas(metrics, b))
    };

    let mut models = Vec::new();
    let persistence_metrics = metrics_report(data, &persistence, &days, None)?;
    models.push(ModelReport {
        name: "Persistence".into(),
        kind: None,
        vs_benchmark: deltas(&persistence_metrics),
        metrics: persistence_metrics,
        cv: None,
    });
    for f in &fitted {
        let metrics = metrics_report(data, &f.forecast, &days, Some(f.surface.dof()))?;
        models.push(ModelReport {
            name: f.name.clone(),
            kind: Some(f.kind),
            vs_benchmark: deltas(&metrics),
            metrics,
            cv: f.cv.clone(),
        });
    }

    let benchmark_report = benchmark_metrics.map(|metrics| ModelReport {
        name: "Benchmark".into(),
        kind: None,
        metrics,
        vs_benchmark: None,
        cv: None,
    });

    let mut aggregates = Vec::new();
    let mut mse_predictions = Vec::new();
    if let (Some(bench), true) = (benchmark, config.include_aggregates) {
        let bench_on_days = restrict_days(bench, &days);
        for f in &fitted {
            let model_on_days = restrict_days(&f.forecast, &days);
            let avg = aggregate_forecasts(&[&model_on_days, &bench_on_days])?;
            let metrics = metrics_report(data, &avg, &days, None)?;
            aggregates.push(AggregateBlock {
                name: format!("Avg({})", f.name),
                vs_benchmark: benchmark_report
                    .as_ref()
                    .map(|b| benchmark_deltas(&metrics, &b.metrics)),
                metrics,
            });

            let e_model = residual_series(data, &model_on_days, &days)?;
            let e_bench = residual_series(data, &bench_on_days, &days)?;
            let s_model = residual_stats(&e_model, Some(&e_bench))?;
            let s_bench = residual_stats(&e_bench, None)?;
            let predicted = predicted_mse_pair(&s_model, &s_bench)?;
            let e_avg = residual_series(data, &avg, &days)?;
            let realized = residual_stats(&e_avg, None)?;
            mse_predictions.push(MsePredictionReport {
                model: f.name.clone(),
                covariance_gw2: s_model.covariance_gw2.unwrap_or(T::zero()),
                bias_model_gw: s_model.bias_gw,
                bias_benchmark_gw: s_bench.bias_gw,
                mse_model_gw2: s_model.mse_gw2,
                mse_benchmark_gw2: s_bench.mse_gw2,
                predicted_avg_mse_gw2: predicted.predicted_mse_gw2,
                realized_avg_mse_gw2: realized.mse_gw2,
                improvement_predicted: predicted.improvement_predicted,
            });
        }
    }

    Ok(ScenarioReport {
        test_year: config.test_year,
        fit_year,
        n_days: days.len(),
        benchmark: benchmark_report,
        models,
        aggregates,
        mse_predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_covers_reference_tuning_values() {
        for v in [0.01, 0.1, 1.0, 10.0, 100.0, 10_000.0] {
            assert!(
                DEFAULT_LAMBDA_GRID.contains(&v),
                "{v} missing from default grid"
            );
        }
        assert_eq!(DEFAULT_LAMBDA_GRID.len(), 7);
    }

    #[test]
    fn candidate_grids_have_cartesian_sizes() {
        let grid: Vec<f64> = DEFAULT_LAMBDA_GRID.to_vec();
        assert_eq!(candidate_grid(EstimatorName::Ols, &grid, 4.0, 12).len(), 1);
        assert_eq!(candidate_grid(EstimatorName::Ta, &grid, 4.0, 12).len(), 7);
        assert_eq!(candidate_grid(EstimatorName::Ts, &grid, 4.0, 12).len(), 49);
        assert_eq!(candidate_grid(EstimatorName::Te, &grid, 4.0, 12).len(), 49);
        assert_eq!(candidate_grid(EstimatorName::One, &grid, 4.0, 12).len(), 7);
    }

    #[test]
    fn tie_break_prefers_larger_penalty() {
        let entries = vec![
            CVEntry {
                kind: EstimatorKind::Ta { lambda: 0.1 },
                validation_mape_pct: 2.0,
                dof: 10.0,
            },
            CVEntry {
                kind: EstimatorKind::Ta { lambda: 10.0 },
                validation_mape_pct: 2.0,
                dof: 5.0,
            },
            CVEntry {
                kind: EstimatorKind::Ta { lambda: 1.0 },
                validation_mape_pct: 2.5,
                dof: 7.0,
            },
        ];
        assert_eq!(select_entry(&entries), 1);
    }

    #[test]
    fn strictly_better_point_wins_regardless_of_penalty() {
        let entries = vec![
            CVEntry {
                kind: EstimatorKind::Ta { lambda: 10_000.0 },
                validation_mape_pct: 2.0,
                dof: 1.0,
            },
            CVEntry {
                kind: EstimatorKind::Ta { lambda: 0.01 },
                validation_mape_pct: 1.5,
                dof: 50.0,
            },
        ];
        assert_eq!(select_entry(&entries), 1);
    }

    #[test]
    fn scenario_config_rejects_non_consecutive_years() {
        let cfg: ScenarioConfig<f64> = ScenarioConfig {
            train_year: 2015,
            validation_year: 2017,
            test_year: 2018,
            load_csv: "load.csv".into(),
            load_format: CsvFormat::Wide,
            benchmark_csv: None,
            benchmark_format: CsvFormat::Wide,
            estimators: vec![],
            lambda_grid: None,
            pinned: vec![],
            rbf_sigma: 4.0,
            rbf_m: 12,
            easter_file: None,
            include_aggregates: true,
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn scenario_config_parses_from_json_with_defaults() {
        let json = r#"{
            "train_year": 2015,
            "validation_year": 2016,
            "test_year": 2017,
            "load_csv": "data/load.csv",
            "estimators": ["ta", "te"],
            "pinned": [{"kind": "ta", "lambda": 0.1}]
        }"#;
        let cfg: ScenarioConfig<f64> = serde_json::from_str(json).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.estimator_names(), vec![EstimatorName::Ta, EstimatorName::Te]);
        assert_eq!(cfg.grid().len(), 7);
        assert!(cfg.pinned_for(EstimatorName::Ta).is_some());
        assert!(cfg.pinned_for(EstimatorName::Te).is_none());
        assert_eq!(cfg.rbf_m, 12);
    }
}
