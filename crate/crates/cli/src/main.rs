//! Command-line driver for the quarter-hourly load forecasting pipeline.
//!
//! Exit codes: 0 on success, 2 for validation/configuration problems, 3 for
//! numerical failures (singular systems, overflow).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use loadcast::calendar::{year_range, DaySerial, SpecialDayCalendar};
use loadcast::error::{Error, Result};
use loadcast::estimators::{fit, EstimatorKind, WeightSurface};
use loadcast::eval::{
    metrics_report, predicted_mse_pair, residual_series, residual_stats, MetricsReport,
};
use loadcast::experiment::synth::{synth_generate, NoiseModel, SyntheticSpec};
use loadcast::experiment::{
    candidate_grid, grid_search, run_scenario, training_pairs_for_year, EstimatorName,
    ScenarioConfig,
};
use loadcast::forecast::{
    read_forecast_csv_path, rolling_forecast, to_series, write_forecast_csv_path,
};
use loadcast::ingest::{ingest_csv, write_diff_csv, write_wide_csv_path, CsvFormat};
use loadcast::series::{log_transform, mask_special, seven_day_diff, LoadSeries};

#[derive(Parser)]
#[command(
    name = "loadcast",
    version,
    about = "One-day-ahead forecasting of quarter-hourly electric load"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CalendarArgs {
    /// Easter-window table (CSV year,start,end) extending the bundled
    /// 1990-2019 coverage.
    #[arg(long)]
    easter_file: Option<PathBuf>,
}

impl CalendarArgs {
    fn calendar(&self) -> Result<SpecialDayCalendar> {
        match &self.easter_file {
            Some(path) => SpecialDayCalendar::from_easter_file(path),
            None => Ok(SpecialDayCalendar::bundled()),
        }
    }
}

#[derive(Args, Clone)]
struct KindArgs {
    /// Estimator: ols, ta, ts, rbf, te, one.
    #[arg(long)]
    kind: String,
    /// Ridge weight (ta, rbf).
    #[arg(long)]
    lambda: Option<f64>,
    /// Row-curvature weight (ts).
    #[arg(long)]
    lambda1: Option<f64>,
    /// Column-curvature weight (ts).
    #[arg(long)]
    lambda2: Option<f64>,
    /// Diagonal-edge curvature weight (te, one).
    #[arg(long)]
    lambda_diag: Option<f64>,
    /// Last-column-edge curvature weight (te).
    #[arg(long)]
    lambda_last: Option<f64>,
    /// Radial width (rbf).
    #[arg(long, default_value_t = 4.0)]
    sigma: f64,
    /// Center-grid subdivisions per axis (rbf).
    #[arg(long, default_value_t = 12)]
    m: usize,
}

impl KindArgs {
    fn estimator(&self) -> Result<EstimatorKind<f64>> {
        let need = |opt: Option<f64>, flag: &str| {
            opt.ok_or_else(|| Error::Config(format!("--{flag} is required for --kind {}", self.kind)))
        };
        let kind = match self.kind.parse::<EstimatorName>()? {
            EstimatorName::Ols => EstimatorKind::Ols,
            EstimatorName::Ta => EstimatorKind::Ta {
                lambda: need(self.lambda, "lambda")?,
            },
            EstimatorName::Ts => EstimatorKind::Ts {
                lambda1: need(self.lambda1, "lambda1")?,
                lambda2: need(self.lambda2, "lambda2")?,
            },
            EstimatorName::Rbf => EstimatorKind::Rbf {
                lambda: need(self.lambda, "lambda")?,
                sigma: self.sigma,
                m: self.m,
            },
            EstimatorName::Te => EstimatorKind::Te {
                lambda_diag: need(self.lambda_diag, "lambda-diag")?,
                lambda_last: need(self.lambda_last, "lambda-last")?,
            },
            EstimatorName::One => EstimatorKind::One {
                lambda_diag: need(self.lambda_diag, "lambda-diag")?,
            },
        };
        kind.validate()?;
        Ok(kind)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a load CSV and write the canonical wide store.
    Ingest {
        /// Input CSV (long: timestamp,load_mw; wide: date,v1..v96).
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "wide")]
        format: CsvFormat,
        /// Output wide store CSV.
        #[arg(long)]
        output: PathBuf,
        /// Skipped-day report CSV (date,reason).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Emit the masked 7-day-differenced log series.
    Preprocess {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "wide")]
        format: CsvFormat,
        /// Output CSV: date,masked,v1..v96.
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        calendar: CalendarArgs,
    },
    /// Fit one estimator and write the weight surface.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "wide")]
        format: CsvFormat,
        #[command(flatten)]
        kind: KindArgs,
        /// Calendar year whose days form the training targets.
        #[arg(long)]
        train_year: i32,
        /// Output surface CSV (a .meta.json sidecar is written next to it).
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        calendar: CalendarArgs,
    },
    /// Grid-search hyperparameters against a validation year.
    Cv {
        /// Scenario JSON config; flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        format: Option<CsvFormat>,
        /// Estimator family to tune (ols, ta, ts, rbf, te, one).
        #[arg(long)]
        kind: Option<String>,
        /// Comma-separated per-parameter grid, e.g. 0.01,0.1,1.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        train_year: Option<i32>,
        #[arg(long)]
        validation_year: Option<i32>,
        #[arg(long, default_value_t = 4.0)]
        sigma: f64,
        #[arg(long, default_value_t = 12)]
        m: usize,
        /// Output CVResult JSON.
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        calendar: CalendarArgs,
    },
    /// Forecast every test day of a year with a fitted surface.
    Forecast {
        /// Surface CSV written by `fit`.
        #[arg(long)]
        surface: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "wide")]
        format: CsvFormat,
        #[arg(long)]
        year: i32,
        /// Output forecast CSV (date,q,load_pred_mw).
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        calendar: CalendarArgs,
    },
    /// Score a forecast (and optionally a benchmark) on a test year.
    Evaluate {
        /// Actual loads.
        #[arg(long)]
        actual: PathBuf,
        #[arg(long, default_value = "wide")]
        format: CsvFormat,
        /// Forecast CSV (date,q,load_pred_mw).
        #[arg(long)]
        forecast: PathBuf,
        /// Benchmark forecast in a load CSV format.
        #[arg(long)]
        benchmark: Option<PathBuf>,
        #[arg(long, default_value = "wide")]
        benchmark_format: CsvFormat,
        #[arg(long)]
        year: i32,
        /// Model complexity to embed in the report.
        #[arg(long)]
        dof: Option<f64>,
        /// Output report JSON.
        #[arg(long)]
        output: PathBuf,
        /// Residual CSV export (date,q,residual_gw).
        #[arg(long)]
        residuals: Option<PathBuf>,
        #[command(flatten)]
        calendar: CalendarArgs,
    },
    /// Average aligned forecast CSVs pointwise.
    Aggregate {
        /// Output forecast CSV.
        #[arg(long)]
        output: PathBuf,
        /// Two or more forecast CSVs with identical day coverage.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Run a full scenario: tune, refit, forecast, score, aggregate.
    Scenario {
        /// Scenario JSON config; flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        load_csv: Option<PathBuf>,
        #[arg(long)]
        load_format: Option<CsvFormat>,
        #[arg(long)]
        benchmark_csv: Option<PathBuf>,
        #[arg(long)]
        benchmark_format: Option<CsvFormat>,
        #[arg(long)]
        train_year: Option<i32>,
        #[arg(long)]
        validation_year: Option<i32>,
        #[arg(long)]
        test_year: Option<i32>,
        /// Comma-separated estimator families.
        #[arg(long)]
        estimators: Option<String>,
        /// Comma-separated per-parameter grid.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        rbf_sigma: Option<f64>,
        #[arg(long)]
        rbf_m: Option<usize>,
        #[arg(long)]
        easter_file: Option<PathBuf>,
        /// Skip the benchmark-averaging block.
        #[arg(long)]
        no_aggregates: bool,
        /// Output report JSON.
        #[arg(long)]
        output: PathBuf,
    },
    /// Generate a synthetic load series.
    Synth {
        /// Synthetic spec JSON; flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        start: Option<NaiveDate>,
        #[arg(long)]
        days: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// AR(1) innovation standard deviation (ignored when a config file
        /// selects another noise model).
        #[arg(long)]
        noise_sd: Option<f64>,
        /// Output wide load CSV.
        #[arg(long)]
        output: PathBuf,
        /// Ground-truth surface CSV (VAR noise model only).
        #[arg(long)]
        truth: Option<PathBuf>,
        #[command(flatten)]
        calendar: CalendarArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_numerical() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn parse_grid(raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad grid value {tok:?}")))
        })
        .collect()
}

fn parse_estimators(raw: &str) -> Result<Vec<EstimatorName>> {
    raw.split(',').map(|tok| tok.trim().parse()).collect()
}

/// Scenario config file with every field optional, so CLI flags can fill
/// the gaps.
#[derive(Deserialize, Default)]
#[serde(default)]
struct PartialScenario {
    train_year: Option<i32>,
    validation_year: Option<i32>,
    test_year: Option<i32>,
    load_csv: Option<PathBuf>,
    load_format: Option<CsvFormat>,
    benchmark_csv: Option<PathBuf>,
    benchmark_format: Option<CsvFormat>,
    estimators: Option<Vec<EstimatorName>>,
    lambda_grid: Option<Vec<f64>>,
    pinned: Option<Vec<EstimatorKind<f64>>>,
    rbf_sigma: Option<f64>,
    rbf_m: Option<usize>,
    easter_file: Option<PathBuf>,
    include_aggregates: Option<bool>,
}

impl PartialScenario {
    fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                Ok(serde_json::from_str(&text)?)
            }
            None => Ok(PartialScenario::default()),
        }
    }

    fn finish(self) -> Result<ScenarioConfig<f64>> {
        let require = |field: Option<i32>, name: &str| {
            field.ok_or_else(|| Error::Config(format!("{name} missing (config or flag)")))
        };
        Ok(ScenarioConfig {
            train_year: require(self.train_year, "train_year")?,
            validation_year: require(self.validation_year, "validation_year")?,
            test_year: require(self.test_year, "test_year")?,
            load_csv: self
                .load_csv
                .ok_or_else(|| Error::Config("load_csv missing (config or flag)".into()))?,
            load_format: self.load_format.unwrap_or_default(),
            benchmark_csv: self.benchmark_csv,
            benchmark_format: self.benchmark_format.unwrap_or_default(),
            estimators: self.estimators.unwrap_or_default(),
            lambda_grid: self.lambda_grid,
            pinned: self.pinned.unwrap_or_default(),
            rbf_sigma: self.rbf_sigma.unwrap_or(4.0),
            rbf_m: self.rbf_m.unwrap_or(12),
            easter_file: self.easter_file,
            include_aggregates: self.include_aggregates.unwrap_or(true),
        })
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest {
            input,
            format,
            output,
            report,
        } => {
            let (series, ingest_report) = ingest_csv::<f64, _>(&input, format)?;
            write_wide_csv_path(&series, &output)?;
            if let Some(report_path) = &report {
                ingest_report.write_csv_path(report_path)?;
            }
            println!(
                "ingested {} days ({} skipped) -> {}",
                ingest_report.days_loaded,
                ingest_report.skipped.len(),
                output.display()
            );
            Ok(())
        }
        Command::Preprocess {
            data,
            format,
            output,
            calendar,
        } => {
            let cal = calendar.calendar()?;
            let (series, _) = ingest_csv::<f64, _>(&data, format)?;
            let diff = mask_special(seven_day_diff(&log_transform(&series)?), &cal)?;
            let file = std::fs::File::create(&output)?;
            write_diff_csv(&diff, file)?;
            let masked = diff.days().filter(|(_, e)| e.masked).count();
            println!(
                "wrote {} differenced days ({} masked) -> {}",
                diff.len(),
                masked,
                output.display()
            );
            Ok(())
        }
        Command::Fit {
            data,
            format,
            kind,
            train_year,
            output,
            calendar,
        } => {
            let cal = calendar.calendar()?;
            let (series, _) = ingest_csv::<f64, _>(&data, format)?;
            let estimator = kind.estimator()?;
            let train = training_pairs_for_year(&series, &cal, train_year)?;
            let surface = fit(&train, &estimator)?;
            surface.write_csv(&output)?;
            println!(
                "fitted {} on {} pairs of {train_year}: dof {:.2} -> {}",
                estimator,
                train.len(),
                surface.dof(),
                output.display()
            );
            Ok(())
        }
        Command::Cv {
            config,
            data,
            format,
            kind,
            grid,
            train_year,
            validation_year,
            sigma,
            m,
            output,
            calendar,
        } => {
            let partial = PartialScenario::load(config.as_deref())?;
            let data_path = data
                .or(partial.load_csv.clone())
                .ok_or_else(|| Error::Config("--data or config load_csv required".into()))?;
            let data_format = format.or(partial.load_format).unwrap_or_default();
            let train_year = train_year
                .or(partial.train_year)
                .ok_or_else(|| Error::Config("--train-year required".into()))?;
            let validation_year = validation_year
                .or(partial.validation_year)
                .ok_or_else(|| Error::Config("--validation-year required".into()))?;
            let family = match (&kind, &partial.estimators) {
                (Some(k), _) => k.parse::<EstimatorName>()?,
                (None, Some(list)) if list.len() == 1 => list[0],
                _ => {
                    return Err(Error::Config(
                        "--kind required (or a single-estimator config)".into(),
                    ))
                }
            };
            let grid_values = match (&grid, &partial.lambda_grid) {
                (Some(g), _) => parse_grid(g)?,
                (None, Some(g)) => g.clone(),
                (None, None) => loadcast::experiment::DEFAULT_LAMBDA_GRID.to_vec(),
            };
            let cal = match (&calendar.easter_file, &partial.easter_file) {
                (Some(p), _) => SpecialDayCalendar::from_easter_file(p)?,
                (None, Some(p)) => SpecialDayCalendar::from_easter_file(p)?,
                (None, None) => SpecialDayCalendar::bundled(),
            };
            let (series, _) = ingest_csv::<f64, _>(&data_path, data_format)?;
            let candidates = candidate_grid(family, &grid_values, sigma, m);
            let cv = grid_search(&series, &cal, train_year, validation_year, &candidates)?;
            write_json(&output, &cv)?;
            let best = cv.selected_entry();
            println!(
                "evaluated {} grid points; selected {} (validation MAPE {:.4}%) -> {}",
                cv.entries.len(),
                best.kind,
                best.validation_mape_pct,
                output.display()
            );
            Ok(())
        }
        Command::Forecast {
            surface,
            data,
            format,
            year,
            output,
            calendar,
        } => {
            let cal = calendar.calendar()?;
            let (series, _) = ingest_csv::<f64, _>(&data, format)?;
            let surface = WeightSurface::<f64>::read_csv(&surface)?;
            let days = rolling_forecast(&surface, &series, &cal, year)?;
            let fc = to_series(&days)?;
            write_forecast_csv_path(&fc, &output)?;
            println!("forecast {} days of {year} -> {}", fc.len(), output.display());
            Ok(())
        }
        Command::Evaluate {
            actual,
            format,
            forecast,
            benchmark,
            benchmark_format,
            year,
            dof,
            output,
            residuals,
            calendar,
        } => {
            let cal = calendar.calendar()?;
            let (actual_series, _) = ingest_csv::<f64, _>(&actual, format)?;
            let forecast_series = read_forecast_csv_path::<f64, _>(&forecast)?;
            let benchmark_series = match &benchmark {
                Some(path) => Some(ingest_csv::<f64, _>(path, benchmark_format)?.0),
                None => None,
            };
            let report = evaluate(
                &cal,
                &actual_series,
                &forecast_series,
                benchmark_series.as_ref(),
                year,
                dof,
                residuals.as_deref(),
            )?;
            write_json(&output, &report)?;
            println!(
                "scored {} days of {year}: MAPE {:.4}% -> {}",
                report.n_days,
                report.model.mape_pct,
                output.display()
            );
            Ok(())
        }
        Command::Aggregate { output, inputs } => {
            let series: Vec<LoadSeries<f64>> = inputs
                .iter()
                .map(read_forecast_csv_path::<f64, _>)
                .collect::<Result<_>>()?;
            let refs: Vec<&LoadSeries<f64>> = series.iter().collect();
            let avg = loadcast::eval::aggregate_forecasts(&refs)?;
            write_forecast_csv_path(&avg, &output)?;
            println!(
                "averaged {} forecasts over {} days -> {}",
                series.len(),
                avg.len(),
                output.display()
            );
            Ok(())
        }
        Command::Scenario {
            config,
            load_csv,
            load_format,
            benchmark_csv,
            benchmark_format,
            train_year,
            validation_year,
            test_year,
            estimators,
            grid,
            rbf_sigma,
            rbf_m,
            easter_file,
            no_aggregates,
            output,
        } => {
            let mut partial = PartialScenario::load(config.as_deref())?;
            if load_csv.is_some() {
                partial.load_csv = load_csv;
            }
            if load_format.is_some() {
                partial.load_format = load_format;
            }
            if benchmark_csv.is_some() {
                partial.benchmark_csv = benchmark_csv;
            }
            if benchmark_format.is_some() {
                partial.benchmark_format = benchmark_format;
            }
            if train_year.is_some() {
                partial.train_year = train_year;
            }
            if validation_year.is_some() {
                partial.validation_year = validation_year;
            }
            if test_year.is_some() {
                partial.test_year = test_year;
            }
            if let Some(list) = &estimators {
                partial.estimators = Some(parse_estimators(list)?);
            }
            if let Some(g) = &grid {
                partial.lambda_grid = Some(parse_grid(g)?);
            }
            if rbf_sigma.is_some() {
                partial.rbf_sigma = rbf_sigma;
            }
            if rbf_m.is_some() {
                partial.rbf_m = rbf_m;
            }
            if easter_file.is_some() {
                partial.easter_file = easter_file;
            }
            if no_aggregates {
                partial.include_aggregates = Some(false);
            }
            let config = partial.finish()?;
            let report = run_scenario(&config)?;
            write_json(&output, &report)?;
            for line in report.summary_lines() {
                println!("{line}");
            }
            println!(
                "scenario test year {} scored on {} days -> {}",
                report.test_year,
                report.n_days,
                output.display()
            );
            Ok(())
        }
        Command::Synth {
            config,
            start,
            days,
            seed,
            noise_sd,
            output,
            truth,
            calendar,
        } => {
            let cal = calendar.calendar()?;
            let mut spec: SyntheticSpec<f64> = match &config {
                Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
                None => SyntheticSpec {
                    start_date: NaiveDate::from_ymd_opt(2016, 1, 1).unwrap(),
                    n_days: 365,
                    base_log_level: (30_000.0f64).ln(),
                    weekly_amplitude: 0.04,
                    shape_amplitude: 0.10,
                    noise: NoiseModel::Ar1 {
                        coefficient: 0.5,
                        sd: 0.02,
                        length_scale: 8.0,
                    },
                    special_distortion: None,
                    seed: 0,
                },
            };
            if let Some(s) = start {
                spec.start_date = s;
            }
            if let Some(d) = days {
                spec.n_days = d;
            }
            if let Some(s) = seed {
                spec.seed = s;
            }
            if let Some(sd) = noise_sd {
                if let NoiseModel::Ar1 { sd: ref mut cur, .. } = spec.noise {
                    *cur = sd;
                }
            }
            let out = synth_generate(&spec, &cal)?;
            write_wide_csv_path(&out.loads, &output)?;
            if let Some(truth_path) = &truth {
                match &out.truth {
                    Some(surface) => surface.write_csv(truth_path)?,
                    None => {
                        return Err(Error::Config(
                            "--truth needs the var noise model in the spec".into(),
                        ))
                    }
                }
            }
            println!(
                "generated {} synthetic days (seed {}) -> {}",
                out.loads.len(),
                spec.seed,
                output.display()
            );
            Ok(())
        }
    }
}

#[derive(serde::Serialize)]
struct EvaluateReport {
    year: i32,
    n_days: usize,
    model: MetricsReport<f64>,
    benchmark: Option<MetricsReport<f64>>,
    predicted_avg_mse_gw2: Option<f64>,
    realized_avg_mse_gw2: Option<f64>,
    improvement_predicted: Option<bool>,
    residual_correlation: Option<f64>,
}

fn evaluate(
    cal: &SpecialDayCalendar,
    actual: &LoadSeries<f64>,
    forecast: &LoadSeries<f64>,
    benchmark: Option<&LoadSeries<f64>>,
    year: i32,
    dof: Option<f64>,
    residual_path: Option<&Path>,
) -> Result<EvaluateReport> {
    let test_days = cal.test_day_set(year)?;
    let mut days: BTreeSet<DaySerial> = forecast
        .day_set()
        .filter(|d| test_days.contains(d))
        .collect();
    if let Some(bench) = benchmark {
        days.retain(|d| bench.contains(*d));
    }
    // Actual coverage is a hard requirement inside the metric calls.
    let (first, last) = year_range(year)?;
    days.retain(|&d| d >= first && d <= last);
    if days.is_empty() {
        return Err(Error::Coverage(format!(
            "no evaluable test days of {year} shared by the inputs"
        )));
    }
    let model = metrics_report(actual, forecast, &days, dof)?;
    let e_model = residual_series(actual, forecast, &days)?;
    if let Some(path) = residual_path {
        e_model.write_csv_path(path)?;
    }
    let mut report = EvaluateReport {
        year,
        n_days: days.len(),
        model,
        benchmark: None,
        predicted_avg_mse_gw2: None,
        realized_avg_mse_gw2: None,
        improvement_predicted: None,
        residual_correlation: None,
    };
    if let Some(bench) = benchmark {
        report.benchmark = Some(metrics_report(actual, bench, &days, None)?);
        let bench_on_days = restrict(bench, &days);
        let model_on_days = restrict(forecast, &days);
        let e_bench = residual_series(actual, &bench_on_days, &days)?;
        let s_model = residual_stats(&e_model, Some(&e_bench))?;
        let s_bench = residual_stats(&e_bench, None)?;
        let predicted = predicted_mse_pair(&s_model, &s_bench)?;
        let avg = loadcast::eval::aggregate_forecasts(&[&model_on_days, &bench_on_days])?;
        let e_avg = residual_series(actual, &avg, &days)?;
        report.predicted_avg_mse_gw2 = Some(predicted.predicted_mse_gw2);
        report.realized_avg_mse_gw2 = Some(residual_stats(&e_avg, None)?.mse_gw2);
        report.improvement_predicted = Some(predicted.improvement_predicted);
        report.residual_correlation = s_model.correlation;
    }
    Ok(report)
}

fn restrict(series: &LoadSeries<f64>, days: &BTreeSet<DaySerial>) -> LoadSeries<f64> {
    let mut out = LoadSeries::new();
    for (day, profile) in series.days() {
        if days.contains(&day) {
            out.insert_day(day, profile.clone()).expect("validated day");
        }
    }
    out
}
