//! Helpers shared by the integration suites.

use chrono::NaiveDate;
use loadcast::calendar::SpecialDayCalendar;
use loadcast::experiment::synth::{synth_generate, NoiseModel, SyntheticSpec, VarTruth};
use loadcast::series::LoadSeries;

pub fn ar1_spec(start: NaiveDate, n_days: usize, sd: f64, seed: u64) -> SyntheticSpec<f64> {
    SyntheticSpec {
        start_date: start,
        n_days,
        base_log_level: (30_000.0f64).ln(),
        weekly_amplitude: 0.04,
        shape_amplitude: 0.10,
        noise: NoiseModel::Ar1 {
            coefficient: 0.5,
            sd,
            length_scale: 8.0,
        },
        special_distortion: None,
        seed,
    }
}

pub fn two_edge_spec(
    start: NaiveDate,
    n_days: usize,
    innovation_sd: f64,
    seed: u64,
) -> SyntheticSpec<f64> {
    SyntheticSpec {
        noise: NoiseModel::Var {
            truth: VarTruth::TwoEdgeSmooth {
                diag_level: 0.5,
                diag_amplitude: 0.1,
                last_level: 0.2,
                last_amplitude: 0.05,
            },
            innovation_sd,
            innovation_length_scale: 1.5,
        },
        ..ar1_spec(start, n_days, 0.0, seed)
    }
}

pub fn generate(spec: &SyntheticSpec<f64>, cal: &SpecialDayCalendar) -> LoadSeries<f64> {
    synth_generate(spec, cal).expect("synthetic generation").loads
}

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}
