//! Property tests for the core invariants.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use loadcast::calendar::{date_of, day_serial, DaySerial};
use loadcast::estimators::fit_ta;
use loadcast::eval::metrics_report;
use loadcast::series::{DayProfile, LoadSeries, TrainingPair, TrainingSet};
use loadcast::solver::{solve_dense, PenaltySpec, SecondDiffOperator};
use loadcast::QUARTERS_PER_DAY;

fn arb_date() -> impl Strategy<Value = NaiveDate> {
    (0i32..=9999, 1u32..=12, 1u32..=28)
        .prop_map(|(y, m, d)| NaiveDate::from_ymd_opt(y, m, d).unwrap())
}

proptest! {
    #[test]
    fn day_serial_round_trips_and_orders(a in arb_date(), b in arb_date()) {
        let sa = day_serial(a).unwrap();
        let sb = day_serial(b).unwrap();
        prop_assert_eq!(date_of(sa).unwrap(), a);
        prop_assert_eq!(sa < sb, a < b);
        prop_assert_eq!(day_serial(a.succ_opt().unwrap()).unwrap() - sa, 1);
    }

    #[test]
    fn second_differences_annihilate_affine(
        n in 3usize..40,
        intercept in -10.0f64..10.0,
        slope in -2.0f64..2.0,
    ) {
        let op = SecondDiffOperator::new(n).unwrap();
        let v = DVector::from_fn(n, |i, _| intercept + slope * i as f64);
        prop_assert!(op.apply(&v).amax() < 1e-9);
    }

    #[test]
    fn dense_solve_satisfies_dof_bounds_and_optimality(
        seed in 0u64..1000,
        n in 6usize..20,
        p in 2usize..6,
        lambda in 0.0f64..20.0,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let penalty = PenaltySpec::ridge(p, lambda);
        let res = match solve_dense(&x, &y, &penalty) {
            Ok(r) => r,
            Err(_) => return Ok(()), // rank-deficient draw
        };
        prop_assert!(res.dof >= -1e-9);
        prop_assert!(res.dof <= p as f64 + 1e-9);
        prop_assert!(res.rss >= 0.0);
        let xty = x.tr_mul(&y);
        let t = penalty.assemble().unwrap();
        let grad = (x.tr_mul(&x) * &res.beta - &xty + &t * &res.beta) * 2.0;
        prop_assert!(grad.norm() <= 1e-6 * (1.0 + xty.norm()));
    }

    #[test]
    fn mape_is_invariant_under_common_rescaling(
        seed in 0u64..1000,
        scale in 0.05f64..50.0,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let mut actual = LoadSeries::<f64>::new();
        let mut pred = LoadSeries::<f64>::new();
        for d in 0..3i64 {
            let day = DaySerial::new(730_000 + d);
            let a: Vec<f64> = (0..QUARTERS_PER_DAY)
                .map(|_| rng.random_range(20_000.0..40_000.0))
                .collect();
            let p: Vec<f64> = a.iter().map(|v| v * rng.random_range(0.95..1.05)).collect();
            actual.insert_day(day, DayProfile::new(a).unwrap()).unwrap();
            pred.insert_day(day, DayProfile::new(p).unwrap()).unwrap();
        }
        let days: BTreeSet<DaySerial> = actual.day_set().collect();
        let base = metrics_report(&actual, &pred, &days, None).unwrap();

        let mut actual_s = LoadSeries::<f64>::new();
        let mut pred_s = LoadSeries::<f64>::new();
        for (d, prof) in actual.days() {
            actual_s.insert_day(d, prof.map(|v| v * scale)).unwrap();
        }
        for (d, prof) in pred.days() {
            pred_s.insert_day(d, prof.map(|v| v * scale)).unwrap();
        }
        let scaled = metrics_report(&actual_s, &pred_s, &days, None).unwrap();
        prop_assert!((scaled.mape_pct - base.mape_pct).abs() <= 1e-8 * (1.0 + base.mape_pct));
        prop_assert!(
            (scaled.mape_daily_pct - base.mape_daily_pct).abs()
                <= 1e-8 * (1.0 + base.mape_daily_pct)
        );
    }
}

/// The numeric core is generic over the scalar; a single-precision fit must
/// go through the same paths.
#[test]
fn single_precision_instantiation_works() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand::rngs::StdRng::seed_from_u64(77);
    let q = 8usize;
    let pairs: Vec<TrainingPair<f32>> = (0..40)
        .map(|t| TrainingPair {
            day: DaySerial::new(700_000 + t),
            predictor: DVector::from_fn(q, |_, _| rng.random_range(-1.0f32..1.0)),
            target: DVector::from_fn(q, |_, _| rng.random_range(-1.0f32..1.0)),
        })
        .collect();
    let train = TrainingSet::from_pairs(q, pairs).unwrap();
    let surface = fit_ta(&train, 0.5f32).unwrap();
    assert_eq!(surface.q(), q);
    assert!(surface.dof() > 0.0 && surface.dof() < (q * q) as f32);

    let mut loads = LoadSeries::<f32>::new();
    loads
        .insert_day(DaySerial::new(700_000), DayProfile::constant(30_000.0f32))
        .unwrap();
    let logs = loadcast::series::log_transform(&loads).unwrap();
    let v = logs.get(DaySerial::new(700_000)).unwrap().get(0);
    assert!((v - 10.30895).abs() < 1e-4);
}
