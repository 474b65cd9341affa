use boldcal::assessment::posterior_calibration;
use boldcal::boldness::select_boldness;
use boldcal::io::{fmt_sig12, read_predictions_from, write_contour_csv};
use boldcal::llo::{logit, CLAMP_EPS};
use boldcal::{
    auc, evaluate_grid, fit_mle, llo_adjust, llo_inverse, log_likelihood, lrt, GridSpec, LloParams, PredictionSet,
};
use proptest::prelude::*;

fn prob() -> impl Strategy<Value = f64> {
    0.01f64..0.99
}

fn delta() -> impl Strategy<Value = f64> {
    (0.2f64.ln()..5.0f64.ln()).prop_map(f64::exp)
}

/// Prediction sets of 20..60 rows that contain both outcomes.
fn prediction_set() -> impl Strategy<Value = PredictionSet> {
    prop::collection::vec((0.02f64..0.98, any::<bool>()), 20..60)
        .prop_filter("both classes", |rows| {
            rows.iter().any(|r| r.1) && rows.iter().any(|r| !r.1)
        })
        .prop_map(|rows| {
            let (x, y): (Vec<f64>, Vec<bool>) = rows.into_iter().unzip();
            PredictionSet::new(x, y.into_iter().map(u8::from).collect()).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn identity_leaves_predictions_untouched(x in prob()) {
        prop_assert_eq!(llo_adjust(&[x], &LloParams::IDENTITY).unwrap()[0], x);
    }

    #[test]
    fn flat_slope_collapses_to_constant(x in prob(), d in delta()) {
        let c = llo_adjust(&[x], &LloParams::new(d, 0.0).unwrap()).unwrap()[0];
        prop_assert!((c - d / (1.0 + d)).abs() < 1e-15);
    }

    #[test]
    fn log_odds_are_linear(x in prob(), d in delta(), g in -2.0f64..2.0) {
        let c = llo_adjust(&[x], &LloParams::new(d, g).unwrap()).unwrap()[0];
        prop_assert!((logit(c) - (g * logit(x) + d.ln())).abs() < 1e-10);
    }

    #[test]
    fn outputs_stay_inside_the_clamp(x in 0.0f64..=1.0, d in (1e-3f64..1e3), g in -10.0f64..10.0) {
        let c = llo_adjust(&[x], &LloParams::new(d, g).unwrap()).unwrap()[0];
        prop_assert!((CLAMP_EPS..=1.0 - CLAMP_EPS).contains(&c));
    }

    #[test]
    fn inverse_undoes_the_map(x in prob(), d in delta(), g in prop_oneof![-2.0f64..-0.2, 0.2f64..2.0]) {
        let p = LloParams::new(d, g).unwrap();
        let c = llo_adjust(&[x], &p).unwrap();
        let back = llo_adjust(&c, &llo_inverse(&p).unwrap()).unwrap()[0];
        prop_assert!((back - x).abs() < 1e-8);
    }

    #[test]
    fn mle_dominates_a_probe_grid(data in prediction_set()) {
        let Ok(fit) = fit_mle(&data) else { return Ok(()); };
        let mut best = f64::NEG_INFINITY;
        for i in 0..50 {
            let d = (0.1f64.ln() + (100f64.ln()) * i as f64 / 49.0).exp();
            for j in 0..50 {
                let g = -5.0 + 10.0 * j as f64 / 49.0;
                best = best.max(log_likelihood(&data, &LloParams::new(d, g).unwrap()).unwrap());
            }
        }
        prop_assert!(fit.loglik_at_mle >= best - 1e-6, "{} < {}", fit.loglik_at_mle, best);
    }

    #[test]
    fn auc_ignores_monotone_transforms(data in prediction_set(), d in delta(), g in 0.2f64..3.0) {
        let before = auc(&data).unwrap();
        let moved = data.with_predictions(llo_adjust(data.x(), &LloParams::new(d, g).unwrap()).unwrap()).unwrap();
        prop_assert!((auc(&moved).unwrap() - before).abs() < 1e-12);
    }

    #[test]
    fn bayes_factor_matches_likelihood_ratio(data in prediction_set()) {
        if fit_mle(&data).is_err() { return Ok(()); }
        let bayes = posterior_calibration(&data, 0.5).unwrap();
        let test = lrt(&data).unwrap();
        let bridge = (test.statistic / 2.0).exp() / data.len() as f64;
        prop_assert!(((bayes.bayes_factor_21 - bridge) / bridge).abs() < 1e-9);
    }

    #[test]
    fn posterior_rises_with_prior(data in prediction_set(), a in 0.05f64..0.5, b in 0.5f64..0.95) {
        if fit_mle(&data).is_err() { return Ok(()); }
        let lo = posterior_calibration(&data, a).unwrap().posterior_calibrated;
        let hi = posterior_calibration(&data, b).unwrap().posterior_calibrated;
        prop_assert!(lo <= hi);
    }

    #[test]
    fn stricter_levels_never_widen(data in prediction_set()) {
        let spec = GridSpec::from_ranges((0.2, 5.0), (-1.0, 3.0), 12).unwrap();
        let grid = evaluate_grid(&data, &spec).unwrap();
        let mut last = f64::INFINITY;
        for t in [0.5, 0.7, 0.8, 0.9, 0.95, 0.99] {
            let r = select_boldness(&data, &grid, t).unwrap();
            if !r.feasible { break; }
            prop_assert!(r.achieved_spread <= last);
            last = r.achieved_spread;
        }
    }

    #[test]
    fn values_survive_a_csv_round_trip(v in prop::collection::vec(0.0f64..=1.0, 1..30)) {
        let mut body = String::from("x,y\n");
        for (i, p) in v.iter().enumerate() {
            body.push_str(&format!("{},{}\n", fmt_sig12(*p), i % 2));
        }
        let data = read_predictions_from(body.as_bytes()).unwrap();
        for (a, b) in data.x().iter().zip(&v) {
            prop_assert!((a - b).abs() <= 1e-11 * b.abs().max(1e-300) || a == b);
        }
    }
}

#[test]
fn contour_csv_round_trips_at_twelve_digits() {
    let data = PredictionSet::new(vec![0.1, 0.4, 0.35, 0.8, 0.65, 0.9], vec![0, 0, 1, 1, 0, 1]).unwrap();
    let spec = GridSpec::from_ranges((0.5, 2.0), (0.0, 2.0), 4).unwrap();
    let grid = evaluate_grid(&data, &spec).unwrap();
    let mut buf = Vec::new();
    write_contour_csv(&mut buf, &grid).unwrap();
    let mut rdr = csv::Reader::from_reader(buf.as_slice());
    for (record, cell) in rdr.records().zip(&grid.cells) {
        let r = record.unwrap();
        let posterior: f64 = r[2].parse().unwrap();
        let spread: f64 = r[3].parse().unwrap();
        assert!((posterior - cell.posterior).abs() <= 1e-11 * cell.posterior.abs().max(1e-300));
        assert!((spread - cell.spread).abs() <= 1e-11 * cell.spread.abs().max(1e-300));
    }
}
