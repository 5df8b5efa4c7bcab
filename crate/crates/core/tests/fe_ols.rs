use std::collections::BTreeMap;

use proptest::prelude::*;
use shadowfx_core::econometrics::{
    fit_fe_ols, fit_fe_ols_dummies, EconError, FitResult, Panel, RegressionSpec, TimeFe, CONDITION_WARNING,
};
use shadowfx_core::synth::{
    gen_friction_panel, oracle_condition, oracle_ols, open_uniform, standard_normal, stream_rng, DgpSpec,
    ORACLE_CONDITION_WARNING,
};
use shadowfx_core::WeekId;

/// y = 0.4 x1 − 0.7 x2 + unit effect + week effect + noise, with a random
/// share of rows removed.
fn random_panel(seed: u64, n_units: usize, n_weeks: usize, drop: f64, noise: f64) -> Panel {
    let mut rng = stream_rng(seed, 0);
    let week_fx: Vec<f64> = (0..n_weeks).map(|_| standard_normal(&mut rng)).collect();
    let (mut keys, mut y, mut x1, mut x2) = (vec![], vec![], vec![], vec![]);
    for u in 0..n_units {
        let fe = 3.0 * standard_normal(&mut rng);
        for (t, wfx) in week_fx.iter().enumerate() {
            let a = standard_normal(&mut rng) + 0.1 * t as f64;
            let b = standard_normal(&mut rng) + fe * 0.2;
            let e = noise * standard_normal(&mut rng);
            if open_uniform(&mut rng) < drop {
                continue;
            }
            keys.push((format!("U{u:03}"), WeekId::from_index(2500 + t as i64)));
            y.push(Some(0.4 * a - 0.7 * b + fe + wfx + e));
            x1.push(Some(a));
            x2.push(Some(b));
        }
    }
    Panel::from_columns(keys, vec![("y".into(), y), ("x1".into(), x1), ("x2".into(), x2)]).unwrap()
}

/// Explicit dummy design for the sample rows of `fit`, built from scratch.
fn oracle_design(panel: &Panel, fit: &FitResult, spec: &RegressionSpec) -> (Vec<Vec<f64>>, Vec<f64>) {
    let units: Vec<String> = {
        let mut u: Vec<String> = fit.sample_rows.iter().map(|&r| panel.unit(r).to_string()).collect();
        u.sort();
        u.dedup();
        u
    };
    let buckets: Vec<(i32, u32)> = {
        let mut b: Vec<(i32, u32)> = fit.sample_rows.iter().filter_map(|&r| spec.time_fe.bucket(panel.week(r))).collect();
        b.sort();
        b.dedup();
        b
    };
    let mut rows = Vec::new();
    let mut resp = Vec::new();
    for &r in &fit.sample_rows {
        let mut row: Vec<f64> = spec.regressors.iter().map(|c| panel.column(c).unwrap()[r].unwrap()).collect();
        for u in &units {
            row.push(if panel.unit(r) == u { 1.0 } else { 0.0 });
        }
        if let Some(b) = spec.time_fe.bucket(panel.week(r)) {
            for bb in buckets.iter().skip(1) {
                row.push(if *bb == b { 1.0 } else { 0.0 });
            }
        }
        rows.push(row);
        resp.push(panel.column(&spec.dependent).unwrap()[r].unwrap());
    }
    (rows, resp)
}

fn time_fe_strategy() -> impl Strategy<Value = TimeFe> {
    prop_oneof![Just(TimeFe::None), Just(TimeFe::Biweek), Just(TimeFe::Month)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn within_dummy_and_oracle_agree(
        seed in 0u64..10_000,
        n_units in 3usize..9,
        n_weeks in 12usize..40,
        drop in 0.0f64..0.3,
        tfe in time_fe_strategy(),
    ) {
        let panel = random_panel(seed, n_units, n_weeks, drop, 1.0);
        let spec = RegressionSpec::new("y").regressors(&["x1", "x2"]).time_fe(tfe);
        let within = fit_fe_ols(&panel, &spec).unwrap();
        let dummies = fit_fe_ols_dummies(&panel, &spec).unwrap();
        let (design, resp) = oracle_design(&panel, &within, &spec);
        let oracle = oracle_ols(&design, &resp).unwrap();
        for j in 0..2 {
            let a = within.coefficients[j].estimate;
            prop_assert!((a - dummies.coefficients[j].estimate).abs() < 1e-8);
            prop_assert!((a - oracle[j]).abs() < 1e-8);
            let (sa, sb) = (within.coefficients[j].std_error, dummies.coefficients[j].std_error);
            prop_assert!((sa - sb).abs() < 1e-8 * sa.max(1.0));
        }
        prop_assert!((within.r_squared - dummies.r_squared).abs() < 1e-8);
        prop_assert!((0.0..=1.0).contains(&within.r_squared));
        prop_assert!(within.n_obs > within.coefficients.len());
    }

    #[test]
    fn residuals_are_orthogonal_to_regressors_and_dummies(
        seed in 0u64..10_000,
        drop in 0.0f64..0.3,
        tfe in time_fe_strategy(),
    ) {
        let panel = random_panel(seed, 6, 30, drop, 1.0);
        let spec = RegressionSpec::new("y").regressors(&["x1", "x2"]).time_fe(tfe);
        let fit = fit_fe_ols(&panel, &spec).unwrap();
        let (design, _) = oracle_design(&panel, &fit, &spec);
        for j in 0..design[0].len() {
            let dot: f64 = design.iter().zip(&fit.residuals).map(|(row, e)| row[j] * e).sum();
            prop_assert!(dot.abs() < 1e-8, "column {j}: {dot}");
        }
    }

    #[test]
    fn slopes_ignore_unit_and_bucket_constants(
        seed in 0u64..10_000,
        shift in -50.0f64..50.0,
        tfe in prop_oneof![Just(TimeFe::Biweek), Just(TimeFe::Month)],
    ) {
        let panel = random_panel(seed, 5, 30, 0.15, 1.0);
        let spec = RegressionSpec::new("y").regressors(&["x1", "x2"]).time_fe(tfe);
        let base = fit_fe_ols(&panel, &spec).unwrap();
        let mut unit_const: BTreeMap<String, f64> = BTreeMap::new();
        let y = panel.column("y").unwrap();
        let shifted: Vec<Option<f64>> = (0..panel.len())
            .map(|r| {
                let n = unit_const.len() as f64;
                let u = *unit_const.entry(panel.unit(r).to_string()).or_insert(shift * (n + 1.0));
                let (yr, m) = tfe.bucket(panel.week(r)).unwrap();
                y[r].map(|v| v + u + f64::from(m) * 0.37 + f64::from(yr % 7) + shift)
            })
            .collect();
        let mut p2 = panel.clone();
        p2.insert_column("y", shifted).unwrap();
        let moved = fit_fe_ols(&p2, &spec).unwrap();
        for (a, b) in base.coefficients.iter().zip(&moved.coefficients) {
            prop_assert!((a.estimate - b.estimate).abs() < 1e-8);
        }
    }
}

#[test]
fn noiseless_unit_effects_recover_slope() {
    let mut rng = stream_rng(5, 0);
    let (mut keys, mut y, mut x) = (vec![], vec![], vec![]);
    for c in 0..20 {
        let fe = 10.0 * standard_normal(&mut rng);
        for t in 0..50 {
            let xv = standard_normal(&mut rng);
            keys.push((format!("C{c:02}"), WeekId::from_index(2600 + t)));
            x.push(Some(xv));
            y.push(Some(0.3 * xv + fe));
        }
    }
    let panel = Panel::from_columns(keys, vec![("y".into(), y), ("x".into(), x)]).unwrap();
    let spec = RegressionSpec::new("y").regressors(&["x"]);
    let fit = fit_fe_ols(&panel, &spec).unwrap();
    assert!((fit.coef("x").unwrap().estimate - 0.3).abs() < 1e-8);
    let shifted: Vec<Option<f64>> = panel.column("y").unwrap().iter().map(|v| v.map(|a| a + 123.0)).collect();
    let mut p2 = panel.clone();
    p2.insert_column("y", shifted).unwrap();
    let fit2 = fit_fe_ols(&p2, &spec).unwrap();
    assert!((fit2.coef("x").unwrap().estimate - fit.coef("x").unwrap().estimate).abs() < 1e-12);
}

fn plain_panel(design: &[Vec<f64>], y: &[f64]) -> (Panel, Vec<String>) {
    let k = design[0].len();
    let names: Vec<String> = (0..k).map(|j| format!("x{j}")).collect();
    let keys = (0..y.len()).map(|i| ("A".to_string(), WeekId::from_index(i as i64))).collect();
    let mut cols = vec![("y".to_string(), y.iter().map(|v| Some(*v)).collect())];
    for (j, n) in names.iter().enumerate() {
        cols.push((n.clone(), design.iter().map(|r| Some(r[j])).collect()));
    }
    (Panel::from_columns(keys, cols).unwrap(), names)
}

fn no_fe_spec(names: &[String]) -> RegressionSpec {
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    RegressionSpec::new("y").regressors(&refs).unit_fe(false).constant(false)
}

#[test]
fn random_system_matches_oracle() {
    let mut rng = stream_rng(11, 0);
    let design: Vec<Vec<f64>> = (0..50).map(|_| (0..5).map(|_| standard_normal(&mut rng)).collect()).collect();
    let y: Vec<f64> = design.iter().map(|r| r.iter().sum::<f64>() + standard_normal(&mut rng)).collect();
    let (panel, names) = plain_panel(&design, &y);
    let fit = fit_fe_ols(&panel, &no_fe_spec(&names)).unwrap();
    let oracle = oracle_ols(&design, &y).unwrap();
    for (c, o) in fit.coefficients.iter().zip(&oracle) {
        assert!((c.estimate - o).abs() < 1e-8);
    }
    assert!(!fit.condition_warning);
}

#[test]
fn hilbert_like_design_agrees_and_warns() {
    let design: Vec<Vec<f64>> = (0..12).map(|i| (0..6).map(|j| 1.0 / (i + j + 1) as f64).collect()).collect();
    let beta = [0.1, -0.2, 0.3, -0.1, 0.05, 0.2];
    let y: Vec<f64> = design.iter().map(|r| r.iter().zip(&beta).map(|(a, b)| a * b).sum()).collect();
    let (panel, names) = plain_panel(&design, &y);
    let fit = fit_fe_ols(&panel, &no_fe_spec(&names)).unwrap();
    let oracle = oracle_ols(&design, &y).unwrap();
    for (c, o) in fit.coefficients.iter().zip(&oracle) {
        assert!((c.estimate - o).abs() < 1e-4, "{} vs {o}", c.estimate);
    }
    assert!(fit.condition_warning, "condition {}", fit.condition_number);
    assert!(fit.condition_number > CONDITION_WARNING);
    assert!(oracle_condition(&design).unwrap() > ORACLE_CONDITION_WARNING);
}

#[test]
fn collinear_columns_are_reported_by_name() {
    let panel = random_panel(3, 4, 20, 0.0, 1.0);
    let x3: Vec<Option<f64>> = panel
        .column("x1")
        .unwrap()
        .iter()
        .zip(panel.column("x2").unwrap())
        .map(|(a, b)| Some(2.0 * a.unwrap() - b.unwrap()))
        .collect();
    let mut p = panel.clone();
    p.insert_column("x3", x3).unwrap();
    let spec = RegressionSpec::new("y").regressors(&["x1", "x2", "x3"]);
    match fit_fe_ols(&p, &spec) {
        Err(EconError::Singular { columns }) => {
            assert_eq!(columns.len(), 1);
            assert!(["x1", "x2", "x3"].contains(&columns[0].as_str()));
        }
        other => panic!("expected a singularity error, got {other:?}"),
    }
}

#[test]
fn noiseless_friction_panel_recovers_every_coefficient() {
    let spec = DgpSpec { n_currencies: 30, n_weeks: 120, noise: 0.0, ..DgpSpec::default() }
        .with_coef("beta3", 0.05)
        .with_coef("beta4", -0.4);
    let fx = gen_friction_panel(&spec).unwrap();
    let panel = Panel::from_weekly_rows(&fx.rows).unwrap();
    let model = RegressionSpec::new("premium_pct")
        .lags(&[1, 2])
        .regressors(&["remittance_cost_pct", "constrained", "freedom_score", "depr_pct"])
        .interaction("remittance_cost_pct", "constrained")
        .time_fe(TimeFe::Month);
    let fit = fit_fe_ols(&panel, &model).unwrap();
    for c in &fit.coefficients {
        let truth = fx.truth.get(&c.name).unwrap();
        assert!((c.estimate - truth).abs() < 1e-6, "{}: {} vs {truth}", c.name, c.estimate);
    }
    assert_eq!(fit.dropped_rows, 2 * 30);
}
