use shadowfx_core::econometrics::{fit_fe_ols, FitResult, Panel, RegressionSpec, TimeFe};
use shadowfx_core::synth::{gen_friction_panel, gen_micro_panel, DgpSpec};

fn cost_model() -> RegressionSpec {
    RegressionSpec::new("premium_pct")
        .lags(&[1, 2])
        .regressors(&["remittance_cost_pct", "constrained"])
        .interaction("remittance_cost_pct", "constrained")
        .time_fe(TimeFe::Month)
}

fn fit_friction(spec: &DgpSpec) -> FitResult {
    let fx = gen_friction_panel(spec).unwrap();
    fit_fe_ols(&Panel::from_weekly_rows(&fx.rows).unwrap(), &cost_model()).unwrap()
}

fn pass_through(fit: &FitResult) -> f64 {
    fit.coef("remittance_cost_pct").unwrap().estimate + fit.coef("remittance_cost_pct:constrained").unwrap().estimate
}

#[test]
fn default_pass_through_is_recovered_on_average() {
    let base = DgpSpec::default();
    let truth = gen_friction_panel(&base).unwrap().truth.get("pass_through").unwrap();
    assert!((truth - 0.992).abs() < 1e-12);
    let reps = 100;
    let mean = (0..reps).map(|r| pass_through(&fit_friction(&DgpSpec { seed: 7000 + r, ..base.clone() }))).sum::<f64>()
        / reps as f64;
    assert!((mean - 0.992).abs() < 0.02, "mean pass-through {mean}");
}

#[test]
fn zero_interaction_is_rarely_significant() {
    let reps = 100;
    let base = DgpSpec::default().with_coef("beta2", 0.0);
    let insignificant = (0..reps)
        .filter(|r| {
            let fit = fit_friction(&DgpSpec { seed: 8000 + r, ..base.clone() });
            fit.coef("remittance_cost_pct:constrained").unwrap().p_value >= 0.05
        })
        .count();
    assert!(insignificant >= 90, "{insignificant} of {reps} insignificant");
}

#[test]
fn volatility_effect_is_recovered() {
    // volatility is the only driver; a common omitted regressor would act
    // as a time shock that unit clustering cannot see
    let spec = DgpSpec::default().with_coef("micro_ret", 0.0);
    let micro = gen_micro_panel(&spec).unwrap();
    let model = RegressionSpec::new("premium_pct")
        .lags(&[1, 2])
        .regressors(&["btc_volatility"])
        .time_fe(TimeFe::Biweek);
    let fit = fit_fe_ols(&Panel::from_weekly_rows(&micro.rows).unwrap(), &model).unwrap();
    let c = fit.coef("btc_volatility").unwrap();
    let truth = micro.truth.get("btc_volatility").unwrap();
    assert!(truth > 0.0);
    assert!((c.estimate - truth).abs() < 3.0 * c.std_error, "{} ± {} vs {truth}", c.estimate, c.std_error);
}
