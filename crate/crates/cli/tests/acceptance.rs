//! Acceptance checks, one PASS/FAIL line per criterion. Run with
//! `cargo test -p shadowfx --test acceptance -- --nocapture` to see the
//! report; the test fails if any criterion fails.

use std::collections::HashMap;
use std::fs;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use shadowfx_cli::{cmd_build, cmd_var, Group, RunConfig};
use shadowfx_core::econometrics::{
    build_instruments, fit_fe_ols, fit_fe_ols_dummies, fit_panel_var, fod_transform, gmm_two_step, ks_uniform, Panel,
    PanelVarSpec, RegressionSpec, TimeFe,
};
use shadowfx_core::ingest::{parse_trades, write_trades, ControlMatrix, Direction, ASSET_CLASSES, DEFAULT_CURRENCIES};
use shadowfx_core::pricing::{aggregate_daily, premium, write_panel, RatioBounds};
use shadowfx_core::regulation::{capital_control_index, constrained_dummy};
use shadowfx_core::synth::{gen_friction_panel, gen_trades, gen_var_panel, write_trade_truth, DgpSpec};
use shadowfx_core::{Currency, CurrencyRegistry};
use tempfile::TempDir;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within_budget(elapsed: Duration, budget: Duration) -> Result<(), String> {
    ensure(elapsed < budget, format!("took {elapsed:.2?}, budget {budget:?}"))
}

fn uniform_controls(flag: bool) -> ControlMatrix {
    let mut cm = ControlMatrix::default();
    for d in Direction::BOTH {
        for class in 1..=ASSET_CLASSES {
            for sub in 1..=3 {
                cm.set(d, class, sub, Some(flag));
            }
        }
    }
    cm
}

fn formula_constants() -> Check {
    let hi = premium(672.2, 100.0).map_err(|e| e.to_string())?;
    let lo = premium(57.5, 100.0).map_err(|e| e.to_string())?;
    ensure((hi - 572.2).abs() < 1e-9 && (lo + 42.5).abs() < 1e-9, format!("premiums {hi}, {lo}"))?;
    let all = capital_control_index(&uniform_controls(true)).value;
    let none = capital_control_index(&uniform_controls(false)).value;
    ensure(all == 1.0 && none == 0.0, format!("cc all {all}, none {none}"))?;
    for delta in [0.5, 0.7] {
        for peg in [0u8, 1] {
            for cc in [0.0, 0.3, 0.49, 0.5, 0.6, 0.69, 0.7, 0.71, 1.0] {
                let expect = u8::from(peg == 1 && cc >= delta);
                ensure(
                    constrained_dummy(peg, cc, delta) == expect,
                    format!("constrained({peg}, {cc}, {delta}) != {expect}"),
                )?;
            }
        }
    }
    Ok(format!("premium extremes {hi:.1}% / {lo:.1}%, cc bounds and dummy table exact"))
}

fn median_correction() -> Check {
    let spec = DgpSpec { n_buckets: 10_000, outlier_rate: 0.05, ..DgpSpec::default() };
    let set = gen_trades(&spec).map_err(|e| e.to_string())?;
    let mut trades_csv = Vec::new();
    write_trades(&mut trades_csv, &set.trades).map_err(|e| e.to_string())?;
    let mut truth_csv = Vec::new();
    write_trade_truth(&mut truth_csv, &set.truth).map_err(|e| e.to_string())?;

    let registry = CurrencyRegistry::new(DEFAULT_CURRENCIES.iter().map(|c| c.parse::<Currency>().unwrap()));
    let parsed = parse_trades(trades_csv.as_slice(), &registry).map_err(|e| e.to_string())?;
    ensure(parsed.rejections.is_empty(), format!("{} rejected trades", parsed.rejections.len()))?;
    let daily = aggregate_daily(&parsed.records, RatioBounds::default());

    let mut reader = csv::Reader::from_reader(truth_csv.as_slice());
    let mut truth: HashMap<(String, NaiveDate), (f64, bool)> = HashMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let date: NaiveDate = rec[0].parse().map_err(|e: chrono::ParseError| e.to_string())?;
        truth.insert((rec[1].to_string(), date), (rec[7].parse().unwrap(), &rec[6] == "1" || &rec[6] == "true"));
    }
    ensure(daily.len() == 10_000 && truth.len() == 10_000, format!("{} buckets, {} truth rows", daily.len(), truth.len()))?;
    let mut corrected = 0;
    for d in &daily {
        let (price, flag) = truth[&(d.currency.to_string(), d.date)];
        ensure(d.price == price, format!("{} {}: {} vs truth {price}", d.currency, d.date, d.price))?;
        let r = d.vw_price / d.median_price;
        let outside = !(0.85..=1.08).contains(&r);
        ensure(d.corrected == outside && flag == outside, format!("{} {}: ratio {r}, corrected {}", d.currency, d.date, d.corrected))?;
        corrected += usize::from(d.corrected);
    }
    Ok(format!("10000 buckets equal truth exactly, {corrected} corrections all out of band"))
}

fn fe_ols_exactness() -> Check {
    let spec = DgpSpec { n_currencies: 80, n_weeks: 300, noise: 0.0, ..DgpSpec::default() }
        .with_coef("beta3", 0.05)
        .with_coef("beta4", -0.4);
    let fx = gen_friction_panel(&spec).map_err(|e| e.to_string())?;
    let panel = Panel::from_weekly_rows(&fx.rows).map_err(|e| e.to_string())?;
    let model = RegressionSpec::new("premium_pct")
        .lags(&[1, 2])
        .regressors(&["remittance_cost_pct", "constrained", "freedom_score", "depr_pct"])
        .interaction("remittance_cost_pct", "constrained")
        .time_fe(TimeFe::Month);
    let within = fit_fe_ols(&panel, &model).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for c in &within.coefficients {
        let t = fx.truth.get(&c.name).ok_or(format!("no truth for {}", c.name))?;
        worst = worst.max((c.estimate - t).abs());
    }
    ensure(worst < 1e-6, format!("max coefficient error {worst:e}"))?;

    // dummies vs within and orthogonality on a noisy draw, where both are
    // non-trivial
    let noisy = gen_friction_panel(&DgpSpec { noise: 1.0, ..spec }).map_err(|e| e.to_string())?;
    let panel = Panel::from_weekly_rows(&noisy.rows).map_err(|e| e.to_string())?;
    let w = fit_fe_ols(&panel, &model).map_err(|e| e.to_string())?;
    let d = fit_fe_ols_dummies(&panel, &model).map_err(|e| e.to_string())?;
    let gap = w.coefficients.iter().zip(&d.coefficients).map(|(a, b)| (a.estimate - b.estimate).abs()).fold(0.0, f64::max);
    ensure(gap < 1e-8, format!("within vs dummies gap {gap:e}"))?;

    // residuals against every regressor, unit dummy and time bucket dummy
    let premium = panel.column("premium_pct").map_err(|e| e.to_string())?;
    let index: HashMap<(&str, i64), usize> =
        (0..panel.len()).map(|r| ((panel.unit(r), panel.week(r).index()), r)).collect();
    let lag = |r: usize, k: i64| premium[index[&(panel.unit(r), panel.week(r).index() - k)]].unwrap();
    let col = |name: &str, r: usize| panel.column(name).unwrap()[r].unwrap();
    let mut dots: HashMap<String, f64> = HashMap::new();
    for (&r, e) in w.sample_rows.iter().zip(&w.residuals) {
        let xs = [
            ("L1".to_string(), lag(r, 1)),
            ("L2".to_string(), lag(r, 2)),
            ("cost".to_string(), col("remittance_cost_pct", r)),
            ("constrained".to_string(), col("constrained", r)),
            ("freedom".to_string(), col("freedom_score", r)),
            ("depr".to_string(), col("depr_pct", r)),
            ("cost:constrained".to_string(), col("remittance_cost_pct", r) * col("constrained", r)),
            (format!("unit {}", panel.unit(r)), 1.0),
            (format!("bucket {:?}", TimeFe::Month.bucket(panel.week(r))), 1.0),
        ];
        for (k, x) in xs {
            *dots.entry(k).or_default() += x * e;
        }
    }
    let (name, worst_dot) = dots.iter().map(|(k, v)| (k.clone(), v.abs())).fold((String::new(), 0.0), |a, b| {
        if b.1 > a.1 {
            b
        } else {
            a
        }
    });
    ensure(worst_dot < 1e-8, format!("residual not orthogonal to {name}: {worst_dot:e}"))?;
    Ok(format!("max error {worst:.1e}, within/dummies gap {gap:.1e}, max |X'e| {worst_dot:.1e} over {} columns", dots.len()))
}

fn pass_through() -> Check {
    let model = RegressionSpec::new("premium_pct")
        .lags(&[1, 2])
        .regressors(&["remittance_cost_pct", "constrained"])
        .interaction("remittance_cost_pct", "constrained")
        .time_fe(TimeFe::Month);
    let base = DgpSpec::default();
    let truth = gen_friction_panel(&base).map_err(|e| e.to_string())?.truth.get("pass_through").unwrap();
    ensure((truth - 0.992).abs() < 1e-12, format!("generator pass-through {truth}"))?;
    let reps = 100;
    let mut sum = 0.0;
    for r in 0..reps {
        let fx = gen_friction_panel(&DgpSpec { seed: 7000 + r, ..base.clone() }).map_err(|e| e.to_string())?;
        let fit = fit_fe_ols(&Panel::from_weekly_rows(&fx.rows).unwrap(), &model).map_err(|e| e.to_string())?;
        sum += fit.coef("remittance_cost_pct").unwrap().estimate
            + fit.coef("remittance_cost_pct:constrained").unwrap().estimate;
    }
    let mean = sum / reps as f64;
    ensure((mean - 0.992).abs() < 0.02, format!("mean pass-through {mean}"))?;
    Ok(format!("mean pass-through {mean:.4} over {reps} replications"))
}

fn ar1(seed: u64) -> DgpSpec {
    DgpSpec { seed, n_currencies: 100, n_weeks: 20, constrained_share: 0.0, ..DgpSpec::default() }
        .with_coef("var_a11", 0.5)
        .with_coef("var_a12", 0.0)
        .with_coef("var_a21", 0.0)
        .with_coef("var_a22", 0.5)
}

fn var_panel(spec: &DgpSpec) -> Result<Panel, String> {
    let rows = gen_var_panel(spec).map_err(|e| e.to_string())?.rows;
    Panel::from_weekly_rows(&rows).map_err(|e| e.to_string())
}

fn panel_var_gmm() -> Check {
    let reps = 200;
    let mut sum = 0.0;
    for r in 0..reps {
        let res = fit_panel_var(&var_panel(&ar1(1000 + r))?, &PanelVarSpec::new("depr_pct", "premium_pct", 1))
            .map_err(|e| e.to_string())?;
        sum += res.coefficients[(0, 0)];
    }
    let bias = sum / reps as f64 - 0.5;
    ensure(bias.abs() < 0.02, format!("AR(1) mean bias {bias}"))?;

    let a = [[0.6, 0.25], [-0.3, 0.7]];
    let noiseless = DgpSpec { noise: 0.0, burn_in: 0, ..ar1(21) }
        .with_coef("var_a11", a[0][0])
        .with_coef("var_a12", a[0][1])
        .with_coef("var_a21", a[1][0])
        .with_coef("var_a22", a[1][1]);
    let res = fit_panel_var(&var_panel(&noiseless)?, &PanelVarSpec::new("depr_pct", "premium_pct", 1))
        .map_err(|e| e.to_string())?;
    let err = (0..2).flat_map(|e| (0..2).map(move |v| (e, v))).map(|(e, v)| (res.coefficients[(e, v)] - a[e][v]).abs()).fold(0.0, f64::max);
    ensure(err < 1e-6, format!("noiseless VAR error {err:e}"))?;

    let blocks = build_instruments(&var_panel(&ar1(8).with_coef("var_a12", 0.2))?, &PanelVarSpec::new("depr_pct", "premium_pct", 2))
        .map_err(|e| e.to_string())?;
    let exact = gmm_two_step(&blocks).map_err(|e| e.to_string())?;
    ensure(exact.hansen.exactly_identified && exact.hansen.j == 0.0, format!("exactly identified J = {}", exact.hansen.j))?;

    let mut p = Vec::with_capacity(500);
    for r in 0..500 {
        let res = fit_panel_var(&var_panel(&ar1(5000 + r))?, &PanelVarSpec::new("depr_pct", "premium_pct", 1))
            .map_err(|e| e.to_string())?;
        p.push(res.hansen.p_value);
    }
    let ks = ks_uniform(&p);
    ensure(ks < 0.1, format!("Hansen p KS distance {ks}"))?;
    Ok(format!("bias {bias:+.4}, noiseless error {err:.1e}, exact J = 0, KS {ks:.4}"))
}

fn fod_correctness() -> Check {
    let zeros = fod_transform(&[3.5; 9]).ok_or("no FOD for constant series")?;
    ensure(zeros.iter().all(|v| *v == 0.0), format!("constant series gave {zeros:?}"))?;
    let two = fod_transform(&[0.0, 1.0]).ok_or("no FOD for two points")?;
    ensure(two == vec![(0.5f64).sqrt() * (0.0 - 1.0)], format!("two-point FOD {two:?}"))?;
    let base = [1.3, -0.4, 2.2, 0.0, 5.1, -3.3, 0.7];
    let b = fod_transform(&base).unwrap();
    let mut worst: f64 = 0.0;
    // shifts of the data's own magnitude; far larger ones lose absolute
    // precision to rounding alone
    for shift in [-100.0, -7.25, 0.5, 42.0, 99.9] {
        let moved: Vec<f64> = base.iter().map(|v| v + shift).collect();
        let m = fod_transform(&moved).unwrap();
        worst = b.iter().zip(&m).map(|(x, y)| (x - y).abs()).fold(worst, f64::max);
    }
    ensure(worst < 1e-12, format!("shift changed FOD by {worst:e}"))?;
    Ok(format!("constant -> 0, two-point exact, shift invariance {worst:.1e}"))
}

fn pipeline_throughput() -> Check {
    let tmp = TempDir::new().map_err(|e| e.to_string())?;
    let spec_text = "n_currencies = 80\nn_weeks = 400\n";
    fs::write(tmp.path().join("spec.conf"), spec_text).map_err(|e| e.to_string())?;
    let synth_cfg = RunConfig::parse("synth_spec = spec.conf\nout = synth\n", tmp.path()).map_err(|e| e.to_string())?;
    let truth = shadowfx_cli::cmd_synth(&synth_cfg).map_err(|e| e.to_string())?.fixture;
    ensure(truth.n_trades >= 1_000_000, format!("fixture has only {} trades", truth.n_trades))?;

    let mut cfg = RunConfig::load(&tmp.path().join("synth/fixture/build.conf")).map_err(|e| e.to_string())?;
    cfg.out = tmp.path().join("run1");
    let start = Instant::now();
    let s = cmd_build(&cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    within_budget(elapsed, Duration::from_secs(10))?;
    ensure(s.n_trades == truth.n_trades && s.n_panel_rows == truth.n_panel_rows, "build counts differ from truth")?;

    cfg.out = tmp.path().join("run2");
    cmd_build(&cfg).map_err(|e| e.to_string())?;
    let mut names: Vec<_> = fs::read_dir(tmp.path().join("run1")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for name in &names {
        let a = fs::read(tmp.path().join("run1").join(name)).unwrap();
        let b = fs::read(tmp.path().join("run2").join(name)).unwrap();
        ensure(a == b, format!("{name:?} differs between runs"))?;
    }
    Ok(format!("{} trades built in {elapsed:.2?}, {} output files byte-identical on rerun", s.n_trades, names.len()))
}

fn sign_structure() -> Check {
    let tmp = TempDir::new().map_err(|e| e.to_string())?;
    let cfg = RunConfig::parse("panel = panel.csv\nout = out\n", tmp.path()).map_err(|e| e.to_string())?;
    let reps = 100;
    let mut hits = 0;
    let (mut u_sig, mut c_insig) = (0, 0);
    for r in 0..reps {
        let spec = DgpSpec { seed: 30_000 + r, n_currencies: 200, n_weeks: 30, constrained_share: 0.5, ..DgpSpec::default() }
            .with_coef("var_a12", 0.2)
            .with_coef("var_a12_constrained", 0.0);
        let rows = gen_var_panel(&spec).map_err(|e| e.to_string())?.rows;
        let mut buf = Vec::new();
        write_panel(&mut buf, &rows).map_err(|e| e.to_string())?;
        fs::write(tmp.path().join("panel.csv"), buf).map_err(|e| e.to_string())?;
        let u = cmd_var(&cfg, Group::Unconstrained, 1).map_err(|e| e.to_string())?;
        let c = cmd_var(&cfg, Group::Constrained, 1).map_err(|e| e.to_string())?;
        let uc = u.coef("depr_pct", "L1.premium_pct").ok_or("missing unconstrained coefficient")?;
        let cc = c.coef("depr_pct", "L1.premium_pct").ok_or("missing constrained coefficient")?;
        let a = uc.estimate > 0.0 && uc.p_value < 0.05;
        let b = cc.p_value >= 0.05;
        u_sig += usize::from(a);
        c_insig += usize::from(b);
        hits += usize::from(a && b);
    }
    ensure(hits * 10 >= reps as usize * 9, format!("pattern in {hits}/{reps} replications"))?;
    Ok(format!("pattern in {hits}/{reps} replications (unconstrained significant {u_sig}, constrained insignificant {c_insig})"))
}

#[test]
fn acceptance_criteria() {
    let criteria: [(u8, &str, fn() -> Check, Duration); 8] = [
        (1, "formula constants", formula_constants, Duration::from_secs(1)),
        (2, "median-correction oracle", median_correction, Duration::from_secs(10)),
        (3, "FE-OLS exactness", fe_ols_exactness, Duration::from_secs(30)),
        (4, "pass-through recovery", pass_through, Duration::from_secs(300)),
        (5, "panel VAR / GMM", panel_var_gmm, Duration::from_secs(600)),
        (6, "FOD correctness", fod_correctness, Duration::from_secs(1)),
        (7, "pipeline determinism and throughput", pipeline_throughput, Duration::from_secs(600)),
        (8, "sign-structure reproduction", sign_structure, Duration::from_secs(600)),
    ];
    let mut failed = Vec::new();
    for (id, name, check, budget) in criteria {
        let start = Instant::now();
        let outcome = check().and_then(|msg| within_budget(start.elapsed(), budget).map(|_| msg));
        let elapsed = start.elapsed();
        match outcome {
            Ok(msg) => println!("criterion {id} PASS [{name}] ({elapsed:.2?}) {msg}"),
            Err(msg) => {
                println!("criterion {id} FAIL [{name}] ({elapsed:.2?}) {msg}");
                failed.push(id);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
