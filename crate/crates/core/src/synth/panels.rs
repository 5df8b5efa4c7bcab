//! Weekly panel generators mirroring the estimated models.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;

use crate::calendar::WeekId;
use crate::ingest::Currency;
use crate::pricing::WeeklyPanelRow;

use super::{open_uniform, standard_normal, start_week, stream_rng, uniform_int, unit_code, DgpSpec, SynthError};

/// Named true parameter values, in a fixed order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Truth(pub Vec<(String, f64)>);

impl Truth {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    fn push(&mut self, name: &str, value: f64) {
        self.0.push((name.to_string(), value));
    }
}

pub fn write_truth<W: Write>(sink: W, truth: &Truth) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["parameter", "value"])?;
    for (k, v) in &truth.0 {
        w.write_record([k.clone(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn unit_currency(i: usize) -> Currency {
    unit_code(i).parse().expect("generated codes are three uppercase letters")
}

/// Regime indices consistent with the constrained dummy at δ = 0.7.
fn regime_fields(rng: &mut rand_chacha::ChaCha8Rng, constrained: bool) -> (u8, f64) {
    if constrained {
        (1, 0.75 + 0.25 * open_uniform(rng))
    } else if open_uniform(rng) < 0.5 {
        (1, 0.6 * open_uniform(rng))
    } else {
        (0, open_uniform(rng))
    }
}

/// Premiums from the remittance-cost model:
///
/// `p_t = γ0 p_{t-1} + γ1 p_{t-2} + β0 C + β1 D + β2 C·D + β3 FF + β4 depr
///        + α_c + μ_month + ε`
///
/// with log remittance cost following an AR(1) (coefficient `alpha1`).
/// Each currency draws a base constrained flag; a `switch_share` of them
/// switch regime once mid-sample, so D is not collinear with the currency
/// effect.
#[derive(Debug, Clone)]
pub struct FrictionPanel {
    pub rows: Vec<WeeklyPanelRow>,
    pub truth: Truth,
}

pub fn gen_friction_panel(spec: &DgpSpec) -> Result<FrictionPanel, SynthError> {
    spec.validate()?;
    let (g0, g1) = (spec.coef("gamma0"), spec.coef("gamma1"));
    if g0.abs() + g1.abs() >= 1.0 {
        return Err(SynthError::Spec(format!("explosive premium dynamics: |gamma0| + |gamma1| = {}", g0.abs() + g1.abs())));
    }
    let a1 = spec.coef("alpha1");
    if a1.abs() >= 1.0 {
        return Err(SynthError::Spec("remittance AR(1) coefficient alpha1 must satisfy |alpha1| < 1".into()));
    }
    let [b0, b1, b2, b3, b4] = ["beta0", "beta1", "beta2", "beta3", "beta4"].map(|k| spec.coef(k));
    let total = spec.burn_in + spec.n_weeks;
    let first = start_week().offset(-(spec.burn_in as i64));

    let mut g = stream_rng(spec.seed, 0);
    let mut month_fx: BTreeMap<(i32, u32), f64> = BTreeMap::new();
    for t in 0..total {
        let m = first.offset(t as i64).month();
        if !month_fx.contains_key(&m) {
            month_fx.insert(m, standard_normal(&mut g));
        }
    }

    let innovation_sd = 0.15;
    let per_currency: Vec<(Vec<WeeklyPanelRow>, f64)> = (0..spec.n_currencies)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(spec.seed, c as u64 + 1);
            let currency = unit_currency(c);
            let alpha = spec.fe_scale * standard_normal(&mut rng);
            let m_c = (3.0 + 9.0 * open_uniform(&mut rng)).ln();
            let mut log_c = m_c + innovation_sd / (1.0 - a1 * a1).sqrt() * standard_normal(&mut rng);
            let base = open_uniform(&mut rng) < spec.constrained_share;
            let switch_at = (open_uniform(&mut rng) < spec.switch_share)
                .then(|| uniform_int(&mut rng, spec.n_weeks / 4, (3 * spec.n_weeks / 4).max(spec.n_weeks / 4)));
            let regimes = [regime_fields(&mut rng, false), regime_fields(&mut rng, true)];
            let mut ff_by_year: BTreeMap<i32, f64> = BTreeMap::new();
            let (mut p1, mut p2) = (0.0, 0.0);
            let mut rows = Vec::with_capacity(spec.n_weeks);
            for t in 0..total {
                let week = first.offset(t as i64);
                let rec = t.checked_sub(spec.burn_in);
                let d = match (switch_at, rec) {
                    (Some(s), Some(r)) if r >= s => !base,
                    _ => base,
                };
                let dv = f64::from(u8::from(d));
                let cost = log_c.exp();
                let ff = *ff_by_year.entry(week.iso_year()).or_insert_with(|| 30.0 + 60.0 * open_uniform(&mut rng));
                let depr = standard_normal(&mut rng);
                let eps = spec.noise * standard_normal(&mut rng);
                let p = g0 * p1 + g1 * p2 + b0 * cost + b1 * dv + b2 * cost * dv + b3 * ff + b4 * depr
                    + alpha
                    + month_fx[&week.month()]
                    + eps;
                if rec.is_some() {
                    let (peg, cc) = regimes[usize::from(d)];
                    let mut row = WeeklyPanelRow::new(week, currency, p);
                    row.depr_pct = Some(depr);
                    row.remittance_cost_pct = Some(cost);
                    row.peg = Some(peg);
                    row.cc = Some(cc);
                    row.constrained = Some(u8::from(d));
                    row.freedom_score = Some(ff);
                    rows.push(row);
                }
                p2 = p1;
                p1 = p;
                log_c = m_c + a1 * (log_c - m_c) + innovation_sd * standard_normal(&mut rng);
            }
            (rows, alpha)
        })
        .collect();

    let mut truth = Truth::default();
    truth.push("L1.premium_pct", g0);
    truth.push("L2.premium_pct", g1);
    truth.push("remittance_cost_pct", b0);
    truth.push("constrained", b1);
    truth.push("remittance_cost_pct:constrained", b2);
    truth.push("freedom_score", b3);
    truth.push("depr_pct", b4);
    truth.push("pass_through", b0 + b2);
    let mut rows = Vec::with_capacity(spec.n_currencies * spec.n_weeks);
    for (c, (r, alpha)) in per_currency.into_iter().enumerate() {
        truth.push(&format!("fe[{}]", unit_code(c)), alpha);
        rows.extend(r);
    }
    for ((y, m), v) in &month_fx {
        truth.push(&format!("month[{y}-{m:02}]"), *v);
    }
    Ok(FrictionPanel { rows, truth })
}

/// Premiums driven by global weekly blockchain and market variables:
///
/// `p_t = γ0 p_{t-1} + γ1 p_{t-2} + Σ_k micro_k x_{k,t} + α_c + μ_biweek + ε`
#[derive(Debug, Clone)]
pub struct MicroPanel {
    pub rows: Vec<WeeklyPanelRow>,
    pub truth: Truth,
}

pub fn gen_micro_panel(spec: &DgpSpec) -> Result<MicroPanel, SynthError> {
    spec.validate()?;
    let (g0, g1) = (spec.coef("gamma0"), spec.coef("gamma1"));
    if g0.abs() + g1.abs() >= 1.0 {
        return Err(SynthError::Spec(format!("explosive premium dynamics: |gamma0| + |gamma1| = {}", g0.abs() + g1.abs())));
    }
    let keys = ["micro_confirm", "micro_fee", "micro_ntx", "micro_vol", "micro_ret"];
    let coefs = keys.map(|k| spec.coef(k));
    let total = spec.burn_in + spec.n_weeks;
    let first = start_week().offset(-(spec.burn_in as i64));

    let mut g = stream_rng(spec.seed, 0);
    let globals: Vec<[f64; 5]> = (0..total)
        .map(|_| {
            [
                10.0 + 2.0 * standard_normal(&mut g),
                (0.5 * standard_normal(&mut g)).exp(),
                300_000.0 + 30_000.0 * standard_normal(&mut g),
                (0.5 * standard_normal(&mut g)).exp(),
                0.5 * standard_normal(&mut g),
            ]
        })
        .collect();
    let mut biweek_fx: BTreeMap<(i32, u32), f64> = BTreeMap::new();
    for t in 0..total {
        let b = first.offset(t as i64).biweek();
        if !biweek_fx.contains_key(&b) {
            biweek_fx.insert(b, standard_normal(&mut g));
        }
    }

    let rows: Vec<Vec<WeeklyPanelRow>> = (0..spec.n_currencies)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(spec.seed, c as u64 + 1);
            let currency = unit_currency(c);
            let alpha = spec.fe_scale * standard_normal(&mut rng);
            let (mut p1, mut p2) = (0.0, 0.0);
            let mut rows = Vec::with_capacity(spec.n_weeks);
            for (t, x) in globals.iter().enumerate() {
                let week = first.offset(t as i64);
                let signal: f64 = coefs.iter().zip(x).map(|(b, v)| b * v).sum();
                let p = g0 * p1 + g1 * p2 + signal + alpha + biweek_fx[&week.biweek()]
                    + spec.noise * standard_normal(&mut rng);
                if t >= spec.burn_in {
                    let mut row = WeeklyPanelRow::new(week, currency, p);
                    row.median_confirm_minutes = Some(x[0]);
                    row.avg_fee_usd = Some(x[1]);
                    row.n_transactions = Some(x[2]);
                    row.btc_volatility = Some(x[3]);
                    row.btc_return = Some(x[4]);
                    rows.push(row);
                }
                p2 = p1;
                p1 = p;
            }
            rows
        })
        .collect();

    let mut truth = Truth::default();
    truth.push("L1.premium_pct", g0);
    truth.push("L2.premium_pct", g1);
    for (col, b) in ["median_confirm_minutes", "avg_fee_usd", "n_transactions", "btc_volatility", "btc_return"]
        .iter()
        .zip(coefs)
    {
        truth.push(col, b);
    }
    Ok(MicroPanel { rows: rows.into_iter().flatten().collect(), truth })
}

/// Largest eigenvalue modulus of a 2×2 matrix.
pub fn spectral_radius(a: &Matrix2<f64>) -> f64 {
    a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Two-variable panel VAR(1) in (depr_pct, premium_pct):
///
/// `y_t = μ_i + A y_{t-1} + ε_t`,  `A = [[var_a11, var_a12], [var_a21, var_a22]]`
///
/// Constrained units use `var_a12_constrained` in place of `var_a12`. Each
/// unit starts one standard deviation away from its steady state, so even a
/// noiseless panel carries identifying dynamics. A `truncation` share of
/// units loses a random prefix of up to half the sample.
#[derive(Debug, Clone)]
pub struct VarPanel {
    pub rows: Vec<WeeklyPanelRow>,
    pub truth: Truth,
}

pub fn gen_var_panel(spec: &DgpSpec) -> Result<VarPanel, SynthError> {
    spec.validate()?;
    let a = |a12: f64| Matrix2::new(spec.coef("var_a11"), a12, spec.coef("var_a21"), spec.coef("var_a22"));
    let a_free = a(spec.coef("var_a12"));
    let a_tight = a(spec.coef("var_a12_constrained"));
    for (name, m) in [("unconstrained", &a_free), ("constrained", &a_tight)] {
        let rho = spectral_radius(m);
        if rho >= 1.0 {
            return Err(SynthError::Spec(format!("{name} VAR matrix is unstable: spectral radius {rho:.4} ≥ 1")));
        }
    }
    let total = spec.burn_in + spec.n_weeks;
    let first = start_week();
    let units: Vec<(Vec<WeeklyPanelRow>, bool)> = (0..spec.n_currencies)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(spec.seed, i as u64 + 1);
            let currency = unit_currency(i);
            let constrained = open_uniform(&mut rng) < spec.constrained_share;
            let a = if constrained { a_tight } else { a_free };
            let mu = Vector2::new(spec.fe_scale * standard_normal(&mut rng), spec.fe_scale * standard_normal(&mut rng));
            let steady = (Matrix2::identity() - a).try_inverse().expect("stable matrix") * mu;
            let mut y = steady + Vector2::new(standard_normal(&mut rng), standard_normal(&mut rng));
            let mut series = Vec::with_capacity(spec.n_weeks);
            for t in 0..total {
                if t > 0 {
                    let e = Vector2::new(standard_normal(&mut rng), standard_normal(&mut rng));
                    y = mu + a * y + e * spec.noise;
                }
                if t >= spec.burn_in {
                    series.push(y);
                }
            }
            let (peg, cc) = regime_fields(&mut rng, constrained);
            let truncated = open_uniform(&mut rng) < spec.truncation;
            let cut = if truncated { uniform_int(&mut rng, 1, (spec.n_weeks / 2).max(1)) } else { 0 };
            let rows = series
                .iter()
                .enumerate()
                .skip(cut)
                .map(|(t, v)| {
                    let week: WeekId = first.offset(t as i64);
                    let mut row = WeeklyPanelRow::new(week, currency, v[1]);
                    row.depr_pct = Some(v[0]);
                    row.peg = Some(peg);
                    row.cc = Some(cc);
                    row.constrained = Some(u8::from(constrained));
                    row
                })
                .collect();
            (rows, truncated)
        })
        .collect();

    let mut truth = Truth::default();
    truth.push("var_a11", a_free[(0, 0)]);
    truth.push("var_a12", a_free[(0, 1)]);
    truth.push("var_a21", a_free[(1, 0)]);
    truth.push("var_a22", a_free[(1, 1)]);
    truth.push("var_a12_constrained", a_tight[(0, 1)]);
    truth.push("n_truncated", units.iter().filter(|u| u.1).count() as f64);
    truth.push("n_constrained_units", units.iter().filter(|u| u.0.first().and_then(|r| r.constrained) == Some(1)).count() as f64);
    Ok(VarPanel { rows: units.into_iter().flat_map(|u| u.0).collect(), truth })
}
