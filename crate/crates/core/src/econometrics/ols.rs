//! Fixed-effects least squares with currency-clustered standard errors.
//!
//! Two interchangeable routes are provided. The within route removes unit
//! and time-bucket means by alternating projections and regresses on the
//! demeaned data; the dummy route appends indicator columns and solves the
//! full least-squares problem. Both use the same pivoted QR and must agree.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::calendar::WeekId;

use super::linalg::{condition_number, PivotedQr};
use super::panel::{build_lags, lag_name, Panel};
use super::stats::student_t_two_sided_p;
use super::{EconError, CONDITION_WARNING};

/// Time fixed-effect granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TimeFe {
    None,
    Biweek,
    Month,
}

impl TimeFe {
    pub fn as_str(self) -> &'static str {
        match self {
            TimeFe::None => "none",
            TimeFe::Biweek => "biweek",
            TimeFe::Month => "month",
        }
    }

    /// Bucket key of a week, or `None` when time effects are off.
    pub fn bucket(self, week: WeekId) -> Option<(i32, u32)> {
        match self {
            TimeFe::None => None,
            TimeFe::Biweek => Some(week.biweek()),
            TimeFe::Month => Some(week.month()),
        }
    }

    fn label(self, key: (i32, u32)) -> String {
        match self {
            TimeFe::Biweek => format!("{}-B{:02}", key.0, key.1),
            _ => format!("{}-{:02}", key.0, key.1),
        }
    }
}

impl fmt::Display for TimeFe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TimeFe {
    type Err = EconError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(TimeFe::None),
            "biweek" | "bi-week" | "biweekly" => Ok(TimeFe::Biweek),
            "month" | "monthly" => Ok(TimeFe::Month),
            other => Err(EconError::Spec(format!("unknown time FE `{other}` (none, biweek, month)"))),
        }
    }
}

/// A linear panel model. Terms enter in the order: dependent lags,
/// regressors, interactions.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSpec {
    pub dependent: String,
    pub regressors: Vec<String>,
    pub dependent_lags: Vec<usize>,
    pub interactions: Vec<(String, String)>,
    pub unit_fe: bool,
    pub time_fe: TimeFe,
    /// Include an intercept when no fixed effect absorbs it.
    pub constant: bool,
}

impl RegressionSpec {
    pub fn new(dependent: &str) -> Self {
        RegressionSpec {
            dependent: dependent.to_string(),
            regressors: Vec::new(),
            dependent_lags: Vec::new(),
            interactions: Vec::new(),
            unit_fe: true,
            time_fe: TimeFe::None,
            constant: true,
        }
    }

    pub fn regressors(mut self, names: &[&str]) -> Self {
        self.regressors.extend(names.iter().map(|s| s.to_string()));
        self
    }

    pub fn lags(mut self, lags: &[usize]) -> Self {
        self.dependent_lags.extend_from_slice(lags);
        self
    }

    pub fn interaction(mut self, a: &str, b: &str) -> Self {
        self.interactions.push((a.to_string(), b.to_string()));
        self
    }

    pub fn time_fe(mut self, t: TimeFe) -> Self {
        self.time_fe = t;
        self
    }

    pub fn unit_fe(mut self, on: bool) -> Self {
        self.unit_fe = on;
        self
    }

    pub fn constant(mut self, on: bool) -> Self {
        self.constant = on;
        self
    }

    pub fn term_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.dependent_lags.iter().map(|&k| lag_name(&self.dependent, k)).collect();
        names.extend(self.regressors.iter().cloned());
        names.extend(self.interactions.iter().map(|(a, b)| format!("{a}:{b}")));
        names
    }

    pub fn validate(&self) -> Result<(), EconError> {
        if self.dependent_lags.contains(&0) {
            return Err(EconError::Spec("lag indices must be at least 1".into()));
        }
        if self.regressors.iter().any(|r| *r == self.dependent) {
            return Err(EconError::Spec(format!("`{}` is both dependent and regressor", self.dependent)));
        }
        let names = self.term_names();
        if names.is_empty() {
            return Err(EconError::Spec("no regressors".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for n in &names {
            if !seen.insert(n) {
                return Err(EconError::Spec(format!("duplicate regressor `{n}`")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeMethod {
    Within,
    Dummies,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub method: FeMethod,
    pub dependent: String,
    pub unit_fe: bool,
    pub time_fe: TimeFe,
    pub coefficients: Vec<Coefficient>,
    /// Within R²: fit on the data after removing the fixed effects.
    pub r_squared: f64,
    pub n_obs: usize,
    pub n_units: usize,
    pub n_time_buckets: usize,
    /// Slopes plus absorbed effects not nested within clusters; the `K` of
    /// the small-sample correction.
    pub n_params_corrected: usize,
    /// Panel rows removed by listwise deletion.
    pub dropped_rows: usize,
    /// Absent values per required column, counted over all panel rows.
    pub absent_by_column: Vec<(String, usize)>,
    /// Panel row index of every observation used.
    pub sample_rows: Vec<usize>,
    pub residuals: Vec<f64>,
    pub condition_number: f64,
    pub condition_warning: bool,
}

impl FitResult {
    pub fn coef(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.estimate).collect()
    }
}

/// Estimation sample after listwise deletion.
struct Design {
    names: Vec<String>,
    y: Vec<f64>,
    x: Vec<Vec<f64>>,
    unit: Vec<usize>,
    bucket: Vec<usize>,
    unit_labels: Vec<String>,
    bucket_labels: Vec<String>,
    rows: Vec<usize>,
    dropped: usize,
    absent_by_column: Vec<(String, usize)>,
}

impl Design {
    fn n(&self) -> usize {
        self.y.len()
    }

    fn n_units(&self) -> usize {
        self.unit_labels.len()
    }

    fn n_buckets(&self) -> usize {
        self.bucket_labels.len()
    }

    /// All parameters including absorbed ones.
    fn total_params(&self, spec: &RegressionSpec) -> usize {
        self.names.len() + self.fe_params(spec)
    }

    fn fe_params(&self, spec: &RegressionSpec) -> usize {
        let time = self.n_buckets();
        match (spec.unit_fe, spec.time_fe != TimeFe::None) {
            (true, true) => self.n_units() + time - 1,
            (true, false) => self.n_units(),
            (false, true) => time,
            (false, false) => usize::from(spec.constant),
        }
    }

    /// Absorbed parameters not nested in currency clusters.
    fn non_nested_params(&self, spec: &RegressionSpec) -> usize {
        let fe = self.fe_params(spec);
        if spec.unit_fe {
            fe - self.n_units()
        } else {
            fe
        }
    }
}

fn assemble(panel: &Panel, spec: &RegressionSpec) -> Result<Design, EconError> {
    spec.validate()?;
    let lagged;
    let panel = match spec.dependent_lags.iter().max() {
        Some(&m) => {
            lagged = build_lags(panel, &spec.dependent, m)?;
            &lagged
        }
        None => panel,
    };
    let y = panel.column(&spec.dependent)?;
    let mut inputs: Vec<(String, &[Option<f64>])> = vec![(spec.dependent.clone(), y)];
    for &k in &spec.dependent_lags {
        let name = lag_name(&spec.dependent, k);
        inputs.push((name.clone(), panel.column(&name)?));
    }
    for r in &spec.regressors {
        inputs.push((r.clone(), panel.column(r)?));
    }
    for (a, b) in &spec.interactions {
        for c in [a, b] {
            if !inputs.iter().any(|(n, _)| n == c) {
                inputs.push((c.clone(), panel.column(c)?));
            }
        }
    }
    let absent_by_column =
        inputs.iter().map(|(n, v)| (n.clone(), v.iter().filter(|x| x.is_none()).count())).collect();
    let rows: Vec<usize> = (0..panel.len()).filter(|&i| inputs.iter().all(|(_, v)| v[i].is_some())).collect();
    if rows.is_empty() {
        return Err(EconError::EmptySample);
    }
    let get = |name: &str, i: usize| -> f64 {
        inputs.iter().find(|(n, _)| n == name).expect("column collected")
            .1[i]
            .expect("complete row")
    };
    let names = spec.term_names();
    let mut x: Vec<Vec<f64>> = Vec::with_capacity(names.len());
    for &k in &spec.dependent_lags {
        let n = lag_name(&spec.dependent, k);
        x.push(rows.iter().map(|&i| get(&n, i)).collect());
    }
    for r in &spec.regressors {
        x.push(rows.iter().map(|&i| get(r, i)).collect());
    }
    for (a, b) in &spec.interactions {
        x.push(rows.iter().map(|&i| get(a, i) * get(b, i)).collect());
    }
    let yv = rows.iter().map(|&i| get(&spec.dependent, i)).collect();

    let mut unit_index: BTreeMap<&str, usize> = BTreeMap::new();
    for &i in &rows {
        unit_index.entry(panel.unit(i)).or_insert(0);
    }
    for (k, v) in unit_index.iter_mut().enumerate() {
        *v.1 = k;
    }
    let unit = rows.iter().map(|&i| unit_index[panel.unit(i)]).collect();
    let unit_labels = unit_index.keys().map(|s| s.to_string()).collect();

    let mut bucket_index: BTreeMap<(i32, u32), usize> = BTreeMap::new();
    if spec.time_fe != TimeFe::None {
        for &i in &rows {
            bucket_index.entry(spec.time_fe.bucket(panel.week(i)).expect("time FE on")).or_insert(0);
        }
        for (k, v) in bucket_index.iter_mut().enumerate() {
            *v.1 = k;
        }
    }
    let bucket = rows
        .iter()
        .map(|&i| spec.time_fe.bucket(panel.week(i)).map(|b| bucket_index[&b]).unwrap_or(0))
        .collect();
    let bucket_labels = bucket_index.keys().map(|&k| spec.time_fe.label(k)).collect();

    Ok(Design {
        names,
        y: yv,
        x,
        unit,
        bucket,
        unit_labels,
        bucket_labels,
        dropped: panel.len() - rows.len(),
        rows,
        absent_by_column,
    })
}

fn group_means(v: &[f64], group: &[usize], n_groups: usize) -> Vec<f64> {
    let mut sum = vec![0.0; n_groups];
    let mut cnt = vec![0usize; n_groups];
    for (x, &g) in v.iter().zip(group) {
        sum[g] += x;
        cnt[g] += 1;
    }
    sum.iter().zip(&cnt).map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 }).collect()
}

fn subtract_means(v: &mut [f64], group: &[usize], n_groups: usize) -> f64 {
    let means = group_means(v, group, n_groups);
    for (x, &g) in v.iter_mut().zip(group) {
        *x -= means[g];
    }
    means.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Project `v` onto the orthogonal complement of the fixed-effect space.
fn absorb(v: &mut [f64], d: &Design, spec: &RegressionSpec) {
    const TOL: f64 = 1e-14;
    const MAX_ITER: usize = 100_000;
    let n = v.len();
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let time = spec.time_fe != TimeFe::None;
    match (spec.unit_fe, time) {
        (false, false) => {
            if spec.constant {
                subtract_means(v, &vec![0; n], 1);
            }
        }
        (true, false) => {
            subtract_means(v, &d.unit, d.n_units());
        }
        (false, true) => {
            subtract_means(v, &d.bucket, d.n_buckets());
        }
        (true, true) => {
            for _ in 0..MAX_ITER {
                let a = subtract_means(v, &d.unit, d.n_units());
                let b = subtract_means(v, &d.bucket, d.n_buckets());
                if a.max(b) <= TOL * scale {
                    break;
                }
            }
        }
    }
}

fn make_coefficients(
    names: &[String],
    beta: &DVector<f64>,
    cov: &DMatrix<f64>,
    n_clusters: usize,
) -> Vec<Coefficient> {
    names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let se = cov[(j, j)].max(0.0).sqrt();
            let t = beta[j] / se;
            Coefficient {
                name: name.clone(),
                estimate: beta[j],
                std_error: se,
                t_stat: t,
                p_value: student_t_two_sided_p(t, n_clusters.saturating_sub(1)),
            }
        })
        .collect()
}

/// Cluster-robust sandwich `c · B (Σ_g s_g s_g') B` with the CR1 factor.
fn clustered_cov(
    x: &DMatrix<f64>,
    resid: &DVector<f64>,
    bread: &DMatrix<f64>,
    cluster: &[usize],
    n_clusters: usize,
    k_corrected: usize,
) -> DMatrix<f64> {
    let (n, p) = x.shape();
    let mut scores = DMatrix::<f64>::zeros(n_clusters, p);
    for j in 0..p {
        let col = x.column(j);
        for i in 0..n {
            scores[(cluster[i], j)] += col[i] * resid[i];
        }
    }
    let meat = scores.transpose() * &scores;
    let g = n_clusters as f64;
    let c = if n_clusters > 1 && n > k_corrected {
        g / (g - 1.0) * (n as f64 - 1.0) / (n as f64 - k_corrected as f64)
    } else {
        f64::NAN
    };
    bread * meat * bread * c
}

fn r_squared(rss: f64, tss: f64) -> f64 {
    if tss <= 0.0 {
        return if rss <= 0.0 { 1.0 } else { 0.0 };
    }
    (1.0 - rss / tss).clamp(0.0, 1.0)
}

fn check_size(d: &Design, spec: &RegressionSpec) -> Result<(), EconError> {
    let p = d.total_params(spec);
    if d.n() <= p {
        return Err(EconError::TooFewObservations { n_obs: d.n(), n_params: p });
    }
    Ok(())
}

/// Fixed-effects OLS via the within transform.
pub fn fit_fe_ols(panel: &Panel, spec: &RegressionSpec) -> Result<FitResult, EconError> {
    let d = assemble(panel, spec)?;
    check_size(&d, spec)?;
    let n = d.n();
    let k = d.names.len();
    let mut y = d.y.clone();
    absorb(&mut y, &d, spec);
    let mut xt = DMatrix::<f64>::zeros(n, k);
    for (j, col) in d.x.iter().enumerate() {
        let mut c = col.clone();
        absorb(&mut c, &d, spec);
        xt.column_mut(j).copy_from_slice(&c);
    }
    let yv = DVector::from_vec(y);
    let qr = PivotedQr::new(&xt);
    if !qr.is_full_rank() {
        let columns = qr.deficient_columns().into_iter().map(|j| d.names[j].clone()).collect();
        return Err(EconError::Singular { columns });
    }
    let beta = qr.solve(&yv);
    let resid = qr.residuals(&yv);
    let bread = qr.unscaled_covariance().expect("full rank");
    let kc = k + d.non_nested_params(spec);
    let cov = clustered_cov(&xt, &resid, &bread, &d.unit, d.n_units(), kc);
    let cond = condition_number(&xt);
    let rss = resid.norm_squared();
    let tss = yv.norm_squared();
    Ok(FitResult {
        method: FeMethod::Within,
        dependent: spec.dependent.clone(),
        unit_fe: spec.unit_fe,
        time_fe: spec.time_fe,
        coefficients: make_coefficients(&d.names, &beta, &cov, d.n_units()),
        r_squared: r_squared(rss, tss),
        n_obs: n,
        n_units: d.n_units(),
        n_time_buckets: d.n_buckets(),
        n_params_corrected: kc,
        dropped_rows: d.dropped,
        absent_by_column: d.absent_by_column.clone(),
        sample_rows: d.rows.clone(),
        residuals: resid.as_slice().to_vec(),
        condition_number: cond,
        condition_warning: cond > CONDITION_WARNING,
    })
}

/// Indicator columns for the absorbed effects, with names.
fn dummy_columns(d: &Design, spec: &RegressionSpec) -> (Vec<Vec<f64>>, Vec<String>) {
    let n = d.n();
    let mut cols = Vec::new();
    let mut names = Vec::new();
    if spec.unit_fe {
        for (u, label) in d.unit_labels.iter().enumerate() {
            cols.push(d.unit.iter().map(|&g| f64::from(u8::from(g == u))).collect());
            names.push(format!("unit[{label}]"));
        }
    }
    if spec.time_fe != TimeFe::None {
        let skip = usize::from(spec.unit_fe);
        for (b, label) in d.bucket_labels.iter().enumerate().skip(skip) {
            cols.push(d.bucket.iter().map(|&g| f64::from(u8::from(g == b))).collect());
            names.push(format!("time[{label}]"));
        }
    }
    if !spec.unit_fe && spec.time_fe == TimeFe::None && spec.constant {
        cols.push(vec![1.0; n]);
        names.push("const".into());
    }
    (cols, names)
}

fn to_matrix(n: usize, cols: &[&Vec<f64>]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.column_mut(j).copy_from_slice(c);
    }
    m
}

/// Fixed-effects OLS with the effects encoded as explicit dummy columns.
pub fn fit_fe_ols_dummies(panel: &Panel, spec: &RegressionSpec) -> Result<FitResult, EconError> {
    let d = assemble(panel, spec)?;
    check_size(&d, spec)?;
    let n = d.n();
    let k = d.names.len();
    let (dummies, dummy_names) = dummy_columns(&d, spec);
    let all: Vec<&Vec<f64>> = d.x.iter().chain(dummies.iter()).collect();
    let x = to_matrix(n, &all);
    let yv = DVector::from_vec(d.y.clone());
    let qr = PivotedQr::new(&x);
    if !qr.is_full_rank() {
        let columns = qr
            .deficient_columns()
            .into_iter()
            .map(|j| if j < k { d.names[j].clone() } else { dummy_names[j - k].clone() })
            .collect();
        return Err(EconError::Singular { columns });
    }
    let beta_full = qr.solve(&yv);
    let resid = qr.residuals(&yv);
    let bread = qr.unscaled_covariance().expect("full rank");
    let kc = k + d.non_nested_params(spec);
    let cov_full = clustered_cov(&x, &resid, &bread, &d.unit, d.n_units(), kc);
    let beta = beta_full.rows(0, k).into_owned();
    let cov = cov_full.view((0, 0), (k, k)).into_owned();

    let ytilde = if dummies.is_empty() {
        yv.clone()
    } else {
        let dm = to_matrix(n, &dummies.iter().collect::<Vec<_>>());
        PivotedQr::new(&dm).residuals(&yv)
    };
    let cond = condition_number(&x);
    Ok(FitResult {
        method: FeMethod::Dummies,
        dependent: spec.dependent.clone(),
        unit_fe: spec.unit_fe,
        time_fe: spec.time_fe,
        coefficients: make_coefficients(&d.names, &beta, &cov, d.n_units()),
        r_squared: r_squared(resid.norm_squared(), ytilde.norm_squared()),
        n_obs: n,
        n_units: d.n_units(),
        n_time_buckets: d.n_buckets(),
        n_params_corrected: kc,
        dropped_rows: d.dropped,
        absent_by_column: d.absent_by_column.clone(),
        sample_rows: d.rows.clone(),
        residuals: resid.as_slice().to_vec(),
        condition_number: cond,
        condition_warning: cond > CONDITION_WARNING,
    })
}
