//! Two-variable panel VAR estimated by two-step GMM.
//!
//! Unit effects are removed with forward orthogonal deviations. Following
//! the usual convention, the transformed observation for period `t` is
//! filed under `t + 1`, so the instrument "lag 2" of a transformed row is
//! the level `y_{t-1}`: the most recent level uncorrelated with the
//! transformed error. Instruments enter in levels. The two equations share
//! the instrument set and are estimated jointly, with a weighting matrix
//! that allows cross-equation error correlation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::calendar::WeekId;

use super::panel::{lag_name, Panel};
use super::stats::{chi2_sf, normal_two_sided_p};
use super::EconError;

/// Forward orthogonal deviations of one unit's series.
///
/// For `t = 1..T-1`, `x̃_t = sqrt((T-t)/(T-t+1)) (x_t - mean(x_{t+1..T}))`;
/// the last observation has no transform. `None` when fewer than two
/// observations are given.
pub fn fod_transform(series: &[f64]) -> Option<Vec<f64>> {
    let n = series.len();
    if n < 2 {
        return None;
    }
    let mut out = vec![0.0; n - 1];
    let mut future_sum = 0.0;
    for t in (0..n - 1).rev() {
        future_sum += series[t + 1];
        let m = (n - 1 - t) as f64; // number of future observations
        let c = (m / (m + 1.0)).sqrt();
        out[t] = c * (series[t] - future_sum / m);
    }
    Some(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelVarSpec {
    /// Endogenous variables; the first is the primary equation.
    pub variables: [String; 2],
    pub lags: usize,
    /// Level lags used as instruments, relative to the shifted position of
    /// each transformed row.
    pub instrument_lags: Vec<usize>,
}

impl PanelVarSpec {
    pub fn new(primary: &str, other: &str, lags: usize) -> Self {
        PanelVarSpec { variables: [primary.to_string(), other.to_string()], lags, instrument_lags: vec![2, 3] }
    }

    pub fn regressor_names(&self) -> Vec<String> {
        (1..=self.lags)
            .flat_map(|k| self.variables.iter().map(move |v| lag_name(v, k)))
            .collect()
    }

    pub fn instrument_names(&self) -> Vec<String> {
        self.instrument_lags
            .iter()
            .flat_map(|&k| self.variables.iter().map(move |v| lag_name(v, k)))
            .collect()
    }

    fn validate(&self) -> Result<(), EconError> {
        if self.lags == 0 {
            return Err(EconError::Spec("VAR lag order must be at least 1".into()));
        }
        if self.instrument_lags.is_empty() || self.instrument_lags.iter().any(|&k| k < 2) {
            return Err(EconError::Spec("instrument lags must be at least 2".into()));
        }
        if self.variables[0] == self.variables[1] {
            return Err(EconError::Spec("VAR variables must differ".into()));
        }
        Ok(())
    }
}

/// Transformed equations and aligned instruments for one unit.
#[derive(Debug, Clone)]
pub struct VarBlock {
    pub unit: String,
    /// Week of each usable row (the original period of the transformed
    /// observation).
    pub weeks: Vec<WeekId>,
    /// FOD-transformed dependent variables, one column per equation.
    pub y: DMatrix<f64>,
    /// FOD-transformed lagged regressors.
    pub x: DMatrix<f64>,
    /// Level instruments.
    pub z: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct VarBlocks {
    pub spec: PanelVarSpec,
    pub blocks: Vec<VarBlock>,
    /// Units contributing no usable row, with the reason.
    pub dropped_units: Vec<(String, String)>,
}

impl VarBlocks {
    pub fn n_obs(&self) -> usize {
        self.blocks.iter().map(|b| b.y.nrows()).sum()
    }
}

/// Split a unit's rows into runs of consecutive weeks with both variables
/// present.
fn spells(weeks: &[WeekId], a: &[Option<f64>], b: &[Option<f64>]) -> Vec<Vec<(WeekId, [f64; 2])>> {
    let mut out: Vec<Vec<(WeekId, [f64; 2])>> = Vec::new();
    let mut cur: Vec<(WeekId, [f64; 2])> = Vec::new();
    for i in 0..weeks.len() {
        match (a[i], b[i]) {
            (Some(x), Some(y)) => {
                if let Some(&(w, _)) = cur.last() {
                    if weeks[i].index() != w.index() + 1 {
                        out.push(std::mem::take(&mut cur));
                    }
                }
                cur.push((weeks[i], [x, y]));
            }
            _ => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

struct SpellRows {
    weeks: Vec<WeekId>,
    y: Vec<[f64; 2]>,
    x: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
}

fn spell_rows(spell: &[(WeekId, [f64; 2])], spec: &PanelVarSpec) -> SpellRows {
    let l = spec.lags;
    let t_len = spell.len();
    let mut rows = SpellRows { weeks: vec![], y: vec![], x: vec![], z: vec![] };
    if t_len < l + 2 {
        return rows;
    }
    // columns of the equation rows s = l..T-1: [y_s (2), y_{s-1} (2), ..., y_{s-l} (2)]
    let n_cols = 2 + 2 * l;
    let transformed: Vec<Vec<f64>> = (0..n_cols)
        .map(|c| {
            let lag = c / 2;
            let var = c % 2;
            let col: Vec<f64> = (l..t_len).map(|s| spell[s - lag].1[var]).collect();
            fod_transform(&col).expect("at least two equation rows")
        })
        .collect();
    for r in 0..t_len - l - 1 {
        let s = l + r;
        let p = s + 1;
        if spec.instrument_lags.iter().any(|&k| k > p) {
            continue;
        }
        rows.weeks.push(spell[s].0);
        rows.y.push([transformed[0][r], transformed[1][r]]);
        rows.x.push((2..n_cols).map(|c| transformed[c][r]).collect());
        rows.z.push(
            spec.instrument_lags
                .iter()
                .flat_map(|&k| spell[p - k].1)
                .collect(),
        );
    }
    rows
}

/// FOD-transform each unit's equations and attach level instruments.
/// Units are processed per spell of consecutive weeks; rows lacking any
/// instrument are dropped from both equations and instruments.
pub fn build_instruments(panel: &Panel, spec: &PanelVarSpec) -> Result<VarBlocks, EconError> {
    spec.validate()?;
    let a = panel.column(&spec.variables[0])?;
    let b = panel.column(&spec.variables[1])?;
    let k_inst = 2 * spec.instrument_lags.len();
    let k_reg = 2 * spec.lags;
    if k_inst < k_reg {
        return Err(EconError::UnderIdentified { instruments: 2 * k_inst, parameters: 2 * k_reg });
    }
    let mut blocks = Vec::new();
    let mut dropped_units = Vec::new();
    for range in panel.unit_ranges() {
        let unit = panel.unit(range.start).to_string();
        let weeks = &panel.weeks()[range.clone()];
        let sp = spells(weeks, &a[range.clone()], &b[range.clone()]);
        let n_complete: usize = sp.iter().map(Vec::len).sum();
        let mut acc = SpellRows { weeks: vec![], y: vec![], x: vec![], z: vec![] };
        for s in &sp {
            let r = spell_rows(s, spec);
            acc.weeks.extend(r.weeks);
            acc.y.extend(r.y);
            acc.x.extend(r.x);
            acc.z.extend(r.z);
        }
        if acc.y.is_empty() {
            let reason = match n_complete {
                0 => "no complete observation".to_string(),
                1 => "single observation".to_string(),
                _ => format!("no usable row after alignment ({n_complete} complete observations)"),
            };
            dropped_units.push((unit, reason));
            continue;
        }
        let n = acc.y.len();
        blocks.push(VarBlock {
            unit,
            weeks: acc.weeks,
            y: DMatrix::from_fn(n, 2, |i, j| acc.y[i][j]),
            x: DMatrix::from_fn(n, k_reg, |i, j| acc.x[i][j]),
            z: DMatrix::from_fn(n, k_inst, |i, j| acc.z[i][j]),
        });
    }
    Ok(VarBlocks { spec: spec.clone(), blocks, dropped_units })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HansenTest {
    pub j: f64,
    pub df: usize,
    pub p_value: f64,
    pub exactly_identified: bool,
}

#[derive(Debug, Clone)]
pub struct PanelVarResult {
    pub variables: [String; 2],
    pub lags: usize,
    pub regressor_names: Vec<String>,
    pub instrument_names: Vec<String>,
    /// Row `e` holds equation `e`'s coefficients on `regressor_names`.
    pub coefficients: DMatrix<f64>,
    pub std_errors: DMatrix<f64>,
    pub step1_coefficients: DMatrix<f64>,
    /// Joint covariance of the stacked coefficients (equation 0 first).
    pub covariance: DMatrix<f64>,
    pub hansen: HansenTest,
    /// Total moment conditions across both equations.
    pub n_instruments: usize,
    pub n_params: usize,
    pub n_obs: usize,
    pub n_units: usize,
    /// Step-1 residuals vanished; the second step was skipped.
    pub exact_fit: bool,
    pub w2: Option<DMatrix<f64>>,
    pub dropped_units: Vec<(String, String)>,
}

impl PanelVarResult {
    fn index(&self, name: &str) -> Option<usize> {
        self.regressor_names.iter().position(|n| n == name)
    }

    pub fn coef(&self, equation: usize, name: &str) -> Option<f64> {
        self.index(name).map(|j| self.coefficients[(equation, j)])
    }

    pub fn std_error(&self, equation: usize, name: &str) -> Option<f64> {
        self.index(name).map(|j| self.std_errors[(equation, j)])
    }

    pub fn z_stat(&self, equation: usize, name: &str) -> Option<f64> {
        Some(self.coef(equation, name)? / self.std_error(equation, name)?)
    }

    pub fn p_value(&self, equation: usize, name: &str) -> Option<f64> {
        self.z_stat(equation, name).map(normal_two_sided_p)
    }
}

/// Inverse of a symmetric positive-definite matrix, refusing numerically
/// singular input.
fn spd_inverse(m: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>, EconError> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone()).eigenvalues;
    let max = eig.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let min = eig.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !condition.is_finite() || condition > 1e14 {
        return Err(EconError::IllConditioned { what, condition });
    }
    sym.cholesky()
        .map(|c| c.inverse())
        .ok_or(EconError::IllConditioned { what, condition })
}

struct Moments {
    szz: DMatrix<f64>,
    szx: DMatrix<f64>,
    szy: DMatrix<f64>,
}

fn moments(blocks: &[VarBlock], l_inst: usize, k: usize) -> Moments {
    let mut m = Moments {
        szz: DMatrix::zeros(l_inst, l_inst),
        szx: DMatrix::zeros(l_inst, k),
        szy: DMatrix::zeros(l_inst, 2),
    };
    for b in blocks {
        let zt = b.z.transpose();
        m.szz += &zt * &b.z;
        m.szx += &zt * &b.x;
        m.szy += &zt * &b.y;
    }
    m
}

/// Per-unit stacked moment contributions `[Z_i' e_i0; Z_i' e_i1]`.
fn unit_moments(blocks: &[VarBlock], theta: &DMatrix<f64>) -> Vec<DVector<f64>> {
    blocks
        .iter()
        .map(|b| {
            let e = &b.y - &b.x * theta;
            let ze = b.z.transpose() * e;
            DVector::from_iterator(ze.len(), ze.column(0).iter().chain(ze.column(1).iter()).copied())
        })
        .collect()
}

fn stack(theta: &DVector<f64>, k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k, 2, |i, e| theta[e * k + i])
}

/// Hansen overidentification statistic for coefficients `theta` (one
/// column per equation) under weighting `w2`.
pub fn hansen_j(blocks: &VarBlocks, theta: &DMatrix<f64>, w2: &DMatrix<f64>) -> HansenTest {
    let l_inst = 2 * blocks.spec.instrument_lags.len();
    let n_moments = 2 * l_inst;
    let n_params = 2 * theta.nrows();
    let df = n_moments.saturating_sub(n_params);
    if df == 0 {
        return HansenTest { j: 0.0, df: 0, p_value: 1.0, exactly_identified: true };
    }
    let gbar = unit_moments(&blocks.blocks, theta)
        .into_iter()
        .fold(DVector::zeros(n_moments), |acc, g| acc + g);
    let j = (gbar.transpose() * w2 * &gbar)[(0, 0)].max(0.0);
    HansenTest { j, df, p_value: chi2_sf(j, df), exactly_identified: false }
}

/// Two-step GMM for both VAR equations.
///
/// Step 1 weights the moments by `I₂ ⊗ (Σ Z_i'Z_i)⁻¹`, which is 2SLS
/// equation by equation. Step 2 uses `W₂ = (Σ g_i g_i')⁻¹` built from the
/// step-1 residuals. When step-1 residuals vanish (exact fit) the second
/// step is undefined and the step-1 estimate is reported.
pub fn gmm_two_step(blocks: &VarBlocks) -> Result<PanelVarResult, EconError> {
    let spec = &blocks.spec;
    let k = 2 * spec.lags;
    let l_inst = 2 * spec.instrument_lags.len();
    if l_inst < k {
        return Err(EconError::UnderIdentified { instruments: 2 * l_inst, parameters: 2 * k });
    }
    let n_obs = blocks.n_obs();
    if n_obs == 0 {
        return Err(EconError::EmptySample);
    }
    let m = moments(&blocks.blocks, l_inst, k);
    let w1 = spd_inverse(&m.szz, "instrument cross-product matrix")?;
    let a1 = m.szx.transpose() * &w1 * &m.szx;
    let a1_inv = spd_inverse(&a1, "step-1 normal matrix")?;
    let theta1 = &a1_inv * m.szx.transpose() * &w1 * &m.szy;

    let g_units = unit_moments(&blocks.blocks, &theta1);
    let resid_ss: f64 = blocks.blocks.iter().map(|b| (&b.y - &b.x * &theta1).norm_squared()).sum();
    let y_ss: f64 = blocks.blocks.iter().map(|b| b.y.norm_squared()).sum();
    let exact_fit = resid_ss <= 1e-20 * y_ss.max(f64::MIN_POSITIVE) || resid_ss == 0.0;

    let n_moments = 2 * l_inst;
    let mut g_mat = DMatrix::zeros(n_moments, 2 * k);
    g_mat.view_mut((0, 0), (l_inst, k)).copy_from(&m.szx);
    g_mat.view_mut((l_inst, k), (l_inst, k)).copy_from(&m.szx);
    let s = g_units.iter().fold(DMatrix::zeros(n_moments, n_moments), |acc, g| acc + g * g.transpose());

    let (theta, covariance, w2, hansen) = if exact_fit {
        // sandwich around the step-1 estimator; zero when residuals vanish
        let mut w1_full = DMatrix::zeros(n_moments, n_moments);
        w1_full.view_mut((0, 0), (l_inst, l_inst)).copy_from(&w1);
        w1_full.view_mut((l_inst, l_inst), (l_inst, l_inst)).copy_from(&w1);
        let bread = spd_inverse(&(g_mat.transpose() * &w1_full * &g_mat), "step-1 normal matrix")?;
        let cov = &bread * g_mat.transpose() * &w1_full * &s * &w1_full * &g_mat * &bread;
        let df = n_moments.saturating_sub(2 * k);
        let hansen = HansenTest { j: 0.0, df, p_value: 1.0, exactly_identified: df == 0 };
        (theta1.clone(), cov, None, hansen)
    } else {
        let w2 = spd_inverse(&s, "step-2 weighting matrix")?;
        let b = DVector::from_iterator(n_moments, m.szy.column(0).iter().chain(m.szy.column(1).iter()).copied());
        let gw = g_mat.transpose() * &w2;
        let v = spd_inverse(&(&gw * &g_mat), "step-2 normal matrix")?;
        let theta_vec = &v * &gw * b;
        let theta = stack(&theta_vec, k);
        let hansen = hansen_j(blocks, &theta, &w2);
        (theta, v, Some(w2), hansen)
    };

    let coefficients = theta.transpose();
    let std_errors = DMatrix::from_fn(2, k, |e, j| covariance[(e * k + j, e * k + j)].max(0.0).sqrt());
    Ok(PanelVarResult {
        variables: spec.variables.clone(),
        lags: spec.lags,
        regressor_names: spec.regressor_names(),
        instrument_names: spec.instrument_names(),
        coefficients,
        std_errors,
        step1_coefficients: theta1.transpose(),
        covariance,
        hansen,
        n_instruments: n_moments,
        n_params: 2 * k,
        n_obs,
        n_units: blocks.blocks.len(),
        exact_fit,
        w2,
        dropped_units: blocks.dropped_units.clone(),
    })
}

/// FOD transform, instrument alignment and two-step GMM in one call.
pub fn fit_panel_var(panel: &Panel, spec: &PanelVarSpec) -> Result<PanelVarResult, EconError> {
    let blocks = build_instruments(panel, spec)?;
    gmm_two_step(&blocks)
}
