//! `var`: two-variable panel VAR (depreciation, premium) for one
//! constraint group.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use serde_json::json;
use shadowfx_core::econometrics::{fit_panel_var, split_by_constraint, Panel, PanelVarSpec};
use shadowfx_core::pricing::WeeklyPanelRow;

use crate::config::RunConfig;
use crate::manifest::{Manifest, Outputs, RunRecord};
use crate::panel_file::{apply_delta, load_panel};
use crate::{CliError, Result};

pub const VAR_VARIABLES: [&str; 2] = ["depr_pct", "premium_pct"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Unconstrained,
    Constrained,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::Unconstrained => "unconstrained",
            Group::Constrained => "constrained",
        })
    }
}

impl FromStr for Group {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "unconstrained" => Ok(Group::Unconstrained),
            "constrained" => Ok(Group::Constrained),
            other => Err(format!("group must be unconstrained or constrained, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarCoef {
    pub equation: String,
    pub term: String,
    pub estimate: f64,
    pub std_error: f64,
    pub z_stat: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarReport {
    pub group: String,
    pub lags: usize,
    pub delta: Option<f64>,
    pub coefficients: Vec<VarCoef>,
    pub hansen_j: f64,
    pub hansen_df: usize,
    pub hansen_p: f64,
    pub exactly_identified: bool,
    pub n_obs: usize,
    pub n_units: usize,
    pub n_instruments: usize,
    pub n_params: usize,
    pub exact_fit: bool,
    pub instruments: Vec<String>,
    pub dropped_units: Vec<(String, String)>,
}

impl VarReport {
    pub fn coef(&self, equation: &str, term: &str) -> Option<&VarCoef> {
        self.coefficients.iter().find(|c| c.equation == equation && c.term == term)
    }
}

pub fn run_var(mut rows: Vec<WeeklyPanelRow>, group: Group, lags: usize, delta: Option<f64>) -> Result<VarReport> {
    if let Some(d) = delta {
        apply_delta(&mut rows, d);
    }
    let panel = Panel::from_weekly_rows(&rows)?;
    let split = split_by_constraint(&panel)?;
    let sub = match group {
        Group::Unconstrained => split.unconstrained,
        Group::Constrained => split.constrained,
    };
    if sub.is_empty() {
        return Err(CliError::EmptyGroup(group.to_string()));
    }
    let res = fit_panel_var(&sub, &PanelVarSpec::new(VAR_VARIABLES[0], VAR_VARIABLES[1], lags))?;
    let mut coefficients = Vec::new();
    for (e, eq) in res.variables.iter().enumerate() {
        for (j, term) in res.regressor_names.iter().enumerate() {
            let (b, se) = (res.coefficients[(e, j)], res.std_errors[(e, j)]);
            coefficients.push(VarCoef {
                equation: eq.clone(),
                term: term.clone(),
                estimate: b,
                std_error: se,
                z_stat: b / se,
                p_value: res.p_value(e, term).expect("known term"),
            });
        }
    }
    Ok(VarReport {
        group: group.to_string(),
        lags,
        delta,
        coefficients,
        hansen_j: res.hansen.j,
        hansen_df: res.hansen.df,
        hansen_p: res.hansen.p_value,
        exactly_identified: res.hansen.exactly_identified,
        n_obs: res.n_obs,
        n_units: res.n_units,
        n_instruments: res.n_instruments,
        n_params: res.n_params,
        exact_fit: res.exact_fit,
        instruments: res.instrument_names.clone(),
        dropped_units: res.dropped_units.clone(),
    })
}

fn table_csv(report: &VarReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["equation", "term", "estimate", "std_error", "z_stat", "p_value"])?;
    for c in &report.coefficients {
        w.write_record([
            c.equation.clone(),
            c.term.clone(),
            c.estimate.to_string(),
            c.std_error.to_string(),
            c.z_stat.to_string(),
            c.p_value.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| CliError::Output(e.to_string()))
}

fn tests_csv(report: &VarReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["statistic", "value"])?;
    let rows: [(&str, String); 6] = [
        ("hansen_j", report.hansen_j.to_string()),
        ("hansen_df", report.hansen_df.to_string()),
        ("hansen_p", report.hansen_p.to_string()),
        ("n_obs", report.n_obs.to_string()),
        ("n_units", report.n_units.to_string()),
        ("n_instruments", report.n_instruments.to_string()),
    ];
    for (k, v) in rows {
        w.write_record([k, v.as_str()])?;
    }
    w.into_inner().map_err(|e| CliError::Output(e.to_string()))
}

pub fn cmd_var(cfg: &RunConfig, group: Group, lags: usize) -> Result<VarReport> {
    cfg.validate()?;
    let panel = load_panel(cfg)?;
    let report = run_var(panel.rows, group, lags, cfg.delta)?;
    let stem = format!("var_{group}_l{lags}");
    let mut out = Outputs::create(&cfg.out_dir())?;
    out.write(&format!("{stem}.csv"), &table_csv(&report)?)?;
    out.write(&format!("{stem}_tests.csv"), &tests_csv(&report)?)?;
    out.write_json(&format!("{stem}.json"), &report)?;
    let record = RunRecord {
        command: format!("var --group {group} --lags {lags}"),
        config_hash: cfg.hash(),
        inputs: vec![panel.entry],
        outputs: out.entries,
        stats: BTreeMap::from([
            ("n_obs".to_string(), json!(report.n_obs)),
            ("n_units".to_string(), json!(report.n_units)),
            ("hansen_p".to_string(), json!(report.hansen_p)),
        ]),
    };
    Manifest::upsert(&cfg.out_dir(), &format!("var {group} l{lags}"), record)?;
    Ok(report)
}
