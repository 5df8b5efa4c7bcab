//! `regress`: one named fixed-effects model on the panel file.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use serde_json::json;
use shadowfx_core::econometrics::{fit_fe_ols, EconError, Panel, TimeFe};
use shadowfx_core::pricing::WeeklyPanelRow;

use crate::config::RunConfig;
use crate::manifest::{Manifest, Outputs, RunRecord};
use crate::models::ModelId;
use crate::panel_file::{apply_delta, load_panel};
use crate::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefRow {
    pub term: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionReport {
    pub model: String,
    pub dependent: String,
    pub time_fe: String,
    /// Threshold the constrained flag was recomputed at, if any.
    pub delta: Option<f64>,
    pub constrained_rows: usize,
    pub constrained_units: usize,
    pub coefficients: Vec<CoefRow>,
    pub r_squared_within: f64,
    pub n_obs: usize,
    pub n_units: usize,
    pub n_time_buckets: usize,
    pub n_params_corrected: usize,
    pub dropped_rows: usize,
    pub condition_number: f64,
    pub condition_warning: bool,
}

impl RegressionReport {
    pub fn coef(&self, term: &str) -> Option<&CoefRow> {
        self.coefficients.iter().find(|c| c.term == term)
    }
}

/// Fits `model` on `rows`, first recomputing the constrained flag when
/// `delta` is given.
pub fn run_regression(
    mut rows: Vec<WeeklyPanelRow>,
    model: ModelId,
    time_fe: Option<TimeFe>,
    delta: Option<f64>,
) -> Result<RegressionReport> {
    if let Some(d) = delta {
        apply_delta(&mut rows, d);
    }
    let tight: Vec<&WeeklyPanelRow> = rows.iter().filter(|r| r.constrained == Some(1)).collect();
    let constrained_units = tight.iter().map(|r| r.currency).collect::<BTreeSet<_>>().len();
    let constrained_rows = tight.len();
    let spec = model.spec(time_fe);
    let panel = Panel::from_weekly_rows(&rows)?;
    // the panel file always has every column; an entirely empty one counts
    // as missing
    let needed = std::iter::once(&spec.dependent)
        .chain(&spec.regressors)
        .chain(spec.interactions.iter().flat_map(|(a, b)| [a, b]));
    for col in needed {
        if panel.column(col)?.iter().all(Option::is_none) {
            return Err(EconError::MissingColumn(col.clone()).into());
        }
    }
    let fit = fit_fe_ols(&panel, &spec)?;
    Ok(RegressionReport {
        model: model.to_string(),
        dependent: fit.dependent.clone(),
        time_fe: fit.time_fe.to_string(),
        delta,
        constrained_rows,
        constrained_units,
        coefficients: fit
            .coefficients
            .iter()
            .map(|c| CoefRow {
                term: c.name.clone(),
                estimate: c.estimate,
                std_error: c.std_error,
                t_stat: c.t_stat,
                p_value: c.p_value,
            })
            .collect(),
        r_squared_within: fit.r_squared,
        n_obs: fit.n_obs,
        n_units: fit.n_units,
        n_time_buckets: fit.n_time_buckets,
        n_params_corrected: fit.n_params_corrected,
        dropped_rows: fit.dropped_rows,
        condition_number: fit.condition_number,
        condition_warning: fit.condition_warning,
    })
}

fn table_csv(report: &RegressionReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["term", "estimate", "std_error", "t_stat", "p_value"])?;
    for c in &report.coefficients {
        w.write_record([
            c.term.clone(),
            c.estimate.to_string(),
            c.std_error.to_string(),
            c.t_stat.to_string(),
            c.p_value.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| CliError::Output(e.to_string()))
}

pub fn cmd_regress(cfg: &RunConfig, model: ModelId) -> Result<RegressionReport> {
    cfg.validate()?;
    let panel = load_panel(cfg)?;
    let report = run_regression(panel.rows, model, cfg.time_fe, cfg.delta)?;
    let mut out = Outputs::create(&cfg.out_dir())?;
    out.write(&format!("regress_{model}.csv"), &table_csv(&report)?)?;
    out.write_json(&format!("regress_{model}.json"), &report)?;
    let record = RunRecord {
        command: format!("regress --model {model}"),
        config_hash: cfg.hash(),
        inputs: vec![panel.entry],
        outputs: out.entries,
        stats: BTreeMap::from([
            ("n_obs".to_string(), json!(report.n_obs)),
            ("constrained_units".to_string(), json!(report.constrained_units)),
            ("condition_warning".to_string(), json!(report.condition_warning)),
        ]),
    };
    Manifest::upsert(&cfg.out_dir(), &format!("regress {model}"), record)?;
    Ok(report)
}
