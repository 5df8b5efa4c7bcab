//! Panel estimators: dynamic fixed-effects OLS with currency and time
//! effects, and a two-variable panel VAR estimated by two-step GMM on
//! forward-orthogonal-deviation equations with a Hansen overidentification
//! test.

mod gmm;
mod linalg;
mod ols;
mod panel;
mod stats;

pub use gmm::{
    build_instruments, fit_panel_var, fod_transform, gmm_two_step, hansen_j, HansenTest, PanelVarResult,
    PanelVarSpec, VarBlock, VarBlocks,
};
pub use linalg::{condition_number, PivotedQr};
pub use ols::{fit_fe_ols, fit_fe_ols_dummies, Coefficient, FeMethod, FitResult, RegressionSpec, TimeFe};
pub use panel::{build_lags, lag_name, split_by_constraint, Panel, Split};
pub use stats::{chi2_sf, ks_uniform, normal_two_sided_p, student_t_two_sided_p};

/// Condition number above which a design is flagged as ill-conditioned.
/// Computed on the column-equilibrated design, so units of measurement do
/// not trigger it.
pub const CONDITION_WARNING: f64 = 1e6;

#[derive(Debug, thiserror::Error)]
pub enum EconError {
    #[error("column `{0}` not found in panel")]
    MissingColumn(String),
    #[error("duplicate panel key ({unit}, {week})")]
    DuplicateKey { unit: String, week: String },
    #[error("column `{name}` has {found} values, panel has {expected} rows")]
    ColumnLength { name: String, expected: usize, found: usize },
    #[error("invalid specification: {0}")]
    Spec(String),
    #[error("empty estimation sample")]
    EmptySample,
    #[error("{n_obs} observations for {n_params} parameters")]
    TooFewObservations { n_obs: usize, n_params: usize },
    #[error("rank-deficient design; collinear columns: {}", columns.join(", "))]
    Singular { columns: Vec<String> },
    #[error("{what} is numerically singular (condition number {condition:.3e})")]
    IllConditioned { what: &'static str, condition: f64 },
    #[error("under-identified: {instruments} instruments for {parameters} parameters")]
    UnderIdentified { instruments: usize, parameters: usize },
}
