//! Shadow exchange rates and BTC premiums from P2P trade logs.
//!
//! The crate is organised as a batch pipeline:
//!
//! - [`ingest`] parses the flat-file inputs (trades, official rates, AREAER
//!   flags, remittance quotes, freedom scores, exchange bars, blockchain
//!   metrics) with strict header checks and per-row rejection reports.
//! - [`pricing`] aggregates trades into robust daily prices and derives shadow
//!   rates, premiums, depreciation, BTC returns, realized volatility and the
//!   weekly currency panel.
//! - [`regulation`] turns AREAER-style records, remittance quotes and freedom
//!   scores into per-currency peg, capital-control, constrained-currency,
//!   remittance-cost and freedom indices.
//! - [`econometrics`] estimates fixed-effects OLS with clustered standard
//!   errors and the two-variable panel VAR by FOD two-step GMM with a Hansen
//!   overidentification test.
//! - [`synth`] generates datasets with known ground truth and carries the
//!   independent oracles used to verify every stage.

pub mod calendar;
pub mod econometrics;
pub mod ingest;
pub mod pricing;
pub mod regulation;
pub mod synth;

pub use calendar::WeekId;
pub use ingest::{Currency, CurrencyRegistry};
