//! `summary`: descriptive statistics of the weekly premium, pooled and by
//! currency, year and constraint group.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::json;
use shadowfx_core::pricing::WeeklyPanelRow;

use crate::config::RunConfig;
use crate::manifest::{Manifest, Outputs, RunRecord};
use crate::panel_file::load_panel;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PremiumStats {
    pub n: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Midpoint of the two middle values for an even count.
    pub median: f64,
    pub share_nonnegative_pct: f64,
}

impl PremiumStats {
    /// `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 };
        Some(PremiumStats {
            n,
            min: sorted[0],
            max: sorted[n - 1],
            mean: values.iter().sum::<f64>() / n as f64,
            median,
            share_nonnegative_pct: 100.0 * values.iter().filter(|v| **v >= 0.0).count() as f64 / n as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelSummary {
    pub pooled: Option<PremiumStats>,
    pub by_currency: BTreeMap<String, PremiumStats>,
    pub by_year: BTreeMap<i32, PremiumStats>,
    /// `unconstrained`, `constrained` and `unclassified`, when present.
    pub by_group: BTreeMap<String, PremiumStats>,
}

fn grouped<K: Ord>(rows: &[WeeklyPanelRow], key: impl Fn(&WeeklyPanelRow) -> K) -> BTreeMap<K, PremiumStats> {
    let mut groups: BTreeMap<K, Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups.entry(key(r)).or_default().push(r.premium_pct);
    }
    groups
        .into_iter()
        .map(|(k, v)| (k, PremiumStats::of(&v).expect("groups are nonempty")))
        .collect()
}

pub fn group_name(constrained: Option<u8>) -> &'static str {
    match constrained {
        Some(1) => "constrained",
        Some(_) => "unconstrained",
        None => "unclassified",
    }
}

pub fn summarize(rows: &[WeeklyPanelRow]) -> PanelSummary {
    let all: Vec<f64> = rows.iter().map(|r| r.premium_pct).collect();
    PanelSummary {
        pooled: PremiumStats::of(&all),
        by_currency: grouped(rows, |r| r.currency.to_string()),
        by_year: grouped(rows, |r| r.week.iso_year()),
        by_group: grouped(rows, |r| group_name(r.constrained).to_string()),
    }
}

fn stats_csv<K: ToString>(key_name: &str, rows: impl IntoIterator<Item = (K, PremiumStats)>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([key_name, "n", "min", "max", "mean", "median", "share_nonnegative_pct"])?;
    for (k, s) in rows {
        w.write_record([
            k.to_string(),
            s.n.to_string(),
            s.min.to_string(),
            s.max.to_string(),
            s.mean.to_string(),
            s.median.to_string(),
            s.share_nonnegative_pct.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| crate::CliError::Output(e.to_string()))
}

pub fn cmd_summary(cfg: &RunConfig) -> Result<PanelSummary> {
    let panel = load_panel(cfg)?;
    let summary = summarize(&panel.rows);
    let mut out = Outputs::create(&cfg.out_dir())?;
    out.write("summary_pooled.csv", &stats_csv("sample", summary.pooled.clone().map(|s| ("all", s)))?)?;
    out.write("summary_by_currency.csv", &stats_csv("currency", summary.by_currency.clone())?)?;
    out.write("summary_by_year.csv", &stats_csv("year", summary.by_year.clone())?)?;
    out.write("summary_by_group.csv", &stats_csv("group", summary.by_group.clone())?)?;
    out.write_json("summary.json", &summary)?;
    let record = RunRecord {
        command: "summary".into(),
        config_hash: cfg.hash(),
        inputs: vec![panel.entry],
        outputs: out.entries,
        stats: BTreeMap::from([
            ("n_rows".to_string(), json!(panel.rows.len())),
            ("n_currencies".to_string(), json!(summary.by_currency.len())),
        ]),
    };
    Manifest::upsert(&cfg.out_dir(), "summary", record)?;
    Ok(summary)
}
