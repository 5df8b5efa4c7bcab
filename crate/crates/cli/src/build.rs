//! `build`: raw inputs to daily prices, shadow-rate series, regulatory
//! indices and the weekly panel.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use shadowfx_core::ingest::{
    parse_areaer, parse_blockchain, parse_freedom, parse_market_bars, parse_oer, parse_remittance, parse_trades,
    IngestError, Parsed, Rejection,
};
use shadowfx_core::pricing::{
    aggregate_daily, build_weekly_panel, quantile_bounds, write_daily_prices, write_panel, write_series, PanelInputs,
};
use shadowfx_core::regulation::{build_regulatory, write_regulatory};

use crate::config::RunConfig;
use crate::manifest::{digest_hex, FileEntry, Manifest, Outputs, RunRecord};
use crate::{CliError, Result};

pub const REJECTIONS_FILE: &str = "rejections.csv";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuildSummary {
    pub out_dir: PathBuf,
    pub n_trades: usize,
    pub n_daily_prices: usize,
    pub n_corrected: usize,
    pub n_series_points: usize,
    pub n_regulatory_rows: usize,
    pub n_panel_rows: usize,
    /// Rejected rows per input kind.
    pub rejected: BTreeMap<String, usize>,
}

struct Input {
    kind: &'static str,
    shown: String,
    bytes: Vec<u8>,
}

fn read_input(cfg: &RunConfig, kind: &'static str, path: &Path) -> Result<Input> {
    let full = cfg.resolve(path);
    let bytes = fs::read(&full).map_err(|e| CliError::io(&full, e))?;
    Ok(Input { kind, shown: path.display().to_string(), bytes })
}

fn read_optional(cfg: &RunConfig, kind: &'static str, path: &Option<PathBuf>) -> Result<Option<Input>> {
    path.as_ref().map(|p| read_input(cfg, kind, p)).transpose()
}

/// Bookkeeping shared by every parsed input.
#[derive(Default)]
struct Ledger {
    entries: Vec<FileEntry>,
    rejections: Vec<(String, Rejection)>,
    over: Option<(String, usize, usize, f64)>,
}

impl Ledger {
    fn record<T>(&mut self, input: &Input, parsed: &Parsed<T>, threshold: f64) {
        self.entries.push(FileEntry {
            name: input.shown.clone(),
            sha256: digest_hex(&input.bytes),
            rows: Some(parsed.accepted_rows),
            rejected: Some(parsed.rejections.len()),
        });
        self.rejections.extend(parsed.rejections.iter().map(|r| (input.kind.to_string(), r.clone())));
        let rate = parsed.rejection_rate();
        if rate > threshold && self.over.is_none() {
            self.over = Some((input.kind.to_string(), parsed.rejections.len(), parsed.input_rows(), rate));
        }
    }

    fn rejection_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["input", "line", "reason"])?;
        for (kind, r) in &self.rejections {
            w.write_record([kind.as_str(), &r.line.to_string(), &r.reason])?;
        }
        w.into_inner().map_err(|e| CliError::Output(e.to_string()))
    }
}

fn ingest_err(input: &Input) -> impl FnOnce(IngestError) -> CliError + '_ {
    move |source| CliError::Ingest { input: input.kind.to_string(), source }
}

fn to_csv(write: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

/// Runs the full build. Aborts with [`CliError::Threshold`] (after writing
/// the rejection report) when any input rejects more than the configured
/// share of its rows.
pub fn cmd_build(cfg: &RunConfig) -> Result<BuildSummary> {
    cfg.validate()?;
    let registry = cfg.load_registry()?;
    let trades_path = cfg.trades.as_ref().ok_or_else(|| CliError::Config("`trades` is not set".into()))?;
    let oer_path = cfg.oer.as_ref().ok_or_else(|| CliError::Config("`oer` is not set".into()))?;

    let trades_in = read_input(cfg, "trades", trades_path)?;
    if trades_in.bytes.iter().all(u8::is_ascii_whitespace) {
        return Err(CliError::NoTradeData(cfg.resolve(trades_path)));
    }
    let oer_in = read_input(cfg, "oer", oer_path)?;
    let bars_in = read_optional(cfg, "market_bars", &cfg.market_bars)?;
    let chain_in = read_optional(cfg, "blockchain", &cfg.blockchain)?;
    let flags_in = read_optional(cfg, "areaer_flags", &cfg.areaer_flags)?;
    let regimes_in = read_optional(cfg, "areaer_regimes", &cfg.areaer_regimes)?;
    let remit_in = read_optional(cfg, "remittance", &cfg.remittance)?;
    let freedom_in = read_optional(cfg, "freedom", &cfg.freedom)?;

    let th = cfg.rejection_threshold;
    let mut ledger = Ledger::default();
    let trades = parse_trades(trades_in.bytes.as_slice(), &registry).map_err(ingest_err(&trades_in))?;
    ledger.record(&trades_in, &trades, th);
    if trades.records.is_empty() {
        return Err(CliError::NoTradeData(cfg.resolve(trades_path)));
    }
    let oer = parse_oer(oer_in.bytes.as_slice()).map_err(ingest_err(&oer_in))?;
    ledger.record(&oer_in, &oer, th);

    let bars = match &bars_in {
        Some(i) => {
            let p = parse_market_bars(i.bytes.as_slice()).map_err(ingest_err(i))?;
            ledger.record(i, &p, th);
            p.records
        }
        None => Vec::new(),
    };
    let chain = match &chain_in {
        Some(i) => {
            let p = parse_blockchain(i.bytes.as_slice()).map_err(ingest_err(i))?;
            ledger.record(i, &p, th);
            p.records
        }
        None => Vec::new(),
    };
    let areaer = match (&flags_in, &regimes_in) {
        (Some(f), Some(r)) => {
            let p = parse_areaer(f.bytes.as_slice(), r.bytes.as_slice()).map_err(ingest_err(f))?;
            // one combined rate; both files are listed as inputs
            ledger.record(f, &p, th);
            ledger.entries.push(FileEntry {
                name: r.shown.clone(),
                sha256: digest_hex(&r.bytes),
                rows: None,
                rejected: None,
            });
            p.records
        }
        _ => Vec::new(),
    };
    let remittance = match &remit_in {
        Some(i) => {
            let p = parse_remittance(i.bytes.as_slice()).map_err(ingest_err(i))?;
            ledger.record(i, &p, th);
            p.records
        }
        None => Vec::new(),
    };
    let freedom = match &freedom_in {
        Some(i) => {
            let p = parse_freedom(i.bytes.as_slice()).map_err(ingest_err(i))?;
            ledger.record(i, &p, th);
            p.records
        }
        None => Vec::new(),
    };

    let mut out = Outputs::create(&cfg.out_dir())?;
    let report_path = out.write(REJECTIONS_FILE, &ledger.rejection_csv()?)?;
    if let Some((input, rejected, rows, rate)) = ledger.over.clone() {
        return Err(CliError::Threshold { input, rejected, rows, rate, threshold: th, report: report_path });
    }

    let daily = aggregate_daily(&trades.records, cfg.ratio_bounds());
    let start = daily.iter().map(|d| d.date).min().expect("nonempty trades");
    let end = daily.iter().map(|d| d.date).max().expect("nonempty trades");
    let regulatory = build_regulatory(&areaer, &remittance, &freedom, start, end, &cfg.regulation())?;
    let panel = build_weekly_panel(
        &PanelInputs {
            daily: &daily,
            oer: &oer.records,
            bars: &bars,
            blockchain: &chain,
            regulatory: &regulatory.series,
        },
        cfg.panel_options(),
    );

    out.write("daily_prices.csv", &to_csv(|b| write_daily_prices(b, &daily))?)?;
    out.write("series.csv", &to_csv(|b| write_series(b, &panel.series))?)?;
    out.write("regulatory.csv", &to_csv(|b| write_regulatory(b, &regulatory.series))?)?;
    out.write("panel.csv", &to_csv(|b| write_panel(b, &panel.rows))?)?;
    let mut notes: Vec<String> = regulatory.report.clone();
    notes.extend(panel.report.iter().cloned());
    let mut notes_text = notes.join("\n");
    if !notes_text.is_empty() {
        notes_text.push('\n');
    }
    out.write("build_notes.txt", notes_text.as_bytes())?;

    let n_corrected = daily.iter().filter(|d| d.corrected).count();
    let summary = BuildSummary {
        out_dir: out.dir().to_path_buf(),
        n_trades: trades.records.len(),
        n_daily_prices: daily.len(),
        n_corrected,
        n_series_points: panel.series.len(),
        n_regulatory_rows: regulatory.series.len(),
        n_panel_rows: panel.rows.len(),
        rejected: ledger.rejections.iter().fold(BTreeMap::new(), |mut m, (k, _)| {
            *m.entry(k.clone()).or_insert(0) += 1;
            m
        }),
    };
    let stats = BTreeMap::from([
        ("n_trades".to_string(), json!(summary.n_trades)),
        ("n_daily_prices".to_string(), json!(summary.n_daily_prices)),
        ("n_corrected".to_string(), json!(summary.n_corrected)),
        (
            "correction_rate".to_string(),
            json!(summary.n_corrected as f64 / summary.n_daily_prices.max(1) as f64),
        ),
        ("n_series_points".to_string(), json!(summary.n_series_points)),
        ("n_regulatory_rows".to_string(), json!(summary.n_regulatory_rows)),
        ("n_panel_rows".to_string(), json!(summary.n_panel_rows)),
        ("n_rejected".to_string(), json!(ledger.rejections.len())),
        ("rejected_by_input".to_string(), json!(summary.rejected)),
        ("rejection_threshold".to_string(), json!(th)),
        ("n_notes".to_string(), json!(notes.len())),
    ]);
    let record = RunRecord {
        command: "build".into(),
        config_hash: cfg.hash(),
        inputs: ledger.entries,
        outputs: out.entries,
        stats,
    };
    Manifest::upsert(&summary.out_dir, "build", record)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileReport {
    pub lower_q: f64,
    pub upper_q: f64,
    pub lower: f64,
    pub upper: f64,
    pub n_buckets: usize,
}

/// Recomputes the ratio band as empirical quantiles of the weighted/median
/// price ratio over every (currency, day) bucket of the trade log.
pub fn cmd_quantile_bounds(cfg: &RunConfig, lower_q: f64, upper_q: f64) -> Result<QuantileReport> {
    if !(0.0..=1.0).contains(&lower_q) || !(0.0..=1.0).contains(&upper_q) || lower_q >= upper_q {
        return Err(CliError::Config(format!("quantiles must satisfy 0 ≤ lower < upper ≤ 1, got {lower_q}, {upper_q}")));
    }
    let registry = cfg.load_registry()?;
    let trades_path = cfg.trades.as_ref().ok_or_else(|| CliError::Config("`trades` is not set".into()))?;
    let input = read_input(cfg, "trades", trades_path)?;
    let trades = parse_trades(input.bytes.as_slice(), &registry).map_err(ingest_err(&input))?;
    let daily = aggregate_daily(&trades.records, cfg.ratio_bounds());
    let (lower, upper) =
        quantile_bounds(&daily, lower_q, upper_q).ok_or_else(|| CliError::NoTradeData(cfg.resolve(trades_path)))?;
    let report = QuantileReport { lower_q, upper_q, lower, upper, n_buckets: daily.len() };
    let mut out = Outputs::create(&cfg.out_dir())?;
    out.write_json("quantile_bounds.json", &report)?;
    let record = RunRecord {
        command: "quantile-bounds".into(),
        config_hash: cfg.hash(),
        inputs: vec![FileEntry {
            name: input.shown.clone(),
            sha256: digest_hex(&input.bytes),
            rows: Some(trades.accepted_rows),
            rejected: Some(trades.rejections.len()),
        }],
        outputs: out.entries,
        stats: BTreeMap::from([("n_buckets".to_string(), json!(daily.len()))]),
    };
    Manifest::upsert(&cfg.out_dir(), "quantile-bounds", record)?;
    Ok(report)
}
