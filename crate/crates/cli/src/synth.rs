//! `synth`: every synthetic dataset with its truth file, plus a complete
//! build fixture with a ready-to-run config.

use std::collections::BTreeMap;
use std::fs;

use serde::Serialize;
use serde_json::json;
use shadowfx_core::ingest::{
    write_areaer, write_blockchain, write_freedom, write_market_bars, write_oer, write_remittance, write_trades,
    IngestError,
};
use shadowfx_core::pricing::write_panel;
use shadowfx_core::synth::{
    gen_friction_panel, gen_micro_panel, gen_pipeline_fixture, gen_trades, gen_var_panel, write_trade_truth,
    write_truth, DgpSpec, FixtureTruth,
};

use crate::config::RunConfig;
use crate::manifest::{digest_hex, FileEntry, Manifest, Outputs, RunRecord};
use crate::{CliError, Result};

/// Config written beside the fixture inputs; `build --config` on it
/// reproduces the fixture's truth counts.
pub const FIXTURE_CONFIG: &str = "\
# generated by `shadowfx synth`
trades = trades.csv
oer = oer.csv
market_bars = market_bars.csv
blockchain = blockchain.csv
areaer_flags = areaer_flags.csv
areaer_regimes = areaer_regimes.csv
remittance = remittance.csv
freedom = freedom.csv
out = build
";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSummary {
    pub seed: u64,
    pub files: Vec<String>,
    pub truth_files: Vec<String>,
    pub fixture: FixtureTruth,
}

fn ingest_bytes(write: impl FnOnce(&mut Vec<u8>) -> std::result::Result<(), IngestError>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf).map_err(|e| CliError::Output(e.to_string()))?;
    Ok(buf)
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

/// Loads the DGP spec named by the config (defaults otherwise) and applies
/// the seed override.
pub fn load_spec(cfg: &RunConfig) -> Result<(DgpSpec, Option<FileEntry>)> {
    let (mut spec, entry) = match &cfg.synth_spec {
        None => (DgpSpec::default(), None),
        Some(p) => {
            let path = cfg.resolve(p);
            let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
            let entry = FileEntry { name: p.display().to_string(), sha256: digest_hex(text.as_bytes()), rows: None, rejected: None };
            (text.parse::<DgpSpec>()?, Some(entry))
        }
    };
    if let Some(seed) = cfg.seed {
        spec.seed = seed;
    }
    spec.validate()?;
    Ok((spec, entry))
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<SynthSummary> {
    let (spec, spec_entry) = load_spec(cfg)?;
    // generate everything first so an invalid spec writes nothing
    let trades = gen_trades(&spec)?;
    let friction = gen_friction_panel(&spec)?;
    let micro = gen_micro_panel(&spec)?;
    let var = gen_var_panel(&spec)?;
    let fixture = gen_pipeline_fixture(&spec)?;

    let mut out = Outputs::create(&cfg.out_dir())?;
    out.write("spec.conf", spec.to_config().as_bytes())?;
    out.write("trades.csv", &ingest_bytes(|b| write_trades(b, &trades.trades))?)?;
    out.write("trades_truth.csv", &csv_bytes(|b| write_trade_truth(b, &trades.truth))?)?;
    out.write("friction_panel.csv", &csv_bytes(|b| write_panel(b, &friction.rows))?)?;
    out.write("friction_truth.csv", &csv_bytes(|b| write_truth(b, &friction.truth))?)?;
    out.write("micro_panel.csv", &csv_bytes(|b| write_panel(b, &micro.rows))?)?;
    out.write("micro_truth.csv", &csv_bytes(|b| write_truth(b, &micro.truth))?)?;
    out.write("var_panel.csv", &csv_bytes(|b| write_panel(b, &var.rows))?)?;
    out.write("var_truth.csv", &csv_bytes(|b| write_truth(b, &var.truth))?)?;

    out.write("fixture/trades.csv", &ingest_bytes(|b| write_trades(b, &fixture.trades))?)?;
    out.write("fixture/oer.csv", &ingest_bytes(|b| write_oer(b, &fixture.oer))?)?;
    out.write("fixture/market_bars.csv", &ingest_bytes(|b| write_market_bars(b, &fixture.bars))?)?;
    out.write("fixture/blockchain.csv", &ingest_bytes(|b| write_blockchain(b, &fixture.blockchain))?)?;
    let (mut flags, mut regimes) = (Vec::new(), Vec::new());
    write_areaer(&mut flags, &mut regimes, &fixture.areaer).map_err(|e| CliError::Output(e.to_string()))?;
    out.write("fixture/areaer_flags.csv", &flags)?;
    out.write("fixture/areaer_regimes.csv", &regimes)?;
    out.write("fixture/remittance.csv", &ingest_bytes(|b| write_remittance(b, &fixture.remittance))?)?;
    out.write("fixture/freedom.csv", &ingest_bytes(|b| write_freedom(b, &fixture.freedom))?)?;
    out.write("fixture/bucket_truth.csv", &csv_bytes(|b| write_trade_truth(b, &fixture.bucket_truth))?)?;
    out.write_json("fixture/truth.json", &fixture.truth)?;
    out.write("fixture/build.conf", FIXTURE_CONFIG.as_bytes())?;

    let truth_files: Vec<String> = out
        .entries
        .iter()
        .map(|e| e.name.clone())
        .filter(|n| n.contains("truth"))
        .collect();
    let summary = SynthSummary {
        seed: spec.seed,
        files: out.entries.iter().map(|e| e.name.clone()).collect(),
        truth_files: truth_files.clone(),
        fixture: fixture.truth,
    };
    let record = RunRecord {
        command: "synth".into(),
        config_hash: digest_hex(spec.to_config().as_bytes()),
        inputs: spec_entry.into_iter().collect(),
        outputs: out.entries,
        stats: BTreeMap::from([
            ("seed".to_string(), json!(spec.seed)),
            ("truth_files".to_string(), json!(truth_files)),
            ("fixture_trades".to_string(), json!(fixture.truth.n_trades)),
        ]),
    };
    Manifest::upsert(&cfg.out_dir(), "synth", record)?;
    Ok(summary)
}
