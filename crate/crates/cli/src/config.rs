//! Plain-text `key = value` run configuration.
//!
//! Relative paths are resolved against the directory holding the config
//! file. Command-line flags override config values after loading.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use shadowfx_core::econometrics::TimeFe;
use shadowfx_core::ingest::{Currency, CurrencyRegistry, DEFAULT_CURRENCIES};
use shadowfx_core::pricing::{PanelOptions, RatioBounds, WeeklyAggregation};
use shadowfx_core::regulation::RegulationConfig;

use crate::{CliError, Result};

/// Every recognised key with its default and meaning, in documentation
/// order. `-` marks a path with no default.
pub const CONFIG_KEYS: [(&str, &str, &str); 20] = [
    ("trades", "-", "trade log CSV (timestamp,currency,volume_btc,price)"),
    ("oer", "-", "official exchange rates CSV (date,currency,rate)"),
    ("market_bars", "-", "BTC/USD bars CSV (timestamp,price_usd); optional"),
    ("blockchain", "-", "daily blockchain metrics CSV; optional"),
    ("areaer_flags", "-", "AREAER control flags CSV; optional, needs areaer_regimes"),
    ("areaer_regimes", "-", "AREAER regime CSV; optional, needs areaer_flags"),
    ("remittance", "-", "remittance cost quotes CSV; optional"),
    ("freedom", "-", "financial freedom scores CSV; optional"),
    ("registry", "-", "currency registry (codes separated by commas or whitespace); built-in list if unset"),
    ("panel", "<out>/panel.csv", "panel read by summary, regress and var"),
    ("synth_spec", "-", "DGP spec for synth; built-in defaults if unset"),
    ("out", "out", "output directory"),
    ("ratio_lower", "0.85", "lower bound of the weighted/median price ratio"),
    ("ratio_upper", "1.08", "upper bound of the weighted/median price ratio"),
    ("delta", "0.7", "capital-control threshold; regress and var recompute the constrained flag when set"),
    ("time_fe", "model", "time effects: model (each model's own), none, biweek or month"),
    ("weekly_aggregation", "mean", "weekly premium: mean or volume (BTC volume weighted)"),
    ("oer_fill_days", "5", "days an official rate is carried forward"),
    ("rejection_threshold", "0.01", "largest tolerated share of rejected rows per input"),
    ("seed", "42", "seed for synth; overrides the spec's seed when set"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Directory relative paths are resolved against.
    pub base: PathBuf,
    pub trades: Option<PathBuf>,
    pub oer: Option<PathBuf>,
    pub market_bars: Option<PathBuf>,
    pub blockchain: Option<PathBuf>,
    pub areaer_flags: Option<PathBuf>,
    pub areaer_regimes: Option<PathBuf>,
    pub remittance: Option<PathBuf>,
    pub freedom: Option<PathBuf>,
    pub registry: Option<PathBuf>,
    pub panel: Option<PathBuf>,
    pub synth_spec: Option<PathBuf>,
    pub out: PathBuf,
    pub ratio_lower: f64,
    pub ratio_upper: f64,
    /// Capital-control threshold; `None` means the default 0.7 for `build`
    /// and the panel's own constrained flags for `regress` and `var`.
    pub delta: Option<f64>,
    /// `None` keeps each model's own time effects.
    pub time_fe: Option<TimeFe>,
    pub weekly_aggregation: WeeklyAggregation,
    pub oer_fill_days: i64,
    pub rejection_threshold: f64,
    /// `None` keeps the seed of the DGP spec.
    pub seed: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            base: PathBuf::from("."),
            trades: None,
            oer: None,
            market_bars: None,
            blockchain: None,
            areaer_flags: None,
            areaer_regimes: None,
            remittance: None,
            freedom: None,
            registry: None,
            panel: None,
            synth_spec: None,
            out: PathBuf::from("out"),
            ratio_lower: 0.85,
            ratio_upper: 1.08,
            delta: None,
            time_fe: None,
            weekly_aggregation: WeeklyAggregation::Mean,
            oer_fill_days: 5,
            rejection_threshold: 0.01,
            seed: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("line {line}: bad value `{value}` for `{key}`")))
}

pub fn parse_time_fe(value: &str) -> Result<Option<TimeFe>> {
    match value {
        "model" | "default" => Ok(None),
        other => other
            .parse::<TimeFe>()
            .map(Some)
            .map_err(|_| CliError::Config(format!("time_fe must be model, none, biweek or month, got `{other}`"))),
    }
}

impl RunConfig {
    /// Parses config text; `base` anchors relative paths.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = RunConfig { base: base.to_path_buf(), ..RunConfig::default() };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {line}: expected `key = value`")))?;
            let (key, value) = (key.trim(), value.trim());
            let path = || Some(PathBuf::from(value));
            match key {
                "trades" => cfg.trades = path(),
                "oer" => cfg.oer = path(),
                "market_bars" => cfg.market_bars = path(),
                "blockchain" => cfg.blockchain = path(),
                "areaer_flags" => cfg.areaer_flags = path(),
                "areaer_regimes" => cfg.areaer_regimes = path(),
                "remittance" => cfg.remittance = path(),
                "freedom" => cfg.freedom = path(),
                "registry" => cfg.registry = path(),
                "panel" => cfg.panel = path(),
                "synth_spec" => cfg.synth_spec = path(),
                "out" => cfg.out = PathBuf::from(value),
                "ratio_lower" => cfg.ratio_lower = parse_num(line, key, value)?,
                "ratio_upper" => cfg.ratio_upper = parse_num(line, key, value)?,
                "delta" => cfg.delta = Some(parse_num(line, key, value)?),
                "time_fe" => cfg.time_fe = parse_time_fe(value)?,
                "weekly_aggregation" => {
                    cfg.weekly_aggregation = match value {
                        "mean" => WeeklyAggregation::Mean,
                        "volume" => WeeklyAggregation::VolumeWeighted,
                        other => {
                            return Err(CliError::Config(format!(
                                "line {line}: weekly_aggregation must be mean or volume, got `{other}`"
                            )))
                        }
                    }
                }
                "oer_fill_days" => cfg.oer_fill_days = parse_num(line, key, value)?,
                "rejection_threshold" => cfg.rejection_threshold = parse_num(line, key, value)?,
                "seed" => cfg.seed = Some(parse_num(line, key, value)?),
                other => return Err(CliError::Config(format!("line {line}: unknown key `{other}`"))),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    pub fn validate(&self) -> Result<()> {
        RatioBounds::new(self.ratio_lower, self.ratio_upper).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(d) = self.delta.filter(|d| !(0.0..=1.0).contains(d)) {
            return Err(CliError::Config(format!("delta {d} outside [0, 1]")));
        }
        if !(0.0..=1.0).contains(&self.rejection_threshold) {
            return Err(CliError::Config(format!("rejection_threshold {} outside [0, 1]", self.rejection_threshold)));
        }
        if self.oer_fill_days < 0 {
            return Err(CliError::Config("oer_fill_days must be nonnegative".into()));
        }
        if self.areaer_flags.is_some() != self.areaer_regimes.is_some() {
            return Err(CliError::Config("areaer_flags and areaer_regimes must be given together".into()));
        }
        Ok(())
    }

    /// `path` anchored at the config directory unless absolute.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base.join(path)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.out)
    }

    pub fn panel_path(&self) -> PathBuf {
        match &self.panel {
            Some(p) => self.resolve(p),
            None => self.out_dir().join("panel.csv"),
        }
    }

    pub fn ratio_bounds(&self) -> RatioBounds {
        RatioBounds::new(self.ratio_lower, self.ratio_upper).expect("validated bounds")
    }

    pub fn regulation(&self) -> RegulationConfig {
        let defaults = RegulationConfig::default();
        RegulationConfig { delta: self.delta.unwrap_or(defaults.delta), ..defaults }
    }

    pub fn panel_options(&self) -> PanelOptions {
        PanelOptions { aggregation: self.weekly_aggregation, oer_fill_days: self.oer_fill_days }
    }

    pub fn load_registry(&self) -> Result<CurrencyRegistry> {
        match &self.registry {
            None => Ok(CurrencyRegistry::new(
                DEFAULT_CURRENCIES.iter().map(|c| c.parse::<Currency>().expect("valid built-in code")),
            )),
            Some(p) => {
                let path = self.resolve(p);
                let file = fs::File::open(&path).map_err(|e| CliError::io(&path, e))?;
                CurrencyRegistry::from_reader(file)
                    .map_err(|source| CliError::Ingest { input: "registry".into(), source })
            }
        }
    }

    /// Canonical `key = value` listing of every setting except `out`, with
    /// paths as written in the config. Two runs with equal canonical forms
    /// are configured identically.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "-".into());
        let rows: [(&str, String); 19] = [
            ("trades", path(&self.trades)),
            ("oer", path(&self.oer)),
            ("market_bars", path(&self.market_bars)),
            ("blockchain", path(&self.blockchain)),
            ("areaer_flags", path(&self.areaer_flags)),
            ("areaer_regimes", path(&self.areaer_regimes)),
            ("remittance", path(&self.remittance)),
            ("freedom", path(&self.freedom)),
            ("registry", path(&self.registry)),
            ("panel", path(&self.panel)),
            ("synth_spec", path(&self.synth_spec)),
            ("ratio_lower", self.ratio_lower.to_string()),
            ("ratio_upper", self.ratio_upper.to_string()),
            ("delta", self.delta.map(|d| d.to_string()).unwrap_or_else(|| "-".into())),
            ("time_fe", self.time_fe.map(|t| t.to_string()).unwrap_or_else(|| "model".into())),
            (
                "weekly_aggregation",
                match self.weekly_aggregation {
                    WeeklyAggregation::Mean => "mean".into(),
                    WeeklyAggregation::VolumeWeighted => "volume".into(),
                },
            ),
            ("oer_fill_days", self.oer_fill_days.to_string()),
            ("rejection_threshold", self.rejection_threshold.to_string()),
            ("seed", self.seed.map(|s| s.to_string()).unwrap_or_else(|| "-".into())),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

/// Key list for `--help`.
pub fn config_help() -> String {
    let mut s = String::from("Config keys (key = value, # comments):\n");
    for (k, d, what) in CONFIG_KEYS {
        let _ = writeln!(s, "  {k:<20} default {d:<16} {what}");
    }
    s
}
