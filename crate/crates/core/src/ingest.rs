//! Parsers for the flat-file inputs.
//!
//! Every input kind is a CSV file with a fixed header. Rows that parse but
//! violate a record invariant are collected into a rejection report with
//! their line number; they are never dropped silently. Structural problems
//! (wrong header, unknown regime category, asset class out of range,
//! duplicate exchange-rate quotes, non-monotone bar timestamps) abort the
//! parse with an [`IngestError`].
//!
//! Floats are written back with Rust's shortest round-trip formatting, so
//! `parse(write(records)) == records` holds exactly.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Timelike, Utc};
use csv::StringRecord;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema error: expected header `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("schema error at line {line}: {reason}")]
    Schema { line: u64, reason: String },
    #[error("duplicate quote for {currency} on {date} at lines {first_line} and {second_line}")]
    DuplicateQuote {
        currency: Currency,
        date: NaiveDate,
        first_line: u64,
        second_line: u64,
    },
    #[error("timestamps not strictly increasing at line {line}")]
    Ordering { line: u64 },
    #[error("invalid currency registry: {0}")]
    Registry(String),
}

/// A row that could not be accepted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    pub line: u64,
    pub reason: String,
}

/// Accepted records plus the rejection report for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub rejections: Vec<Rejection>,
    /// Data rows that were accepted. Equals `records.len()` except for AREAER
    /// input, where many rows assemble into one record.
    pub accepted_rows: usize,
}

impl<T> Parsed<T> {
    pub fn input_rows(&self) -> usize {
        self.accepted_rows + self.rejections.len()
    }

    pub fn rejection_rate(&self) -> f64 {
        match self.input_rows() {
            0 => 0.0,
            n => self.rejections.len() as f64 / n as f64,
        }
    }
}

/// ISO-4217 currency code (three ASCII capitals).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Currency([u8; 3]);

impl Currency {
    pub const USD: Currency = Currency(*b"USD");

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.0).expect("currency codes are ASCII")
    }
}

impl FromStr for Currency {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let b = s.as_bytes();
        if b.len() == 3 && b.iter().all(u8::is_ascii_uppercase) {
            Ok(Currency([b[0], b[1], b[2]]))
        } else {
            Err(format!("invalid currency code `{s}`"))
        }
    }
}

impl fmt::Display for Currency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for Currency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Currency {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Currency {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The 81 currencies covered by default.
pub const DEFAULT_CURRENCIES: [&str; 81] = [
    "AED", "AOA", "ARS", "AUD", "BAM", "BDT", "BGN", "BOB", "BRL", "BYN", "CAD", "CHF", "CLP",
    "CNY", "COP", "CRC", "CZK", "DKK", "DOP", "EGP", "ETB", "EUR", "GBP", "GEL", "GHS", "GTQ",
    "HKD", "HNL", "HRK", "HUF", "IDR", "ILS", "INR", "IRR", "ISK", "JMD", "JOD", "JPY", "KES",
    "KRW", "KWD", "KZT", "LKR", "MAD", "MUR", "MWK", "MXN", "MYR", "NGN", "NOK", "NZD", "OMR",
    "PAB", "PEN", "PHP", "PKR", "PLN", "PYG", "QAR", "RON", "RSD", "RUB", "RWF", "SAR", "SEK",
    "SGD", "SZL", "THB", "TRY", "TTD", "TWD", "TZS", "UAH", "UGX", "USD", "UYU", "VND", "XAF",
    "XOF", "ZAR", "ZMW",
];

/// Set of currency codes accepted by [`parse_trades`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurrencyRegistry {
    codes: BTreeSet<Currency>,
}

impl Default for CurrencyRegistry {
    fn default() -> Self {
        Self::new(DEFAULT_CURRENCIES.iter().map(|c| c.parse().expect("valid default code")))
    }
}

impl CurrencyRegistry {
    pub fn new(codes: impl IntoIterator<Item = Currency>) -> Self {
        Self {
            codes: codes.into_iter().collect(),
        }
    }

    /// Reads a registry file: codes separated by whitespace or commas, `#`
    /// starts a comment.
    pub fn from_reader<R: Read>(mut source: R) -> Result<Self, IngestError> {
        let mut text = String::new();
        source.read_to_string(&mut text)?;
        let mut codes = BTreeSet::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("");
            for token in line.split(|c: char| c == ',' || c.is_whitespace()) {
                if token.is_empty() {
                    continue;
                }
                codes.insert(token.parse().map_err(IngestError::Registry)?);
            }
        }
        if codes.is_empty() {
            return Err(IngestError::Registry("registry lists no currencies".into()));
        }
        Ok(Self { codes })
    }

    pub fn contains(&self, c: Currency) -> bool {
        self.codes.contains(&c)
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Currency> + '_ {
        self.codes.iter().copied()
    }
}

// ---------------------------------------------------------------------------
// Record types
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trade {
    pub timestamp: DateTime<Utc>,
    pub currency: Currency,
    pub volume_btc: f64,
    pub price: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OerQuote {
    pub date: NaiveDate,
    pub currency: Currency,
    /// Currency units per USD.
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockchainMetrics {
    pub date: NaiveDate,
    pub median_confirm_minutes: f64,
    pub avg_fee_usd: f64,
    pub n_transactions: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketBar {
    pub timestamp: DateTime<Utc>,
    pub price_usd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemittanceQuote {
    pub date: NaiveDate,
    pub sending_currency: Currency,
    pub cost_pct_500: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreedomScore {
    pub year: i32,
    pub country: String,
    pub currency: Currency,
    pub score: f64,
}

/// De facto exchange-rate arrangement, ten subcategories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RegimeCategory {
    NoSeparateLegalTender,
    CurrencyBoard,
    ConventionalPeg,
    StabilizedArrangement,
    CrawlingPeg,
    CrawlLikeArrangement,
    PeggedWithinHorizontalBands,
    OtherManaged,
    Floating,
    FreeFloating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegimeGroup {
    HardPeg,
    SoftPeg,
    Floating,
    Residual,
}

impl RegimeCategory {
    pub const ALL: [RegimeCategory; 10] = [
        RegimeCategory::NoSeparateLegalTender,
        RegimeCategory::CurrencyBoard,
        RegimeCategory::ConventionalPeg,
        RegimeCategory::StabilizedArrangement,
        RegimeCategory::CrawlingPeg,
        RegimeCategory::CrawlLikeArrangement,
        RegimeCategory::PeggedWithinHorizontalBands,
        RegimeCategory::OtherManaged,
        RegimeCategory::Floating,
        RegimeCategory::FreeFloating,
    ];

    pub fn group(self) -> RegimeGroup {
        use RegimeCategory::*;
        match self {
            NoSeparateLegalTender | CurrencyBoard => RegimeGroup::HardPeg,
            ConventionalPeg
            | StabilizedArrangement
            | CrawlingPeg
            | CrawlLikeArrangement
            | PeggedWithinHorizontalBands => RegimeGroup::SoftPeg,
            Floating | FreeFloating => RegimeGroup::Floating,
            OtherManaged => RegimeGroup::Residual,
        }
    }

    pub fn as_str(self) -> &'static str {
        use RegimeCategory::*;
        match self {
            NoSeparateLegalTender => "no_separate_legal_tender",
            CurrencyBoard => "currency_board",
            ConventionalPeg => "conventional_peg",
            StabilizedArrangement => "stabilized_arrangement",
            CrawlingPeg => "crawling_peg",
            CrawlLikeArrangement => "crawl_like_arrangement",
            PeggedWithinHorizontalBands => "pegged_within_horizontal_bands",
            OtherManaged => "other_managed",
            Floating => "floating",
            FreeFloating => "free_floating",
        }
    }
}

impl FromStr for RegimeCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .chars()
            .map(|c| match c {
                ' ' | '-' => '_',
                c => c.to_ascii_lowercase(),
            })
            .collect();
        let alias = match norm.as_str() {
            "other_managed_arrangement" => "other_managed",
            "horizontal_bands" => "pegged_within_horizontal_bands",
            other => other,
        };
        RegimeCategory::ALL
            .into_iter()
            .find(|r| r.as_str() == alias)
            .ok_or_else(|| format!("unknown regime category `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Inflow,
    Outflow,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Inflow, Direction::Outflow];

    fn index(self) -> usize {
        match self {
            Direction::Inflow => 0,
            Direction::Outflow => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Inflow => "inflow",
            Direction::Outflow => "outflow",
        }
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inflow" | "in" => Ok(Direction::Inflow),
            "outflow" | "out" => Ok(Direction::Outflow),
            _ => Err(format!("unknown direction `{s}`")),
        }
    }
}

pub const ASSET_CLASSES: usize = 10;

/// Capital-control flags: direction × asset class × subcategory. `None`
/// marks a flag reported as missing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ControlMatrix {
    groups: [[Vec<Option<bool>>; ASSET_CLASSES]; 2],
}

impl ControlMatrix {
    /// Flags for one (direction, asset class) group; `asset_class` is 1-based.
    pub fn group(&self, direction: Direction, asset_class: usize) -> &[Option<bool>] {
        &self.groups[direction.index()][asset_class - 1]
    }

    /// Sets flag `subcategory` (1-based) of a group, growing the group with
    /// missing entries as needed.
    pub fn set(
        &mut self,
        direction: Direction,
        asset_class: usize,
        subcategory: usize,
        flag: Option<bool>,
    ) {
        let g = &mut self.groups[direction.index()][asset_class - 1];
        if g.len() < subcategory {
            g.resize(subcategory, None);
        }
        g[subcategory - 1] = flag;
    }

    pub fn from_groups(groups: [[Vec<Option<bool>>; ASSET_CLASSES]; 2]) -> Self {
        Self { groups }
    }

    pub fn is_empty(&self) -> bool {
        self.groups.iter().flatten().all(Vec::is_empty)
    }

    pub fn flag_count(&self) -> usize {
        self.groups.iter().flatten().map(Vec::len).sum()
    }

    pub fn missing_count(&self) -> usize {
        self.groups
            .iter()
            .flatten()
            .flatten()
            .filter(|f| f.is_none())
            .count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AreaerRecord {
    pub country: String,
    pub currency: Currency,
    pub effective_date: NaiveDate,
    pub regime: Option<RegimeCategory>,
    pub controls: ControlMatrix,
}

// ---------------------------------------------------------------------------
// Generic CSV plumbing
// ---------------------------------------------------------------------------

enum RowError {
    Reject(String),
    Fatal(String),
}

impl From<String> for RowError {
    fn from(s: String) -> Self {
        RowError::Reject(s)
    }
}

trait CsvRecord: Sized {
    const HEADER: &'static [&'static str];
    fn parse_row(rec: &StringRecord) -> Result<Self, RowError>;
    fn write_row(&self, out: &mut Vec<String>);
}

fn expect_header(found: &StringRecord, expected: &[&str]) -> Result<(), IngestError> {
    let names: Vec<&str> = found
        .iter()
        .map(|f| f.trim().trim_start_matches('\u{feff}'))
        .collect();
    if names != expected {
        return Err(IngestError::Header {
            expected: expected.join(","),
            found: names.join(","),
        });
    }
    Ok(())
}

/// Reads every data row, returning accepted rows with their line numbers.
fn read_rows<T: CsvRecord, R: Read>(
    source: R,
) -> Result<(Vec<(u64, T)>, Vec<Rejection>), IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(source);
    let mut rec = StringRecord::new();
    if !rdr.read_record(&mut rec)? {
        return Err(IngestError::Header {
            expected: T::HEADER.join(","),
            found: String::new(),
        });
    }
    expect_header(&rec, T::HEADER)?;

    let mut rows = Vec::new();
    let mut rejections = Vec::new();
    while rdr.read_record(&mut rec)? {
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != T::HEADER.len() {
            rejections.push(Rejection {
                line,
                reason: format!("expected {} fields, found {}", T::HEADER.len(), rec.len()),
            });
            continue;
        }
        match T::parse_row(&rec) {
            Ok(row) => rows.push((line, row)),
            Err(RowError::Reject(reason)) => rejections.push(Rejection { line, reason }),
            Err(RowError::Fatal(reason)) => return Err(IngestError::Schema { line, reason }),
        }
    }
    Ok((rows, rejections))
}

fn write_rows<T: CsvRecord, W: Write>(sink: W, records: &[T]) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(sink);
    wtr.write_record(T::HEADER)?;
    let mut buf = Vec::with_capacity(T::HEADER.len());
    for r in records {
        buf.clear();
        r.write_row(&mut buf);
        wtr.write_record(&buf)?;
    }
    wtr.flush()?;
    Ok(())
}

fn field<'a>(rec: &'a StringRecord, i: usize) -> &'a str {
    rec.get(i).unwrap_or("").trim()
}

fn parse_f64(s: &str, name: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("unparseable {name} `{s}`"))?;
    if !v.is_finite() {
        return Err(format!("non-finite {name}"));
    }
    Ok(v)
}

fn parse_date(s: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| format!("invalid date `{s}`"))
}

pub(crate) fn parse_timestamp(s: &str) -> Result<DateTime<Utc>, String> {
    let ts = DateTime::parse_from_rfc3339(s).map_err(|_| format!("invalid timestamp `{s}`"))?;
    if ts.offset().local_minus_utc() != 0 {
        return Err(format!("timestamp `{s}` is not UTC"));
    }
    if ts.nanosecond() != 0 {
        return Err(format!("timestamp `{s}` has sub-second precision"));
    }
    Ok(ts.with_timezone(&Utc))
}

pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

fn parse_currency(s: &str) -> Result<Currency, String> {
    s.parse()
}

impl CsvRecord for Trade {
    const HEADER: &'static [&'static str] = &["timestamp", "currency", "volume_btc", "price"];

    fn parse_row(rec: &StringRecord) -> Result<Self, RowError> {
        let timestamp = parse_timestamp(field(rec, 0))?;
        let currency = parse_currency(field(rec, 1))?;
        let volume_btc = parse_f64(field(rec, 2), "volume")?;
        let price = parse_f64(field(rec, 3), "price")?;
        if volume_btc <= 0.0 {
            return Err(RowError::Reject("nonpositive volume".into()));
        }
        if price <= 0.0 {
            return Err(RowError::Reject("nonpositive price".into()));
        }
        Ok(Trade {
            timestamp,
            currency,
            volume_btc,
            price,
        })
    }

    fn write_row(&self, out: &mut Vec<String>) {
        out.push(format_timestamp(&self.timestamp));
        out.push(self.currency.to_string());
        out.push(self.volume_btc.to_string());
        out.push(self.price.to_string());
    }
}

impl CsvRecord for OerQuote {
    const HEADER: &'static [&'static str] = &["date", "currency", "rate"];

    fn parse_row(rec: &StringRecord) -> Result<Self, RowError> {
        let date = parse_date(field(rec, 0))?;
        let currency = parse_currency(field(rec, 1))?;
        let rate = parse_f64(field(rec, 2), "rate")?;
        if rate <= 0.0 {
            return Err(RowError::Reject("nonpositive rate".into()));
        }
        Ok(OerQuote {
            date,
            currency,
            rate,
        })
    }

    fn write_row(&self, out: &mut Vec<String>) {
        out.push(self.date.to_string());
        out.push(self.currency.to_string());
        out.push(self.rate.to_string());
    }
}

impl CsvRecord for RemittanceQuote {
    const HEADER: &'static [&'static str] = &["date", "currency", "cost_pct_500"];

    fn parse_row(rec: &StringRecord) -> Result<Self, RowError> {
        let date = parse_date(field(rec, 0))?;
        let sending_currency = parse_currency(field(rec, 1))?;
        let cost_pct_500 = parse_f64(field(rec, 2), "cost")?;
        if cost_pct_500 < 0.0 {
            return Err(RowError::Reject("negative cost".into()));
        }
        Ok(RemittanceQuote {
            date,
            sending_currency,
            cost_pct_500,
        })
    }

    fn write_row(&self, out: &mut Vec<String>) {
        out.push(self.date.to_string());
        out.push(self.sending_currency.to_string());
        out.push(self.cost_pct_500.to_string());
    }
}

impl CsvRecord for FreedomScore {
    const HEADER: &'static [&'static str] = &["year", "country", "currency", "score"];

    fn parse_row(rec: &StringRecord) -> Result<Self, RowError> {
        let year: i32 = field(rec, 0)
            .parse()
            .map_err(|_| format!("invalid year `{}`", field(rec, 0)))?;
        let country = field(rec, 1);
        if country.is_empty() {
            return Err(RowError::Reject("empty country".into()));
        }
        let currency = parse_currency(field(rec, 2))?;
        let score = parse_f64(field(rec, 3), "score")?;
        if !(0.0..=100.0).contains(&score) {
            return Err(RowError::Reject("score out of [0,100]".into()));
        }
        Ok(FreedomScore {
            year,
            country: country.to_string(),
            currency,
            score,
        })
    }

    fn write_row(&self, out: &mut Vec<String>) {
        out.push(self.year.to_string());
        out.push(self.country.clone());
        out.push(self.currency.to_string());
        out.push(self.score.to_string());
    }
}

impl CsvRecord for MarketBar {
    const HEADER: &'static [&'static str] = &["timestamp", "price_usd"];

    fn parse_row(rec: &StringRecord) -> Result<Self, RowError> {
        let timestamp = parse_timestamp(field(rec, 0))?;
        let price_usd = parse_f64(field(rec, 1), "price")?;
        if price_usd <= 0.0 {
            return Err(RowError::Reject("nonpositive price".into()));
        }
        Ok(MarketBar {
            timestamp,
            price_usd,
        })
    }

    fn write_row(&self, out: &mut Vec<String>) {
        out.push(format_timestamp(&self.timestamp));
        out.push(self.price_usd.to_string());
    }
}

impl CsvRecord for BlockchainMetrics {
    const HEADER: &'static [&'static str] = &[
        "date",
        "median_confirm_minutes",
        "avg_fee_usd",
        "n_transactions",
    ];

    fn parse_row(rec: &StringRecord) -> Result<Self, RowError> {
        let date = parse_date(field(rec, 0))?;
        let median_confirm_minutes = parse_f64(field(rec, 1), "confirmation time")?;
        let avg_fee_usd = parse_f64(field(rec, 2), "fee")?;
        let n_transactions: u64 = field(rec, 3)
            .parse()
            .map_err(|_| format!("invalid transaction count `{}`", field(rec, 3)))?;
        if median_confirm_minutes < 0.0 || avg_fee_usd < 0.0 {
            return Err(RowError::Reject("negative metric".into()));
        }
        Ok(BlockchainMetrics {
            date,
            median_confirm_minutes,
            avg_fee_usd,
            n_transactions,
        })
    }

    fn write_row(&self, out: &mut Vec<String>) {
        out.push(self.date.to_string());
        out.push(self.median_confirm_minutes.to_string());
        out.push(self.avg_fee_usd.to_string());
        out.push(self.n_transactions.to_string());
    }
}

struct FlagRow {
    country: String,
    currency: Currency,
    effective_date: NaiveDate,
    direction: Direction,
    asset_class: usize,
    subcategory: usize,
    flag: Option<bool>,
}

impl CsvRecord for FlagRow {
    const HEADER: &'static [&'static str] = &[
        "country",
        "currency",
        "effective_date",
        "direction",
        "asset_class",
        "subcategory",
        "flag",
    ];

    fn parse_row(rec: &StringRecord) -> Result<Self, RowError> {
        let country = field(rec, 0);
        if country.is_empty() {
            return Err(RowError::Reject("empty country".into()));
        }
        let currency = parse_currency(field(rec, 1))?;
        let effective_date = parse_date(field(rec, 2))?;
        let direction: Direction = field(rec, 3).parse()?;
        let asset_class: i64 = field(rec, 4)
            .parse()
            .map_err(|_| format!("invalid asset class `{}`", field(rec, 4)))?;
        if !(1..=ASSET_CLASSES as i64).contains(&asset_class) {
            return Err(RowError::Fatal(format!(
                "asset class {asset_class} outside 1..{ASSET_CLASSES}"
            )));
        }
        let subcategory: usize = match field(rec, 5).parse() {
            Ok(j) if j >= 1 => j,
            _ => return Err(RowError::Reject(format!("invalid subcategory `{}`", field(rec, 5)))),
        };
        let flag = match field(rec, 6) {
            "" => None,
            "0" => Some(false),
            "1" => Some(true),
            other => return Err(RowError::Reject(format!("invalid flag `{other}`"))),
        };
        Ok(FlagRow {
            country: country.to_string(),
            currency,
            effective_date,
            direction,
            asset_class: asset_class as usize,
            subcategory,
            flag,
        })
    }

    fn write_row(&self, out: &mut Vec<String>) {
        out.push(self.country.clone());
        out.push(self.currency.to_string());
        out.push(self.effective_date.to_string());
        out.push(self.direction.as_str().to_string());
        out.push(self.asset_class.to_string());
        out.push(self.subcategory.to_string());
        out.push(match self.flag {
            None => String::new(),
            Some(true) => "1".into(),
            Some(false) => "0".into(),
        });
    }
}

struct RegimeRow {
    country: String,
    currency: Currency,
    effective_date: NaiveDate,
    regime: RegimeCategory,
}

impl CsvRecord for RegimeRow {
    const HEADER: &'static [&'static str] = &["country", "currency", "effective_date", "regime"];

    fn parse_row(rec: &StringRecord) -> Result<Self, RowError> {
        let country = field(rec, 0);
        if country.is_empty() {
            return Err(RowError::Reject("empty country".into()));
        }
        let currency = parse_currency(field(rec, 1))?;
        let effective_date = parse_date(field(rec, 2))?;
        let regime = field(rec, 3).parse().map_err(RowError::Fatal)?;
        Ok(RegimeRow {
            country: country.to_string(),
            currency,
            effective_date,
            regime,
        })
    }

    fn write_row(&self, out: &mut Vec<String>) {
        out.push(self.country.clone());
        out.push(self.currency.to_string());
        out.push(self.effective_date.to_string());
        out.push(self.regime.as_str().to_string());
    }
}

fn finish<T>(rows: Vec<(u64, T)>, rejections: Vec<Rejection>) -> Parsed<T> {
    let records: Vec<T> = rows.into_iter().map(|(_, r)| r).collect();
    Parsed {
        accepted_rows: records.len(),
        records,
        rejections,
    }
}

// ---------------------------------------------------------------------------
// Public parsers
// ---------------------------------------------------------------------------

/// Parses a trade log (`timestamp,currency,volume_btc,price`). Trades in
/// currencies outside `registry` are rejected.
pub fn parse_trades<R: Read>(
    source: R,
    registry: &CurrencyRegistry,
) -> Result<Parsed<Trade>, IngestError> {
    let (rows, mut rejections) = read_rows::<Trade, _>(source)?;
    let mut accepted = Vec::with_capacity(rows.len());
    for (line, t) in rows {
        if registry.contains(t.currency) {
            accepted.push((line, t));
        } else {
            rejections.push(Rejection {
                line,
                reason: format!("unknown currency {}", t.currency),
            });
        }
    }
    rejections.sort_by_key(|r| r.line);
    Ok(finish(accepted, rejections))
}

/// Parses official exchange-rate quotes. A second quote for the same
/// (currency, date) is a hard error naming both lines.
pub fn parse_oer<R: Read>(source: R) -> Result<Parsed<OerQuote>, IngestError> {
    let (rows, rejections) = read_rows::<OerQuote, _>(source)?;
    let mut seen: HashMap<(Currency, NaiveDate), u64> = HashMap::with_capacity(rows.len());
    for (line, q) in &rows {
        if let Some(first) = seen.insert((q.currency, q.date), *line) {
            return Err(IngestError::DuplicateQuote {
                currency: q.currency,
                date: q.date,
                first_line: first,
                second_line: *line,
            });
        }
    }
    Ok(finish(rows, rejections))
}

pub fn parse_remittance<R: Read>(source: R) -> Result<Parsed<RemittanceQuote>, IngestError> {
    let (rows, rejections) = read_rows::<RemittanceQuote, _>(source)?;
    Ok(finish(rows, rejections))
}

pub fn parse_freedom<R: Read>(source: R) -> Result<Parsed<FreedomScore>, IngestError> {
    let (rows, rejections) = read_rows::<FreedomScore, _>(source)?;
    Ok(finish(rows, rejections))
}

/// Parses 5-minute exchange bars. Timestamps must be strictly increasing;
/// the first violation aborts with its line number.
pub fn parse_market_bars<R: Read>(source: R) -> Result<Parsed<MarketBar>, IngestError> {
    let (rows, rejections) = read_rows::<MarketBar, _>(source)?;
    for pair in rows.windows(2) {
        if pair[1].1.timestamp <= pair[0].1.timestamp {
            return Err(IngestError::Ordering { line: pair[1].0 });
        }
    }
    Ok(finish(rows, rejections))
}

/// Parses daily blockchain metrics; a repeated date is rejected.
pub fn parse_blockchain<R: Read>(source: R) -> Result<Parsed<BlockchainMetrics>, IngestError> {
    let (rows, mut rejections) = read_rows::<BlockchainMetrics, _>(source)?;
    let mut seen: HashMap<NaiveDate, u64> = HashMap::new();
    let mut accepted = Vec::with_capacity(rows.len());
    for (line, m) in rows {
        match seen.get(&m.date) {
            Some(first) => rejections.push(Rejection {
                line,
                reason: format!("duplicate date {} (first at line {first})", m.date),
            }),
            None => {
                seen.insert(m.date, line);
                accepted.push((line, m));
            }
        }
    }
    rejections.sort_by_key(|r| r.line);
    Ok(finish(accepted, rejections))
}

#[derive(Default)]
struct RecordBuilder {
    currency: Option<(Currency, u64)>,
    regime: Option<(RegimeCategory, u64)>,
    controls: ControlMatrix,
    written: BTreeMap<(Direction, usize, usize), u64>,
}

impl RecordBuilder {
    fn check_currency(&mut self, currency: Currency, line: u64) -> Result<(), IngestError> {
        match self.currency {
            None => {
                self.currency = Some((currency, line));
                Ok(())
            }
            Some((c, _)) if c == currency => Ok(()),
            Some((c, first)) => Err(IngestError::Schema {
                line,
                reason: format!("currency {currency} conflicts with {c} at line {first}"),
            }),
        }
    }
}

/// Assembles AREAER flag rows and regime rows into one record per
/// (country, effective date). Missing flags stay missing. Flag-file
/// rejections are reported with a `flags:` prefix, regime-file ones with
/// `regime:`.
pub fn parse_areaer<R1: Read, R2: Read>(
    flags: R1,
    regimes: R2,
) -> Result<Parsed<AreaerRecord>, IngestError> {
    let (flag_rows, flag_rej) = read_rows::<FlagRow, _>(flags)?;
    let (regime_rows, regime_rej) = read_rows::<RegimeRow, _>(regimes)?;
    let accepted_rows = flag_rows.len() + regime_rows.len();

    let mut builders: BTreeMap<(String, NaiveDate), RecordBuilder> = BTreeMap::new();
    for (line, row) in flag_rows {
        let b = builders
            .entry((row.country.clone(), row.effective_date))
            .or_default();
        b.check_currency(row.currency, line)?;
        let key = (row.direction, row.asset_class, row.subcategory);
        if let Some(first) = b.written.insert(key, line) {
            return Err(IngestError::Schema {
                line,
                reason: format!("duplicate flag (first at line {first})"),
            });
        }
        b.controls
            .set(row.direction, row.asset_class, row.subcategory, row.flag);
    }
    for (line, row) in regime_rows {
        let b = builders
            .entry((row.country.clone(), row.effective_date))
            .or_default();
        b.check_currency(row.currency, line)?;
        if let Some((_, first)) = b.regime {
            return Err(IngestError::Schema {
                line,
                reason: format!("duplicate regime row (first at line {first})"),
            });
        }
        b.regime = Some((row.regime, line));
    }

    let records = builders
        .into_iter()
        .map(|((country, effective_date), b)| AreaerRecord {
            country,
            currency: b.currency.expect("builder has at least one row").0,
            effective_date,
            regime: b.regime.map(|(r, _)| r),
            controls: b.controls,
        })
        .collect();

    let rejections = flag_rej
        .into_iter()
        .map(|r| Rejection {
            line: r.line,
            reason: format!("flags: {}", r.reason),
        })
        .chain(regime_rej.into_iter().map(|r| Rejection {
            line: r.line,
            reason: format!("regime: {}", r.reason),
        }))
        .collect();
    Ok(Parsed {
        records,
        rejections,
        accepted_rows,
    })
}

// ---------------------------------------------------------------------------
// Writers
// ---------------------------------------------------------------------------

pub fn write_trades<W: Write>(sink: W, records: &[Trade]) -> Result<(), IngestError> {
    write_rows(sink, records)
}

pub fn write_oer<W: Write>(sink: W, records: &[OerQuote]) -> Result<(), IngestError> {
    write_rows(sink, records)
}

pub fn write_remittance<W: Write>(sink: W, records: &[RemittanceQuote]) -> Result<(), IngestError> {
    write_rows(sink, records)
}

pub fn write_freedom<W: Write>(sink: W, records: &[FreedomScore]) -> Result<(), IngestError> {
    write_rows(sink, records)
}

pub fn write_market_bars<W: Write>(sink: W, records: &[MarketBar]) -> Result<(), IngestError> {
    write_rows(sink, records)
}

pub fn write_blockchain<W: Write>(
    sink: W,
    records: &[BlockchainMetrics],
) -> Result<(), IngestError> {
    write_rows(sink, records)
}

/// Writes AREAER records back to the flag and regime schemas.
pub fn write_areaer<W1: Write, W2: Write>(
    flags: W1,
    regimes: W2,
    records: &[AreaerRecord],
) -> Result<(), IngestError> {
    let mut flag_rows = Vec::new();
    let mut regime_rows = Vec::new();
    for r in records {
        for direction in Direction::BOTH {
            for class in 1..=ASSET_CLASSES {
                for (j, flag) in r.controls.group(direction, class).iter().enumerate() {
                    flag_rows.push(FlagRow {
                        country: r.country.clone(),
                        currency: r.currency,
                        effective_date: r.effective_date,
                        direction,
                        asset_class: class,
                        subcategory: j + 1,
                        flag: *flag,
                    });
                }
            }
        }
        if let Some(regime) = r.regime {
            regime_rows.push(RegimeRow {
                country: r.country.clone(),
                currency: r.currency,
                effective_date: r.effective_date,
                regime,
            });
        }
    }
    write_rows(flags, &flag_rows)?;
    write_rows(regimes, &regime_rows)
}
