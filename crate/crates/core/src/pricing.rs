//! Daily BTC prices, shadow exchange rates, premiums and the weekly panel.
//!
//! Trades are bucketed by (currency, UTC date). Each bucket gets a
//! volume-weighted price and the median trade price; when the ratio of the
//! two leaves the configured band the median replaces the weighted price.
//! Within a bucket sums run in input (file) order, so parallel and sequential
//! evaluation agree bit for bit.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use chrono::{DateTime, Duration, DurationRound, NaiveDate, Utc};
use rayon::prelude::*;
use thiserror::Error;

use crate::calendar::WeekId;
use crate::ingest::{BlockchainMetrics, Currency, MarketBar, OerQuote, Trade};
use crate::regulation::RegulatorySeries;

#[derive(Debug, Error, PartialEq)]
pub enum PricingError {
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid ratio bounds [{lower}, {upper}]: need lower < 1 < upper")]
    Bounds { lower: f64, upper: f64 },
}

/// Band for the weighted/median ratio outside of which the median price is
/// used instead of the volume-weighted price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioBounds {
    pub lower: f64,
    pub upper: f64,
}

impl Default for RatioBounds {
    fn default() -> Self {
        Self {
            lower: 0.85,
            upper: 1.08,
        }
    }
}

impl RatioBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self, PricingError> {
        if !(lower < 1.0 && 1.0 < upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(PricingError::Bounds { lower, upper });
        }
        Ok(Self { lower, upper })
    }

    pub fn outside(&self, ratio: f64) -> bool {
        ratio < self.lower || ratio > self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailyPrice {
    pub date: NaiveDate,
    pub currency: Currency,
    pub vw_price: f64,
    pub median_price: f64,
    /// The price used downstream: `median_price` if `corrected`, else `vw_price`.
    pub price: f64,
    pub n_trades: usize,
    pub volume_btc: f64,
    pub corrected: bool,
}

impl DailyPrice {
    pub fn ratio(&self) -> f64 {
        self.vw_price / self.median_price
    }
}

/// Lower-middle median: for an even count the smaller of the two middle
/// elements, so the result is always an observed price.
pub fn lower_median(prices: &mut [f64]) -> f64 {
    prices.sort_by(f64::total_cmp);
    prices[(prices.len() - 1) / 2]
}

/// Aggregates one bucket given `(volume, price)` pairs in file order.
fn aggregate_bucket(
    date: NaiveDate,
    currency: Currency,
    trades: &[(f64, f64)],
    bounds: RatioBounds,
) -> DailyPrice {
    let mut weighted = 0.0;
    let mut volume = 0.0;
    for &(x, p) in trades {
        weighted += x * p;
        volume += x;
    }
    let vw_price = weighted / volume;
    let mut prices: Vec<f64> = trades.iter().map(|&(_, p)| p).collect();
    let median_price = lower_median(&mut prices);
    let corrected = bounds.outside(vw_price / median_price);
    DailyPrice {
        date,
        currency,
        vw_price,
        median_price,
        price: if corrected { median_price } else { vw_price },
        n_trades: trades.len(),
        volume_btc: volume,
        corrected,
    }
}

/// Daily prices per (currency, UTC date), sorted by currency then date.
/// Buckets without trades produce no row.
pub fn aggregate_daily(trades: &[Trade], bounds: RatioBounds) -> Vec<DailyPrice> {
    let mut buckets: HashMap<(Currency, NaiveDate), Vec<(f64, f64)>> = HashMap::new();
    for t in trades {
        buckets
            .entry((t.currency, t.timestamp.date_naive()))
            .or_default()
            .push((t.volume_btc, t.price));
    }
    let mut keyed: Vec<_> = buckets.into_iter().collect();
    keyed.sort_unstable_by_key(|(k, _)| *k);
    keyed
        .par_iter()
        .map(|((c, d), v)| aggregate_bucket(*d, *c, v, bounds))
        .collect()
}

/// Recomputes the ratio band as empirical quantiles (linear interpolation
/// between order statistics) of the pooled weighted/median ratio.
pub fn quantile_bounds(daily: &[DailyPrice], lower_q: f64, upper_q: f64) -> Option<(f64, f64)> {
    if daily.is_empty() {
        return None;
    }
    let mut ratios: Vec<f64> = daily.iter().map(DailyPrice::ratio).collect();
    ratios.sort_by(f64::total_cmp);
    Some((quantile_sorted(&ratios, lower_q), quantile_sorted(&ratios, upper_q)))
}

pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Shadow rate: currency units per USD implied by the two BTC prices.
pub fn shadow_rate(p_c: &DailyPrice, p_usd: &DailyPrice) -> Result<f64, PricingError> {
    if p_usd.currency != Currency::USD {
        return Err(PricingError::Alignment(format!(
            "reference price is in {}, not USD",
            p_usd.currency
        )));
    }
    if p_c.date != p_usd.date {
        return Err(PricingError::Alignment(format!(
            "{} price dated {} but USD price dated {}",
            p_c.currency, p_c.date, p_usd.date
        )));
    }
    Ok(p_c.price / p_usd.price)
}

/// Percentage premium of the shadow rate over the official rate.
pub fn premium(ser: f64, oer: f64) -> Result<f64, PricingError> {
    if !(oer > 0.0) {
        return Err(PricingError::Domain(format!("official rate {oer} is not positive")));
    }
    Ok(100.0 * (ser - oer) / oer)
}

/// Percentage change of a rate over a period.
pub fn depreciation(open_rate: f64, close_rate: f64) -> Result<f64, PricingError> {
    if !(open_rate > 0.0) {
        return Err(PricingError::Domain(format!("opening rate {open_rate} is not positive")));
    }
    Ok(100.0 * (close_rate - open_rate) / open_rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Hour,
    Week,
}

impl Horizon {
    fn bucket_start(self, ts: DateTime<Utc>) -> DateTime<Utc> {
        match self {
            Horizon::Hour => ts.duration_trunc(Duration::hours(1)).expect("hour truncation"),
            Horizon::Week => WeekId::of(ts.date_naive())
                .monday()
                .and_hms_opt(0, 0, 0)
                .expect("midnight")
                .and_utc(),
        }
    }

    fn length(self) -> Duration {
        match self {
            Horizon::Hour => Duration::hours(1),
            Horizon::Week => Duration::weeks(1),
        }
    }
}

/// Log return per horizon bucket, keyed by bucket start.
///
/// A bucket is the closed interval `[start, start + length]`: the opening
/// price is the first bar at or after `start` and the closing price is the
/// bar stamped exactly at the next bucket's start when present, else the last
/// bar inside the bucket. With a gap-free grid, hourly returns therefore
/// telescope to the weekly return. Buckets without a bar starting in them are
/// absent. `bars` must be sorted by timestamp.
pub fn market_return(bars: &[MarketBar], horizon: Horizon) -> BTreeMap<DateTime<Utc>, f64> {
    let mut out = BTreeMap::new();
    let mut i = 0;
    while i < bars.len() {
        let start = horizon.bucket_start(bars[i].timestamp);
        let end = start + horizon.length();
        let open = bars[i].price_usd;
        let mut j = i;
        while j + 1 < bars.len() && bars[j + 1].timestamp < end {
            j += 1;
        }
        let close = match bars.get(j + 1) {
            Some(b) if b.timestamp == end => b.price_usd,
            _ => bars[j].price_usd,
        };
        out.insert(start, (close / open).ln());
        i = j + 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizedVolatility {
    pub value: f64,
    /// No returns were available; `value` is 0.
    pub empty: bool,
}

/// Sum of squared returns.
pub fn realized_volatility(returns: &[f64]) -> RealizedVolatility {
    RealizedVolatility {
        value: returns.iter().map(|r| r * r).sum(),
        empty: returns.is_empty(),
    }
}

/// Weekly log returns from the bars.
pub fn weekly_returns(bars: &[MarketBar]) -> BTreeMap<WeekId, f64> {
    market_return(bars, Horizon::Week)
        .into_iter()
        .map(|(ts, r)| (WeekId::of(ts.date_naive()), r))
        .collect()
}

/// Weekly realized volatility from hourly log returns.
pub fn weekly_volatility(bars: &[MarketBar]) -> BTreeMap<WeekId, RealizedVolatility> {
    let mut by_week: BTreeMap<WeekId, Vec<f64>> = BTreeMap::new();
    for (ts, r) in market_return(bars, Horizon::Hour) {
        by_week.entry(WeekId::of(ts.date_naive())).or_default().push(r);
    }
    by_week
        .into_iter()
        .map(|(w, rs)| (w, realized_volatility(&rs)))
        .collect()
}

/// One day of the shadow-rate series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    pub date: NaiveDate,
    pub currency: Currency,
    pub ser: f64,
    pub oer: f64,
    pub premium_pct: f64,
}

/// Official rates per currency with forward fill over a bounded horizon.
#[derive(Debug, Clone, Default)]
pub struct OerTable {
    quotes: HashMap<Currency, BTreeMap<NaiveDate, f64>>,
    fill_days: i64,
}

impl OerTable {
    pub fn new(quotes: &[OerQuote], fill_days: i64) -> Self {
        let mut map: HashMap<Currency, BTreeMap<NaiveDate, f64>> = HashMap::new();
        for q in quotes {
            map.entry(q.currency).or_default().insert(q.date, q.rate);
        }
        Self {
            quotes: map,
            fill_days,
        }
    }

    pub fn has_currency(&self, c: Currency) -> bool {
        c == Currency::USD || self.quotes.contains_key(&c)
    }

    /// Rate on `date`, or the latest quote at most `fill_days` earlier. USD is
    /// identically 1.
    pub fn filled(&self, c: Currency, date: NaiveDate) -> Option<f64> {
        if c == Currency::USD {
            return Some(1.0);
        }
        let series = self.quotes.get(&c)?;
        let (d, rate) = series.range(..=date).next_back()?;
        ((date - *d).num_days() <= self.fill_days).then_some(*rate)
    }
}

/// Daily shadow rates and premiums for every non-USD currency. Days lacking
/// a USD price or a filled official rate produce no point.
pub fn shadow_series(
    daily: &[DailyPrice],
    oer: &OerTable,
    report: &mut Vec<String>,
) -> Vec<SeriesPoint> {
    let usd: HashMap<NaiveDate, &DailyPrice> = daily
        .iter()
        .filter(|p| p.currency == Currency::USD)
        .map(|p| (p.date, p))
        .collect();
    let mut excluded: BTreeMap<Currency, usize> = BTreeMap::new();
    let mut no_usd = 0usize;
    let mut no_oer = 0usize;
    let mut out = Vec::with_capacity(daily.len());
    for p in daily {
        if p.currency == Currency::USD {
            continue;
        }
        if !oer.has_currency(p.currency) {
            *excluded.entry(p.currency).or_default() += 1;
            continue;
        }
        let Some(p_usd) = usd.get(&p.date) else {
            no_usd += 1;
            continue;
        };
        let Some(rate) = oer.filled(p.currency, p.date) else {
            no_oer += 1;
            continue;
        };
        let ser = shadow_rate(p, p_usd).expect("aligned by construction");
        let premium_pct = premium(ser, rate).expect("rates are positive");
        out.push(SeriesPoint {
            date: p.date,
            currency: p.currency,
            ser,
            oer: rate,
            premium_pct,
        });
    }
    for (c, n) in excluded {
        report.push(format!("currency {c} absent from official rates: excluded ({n} days)"));
    }
    if no_usd > 0 {
        report.push(format!("{no_usd} currency-days without a USD price on the same date"));
    }
    if no_oer > 0 {
        report.push(format!("{no_oer} currency-days without an official rate within the fill horizon"));
    }
    out
}

/// How daily premiums combine into the weekly value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeeklyAggregation {
    #[default]
    Mean,
    VolumeWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelOptions {
    pub aggregation: WeeklyAggregation,
    pub oer_fill_days: i64,
}

impl Default for PanelOptions {
    fn default() -> Self {
        Self {
            aggregation: WeeklyAggregation::Mean,
            oer_fill_days: 5,
        }
    }
}

/// One (currency, week) observation of the analysis panel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeeklyPanelRow {
    pub week: WeekId,
    pub currency: Currency,
    pub premium_pct: f64,
    pub depr_pct: Option<f64>,
    pub btc_return: Option<f64>,
    pub btc_volatility: Option<f64>,
    pub median_confirm_minutes: Option<f64>,
    pub avg_fee_usd: Option<f64>,
    pub n_transactions: Option<f64>,
    pub remittance_cost_pct: Option<f64>,
    pub peg: Option<u8>,
    pub cc: Option<f64>,
    pub constrained: Option<u8>,
    pub freedom_score: Option<f64>,
}

impl WeeklyPanelRow {
    pub fn new(week: WeekId, currency: Currency, premium_pct: f64) -> Self {
        Self {
            week,
            currency,
            premium_pct,
            depr_pct: None,
            btc_return: None,
            btc_volatility: None,
            median_confirm_minutes: None,
            avg_fee_usd: None,
            n_transactions: None,
            remittance_cost_pct: None,
            peg: None,
            cc: None,
            constrained: None,
            freedom_score: None,
        }
    }
}

pub struct PanelInputs<'a> {
    pub daily: &'a [DailyPrice],
    pub oer: &'a [OerQuote],
    pub bars: &'a [MarketBar],
    pub blockchain: &'a [BlockchainMetrics],
    pub regulatory: &'a [RegulatorySeries],
}

#[derive(Debug, Clone, Default)]
pub struct PanelBuild {
    pub series: Vec<SeriesPoint>,
    pub rows: Vec<WeeklyPanelRow>,
    pub report: Vec<String>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

/// Latest value of `get` within the week, scanning Sunday back to Monday.
fn sample_week<T>(
    days: &BTreeMap<NaiveDate, &RegulatorySeries>,
    week: WeekId,
    get: impl Fn(&RegulatorySeries) -> Option<T>,
) -> Option<T> {
    days.range(week.monday()..=week.sunday())
        .rev()
        .find_map(|(_, r)| get(r))
}

/// Joins daily premiums with the exogenous series into one row per
/// (currency, week) with at least one premium observation.
///
/// Weekly premium is the mean of the week's daily premiums (or their BTC
/// volume-weighted mean); depreciation runs from the first to the last
/// filled official rate in the week; blockchain metrics are weekly means of
/// daily values; regulatory indices take the latest daily value in the week.
pub fn build_weekly_panel(inputs: &PanelInputs<'_>, opts: PanelOptions) -> PanelBuild {
    let mut report = Vec::new();
    let oer = OerTable::new(inputs.oer, opts.oer_fill_days);
    let series = shadow_series(inputs.daily, &oer, &mut report);

    let volume: HashMap<(Currency, NaiveDate), f64> = inputs
        .daily
        .iter()
        .map(|p| ((p.currency, p.date), p.volume_btc))
        .collect();

    let mut groups: BTreeMap<(Currency, WeekId), Vec<&SeriesPoint>> = BTreeMap::new();
    for s in &series {
        groups.entry((s.currency, WeekId::of(s.date))).or_default().push(s);
    }

    let returns = weekly_returns(inputs.bars);
    let vols = weekly_volatility(inputs.bars);

    let mut chain: BTreeMap<WeekId, Vec<&BlockchainMetrics>> = BTreeMap::new();
    for m in inputs.blockchain {
        chain.entry(WeekId::of(m.date)).or_default().push(m);
    }

    let mut reg: HashMap<Currency, BTreeMap<NaiveDate, &RegulatorySeries>> = HashMap::new();
    for r in inputs.regulatory {
        reg.entry(r.currency).or_default().insert(r.date, r);
    }
    let empty = BTreeMap::new();

    let rows = groups
        .into_iter()
        .map(|((currency, week), points)| {
            let premium_pct = match opts.aggregation {
                WeeklyAggregation::Mean => mean(points.iter().map(|p| p.premium_pct)),
                WeeklyAggregation::VolumeWeighted => {
                    let (mut num, mut den) = (0.0, 0.0);
                    for p in &points {
                        let v = volume[&(p.currency, p.date)];
                        num += v * p.premium_pct;
                        den += v;
                    }
                    Some(num / den)
                }
            }
            .expect("week has at least one point");

            let filled: Vec<f64> = week.days().filter_map(|d| oer.filled(currency, d)).collect();
            let depr_pct = match (filled.first(), filled.last()) {
                (Some(&open), Some(&close)) => depreciation(open, close).ok(),
                _ => None,
            };

            let metrics = chain.get(&week);
            let chain_mean = |f: fn(&BlockchainMetrics) -> f64| {
                metrics.and_then(|ms| mean(ms.iter().map(|m| f(m))))
            };

            let days = reg.get(&currency).unwrap_or(&empty);
            WeeklyPanelRow {
                week,
                currency,
                premium_pct,
                depr_pct,
                btc_return: returns.get(&week).copied(),
                btc_volatility: vols.get(&week).map(|v| v.value),
                median_confirm_minutes: chain_mean(|m| m.median_confirm_minutes),
                avg_fee_usd: chain_mean(|m| m.avg_fee_usd),
                n_transactions: chain_mean(|m| m.n_transactions as f64),
                remittance_cost_pct: sample_week(days, week, |r| r.remittance_cost_pct),
                peg: sample_week(days, week, |r| r.peg),
                cc: sample_week(days, week, |r| r.cc),
                constrained: sample_week(days, week, |r| r.constrained),
                freedom_score: sample_week(days, week, |r| r.freedom_score),
            }
        })
        .collect();

    PanelBuild {
        series,
        rows,
        report,
    }
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

pub const DAILY_HEADER: [&str; 8] = [
    "date",
    "currency",
    "vw_price",
    "median_price",
    "price",
    "n_trades",
    "volume_btc",
    "corrected",
];

pub const SERIES_HEADER: [&str; 5] = ["date", "currency", "ser", "oer", "premium_pct"];

pub const PANEL_HEADER: [&str; 14] = [
    "week",
    "currency",
    "premium_pct",
    "depr_pct",
    "btc_return",
    "btc_volatility",
    "median_confirm_minutes",
    "avg_fee_usd",
    "n_transactions",
    "remittance_cost_pct",
    "peg",
    "cc",
    "constrained",
    "freedom_score",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_daily_prices<W: Write>(sink: W, rows: &[DailyPrice]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(DAILY_HEADER)?;
    for p in rows {
        w.write_record([
            p.date.to_string(),
            p.currency.to_string(),
            p.vw_price.to_string(),
            p.median_price.to_string(),
            p.price.to_string(),
            p.n_trades.to_string(),
            p.volume_btc.to_string(),
            (p.corrected as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_series<W: Write>(sink: W, rows: &[SeriesPoint]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(SERIES_HEADER)?;
    for s in rows {
        w.write_record([
            s.date.to_string(),
            s.currency.to_string(),
            s.ser.to_string(),
            s.oer.to_string(),
            s.premium_pct.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_panel<W: Write>(sink: W, rows: &[WeeklyPanelRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(PANEL_HEADER)?;
    for r in rows {
        w.write_record([
            r.week.to_string(),
            r.currency.to_string(),
            r.premium_pct.to_string(),
            opt(r.depr_pct),
            opt(r.btc_return),
            opt(r.btc_volatility),
            opt(r.median_confirm_minutes),
            opt(r.avg_fee_usd),
            opt(r.n_transactions),
            opt(r.remittance_cost_pct),
            opt(r.peg),
            opt(r.cc),
            opt(r.constrained),
            opt(r.freedom_score),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Error)]
pub enum PanelReadError {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("panel header mismatch: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("line {line}: {reason}")]
    Row { line: u64, reason: String },
}

/// Reads a `panel.csv` written by [`write_panel`] (or a synthetic panel in
/// the same schema).
pub fn read_panel<R: Read>(source: R) -> Result<Vec<WeeklyPanelRow>, PanelReadError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != PANEL_HEADER {
        return Err(PanelReadError::Header {
            expected: PANEL_HEADER.join(","),
            found: header.join(","),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |reason: String| PanelReadError::Row { line, reason };
        let f = |i: usize| rec.get(i).unwrap_or("").trim();
        let num = |i: usize| -> Result<Option<f64>, PanelReadError> {
            match f(i) {
                "" => Ok(None),
                s => s
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| bad(format!("invalid {} `{s}`", PANEL_HEADER[i]))),
            }
        };
        let dummy = |i: usize| -> Result<Option<u8>, PanelReadError> {
            match f(i) {
                "" => Ok(None),
                "0" => Ok(Some(0)),
                "1" => Ok(Some(1)),
                s => Err(bad(format!("invalid {} `{s}`", PANEL_HEADER[i]))),
            }
        };
        let week: WeekId = f(0).parse().map_err(|e: crate::calendar::ParseWeekError| bad(e.to_string()))?;
        let currency: Currency = f(1).parse().map_err(bad)?;
        let premium_pct = num(2)?.ok_or_else(|| bad("missing premium_pct".into()))?;
        rows.push(WeeklyPanelRow {
            week,
            currency,
            premium_pct,
            depr_pct: num(3)?,
            btc_return: num(4)?,
            btc_volatility: num(5)?,
            median_confirm_minutes: num(6)?,
            avg_fee_usd: num(7)?,
            n_transactions: num(8)?,
            remittance_cost_pct: num(9)?,
            peg: dummy(10)?,
            cc: num(11)?,
            constrained: dummy(12)?,
            freedom_score: num(13)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn day(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn trade(c: &str, date: NaiveDate, volume_btc: f64, price: f64) -> Trade {
        Trade {
            timestamp: date.and_hms_opt(12, 0, 0).unwrap().and_utc(),
            currency: c.parse().unwrap(),
            volume_btc,
            price,
        }
    }

    fn price(c: &str, date: NaiveDate, p: f64) -> DailyPrice {
        DailyPrice {
            date,
            currency: c.parse().unwrap(),
            vw_price: p,
            median_price: p,
            price: p,
            n_trades: 1,
            volume_btc: 1.0,
            corrected: false,
        }
    }

    #[test]
    fn correction_fires_on_skewed_bucket() {
        let d = day(2017, 1, 1);
        let out = aggregate_daily(
            &[trade("EUR", d, 1.0, 100.0), trade("EUR", d, 3.0, 200.0)],
            RatioBounds::default(),
        );
        assert_eq!(out.len(), 1);
        let p = out[0];
        assert_eq!(p.vw_price, 175.0);
        // Lower-middle median of {100, 200}; ratio 1.75 leaves the band.
        assert_eq!(p.median_price, 100.0);
        assert!(p.corrected);
        assert_eq!(p.price, 100.0);
    }

    #[test]
    fn single_and_constant_buckets() {
        let d = day(2017, 1, 1);
        let one = aggregate_daily(&[trade("EUR", d, 2.0, 100.0)], RatioBounds::default());
        assert_eq!((one[0].vw_price, one[0].median_price, one[0].corrected), (100.0, 100.0, false));
        let flat = aggregate_daily(
            &[trade("EUR", d, 0.1, 42.0), trade("EUR", d, 7.0, 42.0), trade("EUR", d, 3.0, 42.0)],
            RatioBounds::default(),
        );
        assert_eq!(flat[0].price, 42.0);
    }

    #[test]
    fn median_is_lower_middle() {
        assert_eq!(lower_median(&mut [4.0, 1.0, 3.0, 2.0]), 2.0);
        assert_eq!(lower_median(&mut [5.0, 1.0, 3.0]), 3.0);
    }

    #[test]
    fn bounds_validation() {
        assert!(RatioBounds::new(0.85, 1.08).is_ok());
        assert!(RatioBounds::new(1.0, 1.08).is_err());
        assert!(RatioBounds::new(0.9, 0.95).is_err());
    }

    #[test]
    fn shadow_rate_cases() {
        let d = day(2020, 5, 1);
        let irr = price("IRR", d, 4.2e9);
        let usd = price("USD", d, 42_000.0);
        assert_eq!(shadow_rate(&irr, &usd).unwrap(), 100_000.0);
        assert_eq!(shadow_rate(&usd, &usd).unwrap(), 1.0);
        let other = price("USD", day(2020, 5, 2), 42_000.0);
        assert!(matches!(shadow_rate(&irr, &other), Err(PricingError::Alignment(_))));
        assert!(matches!(shadow_rate(&irr, &irr), Err(PricingError::Alignment(_))));
    }

    #[test]
    fn premium_and_depreciation() {
        assert_eq!(premium(105.0, 100.0).unwrap(), 5.0);
        assert_eq!(premium(100.0, 100.0).unwrap(), 0.0);
        assert!(premium(1.0, 0.0).is_err());
        assert!(premium(1.0, f64::NAN).is_err());
        assert_eq!(depreciation(100.0, 110.0).unwrap(), 10.0);
        assert_eq!(depreciation(3.7, 3.7).unwrap(), 0.0);
        assert!(depreciation(-1.0, 1.0).is_err());
    }

    fn bars(start: DateTime<Utc>, prices: &[f64]) -> Vec<MarketBar> {
        prices
            .iter()
            .enumerate()
            .map(|(k, &p)| MarketBar {
                timestamp: start + Duration::minutes(5 * k as i64),
                price_usd: p,
            })
            .collect()
    }

    #[test]
    fn return_log_identity() {
        let t0 = Utc.with_ymd_and_hms(2020, 1, 6, 0, 0, 0).unwrap();
        let flat = market_return(&bars(t0, &[100.0; 12]), Horizon::Hour);
        assert_eq!(flat[&t0], 0.0);
        let mut p = vec![100.0; 12];
        p[11] = 100.0 * std::f64::consts::E;
        let r = market_return(&bars(t0, &p), Horizon::Hour);
        assert!((r[&t0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn return_uses_boundary_bar_as_close() {
        let t0 = Utc.with_ymd_and_hms(2020, 1, 6, 0, 0, 0).unwrap();
        let mut p = vec![100.0; 13];
        p[12] = 200.0; // 01:00 bar closes the first hour and opens the second
        let r = market_return(&bars(t0, &p), Horizon::Hour);
        assert!((r[&t0] - 2f64.ln()).abs() < 1e-15);
        assert_eq!(r[&(t0 + Duration::hours(1))], 0.0);
        assert_eq!(r.len(), 2);
    }

    #[test]
    fn volatility_arithmetic() {
        let v = realized_volatility(&[0.01, -0.01]);
        assert!((v.value - 0.0002).abs() < 1e-18);
        assert!(!v.empty);
        let e = realized_volatility(&[]);
        assert_eq!((e.value, e.empty), (0.0, true));
    }

    #[test]
    fn oer_fill_horizon() {
        let eur: Currency = "EUR".parse().unwrap();
        let t = OerTable::new(
            &[OerQuote {
                date: day(2020, 1, 3),
                currency: eur,
                rate: 0.9,
            }],
            5,
        );
        assert_eq!(t.filled(eur, day(2020, 1, 3)), Some(0.9));
        assert_eq!(t.filled(eur, day(2020, 1, 8)), Some(0.9));
        assert_eq!(t.filled(eur, day(2020, 1, 9)), None);
        assert_eq!(t.filled(eur, day(2020, 1, 2)), None);
        assert_eq!(t.filled(Currency::USD, day(1999, 1, 1)), Some(1.0));
    }

    fn week_fixture(premium_days: &[(u32, f64)]) -> PanelBuild {
        // Week 2020-W02: Monday 2020-01-06.
        let eur: Currency = "EUR".parse().unwrap();
        let mut daily = Vec::new();
        let mut oer = Vec::new();
        for &(d, prem) in premium_days {
            let date = day(2020, 1, d);
            daily.push(price("USD", date, 10_000.0));
            // ser = 0.9 * (1 + prem/100) with oer 0.9
            daily.push(price("EUR", date, 10_000.0 * 0.9 * (1.0 + prem / 100.0)));
            oer.push(OerQuote {
                date,
                currency: eur,
                rate: 0.9,
            });
        }
        build_weekly_panel(
            &PanelInputs {
                daily: &daily,
                oer: &oer,
                bars: &[],
                blockchain: &[],
                regulatory: &[],
            },
            PanelOptions::default(),
        )
    }

    #[test]
    fn weekly_premium_is_mean_of_days() {
        let b = week_fixture(&[(6, 5.0), (7, 5.0), (8, 5.0), (9, 5.0), (10, 5.0), (11, 5.0), (12, 5.0)]);
        let eur = b.rows.iter().find(|r| r.currency.as_str() == "EUR").unwrap();
        assert!((eur.premium_pct - 5.0).abs() < 1e-12);
        assert_eq!(eur.depr_pct, Some(0.0));
        let two = week_fixture(&[(6, 2.0), (9, 4.0)]);
        let eur = two.rows.iter().find(|r| r.currency.as_str() == "EUR").unwrap();
        assert!((eur.premium_pct - 3.0).abs() < 1e-12);
        assert!(two.rows.iter().all(|r| r.currency != Currency::USD));
    }

    #[test]
    fn currency_without_oer_is_reported() {
        let d = day(2020, 1, 6);
        let daily = vec![price("USD", d, 10.0), price("NGN", d, 5000.0)];
        let b = build_weekly_panel(
            &PanelInputs {
                daily: &daily,
                oer: &[],
                bars: &[],
                blockchain: &[],
                regulatory: &[],
            },
            PanelOptions::default(),
        );
        assert!(b.rows.is_empty());
        assert!(b.report.iter().any(|m| m.contains("NGN")));
    }

    #[test]
    fn panel_csv_round_trip() {
        let b = week_fixture(&[(6, 1.5), (8, 2.5)]);
        let mut rows = b.rows.clone();
        rows[0].peg = Some(1);
        rows[0].cc = Some(0.75);
        let mut buf = Vec::new();
        write_panel(&mut buf, &rows).unwrap();
        assert_eq!(read_panel(buf.as_slice()).unwrap(), rows);
    }
}
