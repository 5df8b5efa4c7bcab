//! Trade-level generators: daily buckets with injected outliers, and a
//! full set of pipeline inputs.

use std::io::Write;

use chrono::{DateTime, Datelike, Duration, NaiveDate, Utc};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::ingest::{
    AreaerRecord, BlockchainMetrics, ControlMatrix, Currency, Direction, FreedomScore, MarketBar, OerQuote,
    RegimeCategory, RemittanceQuote, Trade, ASSET_CLASSES, DEFAULT_CURRENCIES,
};
use crate::regulation::countries_of;

use super::{open_uniform, standard_normal, stream_rng, uniform_int, DgpSpec, SynthError};

/// Ground truth for one (currency, day) bucket, computed directly from the
/// generated trades.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BucketTruth {
    pub date: NaiveDate,
    pub currency: Currency,
    pub n_trades: usize,
    /// An outlier price was injected into this bucket.
    pub injected: bool,
    pub vw_price: f64,
    pub median_price: f64,
    pub corrected: bool,
    pub price: f64,
}

pub const TRADE_TRUTH_HEADER: [&str; 8] =
    ["date", "currency", "n_trades", "injected", "vw_price", "median_price", "corrected", "price"];

#[derive(Debug, Clone)]
pub struct TradeSet {
    /// Sorted by currency, then timestamp.
    pub trades: Vec<Trade>,
    pub truth: Vec<BucketTruth>,
}

const BAND: (f64, f64) = (0.85, 1.08);

fn first_day() -> NaiveDate {
    NaiveDate::from_ymd_opt(2017, 1, 2).expect("valid date")
}

fn bucket_truth(date: NaiveDate, currency: Currency, trades: &[Trade], injected: bool) -> BucketTruth {
    let mut num = 0.0;
    let mut den = 0.0;
    for t in trades {
        num += t.volume_btc * t.price;
        den += t.volume_btc;
    }
    let vw = num / den;
    let mut prices: Vec<f64> = trades.iter().map(|t| t.price).collect();
    prices.sort_by(|a, b| a.partial_cmp(b).expect("finite prices"));
    let median = prices[(prices.len() - 1) / 2];
    let ratio = vw / median;
    let corrected = ratio < BAND.0 || ratio > BAND.1;
    BucketTruth {
        date,
        currency,
        n_trades: trades.len(),
        injected,
        vw_price: vw,
        median_price: median,
        corrected,
        price: if corrected { median } else { vw },
    }
}

/// Trades for one bucket scattered around `center`, with an optional
/// outlier multiplied by a factor in [3, 10].
fn gen_bucket(
    rng: &mut ChaCha8Rng,
    date: NaiveDate,
    currency: Currency,
    center: f64,
    spec: &DgpSpec,
) -> (Vec<Trade>, BucketTruth) {
    let k = uniform_int(rng, 1, spec.max_trades_per_bucket);
    let mut secs: Vec<i64> = (0..k).map(|_| uniform_int(rng, 0, 86_399) as i64).collect();
    secs.sort_unstable();
    let midnight = date.and_hms_opt(0, 0, 0).expect("midnight").and_utc();
    let mut trades: Vec<Trade> = secs
        .iter()
        .map(|&s| Trade {
            timestamp: midnight + Duration::seconds(s),
            currency,
            volume_btc: (-2.0 + standard_normal(rng)).exp(),
            price: center * (0.01 * standard_normal(rng)).exp(),
        })
        .collect();
    let injected = open_uniform(rng) < spec.outlier_rate;
    if injected {
        let j = uniform_int(rng, 0, k - 1);
        trades[j].price *= 3.0 + 7.0 * open_uniform(rng);
    }
    let truth = bucket_truth(date, currency, &trades, injected);
    (trades, truth)
}

fn registry_codes(n: usize, with_usd: bool) -> Result<Vec<Currency>, SynthError> {
    let mut codes: Vec<Currency> = Vec::new();
    if with_usd {
        codes.push(Currency::USD);
    }
    codes.extend(
        DEFAULT_CURRENCIES
            .iter()
            .map(|c| c.parse::<Currency>().expect("valid default code"))
            .filter(|c| !with_usd || *c != Currency::USD),
    );
    if n > codes.len() {
        return Err(SynthError::Spec(format!("at most {} currencies available, {n} requested", codes.len())));
    }
    codes.truncate(n);
    Ok(codes)
}

/// `spec.n_buckets` daily buckets spread evenly over the first
/// `spec.n_currencies` registry currencies, consecutive days from
/// 2017-01-02. Each currency follows a log-normal price path.
pub fn gen_trades(spec: &DgpSpec) -> Result<TradeSet, SynthError> {
    spec.validate()?;
    let codes = registry_codes(spec.n_currencies, false)?;
    let n_cur = codes.len();
    let per: Vec<usize> = (0..n_cur).map(|c| spec.n_buckets / n_cur + usize::from(c < spec.n_buckets % n_cur)).collect();
    let parts: Vec<(Vec<Trade>, Vec<BucketTruth>)> = codes
        .par_iter()
        .enumerate()
        .map(|(c, &currency)| {
            let mut rng = stream_rng(spec.seed, c as u64 + 1);
            let mut log_level = 4.0 * open_uniform(&mut rng) * std::f64::consts::LN_10;
            let mut trades = Vec::new();
            let mut truth = Vec::with_capacity(per[c]);
            for d in 0..per[c] {
                let date = first_day() + Duration::days(d as i64);
                let (t, tr) = gen_bucket(&mut rng, date, currency, log_level.exp(), spec);
                trades.extend(t);
                truth.push(tr);
                log_level += 0.02 * standard_normal(&mut rng);
            }
            (trades, truth)
        })
        .collect();
    let mut out = TradeSet { trades: Vec::new(), truth: Vec::new() };
    for (t, tr) in parts {
        out.trades.extend(t);
        out.truth.extend(tr);
    }
    Ok(out)
}

pub fn write_trade_truth<W: Write>(sink: W, truth: &[BucketTruth]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(TRADE_TRUTH_HEADER)?;
    for t in truth {
        w.write_record([
            t.date.to_string(),
            t.currency.to_string(),
            t.n_trades.to_string(),
            u8::from(t.injected).to_string(),
            t.vw_price.to_string(),
            t.median_price.to_string(),
            u8::from(t.corrected).to_string(),
            t.price.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Row counts the pipeline must reproduce on a [`PipelineFixture`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FixtureTruth {
    pub n_currencies: usize,
    pub n_days: usize,
    pub n_trades: usize,
    pub n_daily_prices: usize,
    pub n_corrected: usize,
    pub n_series_points: usize,
    pub n_panel_rows: usize,
}

/// Every input of the build pipeline, mutually consistent.
#[derive(Debug, Clone)]
pub struct PipelineFixture {
    pub trades: Vec<Trade>,
    pub oer: Vec<OerQuote>,
    pub bars: Vec<MarketBar>,
    pub blockchain: Vec<BlockchainMetrics>,
    pub areaer: Vec<AreaerRecord>,
    pub remittance: Vec<RemittanceQuote>,
    pub freedom: Vec<FreedomScore>,
    pub bucket_truth: Vec<BucketTruth>,
    pub truth: FixtureTruth,
}

const REGIMES: [RegimeCategory; 5] = [
    RegimeCategory::ConventionalPeg,
    RegimeCategory::StabilizedArrangement,
    RegimeCategory::CrawlLikeArrangement,
    RegimeCategory::Floating,
    RegimeCategory::FreeFloating,
];

fn gen_controls(rng: &mut ChaCha8Rng, p_flag: f64) -> ControlMatrix {
    let mut m = ControlMatrix::default();
    for dir in [Direction::Inflow, Direction::Outflow] {
        for class in 1..=ASSET_CLASSES {
            for sub in 1..=2 {
                let flag = if open_uniform(rng) < 0.02 { None } else { Some(open_uniform(rng) < p_flag) };
                m.set(dir, class, sub, flag);
            }
        }
    }
    m
}

/// A complete input set over `7 · n_weeks` days from Monday 2017-01-02 for
/// USD plus `n_currencies − 1` other registry currencies. Every currency
/// trades every day, official rates are quoted daily, so every non-USD
/// currency-week yields one panel row.
pub fn gen_pipeline_fixture(spec: &DgpSpec) -> Result<PipelineFixture, SynthError> {
    spec.validate()?;
    if spec.n_currencies < 2 {
        return Err(SynthError::Spec("the pipeline fixture needs USD and at least one other currency".into()));
    }
    let codes = registry_codes(spec.n_currencies, true)?;
    let n_days = 7 * spec.n_weeks;
    let start = first_day();
    let day = |d: usize| start + Duration::days(d as i64);

    // global paths: USD BTC price, hourly market bars, blockchain metrics
    let mut g = stream_rng(spec.seed, 0);
    let mut log_usd = 5000f64.ln();
    let usd_path: Vec<f64> = (0..n_days)
        .map(|_| {
            let p = log_usd.exp();
            log_usd += 0.03 * standard_normal(&mut g);
            p
        })
        .collect();
    let mut log_bar = 5000f64.ln();
    let start_ts: DateTime<Utc> = start.and_hms_opt(0, 0, 0).expect("midnight").and_utc();
    let bars = (0..n_days * 24)
        .map(|h| {
            let bar = MarketBar { timestamp: start_ts + Duration::hours(h as i64), price_usd: log_bar.exp() };
            log_bar += 0.006 * standard_normal(&mut g);
            bar
        })
        .collect();
    let blockchain = (0..n_days)
        .map(|d| BlockchainMetrics {
            date: day(d),
            median_confirm_minutes: 10.0 + 2.0 * standard_normal(&mut g).abs(),
            avg_fee_usd: (0.5 * standard_normal(&mut g)).exp(),
            n_transactions: 250_000 + uniform_int(&mut g, 0, 100_000) as u64,
        })
        .collect();

    struct Part {
        trades: Vec<Trade>,
        truth: Vec<BucketTruth>,
        oer: Vec<OerQuote>,
        areaer: Vec<AreaerRecord>,
        remittance: Vec<RemittanceQuote>,
        freedom: Vec<FreedomScore>,
    }
    let parts: Vec<Part> = codes
        .par_iter()
        .enumerate()
        .map(|(c, &currency)| {
            let mut rng = stream_rng(spec.seed, c as u64 + 1);
            let is_usd = currency == Currency::USD;
            let mut log_oer = if is_usd { 0.0 } else { 3.0 * open_uniform(&mut rng) * std::f64::consts::LN_10 };
            let mut part = Part {
                trades: Vec::new(),
                truth: Vec::with_capacity(n_days),
                oer: Vec::new(),
                areaer: Vec::new(),
                remittance: Vec::new(),
                freedom: Vec::new(),
            };
            for (d, &p_usd) in usd_path.iter().enumerate() {
                let rate = log_oer.exp();
                let prem = if is_usd { 0.0 } else { 2.0 + 3.0 * standard_normal(&mut rng) };
                let center = p_usd * rate * (1.0 + prem / 100.0);
                let (t, tr) = gen_bucket(&mut rng, day(d), currency, center, spec);
                part.trades.extend(t);
                part.truth.push(tr);
                if !is_usd {
                    part.oer.push(OerQuote { date: day(d), currency, rate });
                    log_oer += 0.003 * standard_normal(&mut rng);
                    if d % 14 == 0 {
                        part.remittance.push(RemittanceQuote {
                            date: day(d),
                            sending_currency: currency,
                            cost_pct_500: 2.0 + 10.0 * open_uniform(&mut rng),
                        });
                    }
                }
            }
            if !is_usd {
                let tight = open_uniform(&mut rng) < spec.constrained_share;
                let last_year = day(n_days - 1).year();
                for country in countries_of(currency.as_str()) {
                    let regime = if tight {
                        RegimeCategory::ConventionalPeg
                    } else {
                        REGIMES[uniform_int(&mut rng, 0, REGIMES.len() - 1)]
                    };
                    let controls = gen_controls(&mut rng, if tight { 0.95 } else { 0.3 });
                    part.areaer.push(AreaerRecord {
                        country: country.to_string(),
                        currency,
                        effective_date: start,
                        regime: Some(regime),
                        controls,
                    });
                    for year in start.year()..=last_year {
                        part.freedom.push(FreedomScore {
                            year,
                            country: country.to_string(),
                            currency,
                            score: (30.0 + 60.0 * open_uniform(&mut rng)).round(),
                        });
                    }
                }
            }
            part
        })
        .collect();

    let mut fx = PipelineFixture {
        trades: Vec::new(),
        oer: Vec::new(),
        bars,
        blockchain,
        areaer: Vec::new(),
        remittance: Vec::new(),
        freedom: Vec::new(),
        bucket_truth: Vec::new(),
        truth: FixtureTruth {
            n_currencies: codes.len(),
            n_days,
            n_trades: 0,
            n_daily_prices: codes.len() * n_days,
            n_corrected: 0,
            n_series_points: (codes.len() - 1) * n_days,
            n_panel_rows: (codes.len() - 1) * spec.n_weeks,
        },
    };
    for p in parts {
        fx.trades.extend(p.trades);
        fx.bucket_truth.extend(p.truth);
        fx.oer.extend(p.oer);
        fx.areaer.extend(p.areaer);
        fx.remittance.extend(p.remittance);
        fx.freedom.extend(p.freedom);
    }
    fx.truth.n_trades = fx.trades.len();
    fx.truth.n_corrected = fx.bucket_truth.iter().filter(|t| t.corrected).count();
    Ok(fx)
}
