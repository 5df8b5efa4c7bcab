//! Regulatory-friction indices per currency.
//!
//! AREAER-style country records become daily step functions of the peg
//! dummy and the capital-control index; countries sharing a currency are
//! averaged. Remittance quotes become a weekly cost index and annual freedom
//! scores a daily step function switching on January 1.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use chrono::NaiveDate;
use thiserror::Error;

use crate::calendar::WeekId;
use crate::ingest::{
    AreaerRecord, ControlMatrix, Currency, Direction, FreedomScore, RegimeCategory, RegimeGroup,
    RemittanceQuote, ASSET_CLASSES,
};

#[derive(Debug, Error, PartialEq)]
pub enum RegulationError {
    #[error("conflicting records for {key} effective {date}")]
    Conflict { key: String, date: NaiveDate },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Country → currency pairs for the default currency set.
pub const COUNTRY_CURRENCIES: &[(&str, &str)] = &[
    ("Switzerland", "CHF"),
    ("United Arab Emirates", "AED"),
    ("Angola", "AOA"),
    ("Argentina", "ARS"),
    ("Australia", "AUD"),
    ("Kiribati", "AUD"),
    ("Nauru", "AUD"),
    ("Tuvalu", "AUD"),
    ("Bosnia and Herzegovina", "BAM"),
    ("Bangladesh", "BDT"),
    ("Bulgaria", "BGN"),
    ("Bolivia", "BOB"),
    ("Brazil", "BRL"),
    ("Belarus", "BYN"),
    ("Canada", "CAD"),
    ("Chile", "CLP"),
    ("China", "CNY"),
    ("Colombia", "COP"),
    ("Costa Rica", "CRC"),
    ("Czech Republic", "CZK"),
    ("Denmark", "DKK"),
    ("Dominican Republic", "DOP"),
    ("Egypt", "EGP"),
    ("Ethiopia", "ETB"),
    ("Andorra", "EUR"),
    ("Austria", "EUR"),
    ("Belgium", "EUR"),
    ("Cyprus", "EUR"),
    ("Estonia", "EUR"),
    ("Finland", "EUR"),
    ("France", "EUR"),
    ("Germany", "EUR"),
    ("Greece", "EUR"),
    ("Ireland", "EUR"),
    ("Italy", "EUR"),
    ("Kosovo", "EUR"),
    ("Latvia", "EUR"),
    ("Lithuania", "EUR"),
    ("Luxembourg", "EUR"),
    ("Malta", "EUR"),
    ("Montenegro", "EUR"),
    ("The Netherlands", "EUR"),
    ("Portugal", "EUR"),
    ("San Marino", "EUR"),
    ("Slovak Republic", "EUR"),
    ("Slovenia", "EUR"),
    ("Spain", "EUR"),
    ("United Kingdom", "GBP"),
    ("Georgia", "GEL"),
    ("Ghana", "GHS"),
    ("Guatemala", "GTQ"),
    ("Hong Kong SAR", "HKD"),
    ("Honduras", "HNL"),
    ("Croatia", "HRK"),
    ("Hungary", "HUF"),
    ("Indonesia", "IDR"),
    ("Israel", "ILS"),
    ("West Bank and Gaza", "ILS"),
    ("India", "INR"),
    ("Iran", "IRR"),
    ("Iceland", "ISK"),
    ("Jamaica", "JMD"),
    ("Jordan", "JOD"),
    ("Japan", "JPY"),
    ("Kenya", "KES"),
    ("Korea", "KRW"),
    ("Kuwait", "KWD"),
    ("Kazakhstan", "KZT"),
    ("Sri Lanka", "LKR"),
    ("Morocco", "MAD"),
    ("Mauritius", "MUR"),
    ("Malawi", "MWK"),
    ("Mexico", "MXN"),
    ("Malaysia", "MYR"),
    ("Nigeria", "NGN"),
    ("Norway", "NOK"),
    ("New Zealand", "NZD"),
    ("Oman", "OMR"),
    ("Panama", "PAB"),
    ("Peru", "PEN"),
    ("Philippines", "PHP"),
    ("Pakistan", "PKR"),
    ("Poland", "PLN"),
    ("Paraguay", "PYG"),
    ("Qatar", "QAR"),
    ("Romania", "RON"),
    ("Serbia", "RSD"),
    ("Russia", "RUB"),
    ("Rwanda", "RWF"),
    ("Saudi Arabia", "SAR"),
    ("Sweden", "SEK"),
    ("Singapore", "SGD"),
    ("Eswatini", "SZL"),
    ("Thailand", "THB"),
    ("Türkiye", "TRY"),
    ("Trinidad and Tobago", "TTD"),
    ("Taiwan Province of China", "TWD"),
    ("Tanzania", "TZS"),
    ("Ukraine", "UAH"),
    ("Uganda", "UGX"),
    ("Ecuador", "USD"),
    ("El Salvador", "USD"),
    ("Liberia", "USD"),
    ("Marshall Islands", "USD"),
    ("Micronesia", "USD"),
    ("Palau", "USD"),
    ("Panama", "USD"),
    ("Puerto Rico", "USD"),
    ("Somalia", "USD"),
    ("Timor-Leste", "USD"),
    ("United States", "USD"),
    ("Uruguay", "UYU"),
    ("Vietnam", "VND"),
    ("Cameroon", "XAF"),
    ("Central African Republic", "XAF"),
    ("Chad", "XAF"),
    ("Republic of Congo", "XAF"),
    ("Equatorial Guinea", "XAF"),
    ("Gabon", "XAF"),
    ("Benin", "XOF"),
    ("Burkina Faso", "XOF"),
    ("Côte d'Ivoire", "XOF"),
    ("Guinea-Bissau", "XOF"),
    ("Mali", "XOF"),
    ("Niger", "XOF"),
    ("Senegal", "XOF"),
    ("Togo", "XOF"),
    ("South Africa", "ZAR"),
    ("Zambia", "ZMW"),
];

/// Countries using `currency` according to [`COUNTRY_CURRENCIES`].
pub fn countries_of(currency: &str) -> Vec<&'static str> {
    COUNTRY_CURRENCIES
        .iter()
        .filter(|(_, c)| *c == currency)
        .map(|(country, _)| *country)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegulationConfig {
    /// Capital-control threshold for the constrained dummy.
    pub delta: f64,
    /// Currency-average peg values at or above this are re-binarized to 1.
    pub peg_threshold: f64,
    /// Weeks a remittance index value is carried forward without new quotes.
    pub remittance_carry_weeks: i64,
}

impl Default for RegulationConfig {
    fn default() -> Self {
        Self {
            delta: 0.7,
            peg_threshold: 0.5,
            remittance_carry_weeks: 8,
        }
    }
}

impl RegulationConfig {
    pub fn validate(&self) -> Result<(), RegulationError> {
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(RegulationError::Config(format!("delta {} outside [0,1]", self.delta)));
        }
        if !(0.0..=1.0).contains(&self.peg_threshold) {
            return Err(RegulationError::Config(format!(
                "peg threshold {} outside [0,1]",
                self.peg_threshold
            )));
        }
        if self.remittance_carry_weeks < 0 {
            return Err(RegulationError::Config("negative carry-forward window".into()));
        }
        Ok(())
    }
}

/// 0 for floating arrangements, 1 for everything else (hard peg, soft peg,
/// residual).
pub fn peg_of(regime: RegimeCategory) -> u8 {
    match regime.group() {
        RegimeGroup::Floating => 0,
        RegimeGroup::HardPeg | RegimeGroup::SoftPeg | RegimeGroup::Residual => 1,
    }
}

/// Peg dummy of a record, `None` when the record carries no regime.
pub fn peg_dummy(record: &AreaerRecord) -> Option<u8> {
    record.regime.map(peg_of)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcOutcome {
    pub value: f64,
    /// (direction, asset class) groups with no non-missing flag; each
    /// contributed 0.
    pub empty_groups: Vec<(Direction, usize)>,
}

/// Capital-control index in [0, 1]: the mean over both directions and all
/// ten asset classes of the share of controlled subcategories. Missing flags
/// are left out of their group's denominator.
pub fn capital_control_index(controls: &ControlMatrix) -> CcOutcome {
    let mut total = 0.0;
    let mut empty_groups = Vec::new();
    for direction in Direction::BOTH {
        let mut by_class = 0.0;
        for class in 1..=ASSET_CLASSES {
            let flags = controls.group(direction, class);
            let present = flags.iter().flatten().count();
            if present == 0 {
                empty_groups.push((direction, class));
                continue;
            }
            let set = flags.iter().flatten().filter(|f| **f).count();
            by_class += set as f64 / present as f64;
        }
        total += by_class / ASSET_CLASSES as f64;
    }
    CcOutcome {
        value: total / 2.0,
        empty_groups,
    }
}

/// 1 iff the currency is pegged and its capital-control index reaches `delta`.
pub fn constrained_dummy(peg: u8, cc: f64, delta: f64) -> u8 {
    (peg == 1 && cc >= delta) as u8
}

/// Unweighted mean per currency of `(currency, value)` pairs, one pair per
/// country. Values are summed in sorted order so the result does not depend
/// on input order.
pub fn currency_average<I>(values: I) -> BTreeMap<Currency, f64>
where
    I: IntoIterator<Item = (Currency, f64)>,
{
    let mut groups: BTreeMap<Currency, Vec<f64>> = BTreeMap::new();
    for (c, v) in values {
        groups.entry(c).or_default().push(v);
    }
    groups
        .into_iter()
        .filter(|(_, vs)| !vs.is_empty())
        .map(|(c, mut vs)| {
            vs.sort_by(f64::total_cmp);
            let n = vs.len() as f64;
            (c, vs.into_iter().sum::<f64>() / n)
        })
        .collect()
}

/// Right-continuous piecewise-constant series defined by effective dates.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSeries<T> {
    points: Vec<(NaiveDate, T)>,
}

impl<T: Clone> StepSeries<T> {
    /// Builds the series; two values effective on the same date conflict.
    pub fn new(key: &str, mut points: Vec<(NaiveDate, T)>) -> Result<Self, RegulationError> {
        points.sort_by_key(|(d, _)| *d);
        if let Some(w) = points.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(RegulationError::Conflict {
                key: key.to_string(),
                date: w[0].0,
            });
        }
        Ok(Self { points })
    }

    /// Value in force on `date`: the latest record effective at or before it.
    pub fn at(&self, date: NaiveDate) -> Option<&T> {
        let idx = self.points.partition_point(|(d, _)| *d <= date);
        idx.checked_sub(1).map(|i| &self.points[i].1)
    }

    pub fn change_dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.points.iter().map(|(d, _)| *d)
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Expands to one value per day over `[start, end]`; absent before the
    /// first effective date.
    pub fn to_daily(&self, start: NaiveDate, end: NaiveDate) -> Vec<(NaiveDate, Option<T>)> {
        start
            .iter_days()
            .take_while(|d| *d <= end)
            .map(|d| (d, self.at(d).cloned()))
            .collect()
    }
}

/// Weekly remittance-cost index per sending currency.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RemittanceIndex {
    observed: BTreeMap<Currency, BTreeMap<WeekId, f64>>,
    carry_weeks: i64,
}

impl RemittanceIndex {
    pub fn new(quotes: &[RemittanceQuote], carry_weeks: i64) -> Self {
        let mut cells: BTreeMap<Currency, BTreeMap<WeekId, (f64, usize)>> = BTreeMap::new();
        for q in quotes {
            let cell = cells
                .entry(q.sending_currency)
                .or_default()
                .entry(WeekId::of(q.date))
                .or_insert((0.0, 0));
            cell.0 += q.cost_pct_500;
            cell.1 += 1;
        }
        let observed = cells
            .into_iter()
            .map(|(c, weeks)| {
                let means = weeks.into_iter().map(|(w, (s, n))| (w, s / n as f64)).collect();
                (c, means)
            })
            .collect();
        Self {
            observed,
            carry_weeks,
        }
    }

    pub fn currencies(&self) -> impl Iterator<Item = Currency> + '_ {
        self.observed.keys().copied()
    }

    /// Mean quoted cost in `week`, else the latest earlier weekly value if at
    /// most `carry_weeks` old, else absent.
    pub fn at(&self, currency: Currency, week: WeekId) -> Option<f64> {
        let weeks = self.observed.get(&currency)?;
        let (w, v) = weeks.range(..=week).next_back()?;
        (week.index() - w.index() <= self.carry_weeks).then_some(*v)
    }
}

/// Weekly remittance-cost index for one currency and week.
pub fn remittance_cost_index(
    quotes: &[RemittanceQuote],
    currency: Currency,
    week: WeekId,
    carry_weeks: i64,
) -> Option<f64> {
    let own: Vec<RemittanceQuote> = quotes
        .iter()
        .filter(|q| q.sending_currency == currency)
        .copied()
        .collect();
    RemittanceIndex::new(&own, carry_weeks).at(currency, week)
}

/// One day of regulatory indices for a currency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegulatorySeries {
    pub currency: Currency,
    pub date: NaiveDate,
    pub peg: Option<u8>,
    pub cc: Option<f64>,
    pub constrained: Option<u8>,
    pub remittance_cost_pct: Option<f64>,
    pub freedom_score: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct RegulatoryBuild {
    pub series: Vec<RegulatorySeries>,
    pub report: Vec<String>,
}

struct CountrySteps {
    peg: StepSeries<u8>,
    cc: StepSeries<f64>,
}

/// Daily regulatory series over `[start, end]` for every currency with any
/// regulatory input. Rows where every index is absent are omitted.
pub fn build_regulatory(
    records: &[AreaerRecord],
    remittance: &[RemittanceQuote],
    freedom: &[FreedomScore],
    start: NaiveDate,
    end: NaiveDate,
    cfg: &RegulationConfig,
) -> Result<RegulatoryBuild, RegulationError> {
    cfg.validate()?;
    let mut report = Vec::new();

    // Per (currency, country) step functions.
    let mut by_country: BTreeMap<(Currency, &str), (Vec<(NaiveDate, u8)>, Vec<(NaiveDate, f64)>)> =
        BTreeMap::new();
    let mut empty_group_count = 0usize;
    for r in records {
        let entry = by_country
            .entry((r.currency, r.country.as_str()))
            .or_default();
        if let Some(p) = peg_dummy(r) {
            entry.0.push((r.effective_date, p));
        }
        if !r.controls.is_empty() {
            let cc = capital_control_index(&r.controls);
            empty_group_count += cc.empty_groups.len();
            entry.1.push((r.effective_date, cc.value));
        }
    }
    if empty_group_count > 0 {
        report.push(format!(
            "{empty_group_count} capital-control groups had no reported flag and contributed 0"
        ));
    }
    let mut countries: BTreeMap<Currency, Vec<CountrySteps>> = BTreeMap::new();
    for ((currency, country), (pegs, ccs)) in by_country {
        let key = format!("{country} ({currency})");
        countries.entry(currency).or_default().push(CountrySteps {
            peg: StepSeries::new(&key, pegs)?,
            cc: StepSeries::new(&key, ccs)?,
        });
    }

    // Freedom: currency average per year, switching on January 1.
    let mut ff_by_year: BTreeMap<i32, Vec<(Currency, f64)>> = BTreeMap::new();
    for s in freedom {
        ff_by_year.entry(s.year).or_default().push((s.currency, s.score));
    }
    let mut ff_points: BTreeMap<Currency, Vec<(NaiveDate, f64)>> = BTreeMap::new();
    for (year, values) in ff_by_year {
        let jan1 = NaiveDate::from_ymd_opt(year, 1, 1)
            .ok_or_else(|| RegulationError::Config(format!("invalid year {year}")))?;
        for (c, v) in currency_average(values) {
            ff_points.entry(c).or_default().push((jan1, v));
        }
    }
    let ff: BTreeMap<Currency, StepSeries<f64>> = ff_points
        .into_iter()
        .map(|(c, pts)| Ok((c, StepSeries::new(c.as_str(), pts)?)))
        .collect::<Result<_, RegulationError>>()?;

    let rem = RemittanceIndex::new(remittance, cfg.remittance_carry_weeks);

    let currencies: BTreeSet<Currency> = countries
        .keys()
        .copied()
        .chain(ff.keys().copied())
        .chain(rem.currencies())
        .collect();

    let mut series = Vec::new();
    for c in currencies {
        let steps = countries.get(&c);
        for date in start.iter_days().take_while(|d| *d <= end) {
            let (mut peg_sum, mut peg_n, mut ccs) = (0.0, 0usize, Vec::new());
            for s in steps.into_iter().flatten() {
                if let Some(p) = s.peg.at(date) {
                    peg_sum += *p as f64;
                    peg_n += 1;
                }
                if let Some(v) = s.cc.at(date) {
                    ccs.push((c, *v));
                }
            }
            let peg = (peg_n > 0).then(|| (peg_sum / peg_n as f64 >= cfg.peg_threshold) as u8);
            let cc = currency_average(ccs).get(&c).copied();
            let constrained = match (peg, cc) {
                (Some(p), Some(v)) => Some(constrained_dummy(p, v, cfg.delta)),
                _ => None,
            };
            let row = RegulatorySeries {
                currency: c,
                date,
                peg,
                cc,
                constrained,
                remittance_cost_pct: rem.at(c, WeekId::of(date)),
                freedom_score: ff.get(&c).and_then(|s| s.at(date).copied()),
            };
            if row.peg.is_some()
                || row.cc.is_some()
                || row.remittance_cost_pct.is_some()
                || row.freedom_score.is_some()
            {
                series.push(row);
            }
        }
    }
    Ok(RegulatoryBuild { series, report })
}

pub const REGULATORY_HEADER: [&str; 7] = [
    "currency",
    "date",
    "peg",
    "cc",
    "constrained",
    "remittance_cost_pct",
    "freedom_score",
];

pub fn write_regulatory<W: Write>(sink: W, rows: &[RegulatorySeries]) -> csv::Result<()> {
    fn opt<T: ToString>(v: Option<T>) -> String {
        v.map(|x| x.to_string()).unwrap_or_default()
    }
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(REGULATORY_HEADER)?;
    for r in rows {
        w.write_record([
            r.currency.to_string(),
            r.date.to_string(),
            opt(r.peg),
            opt(r.cc),
            opt(r.constrained),
            opt(r.remittance_cost_pct),
            opt(r.freedom_score),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn cur(s: &str) -> Currency {
        s.parse().unwrap()
    }

    fn uniform(flag: Option<bool>, m: usize) -> ControlMatrix {
        let mut cm = ControlMatrix::default();
        for dir in Direction::BOTH {
            for class in 1..=ASSET_CLASSES {
                for j in 1..=m {
                    cm.set(dir, class, j, flag);
                }
            }
        }
        cm
    }

    fn record(regime: Option<RegimeCategory>) -> AreaerRecord {
        AreaerRecord {
            country: "X".into(),
            currency: cur("NGN"),
            effective_date: d(2018, 1, 1),
            regime,
            controls: ControlMatrix::default(),
        }
    }

    #[test]
    fn peg_by_regime_group() {
        assert_eq!(peg_dummy(&record(Some(RegimeCategory::Floating))), Some(0));
        assert_eq!(peg_dummy(&record(Some(RegimeCategory::FreeFloating))), Some(0));
        assert_eq!(peg_dummy(&record(Some(RegimeCategory::CurrencyBoard))), Some(1));
        assert_eq!(peg_dummy(&record(Some(RegimeCategory::CrawlingPeg))), Some(1));
        assert_eq!(peg_dummy(&record(Some(RegimeCategory::OtherManaged))), Some(1));
        assert_eq!(peg_dummy(&record(None)), None);
    }

    #[test]
    fn cc_extremes() {
        assert_eq!(capital_control_index(&uniform(Some(false), 3)).value, 0.0);
        assert_eq!(capital_control_index(&uniform(Some(true), 3)).value, 1.0);
    }

    #[test]
    fn cc_single_class() {
        let mut cm = uniform(Some(false), 1);
        cm.set(Direction::Inflow, 1, 1, Some(true));
        cm.set(Direction::Outflow, 1, 1, Some(true));
        let out = capital_control_index(&cm);
        assert!((out.value - 0.1).abs() < 1e-15);
        assert!(out.empty_groups.is_empty());
    }

    #[test]
    fn cc_missing_shrinks_denominator() {
        let mut cm = uniform(Some(false), 2);
        // class 3 inflow: one flag set, one missing → 1/1 for that group.
        cm.set(Direction::Inflow, 3, 1, Some(true));
        cm.set(Direction::Inflow, 3, 2, None);
        let out = capital_control_index(&cm);
        assert!((out.value - 0.5 * 0.1).abs() < 1e-15);
        // an all-missing group contributes 0 and is reported
        cm.set(Direction::Outflow, 7, 1, None);
        cm.set(Direction::Outflow, 7, 2, None);
        let out = capital_control_index(&cm);
        assert_eq!(out.empty_groups, vec![(Direction::Outflow, 7)]);
    }

    #[test]
    fn constrained_truth_table() {
        assert_eq!(constrained_dummy(1, 0.75, 0.7), 1);
        assert_eq!(constrained_dummy(0, 0.99, 0.7), 0);
        assert_eq!(constrained_dummy(1, 0.6, 0.5), 1);
        assert_eq!(constrained_dummy(1, 0.6, 0.7), 0);
        assert_eq!(constrained_dummy(1, 0.7, 0.7), 1);
    }

    #[test]
    fn currency_means() {
        let m = currency_average([(cur("EUR"), 60.0), (cur("EUR"), 80.0), (cur("NGN"), 45.5)]);
        assert_eq!(m[&cur("EUR")], 70.0);
        assert_eq!(m[&cur("NGN")], 45.5);
    }

    #[test]
    fn appendix_table_covers_default_currencies() {
        assert_eq!(countries_of("XOF").len(), 8);
        assert_eq!(countries_of("EUR").len(), 23);
        let codes: BTreeSet<&str> = COUNTRY_CURRENCIES.iter().map(|(_, c)| *c).collect();
        assert_eq!(codes.len(), 81);
    }

    #[test]
    fn step_series_changes_on_effective_date() {
        let s = StepSeries::new("x", vec![(d(2019, 6, 15), 2), (d(2018, 1, 1), 1)]).unwrap();
        assert_eq!(s.at(d(2017, 12, 31)), None);
        assert_eq!(s.at(d(2018, 1, 1)), Some(&1));
        assert_eq!(s.at(d(2019, 6, 14)), Some(&1));
        assert_eq!(s.at(d(2019, 6, 15)), Some(&2));
        let daily = s.to_daily(d(2019, 6, 13), d(2019, 6, 16));
        assert_eq!(
            daily.iter().map(|(_, v)| *v).collect::<Vec<_>>(),
            vec![Some(1), Some(1), Some(2), Some(2)]
        );
        assert!(matches!(
            StepSeries::new("x", vec![(d(2018, 1, 1), 1), (d(2018, 1, 1), 2)]),
            Err(RegulationError::Conflict { .. })
        ));
    }

    fn quote(date: NaiveDate, cost: f64) -> RemittanceQuote {
        RemittanceQuote {
            date,
            sending_currency: cur("NGN"),
            cost_pct_500: cost,
        }
    }

    #[test]
    fn remittance_index_rules() {
        let w0 = WeekId::of(d(2020, 3, 2));
        let single = [quote(d(2020, 3, 2), 5.28)];
        assert_eq!(remittance_cost_index(&single, cur("NGN"), w0, 8), Some(5.28));
        let pair = [quote(d(2020, 3, 2), 10.94), quote(d(2020, 3, 4), 2.87)];
        let v = remittance_cost_index(&pair, cur("NGN"), w0, 8).unwrap();
        assert!((v - 6.905).abs() < 1e-12);
        // carried for 8 weeks, absent after
        assert_eq!(remittance_cost_index(&single, cur("NGN"), w0.offset(8), 8), Some(5.28));
        assert_eq!(remittance_cost_index(&single, cur("NGN"), w0.offset(9), 8), None);
        assert_eq!(remittance_cost_index(&single, cur("NGN"), w0.offset(10), 8), None);
        assert_eq!(remittance_cost_index(&single, cur("NGN"), w0.offset(-1), 8), None);
    }

    #[test]
    fn regulatory_build_averages_countries() {
        let mk = |country: &str, regime, flag| {
            let mut r = AreaerRecord {
                country: country.into(),
                currency: cur("XOF"),
                effective_date: d(2018, 1, 1),
                regime: Some(regime),
                controls: uniform(Some(flag), 1),
            };
            r.controls.set(Direction::Inflow, 1, 1, Some(true));
            r
        };
        let records = vec![
            mk("Benin", RegimeCategory::ConventionalPeg, true),
            mk("Mali", RegimeCategory::ConventionalPeg, true),
            mk("Togo", RegimeCategory::Floating, false),
        ];
        let b = build_regulatory(&records, &[], &[], d(2018, 1, 1), d(2018, 1, 3), &RegulationConfig::default())
            .unwrap();
        assert_eq!(b.series.len(), 3);
        let r = b.series[0];
        // peg mean 2/3 ≥ 0.5 → 1; cc mean of {1, 1, 0.05}
        assert_eq!(r.peg, Some(1));
        assert!((r.cc.unwrap() - (0.05 + 1.0 + 1.0) / 3.0).abs() < 1e-15);
        // D is recomputed from the currency-level indices: 0.683 < 0.7
        assert_eq!(r.constrained, Some(0));
        let loose = RegulationConfig { delta: 0.5, ..RegulationConfig::default() };
        let b = build_regulatory(&records, &[], &[], d(2018, 1, 1), d(2018, 1, 3), &loose).unwrap();
        assert_eq!(b.series[0].constrained, Some(1));
    }
}
