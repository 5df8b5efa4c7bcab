//! ISO-8601 week identifiers and the coarser time buckets used for
//! time fixed effects.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

/// An ISO-8601 week, stored as the date of its Monday.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WeekId(NaiveDate);

/// Reference Monday for [`WeekId::index`].
const EPOCH_MONDAY: (i32, u32, u32) = (1970, 1, 5);

impl WeekId {
    /// The week containing `date`.
    pub fn of(date: NaiveDate) -> Self {
        let back = date.weekday().num_days_from_monday() as i64;
        WeekId(date - Duration::days(back))
    }

    pub fn from_iso(year: i32, week: u32) -> Option<Self> {
        NaiveDate::from_isoywd_opt(year, week, Weekday::Mon).map(WeekId)
    }

    pub fn monday(self) -> NaiveDate {
        self.0
    }

    pub fn sunday(self) -> NaiveDate {
        self.0 + Duration::days(6)
    }

    /// The seven dates of the week, Monday first.
    pub fn days(self) -> impl Iterator<Item = NaiveDate> {
        (0..7).map(move |k| self.0 + Duration::days(k))
    }

    pub fn contains(self, date: NaiveDate) -> bool {
        WeekId::of(date) == self
    }

    pub fn iso_year(self) -> i32 {
        self.0.iso_week().year()
    }

    pub fn iso_week(self) -> u32 {
        self.0.iso_week().week()
    }

    /// Consecutive weeks have consecutive indices.
    pub fn index(self) -> i64 {
        let (y, m, d) = EPOCH_MONDAY;
        let epoch = NaiveDate::from_ymd_opt(y, m, d).expect("valid epoch");
        (self.0 - epoch).num_days().div_euclid(7)
    }

    pub fn from_index(index: i64) -> Self {
        let (y, m, d) = EPOCH_MONDAY;
        let epoch = NaiveDate::from_ymd_opt(y, m, d).expect("valid epoch");
        WeekId(epoch + Duration::days(index * 7))
    }

    pub fn offset(self, weeks: i64) -> Self {
        WeekId(self.0 + Duration::days(weeks * 7))
    }

    /// Bi-week bucket: ISO week number divided by two (floor) within the ISO year.
    pub fn biweek(self) -> (i32, u32) {
        (self.iso_year(), self.iso_week() / 2)
    }

    /// Calendar month of the week's Thursday, the day that fixes its ISO year.
    pub fn month(self) -> (i32, u32) {
        let thursday = self.0 + Duration::days(3);
        (thursday.year(), thursday.month())
    }
}

impl fmt::Display for WeekId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-W{:02}", self.iso_year(), self.iso_week())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid ISO week `{0}` (expected YYYY-Www)")]
pub struct ParseWeekError(pub String);

impl FromStr for WeekId {
    type Err = ParseWeekError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseWeekError(s.to_string());
        let (year, week) = s.trim().split_once("-W").ok_or_else(err)?;
        let year: i32 = year.parse().map_err(|_| err())?;
        let week: u32 = week.parse().map_err(|_| err())?;
        WeekId::from_iso(year, week).ok_or_else(err)
    }
}
