//! Column-oriented (unit, week) panel with optional values.

use std::collections::BTreeMap;

use crate::calendar::WeekId;
use crate::pricing::WeeklyPanelRow;

use super::EconError;

/// Rows sorted by (unit, week), unique on that key, with named columns of
/// optional values.
#[derive(Debug, Clone, Default)]
pub struct Panel {
    units: Vec<String>,
    weeks: Vec<WeekId>,
    columns: BTreeMap<String, Vec<Option<f64>>>,
}

impl Panel {
    /// Build from keys and columns in any row order; rows are sorted by
    /// (unit, week).
    pub fn from_columns(
        keys: Vec<(String, WeekId)>,
        columns: Vec<(String, Vec<Option<f64>>)>,
    ) -> Result<Self, EconError> {
        let n = keys.len();
        for (name, values) in &columns {
            if values.len() != n {
                return Err(EconError::ColumnLength { name: name.clone(), expected: n, found: values.len() });
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
        for w in order.windows(2) {
            if keys[w[0]] == keys[w[1]] {
                return Err(EconError::DuplicateKey { unit: keys[w[0]].0.clone(), week: keys[w[0]].1.to_string() });
            }
        }
        let units = order.iter().map(|&i| keys[i].0.clone()).collect();
        let weeks = order.iter().map(|&i| keys[i].1).collect();
        let mut map = BTreeMap::new();
        for (name, values) in columns {
            if map.contains_key(&name) {
                return Err(EconError::Spec(format!("duplicate column `{name}`")));
            }
            map.insert(name, order.iter().map(|&i| values[i]).collect());
        }
        Ok(Panel { units, weeks, columns: map })
    }

    pub fn from_weekly_rows(rows: &[WeeklyPanelRow]) -> Result<Self, EconError> {
        let keys = rows.iter().map(|r| (r.currency.to_string(), r.week)).collect();
        let f = |g: fn(&WeeklyPanelRow) -> Option<f64>| rows.iter().map(g).collect::<Vec<_>>();
        let columns = vec![
            ("premium_pct".to_string(), f(|r| Some(r.premium_pct))),
            ("depr_pct".to_string(), f(|r| r.depr_pct)),
            ("btc_return".to_string(), f(|r| r.btc_return)),
            ("btc_volatility".to_string(), f(|r| r.btc_volatility)),
            ("median_confirm_minutes".to_string(), f(|r| r.median_confirm_minutes)),
            ("avg_fee_usd".to_string(), f(|r| r.avg_fee_usd)),
            ("n_transactions".to_string(), f(|r| r.n_transactions)),
            ("remittance_cost_pct".to_string(), f(|r| r.remittance_cost_pct)),
            ("peg".to_string(), f(|r| r.peg.map(f64::from))),
            ("cc".to_string(), f(|r| r.cc)),
            ("constrained".to_string(), f(|r| r.constrained.map(f64::from))),
            ("freedom_score".to_string(), f(|r| r.freedom_score)),
        ];
        Self::from_columns(keys, columns)
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn unit(&self, row: usize) -> &str {
        &self.units[row]
    }

    pub fn week(&self, row: usize) -> WeekId {
        self.weeks[row]
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn weeks(&self) -> &[WeekId] {
        &self.weeks
    }

    /// Distinct units in sorted order.
    pub fn unit_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.units.iter().map(String::as_str).collect();
        ids.dedup();
        ids
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    pub fn column(&self, name: &str) -> Result<&[Option<f64>], EconError> {
        self.columns.get(name).map(Vec::as_slice).ok_or_else(|| EconError::MissingColumn(name.to_string()))
    }

    /// Add or replace a column aligned with the panel's row order.
    pub fn insert_column(&mut self, name: &str, values: Vec<Option<f64>>) -> Result<(), EconError> {
        if values.len() != self.len() {
            return Err(EconError::ColumnLength { name: name.to_string(), expected: self.len(), found: values.len() });
        }
        self.columns.insert(name.to_string(), values);
        Ok(())
    }

    /// Every unit observed in every week that appears anywhere in the panel.
    pub fn is_balanced(&self) -> bool {
        let mut distinct = self.weeks.clone();
        distinct.sort();
        distinct.dedup();
        let n_units = self.unit_ids().len();
        self.len() == n_units * distinct.len()
    }

    /// Contiguous row ranges, one per unit.
    pub fn unit_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.len() {
            if i == self.len() || self.units[i] != self.units[start] {
                out.push(start..i);
                start = i;
            }
        }
        out
    }

    /// Sub-panel with the given rows (kept in panel order).
    pub fn select(&self, rows: &[usize]) -> Panel {
        let mut rows = rows.to_vec();
        rows.sort_unstable();
        rows.dedup();
        Panel {
            units: rows.iter().map(|&i| self.units[i].clone()).collect(),
            weeks: rows.iter().map(|&i| self.weeks[i]).collect(),
            columns: self
                .columns
                .iter()
                .map(|(k, v)| (k.clone(), rows.iter().map(|&i| v[i]).collect()))
                .collect(),
        }
    }
}

/// Name of the k-th lag of `column`.
pub fn lag_name(column: &str, k: usize) -> String {
    format!("L{k}.{column}")
}

/// Add lag columns `L1.column ..= L{max_lag}.column`. A lag is taken from
/// exactly `k` weeks earlier within the same unit; when that week is not in
/// the panel the lag is absent.
pub fn build_lags(panel: &Panel, column: &str, max_lag: usize) -> Result<Panel, EconError> {
    if max_lag == 0 {
        return Err(EconError::Spec("max_lag must be at least 1".into()));
    }
    let values = panel.column(column)?.to_vec();
    let mut out = panel.clone();
    for k in 1..=max_lag {
        let mut lagged = vec![None; panel.len()];
        for range in panel.unit_ranges() {
            for r in range.clone() {
                let target = panel.weeks[r].index() - k as i64;
                // rows are sorted by week, so the match lies within k rows back
                let mut j = r;
                while j > range.start {
                    j -= 1;
                    let idx = panel.weeks[j].index();
                    if idx == target {
                        lagged[r] = values[j];
                        break;
                    }
                    if idx < target {
                        break;
                    }
                }
            }
        }
        out.insert_column(&lag_name(column, k), lagged)?;
    }
    Ok(out)
}

/// Row-level partition by the constrained dummy.
#[derive(Debug, Clone)]
pub struct Split {
    pub unconstrained: Panel,
    pub constrained: Panel,
    /// Rows whose constrained flag is absent, assigned to neither group.
    pub unclassified: usize,
}

pub fn split_by_constraint(panel: &Panel) -> Result<Split, EconError> {
    let flag = panel.column("constrained")?;
    let mut zero = Vec::new();
    let mut one = Vec::new();
    let mut unclassified = 0;
    for (i, v) in flag.iter().enumerate() {
        match v {
            Some(x) if *x == 1.0 => one.push(i),
            Some(x) if *x == 0.0 => zero.push(i),
            Some(x) => return Err(EconError::Spec(format!("constrained flag {x} is not 0/1"))),
            None => unclassified += 1,
        }
    }
    Ok(Split { unconstrained: panel.select(&zero), constrained: panel.select(&one), unclassified })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(i: i64) -> WeekId {
        WeekId::from_index(2500 + i)
    }

    fn panel(rows: &[(&str, i64, f64)]) -> Panel {
        let keys = rows.iter().map(|(u, t, _)| (u.to_string(), w(*t))).collect();
        let vals = rows.iter().map(|r| Some(r.2)).collect();
        Panel::from_columns(keys, vec![("x".into(), vals)]).unwrap()
    }

    #[test]
    fn lags_along_consecutive_weeks() {
        let p = panel(&[("A", 1, 1.0), ("A", 2, 2.0), ("A", 3, 3.0), ("A", 4, 4.0), ("A", 5, 5.0)]);
        let l = build_lags(&p, "x", 2).unwrap();
        assert_eq!(l.column("L1.x").unwrap()[2], Some(2.0));
        assert_eq!(l.column("L2.x").unwrap()[2], Some(1.0));
        assert_eq!(l.column("L1.x").unwrap()[0], None);
    }

    #[test]
    fn lag_across_gap_is_absent() {
        let p = panel(&[("A", 1, 1.0), ("A", 2, 2.0), ("A", 4, 4.0), ("A", 5, 5.0), ("B", 3, 9.0)]);
        let l = build_lags(&p, "x", 2).unwrap();
        let l1 = l.column("L1.x").unwrap();
        assert_eq!(l1[2], None);
        assert_eq!(l1[3], Some(4.0));
        assert_eq!(l.column("L2.x").unwrap()[2], Some(2.0));
        // no leakage across units
        assert_eq!(l1[4], None);
        assert!(!p.is_balanced());
    }

    #[test]
    fn rows_are_sorted_and_unique() {
        let p = panel(&[("B", 2, 0.0), ("A", 3, 1.0), ("A", 1, 2.0)]);
        assert_eq!(p.units(), ["A", "A", "B"]);
        assert_eq!(p.column("x").unwrap(), &[Some(2.0), Some(1.0), Some(0.0)]);
        let keys = vec![("A".to_string(), w(1)), ("A".to_string(), w(1))];
        assert!(matches!(
            Panel::from_columns(keys, vec![]),
            Err(EconError::DuplicateKey { .. })
        ));
        assert!(matches!(p.column("nope"), Err(EconError::MissingColumn(_))));
    }

    #[test]
    fn split_is_a_row_partition() {
        let keys: Vec<_> = (0..6).map(|t| ("A".to_string(), w(t))).collect();
        let flags = vec![Some(0.0), Some(0.0), Some(1.0), Some(1.0), Some(0.0), None];
        let p = Panel::from_columns(keys, vec![("constrained".into(), flags)]).unwrap();
        let s = split_by_constraint(&p).unwrap();
        assert_eq!(s.unconstrained.len(), 3);
        assert_eq!(s.constrained.len(), 2);
        assert_eq!(s.unconstrained.len() + s.constrained.len() + s.unclassified, p.len());
        assert_eq!(s.constrained.weeks(), [w(2), w(3)]);
    }
}
