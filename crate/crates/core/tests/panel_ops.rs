use std::collections::HashMap;

use proptest::prelude::*;
use shadowfx_core::econometrics::{build_lags, lag_name, split_by_constraint, Panel};
use shadowfx_core::WeekId;

fn arb_panel() -> impl Strategy<Value = Vec<(u8, i64, Option<f64>, Option<u8>)>> {
    prop::collection::vec((0u8..5, 0i64..30, prop::option::weighted(0.9, -50.0f64..50.0), prop::option::of(0u8..2)), 1..120)
}

fn to_panel(rows: &[(u8, i64, Option<f64>, Option<u8>)]) -> Panel {
    // keep the first occurrence of every (unit, week) key
    let mut seen = HashMap::new();
    let mut kept = vec![];
    for r in rows {
        if seen.insert((r.0, r.1), ()).is_none() {
            kept.push(*r);
        }
    }
    // constrained is constant per unit, taken from the unit's first row
    let mut flag_of = HashMap::new();
    for r in &kept {
        flag_of.entry(r.0).or_insert(r.3);
    }
    let keys = kept.iter().map(|r| (format!("U{}", r.0), WeekId::from_index(2600 + r.1))).collect();
    let x = kept.iter().map(|r| r.2).collect();
    let c = kept.iter().map(|r| flag_of[&r.0].map(f64::from)).collect();
    Panel::from_columns(keys, vec![("x".into(), x), ("constrained".into(), c)]).unwrap()
}

proptest! {
    #[test]
    fn lags_match_a_keyed_lookup(rows in arb_panel(), max_lag in 1usize..4) {
        let panel = to_panel(&rows);
        let lagged = build_lags(&panel, "x", max_lag).unwrap();
        let lookup: HashMap<(String, i64), Option<f64>> = (0..panel.len())
            .map(|r| ((panel.unit(r).to_string(), panel.week(r).index()), panel.column("x").unwrap()[r]))
            .collect();
        for k in 1..=max_lag {
            let col = lagged.column(&lag_name("x", k)).unwrap();
            for r in 0..lagged.len() {
                let expect = lookup
                    .get(&(lagged.unit(r).to_string(), lagged.week(r).index() - k as i64))
                    .copied()
                    .flatten();
                prop_assert_eq!(col[r], expect);
            }
        }
    }

    #[test]
    fn split_partitions_rows(rows in arb_panel()) {
        let panel = to_panel(&rows);
        let split = split_by_constraint(&panel).unwrap();
        let flags = panel.column("constrained").unwrap();
        prop_assert_eq!(split.constrained.len(), flags.iter().filter(|f| **f == Some(1.0)).count());
        prop_assert_eq!(split.unconstrained.len(), flags.iter().filter(|f| **f == Some(0.0)).count());
        prop_assert_eq!(split.unclassified, flags.iter().filter(|f| f.is_none()).count());
        for r in 0..split.constrained.len() {
            prop_assert_eq!(split.constrained.column("constrained").unwrap()[r], Some(1.0));
        }
        let units_c: std::collections::BTreeSet<&str> = split.constrained.unit_ids().into_iter().collect();
        let units_u: std::collections::BTreeSet<&str> = split.unconstrained.unit_ids().into_iter().collect();
        prop_assert!(units_c.is_disjoint(&units_u));
    }
}
