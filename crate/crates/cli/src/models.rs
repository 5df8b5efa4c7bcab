//! Named regression models. Micro models regress the weekly premium on its
//! first two lags plus blockchain and market variables with bi-weekly time
//! effects; cost models use remittance cost, the constrained dummy and
//! their interaction with monthly time effects.

use std::fmt;
use std::str::FromStr;

use shadowfx_core::econometrics::{RegressionSpec, TimeFe};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelId {
    Micro(u8),
    Cost(u8),
}

/// Every model id with its regressors beyond the two premium lags.
pub const MODELS: [(ModelId, &str); 10] = [
    (ModelId::Micro(1), "median_confirm_minutes"),
    (ModelId::Micro(2), "avg_fee_usd"),
    (ModelId::Micro(3), "n_transactions"),
    (ModelId::Micro(4), "btc_volatility"),
    (ModelId::Micro(5), "btc_return"),
    (ModelId::Micro(6), "btc_volatility, btc_return"),
    (ModelId::Cost(1), "remittance_cost_pct"),
    (ModelId::Cost(2), "remittance_cost_pct, constrained, remittance_cost_pct:constrained"),
    (ModelId::Cost(3), "remittance_cost_pct, constrained, freedom_score, remittance_cost_pct:constrained"),
    (
        ModelId::Cost(4),
        "remittance_cost_pct, constrained, freedom_score, depr_pct, remittance_cost_pct:constrained",
    ),
];

impl ModelId {
    pub fn default_time_fe(self) -> TimeFe {
        match self {
            ModelId::Micro(_) => TimeFe::Biweek,
            ModelId::Cost(_) => TimeFe::Month,
        }
    }

    /// Uses the model's own time effects unless `time_fe` is given.
    pub fn spec(self, time_fe: Option<TimeFe>) -> RegressionSpec {
        let base = RegressionSpec::new("premium_pct").lags(&[1, 2]);
        let base = match self {
            ModelId::Micro(1) => base.regressors(&["median_confirm_minutes"]),
            ModelId::Micro(2) => base.regressors(&["avg_fee_usd"]),
            ModelId::Micro(3) => base.regressors(&["n_transactions"]),
            ModelId::Micro(4) => base.regressors(&["btc_volatility"]),
            ModelId::Micro(5) => base.regressors(&["btc_return"]),
            ModelId::Micro(_) => base.regressors(&["btc_volatility", "btc_return"]),
            ModelId::Cost(1) => base.regressors(&["remittance_cost_pct"]),
            ModelId::Cost(k) => {
                let mut cols = vec!["remittance_cost_pct", "constrained"];
                if k >= 3 {
                    cols.push("freedom_score");
                }
                if k >= 4 {
                    cols.push("depr_pct");
                }
                base.regressors(&cols).interaction("remittance_cost_pct", "constrained")
            }
        };
        base.time_fe(time_fe.unwrap_or(self.default_time_fe()))
    }

    /// Whether the model uses the constrained dummy.
    pub fn uses_constraint(self) -> bool {
        matches!(self, ModelId::Cost(k) if k >= 2)
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelId::Micro(k) => write!(f, "micro-{k}"),
            ModelId::Cost(k) => write!(f, "cost-{k}"),
        }
    }
}

impl FromStr for ModelId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("unknown model `{s}`; expected micro-1..micro-6 or cost-1..cost-4");
        let (family, num) = s.split_once('-').ok_or_else(bad)?;
        let k: u8 = num.parse().map_err(|_| bad())?;
        match family {
            "micro" if (1..=6).contains(&k) => Ok(ModelId::Micro(k)),
            "cost" if (1..=4).contains(&k) => Ok(ModelId::Cost(k)),
            _ => Err(bad()),
        }
    }
}

/// Model table for `--help`.
pub fn model_help() -> String {
    let mut s = String::from(
        "Models (every model also includes L1.premium_pct and L2.premium_pct and currency fixed effects):\n",
    );
    for (id, regs) in MODELS {
        s.push_str(&format!("  {:<8} [{} effects] {regs}\n", id.to_string(), id.default_time_fe()));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_matches_specs() {
        for (id, regs) in MODELS {
            let terms = id.spec(None).term_names();
            let mut expect = vec!["L1.premium_pct".to_string(), "L2.premium_pct".to_string()];
            expect.extend(regs.split(", ").map(str::to_string));
            assert_eq!(terms, expect, "{id}");
            assert_eq!(id.to_string().parse::<ModelId>().unwrap(), id);
        }
    }

    #[test]
    fn unknown_ids_are_rejected() {
        for bad in ["micro-0", "micro-7", "cost-5", "cost", "macro-1", "cost-x"] {
            assert!(bad.parse::<ModelId>().is_err(), "{bad}");
        }
    }

    #[test]
    fn time_effects_default_per_family_and_override() {
        assert_eq!(ModelId::Micro(3).spec(None).time_fe, TimeFe::Biweek);
        assert_eq!(ModelId::Cost(2).spec(None).time_fe, TimeFe::Month);
        assert_eq!(ModelId::Cost(2).spec(Some(TimeFe::Biweek)).time_fe, TimeFe::Biweek);
    }
}
