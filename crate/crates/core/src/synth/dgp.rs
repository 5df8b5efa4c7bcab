//! Plain-text `key = value` configuration for the generators.
//!
//! Scalar keys: `seed`, `n_currencies`, `n_weeks`, `noise`,
//! `constrained_share`, `outlier_rate`, `switch_share`, `truncation`,
//! `burn_in`, `fe_scale`, `n_buckets`, `max_trades_per_bucket`. Every key in
//! [`COEFFICIENT_DEFAULTS`] is also accepted. Lines starting with `#` are
//! comments.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::SynthError;

/// Coefficient keys and their defaults.
///
/// Friction DGP: `beta0` (remittance cost), `beta1` (constrained dummy),
/// `beta2` (their interaction), `beta3` (freedom score), `beta4`
/// (depreciation), `gamma0`/`gamma1` (premium lags 1 and 2), `alpha1`
/// (AR(1) of log remittance cost). Micro DGP: `micro_confirm`, `micro_fee`,
/// `micro_ntx`, `micro_vol`, `micro_ret`. VAR DGP with variables
/// (depreciation, premium): `var_a11`, `var_a12`, `var_a21`, `var_a22`, and
/// `var_a12_constrained` replacing `var_a12` for constrained units.
pub const COEFFICIENT_DEFAULTS: [(&str, f64); 17] = [
    ("beta0", 0.002),
    ("beta1", 0.5),
    ("beta2", 0.99),
    ("beta3", 0.0),
    ("beta4", 0.0),
    ("gamma0", 0.3),
    ("gamma1", 0.1),
    ("alpha1", 0.9),
    ("micro_confirm", 0.0),
    ("micro_fee", 0.0),
    ("micro_ntx", 0.0),
    ("micro_vol", 2.0),
    ("micro_ret", -1.0),
    ("var_a11", 0.2),
    ("var_a12", 0.2),
    ("var_a21", 0.0),
    ("var_a22", 0.5),
];

const EXTRA_COEFFICIENTS: [(&str, f64); 1] = [("var_a12_constrained", 0.0)];

#[derive(Debug, Clone, PartialEq)]
pub struct DgpSpec {
    pub seed: u64,
    pub n_currencies: usize,
    pub n_weeks: usize,
    pub coefficients: BTreeMap<String, f64>,
    /// Standard deviation of the structural errors.
    pub noise: f64,
    pub constrained_share: f64,
    pub outlier_rate: f64,
    /// Share of friction-panel currencies with one regime switch.
    pub switch_share: f64,
    /// Share of VAR units with a randomly truncated start.
    pub truncation: f64,
    /// Simulated periods discarded before the recorded sample.
    pub burn_in: usize,
    /// Standard deviation of unit fixed effects.
    pub fe_scale: f64,
    /// (currency, day) buckets for the trade generator.
    pub n_buckets: usize,
    pub max_trades_per_bucket: usize,
}

impl Default for DgpSpec {
    fn default() -> Self {
        DgpSpec {
            seed: 42,
            n_currencies: 80,
            n_weeks: 300,
            coefficients: COEFFICIENT_DEFAULTS
                .iter()
                .chain(EXTRA_COEFFICIENTS.iter())
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
            noise: 1.0,
            constrained_share: 0.3,
            outlier_rate: 0.05,
            switch_share: 0.25,
            truncation: 0.0,
            burn_in: 50,
            fe_scale: 2.0,
            n_buckets: 10_000,
            max_trades_per_bucket: 8,
        }
    }
}

impl DgpSpec {
    pub fn coef(&self, key: &str) -> f64 {
        self.coefficients.get(key).copied().unwrap_or_else(|| panic!("unknown coefficient `{key}`"))
    }

    pub fn with_coef(mut self, key: &str, value: f64) -> Self {
        assert!(self.coefficients.contains_key(key), "unknown coefficient `{key}`");
        self.coefficients.insert(key.to_string(), value);
        self
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        for (k, v) in &self.coefficients {
            if !v.is_finite() {
                return Err(SynthError::Spec(format!("coefficient `{k}` is not finite")));
            }
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(SynthError::Spec("noise must be a finite value ≥ 0".into()));
        }
        if !(self.fe_scale >= 0.0 && self.fe_scale.is_finite()) {
            return Err(SynthError::Spec("fe_scale must be a finite value ≥ 0".into()));
        }
        for (name, v) in [
            ("constrained_share", self.constrained_share),
            ("outlier_rate", self.outlier_rate),
            ("switch_share", self.switch_share),
            ("truncation", self.truncation),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SynthError::Spec(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.n_currencies == 0 || self.n_weeks == 0 {
            return Err(SynthError::Spec("n_currencies and n_weeks must be positive".into()));
        }
        if self.max_trades_per_bucket == 0 {
            return Err(SynthError::Spec("max_trades_per_bucket must be positive".into()));
        }
        Ok(())
    }

    /// Canonical text form; parsing it gives back the same spec.
    pub fn to_config(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for DgpSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "n_currencies = {}", self.n_currencies)?;
        writeln!(f, "n_weeks = {}", self.n_weeks)?;
        writeln!(f, "noise = {}", self.noise)?;
        writeln!(f, "constrained_share = {}", self.constrained_share)?;
        writeln!(f, "outlier_rate = {}", self.outlier_rate)?;
        writeln!(f, "switch_share = {}", self.switch_share)?;
        writeln!(f, "truncation = {}", self.truncation)?;
        writeln!(f, "burn_in = {}", self.burn_in)?;
        writeln!(f, "fe_scale = {}", self.fe_scale)?;
        writeln!(f, "n_buckets = {}", self.n_buckets)?;
        writeln!(f, "max_trades_per_bucket = {}", self.max_trades_per_bucket)?;
        for (k, v) in &self.coefficients {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, SynthError> {
    value.parse().map_err(|_| SynthError::Parse { line, reason: format!("bad value `{value}` for `{key}`") })
}

impl FromStr for DgpSpec {
    type Err = SynthError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut spec = DgpSpec::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| SynthError::Parse { line, reason: "expected `key = value`".into() })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "seed" => spec.seed = parse_value(line, key, value)?,
                "n_currencies" => spec.n_currencies = parse_value(line, key, value)?,
                "n_weeks" => spec.n_weeks = parse_value(line, key, value)?,
                "noise" => spec.noise = parse_value(line, key, value)?,
                "constrained_share" => spec.constrained_share = parse_value(line, key, value)?,
                "outlier_rate" => spec.outlier_rate = parse_value(line, key, value)?,
                "switch_share" => spec.switch_share = parse_value(line, key, value)?,
                "truncation" => spec.truncation = parse_value(line, key, value)?,
                "burn_in" => spec.burn_in = parse_value(line, key, value)?,
                "fe_scale" => spec.fe_scale = parse_value(line, key, value)?,
                "n_buckets" => spec.n_buckets = parse_value(line, key, value)?,
                "max_trades_per_bucket" => spec.max_trades_per_bucket = parse_value(line, key, value)?,
                k if spec.coefficients.contains_key(k) => {
                    let v = parse_value(line, key, value)?;
                    spec.coefficients.insert(k.to_string(), v);
                }
                other => return Err(SynthError::Parse { line, reason: format!("unknown key `{other}`") }),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_text() {
        let spec = DgpSpec { seed: 9, noise: 0.25, ..DgpSpec::default() }.with_coef("beta2", 0.5);
        let back: DgpSpec = spec.to_config().parse().unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn parses_overrides_and_rejects_bad_lines() {
        let s: DgpSpec = "# comment\nseed = 3\nbeta0 = 0.1  # trailing\n\n".parse().unwrap();
        assert_eq!(s.seed, 3);
        assert_eq!(s.coef("beta0"), 0.1);
        assert!(matches!("bogus = 1".parse::<DgpSpec>(), Err(SynthError::Parse { line: 1, .. })));
        assert!(matches!("seed 1".parse::<DgpSpec>(), Err(SynthError::Parse { .. })));
        assert!(matches!("noise = -1".parse::<DgpSpec>(), Err(SynthError::Spec(_))));
        assert!(matches!("beta0 = inf".parse::<DgpSpec>(), Err(SynthError::Spec(_))));
        assert!(matches!("outlier_rate = 1.5".parse::<DgpSpec>(), Err(SynthError::Spec(_))));
    }
}
