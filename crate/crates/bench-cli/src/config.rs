//! Benchmark configuration: defaults, presets and a `key = value` file
//! format.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Estimator {
    #[serde(rename = "pem-or")]
    PemOracle,
    #[serde(rename = "pem-bic")]
    PemBic,
    #[serde(rename = "eb")]
    Eb,
    #[serde(rename = "fb")]
    Fb,
}

impl Estimator {
    pub const ALL: [Estimator; 4] =
        [Estimator::PemOracle, Estimator::PemBic, Estimator::Eb, Estimator::Fb];

    pub fn tag(&self) -> &'static str {
        match self {
            Estimator::PemOracle => "pem-or",
            Estimator::PemBic => "pem-bic",
            Estimator::Eb => "eb",
            Estimator::Fb => "fb",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Estimator {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s.trim() {
            "pem-or" => Ok(Estimator::PemOracle),
            "pem-bic" => Ok(Estimator::PemBic),
            "eb" => Ok(Estimator::Eb),
            "fb" => Ok(Estimator::Fb),
            other => Err(ConfigError::BadValue {
                key: "estimators".into(),
                value: other.into(),
                expected: "one of pem-or, pem-bic, eb, fb".into(),
            }),
        }
    }
}

/// Confidence-set construction applied to the PEM estimators; EB and FB
/// each have a single intrinsic set and ignore this selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConfidenceVariant {
    #[serde(rename = "asymp")]
    Asymptotic,
    #[serde(rename = "lik")]
    Likelihood,
}

impl ConfidenceVariant {
    pub fn tag(&self) -> &'static str {
        match self {
            ConfidenceVariant::Asymptotic => "asymp",
            ConfidenceVariant::Likelihood => "lik",
        }
    }
}

impl fmt::Display for ConfidenceVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ConfidenceVariant {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s.trim() {
            "asymp" => Ok(ConfidenceVariant::Asymptotic),
            "lik" => Ok(ConfidenceVariant::Likelihood),
            other => Err(ConfigError::BadValue {
                key: "confidence_variants".into(),
                value: other.into(),
                expected: "one of asymp, lik".into(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sigma2Mode {
    #[serde(rename = "estimated")]
    Estimated,
    #[serde(rename = "true")]
    True,
}

impl fmt::Display for Sigma2Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sigma2Mode::Estimated => "estimated",
            Sigma2Mode::True => "true",
        })
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value {value:?} for {key}: expected {expected}")]
    BadValue { key: String, value: String, expected: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Full description of one Monte Carlo study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    /// Number of Monte Carlo datasets.
    pub runs: usize,
    /// Data length per run.
    pub t: usize,
    /// Impulse-response length.
    pub n: usize,
    /// True system order.
    pub order: usize,
    pub pole_radius: f64,
    /// Input bandwidth as a fraction of the Nyquist frequency.
    pub band: f64,
    pub snr: f64,
    /// Confidence level of the sets.
    pub alpha: f64,
    /// Samples per confidence set.
    pub samples_n: usize,
    /// Burn-in of the MCMC chains.
    pub fb_burn_in: usize,
    pub bic_order_min: usize,
    pub bic_order_max: usize,
    pub master_seed: u64,
    pub estimators: Vec<Estimator>,
    pub confidence_variants: Vec<ConfidenceVariant>,
    pub sigma2_mode: Sigma2Mode,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            runs: 100,
            t: 500,
            n: 100,
            order: 30,
            pole_radius: 0.95,
            band: 0.8,
            snr: 1.0,
            alpha: 0.95,
            samples_n: 7200,
            fb_burn_in: 3000,
            bic_order_min: 2,
            bic_order_max: 30,
            master_seed: 0,
            estimators: Estimator::ALL.to_vec(),
            confidence_variants: vec![
                ConfidenceVariant::Asymptotic,
                ConfidenceVariant::Likelihood,
            ],
            sigma2_mode: Sigma2Mode::Estimated,
        }
    }
}

impl BenchConfig {
    /// Full-size study (100 runs, 7200 samples per set).
    pub fn preset_paper() -> Self {
        BenchConfig::default()
    }

    /// Reduced study sized for a single workstation: 20 runs, 2000 samples
    /// per set, shorter chains.
    pub fn preset_desk() -> Self {
        BenchConfig {
            runs: 20,
            samples_n: 2000,
            fb_burn_in: 1000,
            ..BenchConfig::default()
        }
    }

    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        match name {
            "desk" => Ok(Self::preset_desk()),
            "paper" => Ok(Self::preset_paper()),
            other => Err(ConfigError::BadValue {
                key: "preset".into(),
                value: other.into(),
                expected: "desk or paper".into(),
            }),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.runs == 0 {
            return Err(ConfigError::Invalid("runs must be positive".into()));
        }
        if self.t <= self.n {
            return Err(ConfigError::Invalid(format!(
                "data length {} must exceed impulse length {}",
                self.t, self.n
            )));
        }
        if self.order == 0 {
            return Err(ConfigError::Invalid("order must be positive".into()));
        }
        if !(self.pole_radius > 0.0 && self.pole_radius < 1.0) {
            return Err(ConfigError::Invalid("pole_radius must be in (0, 1)".into()));
        }
        if !(self.band > 0.0 && self.band <= 1.0) {
            return Err(ConfigError::Invalid("band must be in (0, 1]".into()));
        }
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            return Err(ConfigError::Invalid("snr must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ConfigError::Invalid("alpha must be in (0, 1)".into()));
        }
        if self.samples_n == 0 {
            return Err(ConfigError::Invalid("samples_n must be positive".into()));
        }
        if self.bic_order_min == 0 || self.bic_order_min > self.bic_order_max {
            return Err(ConfigError::Invalid("bad bic order range".into()));
        }
        if self.estimators.is_empty() {
            return Err(ConfigError::Invalid("no estimators selected".into()));
        }
        Ok(())
    }

    /// Parse the `key = value` config format. Blank lines and `#` comments
    /// are skipped; later assignments override earlier ones; keys not listed
    /// keep their `base` values.
    pub fn parse_str(text: &str, base: BenchConfig) -> Result<Self, ConfigError> {
        let mut cfg = base;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            };
            let stripped = stripped.trim();
            if stripped.is_empty() {
                continue;
            }
            let (key, value) = stripped
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line, text: raw.into() })?;
            let key = key.trim();
            let value = value.trim();
            apply_key(&mut cfg, key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Render as the same `key = value` format `parse_str` reads.
    pub fn to_config_string(&self) -> String {
        let estimators: Vec<&str> = self.estimators.iter().map(|e| e.tag()).collect();
        let variants: Vec<&str> = self.confidence_variants.iter().map(|v| v.tag()).collect();
        format!(
            "runs = {}\nt = {}\nn = {}\norder = {}\npole_radius = {}\nband = {}\nsnr = {}\n\
             alpha = {}\nsamples_n = {}\nfb_burn_in = {}\nbic_order_min = {}\n\
             bic_order_max = {}\nmaster_seed = {}\nestimators = {}\n\
             confidence_variants = {}\nsigma2_mode = {}\n",
            self.runs,
            self.t,
            self.n,
            self.order,
            self.pole_radius,
            self.band,
            self.snr,
            self.alpha,
            self.samples_n,
            self.fb_burn_in,
            self.bic_order_min,
            self.bic_order_max,
            self.master_seed,
            estimators.join(","),
            variants.join(","),
            self.sigma2_mode,
        )
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str, expected: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
        expected: expected.into(),
    })
}

fn apply_key(cfg: &mut BenchConfig, key: &str, value: &str) -> Result<(), ConfigError> {
    match key {
        "runs" => cfg.runs = parse_num(key, value, "positive integer")?,
        "t" => cfg.t = parse_num(key, value, "positive integer")?,
        "n" => cfg.n = parse_num(key, value, "positive integer")?,
        "order" => cfg.order = parse_num(key, value, "positive integer")?,
        "pole_radius" => cfg.pole_radius = parse_num(key, value, "number in (0, 1)")?,
        "band" => cfg.band = parse_num(key, value, "number in (0, 1]")?,
        "snr" => cfg.snr = parse_num(key, value, "positive number")?,
        "alpha" => cfg.alpha = parse_num(key, value, "number in (0, 1)")?,
        "samples_n" => cfg.samples_n = parse_num(key, value, "positive integer")?,
        "fb_burn_in" => cfg.fb_burn_in = parse_num(key, value, "integer")?,
        "bic_order_min" => cfg.bic_order_min = parse_num(key, value, "positive integer")?,
        "bic_order_max" => cfg.bic_order_max = parse_num(key, value, "positive integer")?,
        "master_seed" => cfg.master_seed = parse_num(key, value, "u64")?,
        "estimators" => {
            cfg.estimators = parse_list(value)?;
        }
        "confidence_variants" => {
            cfg.confidence_variants = parse_list(value)?;
        }
        "sigma2_mode" => {
            cfg.sigma2_mode = match value {
                "estimated" => Sigma2Mode::Estimated,
                "true" => Sigma2Mode::True,
                other => {
                    return Err(ConfigError::BadValue {
                        key: key.into(),
                        value: other.into(),
                        expected: "estimated or true".into(),
                    })
                }
            };
        }
        other => return Err(ConfigError::UnknownKey(other.into())),
    }
    Ok(())
}

/// Parse a comma-separated list, dropping duplicates while keeping first
/// occurrence order.
pub fn parse_list<T: FromStr<Err = ConfigError> + PartialEq>(
    value: &str,
) -> Result<Vec<T>, ConfigError> {
    let mut out = Vec::new();
    for part in value.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let item = part.parse()?;
        if !out.contains(&item) {
            out.push(item);
        }
    }
    Ok(out)
}
