//! Run configuration: a flat `key=value` file plus command-line overrides.
//!
//! Precedence, lowest to highest: built-in defaults, the `IMMUNOTRACK_SEED`
//! environment variable (seed only), the config file, `--set key=value`
//! overrides, then the dedicated flags (`--seed`, `--input`, ...). Unknown
//! keys are rejected so typos fail loudly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affinity::ScaleMode;
use crate::engine::EngineConfig;
use crate::ingest::{SynthKind, SynthSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("bad value for '{key}': {reason}")]
    BadValue { key: String, reason: String },
}

fn bad(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::BadValue { key: key.into(), reason: reason.into() }
}

/// Which scale rule the run uses; resolved against `scale_window` /
/// `scale_value` into an [`affinity::ScaleMode`](crate::affinity::ScaleMode).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleRule {
    Fixed,
    Rolling,
}

/// Every tunable for a run. Construct via [`RunConfig::default`] or
/// [`parse_config`]; all fields are validated together by [`RunConfig::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    // clonal engine
    pub pool_cap: usize,
    pub bind_threshold: f64,
    pub clone_factor: f64,
    pub mutation_sigma: f64,
    pub mut_frac_value: f64,
    pub mut_frac_extend: f64,
    pub mut_frac_shorten: f64,
    pub apoptosis_age: u32,
    pub max_age: usize,
    pub len_min: usize,
    pub len_max: usize,
    pub window: usize,
    pub seed: u64,
    // affinity scale
    pub scale_mode: ScaleRule,
    pub scale_window: usize,
    pub scale_value: f64,
    // long-term memory
    /// Signature quantization step; `None` resolves to 0.25 x the baseline
    /// (end-of-warmup) scale at run start.
    pub epsilon: Option<f64>,
    pub min_repeats: usize,
    pub max_pattern_len: usize,
    pub generalize_every: usize,
    // forecasting / evaluation
    pub forecast_threshold: f64,
    pub horizon: usize,
    pub warmup: usize,
    /// Zero-movement tolerance for directional scoring; `None` resolves to
    /// half the resolved epsilon.
    pub dir_epsilon: Option<f64>,
    pub forecast_include_pool: bool,
    // input / output
    pub input: Option<String>,
    pub output: Option<String>,
    pub synth_kind: Option<SynthKind>,
    pub synth_length: usize,
    pub synth_base: f64,
    pub synth_pattern: Vec<f64>,
    pub synth_noise: f64,
    pub synth_step: f64,
    // execution
    /// Engine worker threads; 0 means the library default pool. Never
    /// serialized: results are thread-count independent by construction,
    /// and reports must be byte-identical across parallelism settings.
    #[serde(skip)]
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            pool_cap: 200,
            bind_threshold: 0.5,
            clone_factor: 3.0,
            mutation_sigma: 0.5,
            mut_frac_value: 1.0 / 3.0,
            mut_frac_extend: 1.0 / 3.0,
            mut_frac_shorten: 1.0 / 3.0,
            apoptosis_age: 5,
            max_age: 50,
            len_min: 3,
            len_max: 12,
            window: 20,
            seed: 42,
            scale_mode: ScaleRule::Rolling,
            scale_window: 50,
            scale_value: 1.0,
            epsilon: None,
            min_repeats: 2,
            max_pattern_len: 10,
            generalize_every: 25,
            forecast_threshold: 0.5,
            horizon: 5,
            warmup: 60,
            dir_epsilon: None,
            forecast_include_pool: false,
            input: None,
            output: None,
            synth_kind: None,
            synth_length: 200,
            synth_base: 50.0,
            synth_pattern: vec![1.0, 1.0, -1.0, 2.0, -3.0],
            synth_noise: 0.1,
            synth_step: 1.0,
            threads: 0,
        }
    }
}

impl RunConfig {
    pub fn to_engine_config(&self) -> EngineConfig {
        EngineConfig {
            pool_cap: self.pool_cap,
            bind_threshold: self.bind_threshold,
            clone_factor: self.clone_factor,
            mutation_sigma: self.mutation_sigma,
            mut_fractions: [self.mut_frac_value, self.mut_frac_extend, self.mut_frac_shorten],
            apoptosis_age: self.apoptosis_age,
            max_age: self.max_age,
            len_min: self.len_min,
            len_max: self.len_max,
            window: self.window,
            seed: self.seed,
        }
    }

    pub fn scale(&self) -> ScaleMode {
        match self.scale_mode {
            ScaleRule::Fixed => ScaleMode::Fixed(self.scale_value),
            ScaleRule::Rolling => ScaleMode::Rolling { window: self.scale_window },
        }
    }

    pub fn synth_spec(&self) -> Option<SynthSpec> {
        self.synth_kind.map(|kind| SynthSpec {
            kind,
            length: self.synth_length,
            base: self.synth_base,
            pattern: self.synth_pattern.clone(),
            noise_stddev: self.synth_noise,
            step_stddev: self.synth_step,
        })
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            value.parse().map_err(|e| bad(key, format!("'{value}': {e}")))
        }

        match key {
            "pool_cap" => self.pool_cap = parse(key, value)?,
            "bind_threshold" => self.bind_threshold = parse(key, value)?,
            "clone_factor" => self.clone_factor = parse(key, value)?,
            "mutation_sigma" => self.mutation_sigma = parse(key, value)?,
            "mut_frac_value" => self.mut_frac_value = parse(key, value)?,
            "mut_frac_extend" => self.mut_frac_extend = parse(key, value)?,
            "mut_frac_shorten" => self.mut_frac_shorten = parse(key, value)?,
            "apoptosis_age" => self.apoptosis_age = parse(key, value)?,
            "max_age" => self.max_age = parse(key, value)?,
            "len_min" => self.len_min = parse(key, value)?,
            "len_max" => self.len_max = parse(key, value)?,
            "window" => self.window = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "scale_mode" => {
                self.scale_mode = match value {
                    "fixed" => ScaleRule::Fixed,
                    "rolling" => ScaleRule::Rolling,
                    other => return Err(bad(key, format!("'{other}' (fixed|rolling)"))),
                }
            }
            "scale_window" => self.scale_window = parse(key, value)?,
            "scale_value" => self.scale_value = parse(key, value)?,
            "epsilon" => {
                self.epsilon = match value {
                    "auto" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "min_repeats" => self.min_repeats = parse(key, value)?,
            "max_pattern_len" => self.max_pattern_len = parse(key, value)?,
            "generalize_every" => self.generalize_every = parse(key, value)?,
            "forecast_threshold" => self.forecast_threshold = parse(key, value)?,
            "horizon" => self.horizon = parse(key, value)?,
            "warmup" => self.warmup = parse(key, value)?,
            "dir_epsilon" => {
                self.dir_epsilon = match value {
                    "auto" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "forecast_include_pool" => self.forecast_include_pool = parse(key, value)?,
            "input" => self.input = Some(value.to_string()),
            "output" => self.output = Some(value.to_string()),
            "synth_kind" => {
                self.synth_kind = Some(value.parse::<SynthKind>().map_err(|e| bad(key, e))?)
            }
            "synth_length" => self.synth_length = parse(key, value)?,
            "synth_base" => self.synth_base = parse(key, value)?,
            "synth_pattern" => {
                let pattern: Result<Vec<f64>, _> = value
                    .split(',')
                    .map(|v| v.trim().parse::<f64>())
                    .collect();
                self.synth_pattern =
                    pattern.map_err(|e| bad(key, format!("'{value}': {e}")))?;
            }
            "synth_noise" => self.synth_noise = parse(key, value)?,
            "synth_step" => self.synth_step = parse(key, value)?,
            "threads" => self.threads = parse(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.pool_cap < 1 {
            return Err(bad("pool_cap", "must be >= 1"));
        }
        if !(self.bind_threshold > 0.0 && self.bind_threshold < 1.0) {
            return Err(bad("bind_threshold", "must be in (0,1)"));
        }
        if !self.clone_factor.is_finite() || self.clone_factor <= 0.0 {
            return Err(bad("clone_factor", "must be finite and > 0"));
        }
        if !self.mutation_sigma.is_finite() || self.mutation_sigma <= 0.0 {
            return Err(bad("mutation_sigma", "must be finite and > 0"));
        }
        let fracs = [self.mut_frac_value, self.mut_frac_extend, self.mut_frac_shorten];
        if fracs.iter().any(|f| !f.is_finite() || *f <= 0.0) {
            return Err(bad(
                "mut_frac_value/mut_frac_extend/mut_frac_shorten",
                "each fraction must be > 0",
            ));
        }
        let sum: f64 = fracs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(bad(
                "mut_frac_value/mut_frac_extend/mut_frac_shorten",
                format!("fractions sum to {sum}, expected 1"),
            ));
        }
        if self.apoptosis_age < 1 {
            return Err(bad("apoptosis_age", "must be >= 1"));
        }
        if self.max_age <= self.apoptosis_age as usize {
            return Err(bad("max_age", "must exceed apoptosis_age"));
        }
        if self.len_min < 1 {
            return Err(bad("len_min", "must be >= 1"));
        }
        if self.len_min > self.len_max {
            return Err(bad("len_max", "must be >= len_min"));
        }
        if self.len_max > self.window {
            return Err(bad("len_max", "must not exceed window"));
        }
        if self.window < 1 {
            return Err(bad("window", "must be >= 1"));
        }
        if self.scale_window < 1 {
            return Err(bad("scale_window", "must be >= 1"));
        }
        if !self.scale_value.is_finite() || self.scale_value <= 0.0 {
            return Err(bad("scale_value", "must be finite and > 0"));
        }
        if let Some(e) = self.epsilon {
            if !e.is_finite() || e <= 0.0 {
                return Err(bad("epsilon", "must be finite and > 0 (or 'auto')"));
            }
        }
        if self.min_repeats < 2 {
            return Err(bad("min_repeats", "must be >= 2"));
        }
        if self.max_pattern_len < 1 {
            return Err(bad("max_pattern_len", "must be >= 1"));
        }
        if self.generalize_every < 1 {
            return Err(bad("generalize_every", "must be >= 1"));
        }
        if !(self.forecast_threshold > 0.0 && self.forecast_threshold < 1.0) {
            return Err(bad("forecast_threshold", "must be in (0,1)"));
        }
        if self.horizon < 1 {
            return Err(bad("horizon", "must be >= 1"));
        }
        if self.warmup < self.window + 1 {
            return Err(bad("warmup", format!("must be >= window + 1 = {}", self.window + 1)));
        }
        if let Some(e) = self.dir_epsilon {
            if !e.is_finite() || e < 0.0 {
                return Err(bad("dir_epsilon", "must be finite and >= 0 (or 'auto')"));
            }
        }
        if self.input.is_some() && self.synth_kind.is_some() {
            return Err(bad("input", "cannot combine with synth_kind; pick one source"));
        }
        Ok(())
    }
}

/// Parse the flat config file and apply `key=value` overrides on top.
///
/// `#` starts a comment (whole line or trailing); blank lines are skipped.
/// `env_seed` is the lowest-priority seed source, below the file.
pub fn parse_config(
    text: &str,
    overrides: &[String],
    env_seed: Option<u64>,
) -> Result<RunConfig, ConfigError> {
    let mut config = RunConfig::default();
    if let Some(seed) = env_seed {
        config.seed = seed;
    }
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(line, "expected key=value"))?;
        config.set(key.trim(), value.trim())?;
    }
    apply_overrides(&mut config, overrides)?;
    Ok(config)
}

/// Apply `key=value` overrides to an existing config and re-validate.
pub fn apply_overrides(config: &mut RunConfig, overrides: &[String]) -> Result<(), ConfigError> {
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| bad(item, "expected key=value"))?;
        config.set(key.trim(), value.trim())?;
    }
    config.validate()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse_config("", &[], None).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.pool_cap, 200);
        assert_eq!(c.window, 20);
        assert_eq!(c.seed, 42);
        assert_eq!(c.warmup, 60);
    }

    #[test]
    fn flags_override_file() {
        let c = parse_config("pool_cap=100\n", &["pool_cap=50".into()], None).unwrap();
        assert_eq!(c.pool_cap, 50);
    }

    #[test]
    fn fraction_sum_is_checked() {
        let err = parse_config(
            "mut_frac_value=0.5\nmut_frac_extend=0.5\nmut_frac_shorten=0.5\n",
            &[],
            None,
        )
        .unwrap_err();
        match err {
            ConfigError::BadValue { key, reason } => {
                assert!(key.contains("mut_frac"));
                assert!(reason.contains("1.5"));
            }
            other => panic!("expected BadValue, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(
            parse_config("pool_size=10\n", &[], None),
            Err(ConfigError::UnknownKey(k)) if k == "pool_size"
        ));
    }

    #[test]
    fn bad_value_names_key() {
        match parse_config("pool_cap=banana\n", &[], None).unwrap_err() {
            ConfigError::BadValue { key, .. } => assert_eq!(key, "pool_cap"),
            other => panic!("expected BadValue, got {other:?}"),
        }
    }

    #[test]
    fn comments_and_blanks_are_skipped() {
        let text = "# full line comment\n\npool_cap=77  # trailing comment\n";
        let c = parse_config(text, &[], None).unwrap();
        assert_eq!(c.pool_cap, 77);
    }

    #[test]
    fn seed_priority_env_lowest() {
        let c = parse_config("", &[], Some(7)).unwrap();
        assert_eq!(c.seed, 7);
        let c = parse_config("seed=8\n", &[], Some(7)).unwrap();
        assert_eq!(c.seed, 8);
        let c = parse_config("seed=8\n", &["seed=9".into()], Some(7)).unwrap();
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn epsilon_auto_and_explicit() {
        assert_eq!(parse_config("", &[], None).unwrap().epsilon, None);
        assert_eq!(
            parse_config("epsilon=0.4\n", &[], None).unwrap().epsilon,
            Some(0.4)
        );
        assert_eq!(
            parse_config("epsilon=0.4\n", &["epsilon=auto".into()], None)
                .unwrap()
                .epsilon,
            None
        );
        assert!(parse_config("epsilon=0\n", &[], None).is_err());
    }

    #[test]
    fn synth_pattern_parses_csv_floats() {
        let c = parse_config("synth_pattern=1, 1 ,-1,2,-3\n", &[], None).unwrap();
        assert_eq!(c.synth_pattern, vec![1.0, 1.0, -1.0, 2.0, -3.0]);
        assert!(parse_config("synth_pattern=1,x\n", &[], None).is_err());
    }

    #[test]
    fn input_and_synth_conflict() {
        let err = parse_config("input=a.csv\nsynth_kind=constant\n", &[], None).unwrap_err();
        assert!(matches!(err, ConfigError::BadValue { key, .. } if key == "input"));
    }

    #[test]
    fn warmup_must_cover_window() {
        assert!(parse_config("warmup=20\n", &[], None).is_err()); // window 20 needs >= 21
        assert!(parse_config("warmup=21\nwindow=20\n", &[], None).is_ok());
    }

    #[test]
    fn engine_config_mapping() {
        let c = parse_config("pool_cap=10\nlen_min=4\n", &[], None).unwrap();
        let e = c.to_engine_config();
        assert_eq!(e.pool_cap, 10);
        assert_eq!(e.len_min, 4);
        assert!(e.validate().is_ok());
    }
}
