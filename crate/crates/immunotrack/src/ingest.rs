//! Price series ingestion: CSV loading, movement deltas, antigen windows,
//! and deterministic synthetic series for testing.
//!
//! Time is a plain period index; calendar labels are carried as opaque
//! strings. Movements are raw price differences, not returns.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum IngestError {
    /// Bad header or wrong column count.
    #[error("malformed csv: {0}")]
    MalformedCsv(String),
    /// Price field failed to parse, is non-finite, or is not strictly positive.
    #[error("bad price: {0}")]
    BadPrice(String),
    /// Fewer than two usable rows / periods.
    #[error("too short: {0}")]
    TooShort(String),
    /// Antigen window does not fit inside the movement history.
    #[error("window out of range: {0}")]
    WindowOutOfRange(String),
    /// Synthetic generator parameters are unusable.
    #[error("bad params: {0}")]
    BadParams(String),
    /// Series-level invariant violated (label/price length mismatch etc.).
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    /// Movement vector invariant violated (empty or non-finite entries).
    #[error("invalid movements: {0}")]
    InvalidMovements(String),
}

/// An ordered price series: one opaque time label and one strictly
/// positive finite price per period.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    labels: Vec<String>,
    prices: Vec<f64>,
}

impl PriceSeries {
    pub fn new(labels: Vec<String>, prices: Vec<f64>) -> Result<Self, IngestError> {
        if labels.len() != prices.len() {
            return Err(IngestError::InvalidSeries(format!(
                "{} labels vs {} prices",
                labels.len(),
                prices.len()
            )));
        }
        if prices.len() < 2 {
            return Err(IngestError::TooShort(format!(
                "need at least 2 periods, got {}",
                prices.len()
            )));
        }
        for (i, &p) in prices.iter().enumerate() {
            if !p.is_finite() || p <= 0.0 {
                return Err(IngestError::BadPrice(format!(
                    "price {p} at row {i} must be finite and > 0"
                )));
            }
        }
        Ok(Self { labels, prices })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: length >= 2
    }

    /// Render back to the CSV interchange format (`label,price` header).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,price\n");
        for (label, price) in self.labels.iter().zip(&self.prices) {
            out.push_str(label);
            out.push(',');
            out.push_str(&price.to_string());
            out.push('\n');
        }
        out
    }
}

/// An ordered vector of price deltas (currency units per period).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MovementVector(Vec<f64>);

impl MovementVector {
    pub fn new(values: Vec<f64>) -> Result<Self, IngestError> {
        if values.is_empty() {
            return Err(IngestError::InvalidMovements("empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(IngestError::InvalidMovements(format!("non-finite entry {v}")));
        }
        Ok(Self(values))
    }

    /// Internal constructor for values already known finite and non-empty.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        debug_assert!(!values.is_empty() && values.iter().all(|v| v.is_finite()));
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Deref for MovementVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// A window of the `w` most recent price movements, anchored at price
/// index `anchor` (the movement ending at `anchor` is the last entry).
#[derive(Debug, Clone, PartialEq)]
pub struct Antigen {
    pub anchor: usize,
    pub movements: MovementVector,
}

/// Parse the `label,price` CSV interchange format.
///
/// Strict by design: the header must be exactly `label,price`, every row
/// exactly two comma-separated fields, prices plain decimal literals.
pub fn load_series(text: &str) -> Result<PriceSeries, IngestError> {
    let mut lines = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l));
    match lines.next() {
        Some("label,price") => {}
        Some(other) => {
            return Err(IngestError::MalformedCsv(format!(
                "expected header 'label,price', got '{other}'"
            )))
        }
        None => return Err(IngestError::MalformedCsv("empty input".into())),
    }

    let mut labels = Vec::new();
    let mut prices = Vec::new();
    for (row, line) in lines.enumerate() {
        let mut fields = line.split(',');
        let label = fields.next().unwrap_or_default();
        let price_field = match (fields.next(), fields.next()) {
            (Some(p), None) => p,
            _ => {
                return Err(IngestError::MalformedCsv(format!(
                    "row {}: expected 2 columns, got '{line}'",
                    row + 1
                )))
            }
        };
        let price: f64 = price_field.parse().map_err(|_| {
            IngestError::BadPrice(format!("row {}: unparseable price '{price_field}'", row + 1))
        })?;
        if !price.is_finite() || price <= 0.0 {
            return Err(IngestError::BadPrice(format!(
                "row {}: price {price} must be finite and > 0",
                row + 1
            )));
        }
        labels.push(label.to_string());
        prices.push(price);
    }

    if prices.len() < 2 {
        return Err(IngestError::TooShort(format!(
            "need at least 2 rows, got {}",
            prices.len()
        )));
    }
    PriceSeries::new(labels, prices)
}

/// Derive the movement vector: `result[i] = prices[i+1] - prices[i]`.
pub fn to_movements(series: &PriceSeries) -> MovementVector {
    let prices = series.prices();
    MovementVector::from_raw(prices.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Slice the `w` movements ending at price index `anchor` out of the full
/// movement history (movement index `j` is the delta from price `j` to
/// price `j+1`).
pub fn make_antigen(
    movements: &MovementVector,
    anchor: usize,
    w: usize,
) -> Result<Antigen, IngestError> {
    if w < 1 {
        return Err(IngestError::WindowOutOfRange("window length must be >= 1".into()));
    }
    if anchor < w || anchor > movements.len() {
        return Err(IngestError::WindowOutOfRange(format!(
            "anchor {anchor} with window {w} over {} movements",
            movements.len()
        )));
    }
    Ok(Antigen {
        anchor,
        movements: MovementVector::from_raw(movements[anchor - w..anchor].to_vec()),
    })
}

/// Which synthetic generator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    Constant,
    Periodic,
    PeriodicNoisy,
    RandomWalk,
}

impl std::str::FromStr for SynthKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "constant" => Ok(Self::Constant),
            "periodic" => Ok(Self::Periodic),
            "periodic_noisy" => Ok(Self::PeriodicNoisy),
            "random_walk" => Ok(Self::RandomWalk),
            other => Err(format!(
                "unknown kind '{other}' (constant|periodic|periodic_noisy|random_walk)"
            )),
        }
    }
}

/// Synthetic generator parameters. `pattern` is used by the periodic
/// kinds, `noise_stddev` by `periodic_noisy`, `step_stddev` by `random_walk`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub length: usize,
    pub base: f64,
    pub pattern: Vec<f64>,
    pub noise_stddev: f64,
    pub step_stddev: f64,
}

/// Generate a synthetic price series; a pure function of `(spec, seed)`.
///
/// A delta pattern that drives the price to zero or below within the
/// requested length is an error, never silently repaired.
pub fn synth_series(spec: &SynthSpec, seed: u64) -> Result<PriceSeries, IngestError> {
    if spec.length < 2 {
        return Err(IngestError::BadParams(format!(
            "length {} must be >= 2",
            spec.length
        )));
    }
    if !spec.base.is_finite() || spec.base <= 0.0 {
        return Err(IngestError::BadParams(format!(
            "base price {} must be finite and > 0",
            spec.base
        )));
    }
    let needs_pattern = matches!(spec.kind, SynthKind::Periodic | SynthKind::PeriodicNoisy);
    if needs_pattern && (spec.pattern.is_empty() || spec.pattern.iter().any(|d| !d.is_finite())) {
        return Err(IngestError::BadParams("pattern must be non-empty and finite".into()));
    }
    if !spec.noise_stddev.is_finite() || spec.noise_stddev < 0.0 {
        return Err(IngestError::BadParams(format!(
            "noise stddev {} must be finite and >= 0",
            spec.noise_stddev
        )));
    }
    if !spec.step_stddev.is_finite() || spec.step_stddev < 0.0 {
        return Err(IngestError::BadParams(format!(
            "step stddev {} must be finite and >= 0",
            spec.step_stddev
        )));
    }

    let mut stream = rng::synth_stream(seed);
    let noise = Normal::new(0.0, spec.noise_stddev).expect("validated stddev");
    let step = Normal::new(0.0, spec.step_stddev).expect("validated stddev");

    let mut prices = Vec::with_capacity(spec.length);
    prices.push(spec.base);
    for i in 1..spec.length {
        let delta = match spec.kind {
            SynthKind::Constant => 0.0,
            SynthKind::Periodic => spec.pattern[(i - 1) % spec.pattern.len()],
            SynthKind::PeriodicNoisy => {
                spec.pattern[(i - 1) % spec.pattern.len()] + noise.sample(&mut stream)
            }
            SynthKind::RandomWalk => step.sample(&mut stream),
        };
        let next = prices[i - 1] + delta;
        if !next.is_finite() || next <= 0.0 {
            return Err(IngestError::BadParams(format!(
                "price became {next} at period {i}; deltas must keep the price > 0"
            )));
        }
        prices.push(next);
    }

    let width = spec.length.to_string().len();
    let labels = (0..spec.length).map(|i| format!("t{i:0width$}")).collect();
    PriceSeries::new(labels, prices)
}

/// Empirical mean and (population) standard deviation of a movement slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovementStats {
    pub mean: f64,
    pub stddev: f64,
}

impl MovementStats {
    pub fn from_slice(movements: &[f64]) -> Self {
        if movements.is_empty() {
            return Self { mean: 0.0, stddev: 0.0 };
        }
        let n = movements.len() as f64;
        let mean = movements.iter().sum::<f64>() / n;
        let var = movements.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / n;
        Self { mean, stddev: var.sqrt() }
    }
}

// Small helper kept here so both the engine and the walk driver can reuse it.
pub(crate) fn sample_normal(mean: f64, stddev: f64, stream: &mut impl Rng) -> f64 {
    Normal::new(mean, stddev).expect("stddev >= 0").sample(stream)
}
