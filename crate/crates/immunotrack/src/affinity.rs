//! Tracker/antigen binding.
//!
//! The strength of a bind is `exp(-d)` where `d` is the RMS difference
//! between the tracker's movements and the matching antigen suffix,
//! normalized by a volatility scale. Exact match gives affinity 1; the
//! score lives in (0, 1] and decays smoothly with distance. Alignment is
//! suffix-only: a tracker of length `m` is compared against the `m` most
//! recent movements, never slid over interior positions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Antigen, MovementVector};

/// Scale never drops below this, so distances stay finite on flat data.
pub const SCALE_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum AffinityError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("bad scale: {0} must be finite and > 0")]
    BadScale(f64),
    #[error("tracker length {0} exceeds antigen window {1}")]
    TrackerTooLong(usize, usize),
}

/// One successful bind: which tracker, against which antigen, how strongly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BindRecord {
    pub tracker_id: u64,
    pub anchor: usize,
    pub affinity: f64,
    pub matched_len: usize,
}

/// Scale-normalized RMS distance between two equal-length movement vectors.
pub fn distance(a: &[f64], b: &[f64], scale: f64) -> Result<f64, AffinityError> {
    if a.len() != b.len() || a.is_empty() {
        return Err(AffinityError::LengthMismatch(a.len(), b.len()));
    }
    if !scale.is_finite() || scale <= 0.0 {
        return Err(AffinityError::BadScale(scale));
    }
    let sum_sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((sum_sq / a.len() as f64).sqrt() / scale)
}

/// Affinity of a tracker against the antigen suffix of the same length.
pub fn bind_affinity(
    tracker: &MovementVector,
    antigen: &Antigen,
    scale: f64,
) -> Result<f64, AffinityError> {
    let m = tracker.len();
    let w = antigen.movements.len();
    if m > w {
        return Err(AffinityError::TrackerTooLong(m, w));
    }
    let suffix = &antigen.movements[w - m..];
    Ok((-distance(tracker.values(), suffix, scale)?).exp())
}

/// The bind decision: affinity at or above the threshold binds.
pub fn is_bound(affinity: f64, threshold: f64) -> bool {
    debug_assert!(threshold > 0.0 && threshold < 1.0);
    affinity >= threshold
}

/// How the normalization scale is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum ScaleMode {
    /// A constant scale, fixed up front.
    Fixed(f64),
    /// Population standard deviation of the last `window` movements,
    /// floored at [`SCALE_FLOOR`].
    Rolling { window: usize },
}

/// Resolve the scale for the movement history observed so far.
pub fn scale_for(observed: &[f64], mode: ScaleMode) -> f64 {
    match mode {
        ScaleMode::Fixed(value) => value,
        ScaleMode::Rolling { window } => {
            let tail = &observed[observed.len().saturating_sub(window)..];
            rolling_std(tail).max(SCALE_FLOOR)
        }
    }
}

fn rolling_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}
