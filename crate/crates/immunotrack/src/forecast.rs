//! Forecasting from the tracker sequence, plus the walk-forward driver
//! that feeds the engine one antigen per period and scores 1-step-ahead
//! predictions against simple baselines.
//!
//! A forecast matches each long-term snapshot's prefix against the most
//! recent observed movements at every split point; matches at or above
//! the threshold contribute their continuation, and each step ahead is
//! the affinity-weighted mean of the contributions covering it. Steps
//! nobody covers fall back to zero movement with zero confidence.
//! Contributors are accumulated in sorted order so results are identical
//! regardless of candidate enumeration order.

use serde::Serialize;
use thiserror::Error;

use crate::affinity::{distance, scale_for};
use crate::config::RunConfig;
use crate::engine::{init_population, GenerationReport, Tracker};
use crate::ingest::{make_antigen, to_movements, MovementStats, MovementVector, PriceSeries};
use crate::memory::{
    generalize, long_term_pool, promote_dominant, signature, Signature, TrackerSequence,
};

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error("too short: {0}")]
    TooShort(String),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// One matched snapshot prefix feeding a forecast.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Contributor {
    pub signature: Signature,
    pub affinity: f64,
    pub split: usize,
}

/// Predicted future movements with per-step confidence and provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Forecast {
    /// Price index of the last observed price.
    pub anchor: usize,
    pub predicted: Vec<f64>,
    pub confidence: Vec<f64>,
    pub contributors: Vec<Contributor>,
}

/// Forecast `horizon` steps ahead from the long-term sequence only.
pub fn forecast(
    sequence: &TrackerSequence,
    recent: &[f64],
    horizon: usize,
    match_threshold: f64,
    scale: f64,
) -> Forecast {
    let candidates: Vec<(Signature, MovementVector)> = long_term_pool(sequence)
        .into_iter()
        .map(|s| (s.signature, s.movements))
        .collect();
    forecast_from_candidates(&candidates, recent, horizon, match_threshold, scale)
}

/// Forecast from the long-term sequence plus live-pool snapshots
/// (the `forecast_include_pool` path). Sequence snapshots win signature
/// collisions.
pub fn forecast_with_pool(
    sequence: &TrackerSequence,
    pool: &[Tracker],
    epsilon: f64,
    recent: &[f64],
    horizon: usize,
    match_threshold: f64,
    scale: f64,
) -> Forecast {
    let mut candidates: Vec<(Signature, MovementVector)> = long_term_pool(sequence)
        .into_iter()
        .map(|s| (s.signature, s.movements))
        .collect();
    let mut seen: std::collections::HashSet<Signature> =
        candidates.iter().map(|(s, _)| s.clone()).collect();
    for tracker in pool {
        let sig = signature(&tracker.movements, epsilon).expect("epsilon validated");
        if seen.insert(sig.clone()) {
            candidates.push((sig, tracker.movements.clone()));
        }
    }
    forecast_from_candidates(&candidates, recent, horizon, match_threshold, scale)
}

fn forecast_from_candidates(
    candidates: &[(Signature, MovementVector)],
    recent: &[f64],
    horizon: usize,
    match_threshold: f64,
    scale: f64,
) -> Forecast {
    assert!(horizon >= 1, "horizon must be >= 1");
    assert!(scale.is_finite() && scale > 0.0, "scale must be > 0");

    struct Contribution<'a> {
        signature: &'a Signature,
        affinity: f64,
        split: usize,
        continuation: &'a [f64],
    }

    let mut contributions: Vec<Contribution> = Vec::new();
    for (sig, movements) in candidates {
        let m = movements.len();
        for split in 1..m {
            if split > recent.len() {
                break;
            }
            let observed = &recent[recent.len() - split..];
            let d = distance(&movements[..split], observed, scale).expect("equal lengths");
            let affinity = (-d).exp();
            if affinity >= match_threshold {
                let end = (split + horizon).min(m);
                contributions.push(Contribution {
                    signature: sig,
                    affinity,
                    split,
                    continuation: &movements[split..end],
                });
            }
        }
    }

    // Deterministic accumulation order regardless of candidate enumeration.
    contributions.sort_by(|a, b| a.signature.cmp(b.signature).then(a.split.cmp(&b.split)));

    let mut predicted = vec![0.0; horizon];
    let mut confidence = vec![0.0; horizon];
    for step in 0..horizon {
        let mut weighted = 0.0;
        let mut weight = 0.0;
        let mut covering = 0usize;
        for c in &contributions {
            if let Some(&value) = c.continuation.get(step) {
                weighted += c.affinity * value;
                weight += c.affinity;
                covering += 1;
            }
        }
        if covering > 0 {
            predicted[step] = weighted / weight;
            confidence[step] = weight / covering as f64;
        }
    }

    Forecast {
        anchor: recent.len(),
        predicted,
        confidence,
        contributors: contributions
            .into_iter()
            .map(|c| Contributor {
                signature: c.signature.clone(),
                affinity: c.affinity,
                split: c.split,
            })
            .collect(),
    }
}

/// The horizon-long forecast issued at one walk step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepForecast {
    pub anchor: usize,
    pub predicted: Vec<f64>,
    pub confidence: Vec<f64>,
}

/// Parameters fixed at run start from the warm-up data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolvedParams {
    /// Signature quantization step actually used.
    pub epsilon: f64,
    /// Zero-movement tolerance actually used for directional scoring.
    pub dir_epsilon: f64,
    /// Scale over the warm-up movements (the epsilon baseline).
    pub baseline_scale: f64,
}

/// Everything a walk produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub sequence: TrackerSequence,
    pub reports: Vec<GenerationReport>,
    pub pool: Vec<Tracker>,
    pub step_forecasts: Vec<StepForecast>,
    pub resolved: ResolvedParams,
}

/// MAE / RMSE on movements plus directional accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelMetrics {
    pub mae: f64,
    pub rmse: f64,
    pub dir_acc: f64,
}

/// Walk-forward scores for the tracker system and the three baselines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalReport {
    pub tracker: ModelMetrics,
    pub persistence: ModelMetrics,
    pub drift: ModelMetrics,
    pub last_movement: ModelMetrics,
    pub steps: usize,
}

fn in_thread_pool<T: Send>(
    threads: usize,
    f: impl FnOnce() -> crate::Result<T> + Send,
) -> crate::Result<T> {
    if threads == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| ForecastError::ThreadPool(e.to_string()))?;
    pool.install(f)
}

fn walk(series: &PriceSeries, config: &RunConfig) -> crate::Result<RunArtifacts> {
    config.validate()?;
    let movements = to_movements(series);
    let warmup = config.warmup;
    if movements.len() < warmup {
        return Err(ForecastError::TooShort(format!(
            "warmup {} needs at least {} prices, got {}",
            warmup,
            warmup + 1,
            series.len()
        ))
        .into());
    }

    let stats = MovementStats::from_slice(&movements[..warmup]);
    let baseline_scale = scale_for(&movements[..warmup], config.scale());
    let epsilon = config.epsilon.unwrap_or(0.25 * baseline_scale);
    let dir_epsilon = config.dir_epsilon.unwrap_or(epsilon / 2.0);
    let resolved = ResolvedParams { epsilon, dir_epsilon, baseline_scale };

    let mut state = init_population(config.to_engine_config(), stats, warmup)?;
    let mut sequence = TrackerSequence::new();
    let mut reports = Vec::new();
    let mut step_forecasts = Vec::new();

    for t in warmup..movements.len() {
        let scale = scale_for(&movements[..t], config.scale());
        let antigen = make_antigen(&movements, t, config.window)?;
        let report = state.generation_step(&antigen, scale, t)?;
        promote_dominant(&report, &mut sequence, epsilon)?;
        if (t - warmup + 1).is_multiple_of(config.generalize_every) {
            generalize(&mut sequence, config.min_repeats, config.max_pattern_len);
        }
        let fc = if config.forecast_include_pool {
            forecast_with_pool(
                &sequence,
                &state.pool,
                epsilon,
                &movements[..t],
                config.horizon,
                config.forecast_threshold,
                scale,
            )
        } else {
            forecast(
                &sequence,
                &movements[..t],
                config.horizon,
                config.forecast_threshold,
                scale,
            )
        };
        step_forecasts.push(StepForecast {
            anchor: t,
            predicted: fc.predicted,
            confidence: fc.confidence,
        });
        reports.push(report);
    }

    generalize(&mut sequence, config.min_repeats, config.max_pattern_len);

    Ok(RunArtifacts {
        sequence,
        reports,
        pool: state.pool,
        step_forecasts,
        resolved,
    })
}

/// Run the online loop without scoring; zero post-warmup steps is legal
/// and yields an empty sequence over the warm pool.
pub fn run_online(series: &PriceSeries, config: &RunConfig) -> crate::Result<RunArtifacts> {
    in_thread_pool(config.threads, || walk(series, config))
}

fn direction_ok(pred: f64, realized: f64, dir_epsilon: f64) -> bool {
    if realized == 0.0 {
        pred.abs() < dir_epsilon
    } else {
        (pred > 0.0 && realized > 0.0) || (pred < 0.0 && realized < 0.0)
    }
}

/// Walk forward, forecasting one step ahead at every period and scoring
/// against the realized movement next to the persistence, drift, and
/// last-movement baselines.
pub fn evaluate(
    series: &PriceSeries,
    config: &RunConfig,
) -> crate::Result<(EvalReport, RunArtifacts)> {
    let artifacts = run_online(series, config)?;
    if artifacts.step_forecasts.is_empty() {
        return Err(ForecastError::TooShort(format!(
            "no evaluation steps: need more than warmup + 1 = {} prices, got {}",
            config.warmup + 1,
            series.len()
        ))
        .into());
    }

    let movements = to_movements(series);
    let dir_epsilon = artifacts.resolved.dir_epsilon;
    let steps = artifacts.step_forecasts.len();

    // abs error, squared error, direction hits per model
    let mut acc = [[0.0f64; 3]; 4];
    let mut running_sum = movements[..config.warmup].iter().sum::<f64>();
    for sf in &artifacts.step_forecasts {
        let t = sf.anchor;
        let realized = movements[t];
        let drift = running_sum / t as f64;
        let preds = [sf.predicted[0], 0.0, drift, movements[t - 1]];
        for (slot, pred) in acc.iter_mut().zip(preds) {
            let err = pred - realized;
            slot[0] += err.abs();
            slot[1] += err * err;
            slot[2] += direction_ok(pred, realized, dir_epsilon) as u8 as f64;
        }
        running_sum += realized;
    }

    let metrics = |slot: [f64; 3]| ModelMetrics {
        mae: slot[0] / steps as f64,
        rmse: (slot[1] / steps as f64).sqrt(),
        dir_acc: slot[2] / steps as f64,
    };

    let report = EvalReport {
        tracker: metrics(acc[0]),
        persistence: metrics(acc[1]),
        drift: metrics(acc[2]),
        last_movement: metrics(acc[3]),
        steps,
    };
    Ok((report, artifacts))
}
