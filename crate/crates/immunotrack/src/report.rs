//! Deterministic JSON reports.
//!
//! One schema serves `run` and `evaluate`: top-level keys are always
//! `config`, `metrics`, `sequence`, `patterns`, `pool_summary`,
//! `forecasts`, `generations`, in that order, with absent sections as
//! `null`. Struct field order fixes key order; serde_json renders floats
//! with their shortest round-trip representation, so identical inputs
//! produce byte-identical files. Files are written via a temp file and
//! rename, never in place.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunConfig;
use crate::engine::{GenerationReport, Tracker};
use crate::forecast::{EvalReport, ResolvedParams, RunArtifacts, StepForecast};
use crate::memory::{Pattern, SequenceEntry, TrackerSequence};
use crate::ingest::MovementVector;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad artifact: {0}")]
    BadArtifact(String),
}

fn io_err(path: &Path, source: std::io::Error) -> ReportError {
    ReportError::Io { path: path.display().to_string(), source }
}

/// Pool state boiled down for the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolSummary {
    pub size: usize,
    /// (tracker length, count) pairs, ascending by length.
    pub length_histogram: Vec<(usize, usize)>,
    /// Top 10 trackers by stimulation (ties to the lower id).
    pub top_by_stimulation: Vec<TrackerSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerSummary {
    pub id: u64,
    pub lineage_id: u64,
    pub birth_generation: usize,
    pub stimulation: u64,
    pub consecutive_misses: u32,
    pub movements: MovementVector,
}

impl From<&Tracker> for TrackerSummary {
    fn from(t: &Tracker) -> Self {
        Self {
            id: t.id,
            lineage_id: t.lineage_id,
            birth_generation: t.birth_generation,
            stimulation: t.stimulation,
            consecutive_misses: t.consecutive_misses,
            movements: t.movements.clone(),
        }
    }
}

/// A generation report without the per-tracker bind list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub generation: usize,
    pub binds: usize,
    pub clones_created: usize,
    pub deaths_apoptosis: usize,
    pub deaths_cap: usize,
    pub dominant: Option<DominantSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominantSummary {
    pub tracker_id: u64,
    pub lineage_id: u64,
    pub affinity: f64,
    pub clone_count: usize,
    pub movements: MovementVector,
}

impl From<&GenerationReport> for GenerationSummary {
    fn from(r: &GenerationReport) -> Self {
        Self {
            generation: r.generation,
            binds: r.bind_records.len(),
            clones_created: r.clones_created,
            deaths_apoptosis: r.deaths_apoptosis,
            deaths_cap: r.deaths_cap,
            dominant: r.dominant.as_ref().map(|d| DominantSummary {
                tracker_id: d.tracker_id,
                lineage_id: d.lineage_id,
                affinity: d.affinity,
                clone_count: d.clone_count,
                movements: d.movements.clone(),
            }),
        }
    }
}

/// Per-model metrics section; mirrors [`EvalReport`] with both serde
/// directions for artifact reloads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSection {
    pub tracker: MetricsEntry,
    pub persistence: MetricsEntry,
    pub drift: MetricsEntry,
    pub last_movement: MetricsEntry,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsEntry {
    pub mae: f64,
    pub rmse: f64,
    pub dir_acc: f64,
}

impl From<&EvalReport> for MetricsSection {
    fn from(r: &EvalReport) -> Self {
        let entry = |m: crate::forecast::ModelMetrics| MetricsEntry {
            mae: m.mae,
            rmse: m.rmse,
            dir_acc: m.dir_acc,
        };
        Self {
            tracker: entry(r.tracker),
            persistence: entry(r.persistence),
            drift: entry(r.drift),
            last_movement: entry(r.last_movement),
            steps: r.steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub anchor: usize,
    pub predicted: Vec<f64>,
    pub confidence: Vec<f64>,
}

impl From<&StepForecast> for ForecastRecord {
    fn from(sf: &StepForecast) -> Self {
        Self {
            anchor: sf.anchor,
            predicted: sf.predicted.clone(),
            confidence: sf.confidence.clone(),
        }
    }
}

/// The whole report file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: RunConfig,
    pub metrics: Option<MetricsSection>,
    pub sequence: Vec<SequenceEntry>,
    pub patterns: Vec<Pattern>,
    pub pool_summary: PoolSummary,
    pub forecasts: Option<Vec<ForecastRecord>>,
    pub generations: Option<Vec<GenerationSummary>>,
}

impl Report {
    /// Reassemble the long-term memory for forecasting from a saved run.
    pub fn sequence_view(&self) -> TrackerSequence {
        TrackerSequence {
            entries: self.sequence.clone(),
            patterns: self.patterns.clone(),
        }
    }
}

fn pool_summary(pool: &[Tracker]) -> PoolSummary {
    let mut histogram: std::collections::BTreeMap<usize, usize> = std::collections::BTreeMap::new();
    for t in pool {
        *histogram.entry(t.movements.len()).or_insert(0) += 1;
    }
    let mut ranked: Vec<&Tracker> = pool.iter().collect();
    ranked.sort_by(|a, b| b.stimulation.cmp(&a.stimulation).then(a.id.cmp(&b.id)));
    PoolSummary {
        size: pool.len(),
        length_histogram: histogram.into_iter().collect(),
        top_by_stimulation: ranked.into_iter().take(10).map(TrackerSummary::from).collect(),
    }
}

/// Assemble a report. The config echo carries the resolved epsilon values
/// so the file is self-describing; `generations` is populated only when
/// asked for (the `run` command).
pub fn build_report(
    config: &RunConfig,
    resolved: &ResolvedParams,
    metrics: Option<&EvalReport>,
    artifacts: &RunArtifacts,
    include_generations: bool,
) -> Report {
    let mut echo = config.clone();
    echo.epsilon = Some(resolved.epsilon);
    echo.dir_epsilon = Some(resolved.dir_epsilon);
    Report {
        config: echo,
        metrics: metrics.map(MetricsSection::from),
        sequence: artifacts.sequence.entries.clone(),
        patterns: artifacts.sequence.patterns.clone(),
        pool_summary: pool_summary(&artifacts.pool),
        forecasts: Some(artifacts.step_forecasts.iter().map(ForecastRecord::from).collect()),
        generations: include_generations
            .then(|| artifacts.reports.iter().map(GenerationSummary::from).collect()),
    }
}

/// Render any serializable value the way every output file is rendered.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, ReportError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

/// Write via temp file + rename in the destination directory.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), ReportError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(path, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

/// Load and sanity-check a saved report.
pub fn load_report(path: &Path) -> Result<Report, ReportError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let report: Report = serde_json::from_str(&text)?;
    let mut prev_end: Option<usize> = None;
    for (i, entry) in report.sequence.iter().enumerate() {
        if entry.movements.is_empty() || entry.movements.iter().any(|m| !m.is_finite()) {
            return Err(ReportError::BadArtifact(format!(
                "sequence entry {i} has unusable movements"
            )));
        }
        if entry.start > entry.end {
            return Err(ReportError::BadArtifact(format!(
                "sequence entry {i} interval [{}, {}] is inverted",
                entry.start, entry.end
            )));
        }
        if let Some(end) = prev_end {
            if entry.start <= end {
                return Err(ReportError::BadArtifact(format!(
                    "sequence entry {i} overlaps its predecessor"
                )));
            }
        }
        prev_end = Some(entry.end);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::run_online;
    use crate::ingest::{synth_series, SynthKind, SynthSpec};

    fn small_run() -> (RunConfig, RunArtifacts) {
        let config = RunConfig {
            pool_cap: 20,
            window: 6,
            len_min: 2,
            len_max: 5,
            warmup: 10,
            scale_window: 8,
            generalize_every: 4,
            ..RunConfig::default()
        };
        let series = synth_series(
            &SynthSpec {
                kind: SynthKind::Periodic,
                length: 40,
                base: 30.0,
                pattern: vec![1.0, -1.0, 0.5],
                noise_stddev: 0.0,
                step_stddev: 0.0,
            },
            2,
        )
        .unwrap();
        let artifacts = run_online(&series, &config).unwrap();
        (config, artifacts)
    }

    #[test]
    fn report_round_trips_through_json() {
        let (config, artifacts) = small_run();
        let report = build_report(&config, &artifacts.resolved, None, &artifacts, true);
        let json = to_json(&report).unwrap();
        let back: Report = serde_json::from_str(&json).unwrap();
        assert_eq!(report, back);
        assert_eq!(to_json(&back).unwrap(), json);
    }

    #[test]
    fn top_level_key_order_is_fixed() {
        let (config, artifacts) = small_run();
        let report = build_report(&config, &artifacts.resolved, None, &artifacts, false);
        let json = to_json(&report).unwrap();
        let positions: Vec<usize> = [
            "\"config\"",
            "\"metrics\"",
            "\"sequence\"",
            "\"patterns\"",
            "\"pool_summary\"",
            "\"forecasts\"",
            "\"generations\"",
        ]
        .iter()
        .map(|k| json.find(k).unwrap_or_else(|| panic!("missing key {k}")))
        .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn config_echo_carries_resolved_epsilons() {
        let (config, artifacts) = small_run();
        assert!(config.epsilon.is_none());
        let report = build_report(&config, &artifacts.resolved, None, &artifacts, false);
        assert_eq!(report.config.epsilon, Some(artifacts.resolved.epsilon));
        assert_eq!(report.config.dir_epsilon, Some(artifacts.resolved.dir_epsilon));
    }

    #[test]
    fn atomic_write_and_load() {
        let (config, artifacts) = small_run();
        let report = build_report(&config, &artifacts.resolved, None, &artifacts, true);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        write_atomic(&path, &to_json(&report).unwrap()).unwrap();
        let loaded = load_report(&path).unwrap();
        assert_eq!(loaded, report);
        assert_eq!(loaded.sequence_view().entries, artifacts.sequence.entries);
    }

    #[test]
    fn load_rejects_corrupt_sequences() {
        let (config, artifacts) = small_run();
        let mut report = build_report(&config, &artifacts.resolved, None, &artifacts, false);
        if report.sequence.len() >= 2 {
            report.sequence[1].start = report.sequence[0].start; // overlap
        } else {
            return;
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        write_atomic(&path, &to_json(&report).unwrap()).unwrap();
        assert!(matches!(load_report(&path), Err(ReportError::BadArtifact(_))));
    }

    #[test]
    fn pool_summary_ranks_and_bins() {
        let (config, artifacts) = small_run();
        let report = build_report(&config, &artifacts.resolved, None, &artifacts, false);
        let summary = &report.pool_summary;
        assert_eq!(summary.size, artifacts.pool.len());
        let total: usize = summary.length_histogram.iter().map(|(_, c)| c).sum();
        assert_eq!(total, summary.size);
        assert!(summary.length_histogram.windows(2).all(|w| w[0].0 < w[1].0));
        assert!(summary
            .top_by_stimulation
            .windows(2)
            .all(|w| w[0].stimulation >= w[1].stimulation));
        assert!(summary.top_by_stimulation.len() <= 10);
    }
}
