//! The clonal selection engine over the short-term tracker pool.
//!
//! Each generation, every tracker is scored against the current antigen.
//! Bound trackers proliferate in proportion to affinity and length; their
//! clones are split across three mutation forms (perturb one value,
//! extend the review period by one anticipated movement, drop one value)
//! and join the pool. Trackers that keep missing die by apoptosis, and a
//! hard cap ranks survivors so the pool never grows past `pool_cap`.
//!
//! Determinism: clone mutation draws come from a substream keyed by
//! `(seed, generation, parent id, clone index)`, so the outcome does not
//! depend on evaluation order or thread count.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::affinity::{bind_affinity, is_bound, AffinityError, BindRecord};
use crate::ingest::{sample_normal, Antigen, MovementStats, MovementVector};
use crate::rng;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Affinity(#[from] AffinityError),
}

/// A tracker: the unit of short-term memory. Its movement vector is the
/// "review period"; counters drive proliferation and apoptosis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tracker {
    pub id: u64,
    pub lineage_id: u64,
    pub birth_generation: usize,
    /// Cumulative clones this tracker has produced.
    pub stimulation: u64,
    pub consecutive_misses: u32,
    pub movements: MovementVector,
}

/// Engine constants for one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EngineConfig {
    pub pool_cap: usize,
    pub bind_threshold: f64,
    pub clone_factor: f64,
    pub mutation_sigma: f64,
    /// Clone split across (value, extend, shorten) mutation, summing to 1.
    pub mut_fractions: [f64; 3],
    /// Consecutive miss generations before apoptosis.
    pub apoptosis_age: u32,
    /// Lifetime limit in generations; trackers age out regardless of
    /// binding, which keeps the pool turning over once every slot is held
    /// by a stimulated tracker.
    pub max_age: usize,
    pub len_min: usize,
    pub len_max: usize,
    pub window: usize,
    pub seed: u64,
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let err = |msg: String| Err(EngineError::BadConfig(msg));
        if self.pool_cap < 1 {
            return err("pool_cap must be >= 1".into());
        }
        if !(self.bind_threshold > 0.0 && self.bind_threshold < 1.0) {
            return err(format!("bind_threshold {} must be in (0,1)", self.bind_threshold));
        }
        if !self.clone_factor.is_finite() || self.clone_factor <= 0.0 {
            return err(format!("clone_factor {} must be > 0", self.clone_factor));
        }
        if !self.mutation_sigma.is_finite() || self.mutation_sigma <= 0.0 {
            return err(format!("mutation_sigma {} must be > 0", self.mutation_sigma));
        }
        if self.mut_fractions.iter().any(|f| !f.is_finite() || *f <= 0.0) {
            return err("mutation fractions must each be > 0".into());
        }
        let sum: f64 = self.mut_fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return err(format!("mutation fractions sum to {sum}, expected 1"));
        }
        if self.apoptosis_age < 1 {
            return err("apoptosis_age must be >= 1".into());
        }
        if self.max_age <= self.apoptosis_age as usize {
            return err(format!(
                "max_age {} must exceed apoptosis_age {}",
                self.max_age, self.apoptosis_age
            ));
        }
        if self.len_min < 1 || self.len_min > self.len_max {
            return err(format!(
                "tracker lengths need 1 <= len_min <= len_max, got [{}, {}]",
                self.len_min, self.len_max
            ));
        }
        if self.len_max > self.window {
            return err(format!(
                "len_max {} must not exceed window {}",
                self.len_max, self.window
            ));
        }
        Ok(())
    }
}

/// Snapshot of the generation's strongest proliferator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominantCandidate {
    pub tracker_id: u64,
    pub lineage_id: u64,
    pub affinity: f64,
    pub clone_count: usize,
    pub movements: MovementVector,
}

/// What happened in one generation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationReport {
    pub generation: usize,
    pub bind_records: Vec<BindRecord>,
    pub clones_created: usize,
    pub deaths_apoptosis: usize,
    pub deaths_cap: usize,
    pub dominant: Option<DominantCandidate>,
}

/// Clone budget for a bound tracker: `max(1, round(beta * affinity * m))`,
/// rounding half away from zero.
pub fn clone_count(affinity: f64, tracker_len: usize, config: &EngineConfig) -> usize {
    (config.clone_factor * affinity * tracker_len as f64).round().max(1.0) as usize
}

/// Largest-remainder split of `count` clones across the three mutation
/// subsets; the parts always sum to `count` exactly.
pub fn split_largest_remainder(count: usize, fractions: [f64; 3]) -> [usize; 3] {
    let quotas = fractions.map(|f| f * count as f64);
    let mut parts = quotas.map(|q| q.floor() as usize);
    let assigned: usize = parts.iter().sum();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| {
        let ri = quotas[i] - quotas[i].floor();
        let rj = quotas[j] - quotas[j].floor();
        rj.partial_cmp(&ri).unwrap().then(i.cmp(&j))
    });
    for &slot in order.iter().take(count - assigned) {
        parts[slot] += 1;
    }
    parts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MutationKind {
    Value,
    Extend,
    Shorten,
}

fn perturbed_values(
    parent: &Tracker,
    affinity: f64,
    scale: f64,
    config: &EngineConfig,
    stream: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut values = parent.movements.to_vec();
    let idx = stream.gen_range(0..values.len());
    let sigma = config.mutation_sigma * (1.0 - affinity) * scale;
    values[idx] += sample_normal(0.0, sigma, stream);
    values
}

fn child(parent: &Tracker, id: u64, generation: usize, values: Vec<f64>) -> Tracker {
    Tracker {
        id,
        lineage_id: parent.lineage_id,
        birth_generation: generation,
        stimulation: 0,
        consecutive_misses: 0,
        movements: MovementVector::from_raw(values),
    }
}

/// Value mutation: Gaussian noise with stddev `sigma0 * (1 - affinity) * scale`
/// applied to exactly one uniformly chosen movement.
pub fn mutate_value(
    parent: &Tracker,
    affinity: f64,
    scale: f64,
    config: &EngineConfig,
    id: u64,
    generation: usize,
    stream: &mut ChaCha8Rng,
) -> Tracker {
    let values = perturbed_values(parent, affinity, scale, config, stream);
    child(parent, id, generation, values)
}

/// Extension mutation: append one movement drawn from the warm-up movement
/// distribution, anticipating the next period. At the length cap this
/// degrades to a value mutation.
#[allow(clippy::too_many_arguments)]
pub fn mutate_extend(
    parent: &Tracker,
    stats: &MovementStats,
    affinity: f64,
    scale: f64,
    config: &EngineConfig,
    id: u64,
    generation: usize,
    stream: &mut ChaCha8Rng,
) -> Tracker {
    let cap = config.len_max.min(config.window);
    if parent.movements.len() >= cap {
        return mutate_value(parent, affinity, scale, config, id, generation, stream);
    }
    let mut values = parent.movements.to_vec();
    values.push(sample_normal(stats.mean, stats.stddev, stream));
    child(parent, id, generation, values)
}

/// Shortening mutation: drop one uniformly chosen movement, preserving the
/// order of the rest. At the length floor this degrades to a value mutation.
pub fn mutate_shorten(
    parent: &Tracker,
    affinity: f64,
    scale: f64,
    config: &EngineConfig,
    id: u64,
    generation: usize,
    stream: &mut ChaCha8Rng,
) -> Tracker {
    if parent.movements.len() <= config.len_min {
        return mutate_value(parent, affinity, scale, config, id, generation, stream);
    }
    let mut values = parent.movements.to_vec();
    let idx = stream.gen_range(0..values.len());
    values.remove(idx);
    child(parent, id, generation, values)
}

/// Apoptosis then cap. Apoptosis removes trackers at or past the miss
/// limit, plus trackers that have outlived `max_age` generations; without
/// the age rule the first full pool of stimulated trackers is immortal and
/// clone selection stops dead. If the survivors still exceed `pool_cap`,
/// the top trackers ranked by (stimulation desc, misses asc, birth desc,
/// id asc) are kept. Survivors come back in id order. Returns
/// `(pool, apoptosis deaths, cap deaths)`.
pub fn apoptosis_and_cap(
    pool: Vec<Tracker>,
    config: &EngineConfig,
    generation: usize,
) -> (Vec<Tracker>, usize, usize) {
    let before = pool.len();
    let mut survivors: Vec<Tracker> = pool
        .into_iter()
        .filter(|t| {
            t.consecutive_misses < config.apoptosis_age
                && generation.saturating_sub(t.birth_generation) < config.max_age
        })
        .collect();
    let deaths_apoptosis = before - survivors.len();

    let mut deaths_cap = 0;
    if survivors.len() > config.pool_cap {
        survivors.sort_by(|a, b| {
            b.stimulation
                .cmp(&a.stimulation)
                .then(a.consecutive_misses.cmp(&b.consecutive_misses))
                .then(b.birth_generation.cmp(&a.birth_generation))
                .then(a.id.cmp(&b.id))
        });
        deaths_cap = survivors.len() - config.pool_cap;
        survivors.truncate(config.pool_cap);
    }
    survivors.sort_by_key(|t| t.id);
    (survivors, deaths_apoptosis, deaths_cap)
}

/// The live pool plus the bookkeeping needed to advance it.
#[derive(Debug, Clone)]
pub struct EngineState {
    pub pool: Vec<Tracker>,
    pub config: EngineConfig,
    pub stats: MovementStats,
    next_id: u64,
}

struct CloneSpec {
    parent_idx: usize,
    affinity: f64,
    kind: MutationKind,
    id: u64,
    clone_index: usize,
}

/// Draw the initial population: lengths uniform on the short end of the
/// allowed range, values from the warm-up movement distribution.
pub fn init_population(
    config: EngineConfig,
    stats: MovementStats,
    generation: usize,
) -> Result<EngineState, EngineError> {
    config.validate()?;
    if !stats.mean.is_finite() || !stats.stddev.is_finite() || stats.stddev < 0.0 {
        return Err(EngineError::BadConfig(format!(
            "movement stats mean {} stddev {} unusable",
            stats.mean, stats.stddev
        )));
    }
    let mut stream = rng::init_stream(config.seed);
    let hi = config.len_max.min(config.window).min(config.len_min + 2);
    let mut pool = Vec::with_capacity(config.pool_cap);
    for id in 0..config.pool_cap as u64 {
        let len = stream.gen_range(config.len_min..=hi);
        let values = (0..len)
            .map(|_| sample_normal(stats.mean, stats.stddev, &mut stream))
            .collect();
        // Stagger initial ages so the founding population does not age out
        // in one mass extinction.
        let age_offset = id as usize % config.max_age;
        pool.push(Tracker {
            id,
            lineage_id: id,
            birth_generation: generation.saturating_sub(age_offset),
            stimulation: 0,
            consecutive_misses: 0,
            movements: MovementVector::from_raw(values),
        });
    }
    Ok(EngineState {
        next_id: config.pool_cap as u64,
        pool,
        config,
        stats,
    })
}

impl EngineState {
    /// Run one generation against `antigen`: bind, proliferate, mutate,
    /// then apoptosis and cap.
    pub fn generation_step(
        &mut self,
        antigen: &Antigen,
        scale: f64,
        generation: usize,
    ) -> Result<GenerationReport, EngineError> {
        let affinities: Vec<f64> = self
            .pool
            .par_iter()
            .map(|t| bind_affinity(&t.movements, antigen, scale))
            .collect::<Result<_, _>>()?;

        let mut bind_records = Vec::new();
        let mut specs: Vec<CloneSpec> = Vec::new();
        let mut dominant: Option<(usize, DominantCandidate)> = None;
        let mut next_id = self.next_id;

        for (idx, (tracker, &affinity)) in self.pool.iter_mut().zip(&affinities).enumerate() {
            if !is_bound(affinity, self.config.bind_threshold) {
                tracker.consecutive_misses += 1;
                continue;
            }
            tracker.consecutive_misses = 0;
            let count = clone_count(affinity, tracker.movements.len(), &self.config);
            tracker.stimulation += count as u64;
            bind_records.push(BindRecord {
                tracker_id: tracker.id,
                anchor: antigen.anchor,
                affinity,
                matched_len: tracker.movements.len(),
            });

            let parts = split_largest_remainder(count, self.config.mut_fractions);
            for clone_index in 0..count {
                let kind = if clone_index < parts[0] {
                    MutationKind::Value
                } else if clone_index < parts[0] + parts[1] {
                    MutationKind::Extend
                } else {
                    MutationKind::Shorten
                };
                specs.push(CloneSpec {
                    parent_idx: idx,
                    affinity,
                    kind,
                    id: next_id,
                    clone_index,
                });
                next_id += 1;
            }

            let beats = match &dominant {
                None => true,
                Some((best_count, best)) => {
                    count > *best_count
                        || (count == *best_count && affinity > best.affinity)
                        || (count == *best_count
                            && affinity == best.affinity
                            && tracker.id < best.tracker_id)
                }
            };
            if beats {
                dominant = Some((
                    count,
                    DominantCandidate {
                        tracker_id: tracker.id,
                        lineage_id: tracker.lineage_id,
                        affinity,
                        clone_count: count,
                        movements: tracker.movements.clone(),
                    },
                ));
            }
        }

        let clones: Vec<Tracker> = specs
            .par_iter()
            .map(|spec| {
                let parent = &self.pool[spec.parent_idx];
                let mut stream = rng::mutation_stream(
                    self.config.seed,
                    generation,
                    parent.id,
                    spec.clone_index,
                );
                match spec.kind {
                    MutationKind::Value => mutate_value(
                        parent,
                        spec.affinity,
                        scale,
                        &self.config,
                        spec.id,
                        generation,
                        &mut stream,
                    ),
                    MutationKind::Extend => mutate_extend(
                        parent,
                        &self.stats,
                        spec.affinity,
                        scale,
                        &self.config,
                        spec.id,
                        generation,
                        &mut stream,
                    ),
                    MutationKind::Shorten => mutate_shorten(
                        parent,
                        spec.affinity,
                        scale,
                        &self.config,
                        spec.id,
                        generation,
                        &mut stream,
                    ),
                }
            })
            .collect();

        let clones_created = clones.len();
        self.next_id = next_id;
        self.pool.extend(clones);
        let (pool, deaths_apoptosis, deaths_cap) =
            apoptosis_and_cap(std::mem::take(&mut self.pool), &self.config, generation);
        self.pool = pool;

        Ok(GenerationReport {
            generation,
            bind_records,
            clones_created,
            deaths_apoptosis,
            deaths_cap,
            dominant: dominant.map(|(_, d)| d),
        })
    }
}
