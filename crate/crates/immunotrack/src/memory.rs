//! Long-term memory: the tracker sequence and its generalizations.
//!
//! Each generation's dominant tracker (by clone count) is promoted into a
//! time-ordered list of frozen snapshots. Runs of the same signature
//! collapse into one entry spanning an interval, so the sequence reads as
//! a chronicle of trends rather than a per-generation log. Entries are
//! never deleted. `generalize` mines the entry list for repeating
//! contiguous signature patterns; `long_term_pool` exposes the distinct
//! snapshots with their total dwell time.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::GenerationReport;
use crate::ingest::MovementVector;

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("bad epsilon: {0} must be finite and > 0")]
    BadEpsilon(f64),
}

/// Quantized movement vector: the equality notion for "the same trend".
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Signature(pub Vec<i64>);

/// Element-wise `round(movement / epsilon)`, half away from zero.
pub fn signature(movements: &[f64], epsilon: f64) -> Result<Signature, MemoryError> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(MemoryError::BadEpsilon(epsilon));
    }
    Ok(Signature(
        movements.iter().map(|m| (m / epsilon).round() as i64).collect(),
    ))
}

/// One promoted trend: a frozen tracker snapshot that was dominant over
/// `[start, end]` (inclusive generations).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceEntry {
    pub start: usize,
    pub end: usize,
    pub signature: Signature,
    pub movements: MovementVector,
    /// Clone count at promotion.
    pub dominance: u64,
}

/// A repeating run of entry signatures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    pub signature_tuples: Vec<Signature>,
    pub count: usize,
    /// Entry-list indices where each non-overlapping occurrence starts.
    pub starts: Vec<usize>,
}

/// The long-term memory pool: promoted entries plus mined patterns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackerSequence {
    pub entries: Vec<SequenceEntry>,
    pub patterns: Vec<Pattern>,
}

impl TrackerSequence {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Promote the report's dominant candidate (if any) into the sequence.
///
/// A candidate that repeats the last entry's signature in the very next
/// generation extends that entry's interval instead of appending; a
/// generation without a candidate leaves a gap, and a repeat after a gap
/// starts a fresh entry.
pub fn promote_dominant(
    report: &GenerationReport,
    sequence: &mut TrackerSequence,
    epsilon: f64,
) -> Result<(), MemoryError> {
    let Some(candidate) = &report.dominant else {
        return Ok(());
    };
    let sig = signature(&candidate.movements, epsilon)?;
    if let Some(last) = sequence.entries.last_mut() {
        if last.signature == sig && report.generation == last.end + 1 {
            last.end = report.generation;
            return Ok(());
        }
    }
    sequence.entries.push(SequenceEntry {
        start: report.generation,
        end: report.generation,
        signature: sig,
        movements: candidate.movements.clone(),
        dominance: candidate.clone_count as u64,
    });
    Ok(())
}

/// Mine the entry list for repeating contiguous signature patterns and
/// store them on the sequence.
///
/// Occurrences are counted greedily left-to-right without overlap. Results
/// are ordered longest-first, then by occurrence count, then by first
/// occurrence; a shorter pattern whose every occurrence sits inside some
/// occurrence of a single reported longer pattern is suppressed.
pub fn generalize(sequence: &mut TrackerSequence, min_repeats: usize, max_pattern_len: usize) {
    let sigs: Vec<&Signature> = sequence.entries.iter().map(|e| &e.signature).collect();
    sequence.patterns = find_patterns(&sigs, min_repeats, max_pattern_len)
        .into_iter()
        .map(|(window, starts)| Pattern {
            signature_tuples: window.into_iter().cloned().collect(),
            count: starts.len(),
            starts,
        })
        .collect();
}

fn find_patterns<'a>(
    sigs: &[&'a Signature],
    min_repeats: usize,
    max_pattern_len: usize,
) -> Vec<(Vec<&'a Signature>, Vec<usize>)> {
    let n = sigs.len();
    let mut candidates: Vec<(Vec<&Signature>, Vec<usize>)> = Vec::new();
    for len in 1..=max_pattern_len.min(n) {
        let mut seen: std::collections::HashSet<&[&Signature]> = std::collections::HashSet::new();
        for start in 0..=n - len {
            let window = &sigs[start..start + len];
            if !seen.insert(window) {
                continue;
            }
            let starts = greedy_occurrences(sigs, window);
            if starts.len() >= min_repeats {
                candidates.push((window.to_vec(), starts));
            }
        }
    }

    candidates.sort_by(|(wa, sa), (wb, sb)| {
        wb.len()
            .cmp(&wa.len())
            .then(sb.len().cmp(&sa.len()))
            .then(sa[0].cmp(&sb[0]))
    });

    let mut accepted: Vec<(Vec<&Signature>, Vec<usize>)> = Vec::new();
    for (window, starts) in candidates {
        let covered = accepted.iter().any(|(acc_window, acc_starts)| {
            acc_window.len() > window.len()
                && starts.iter().all(|&s| {
                    acc_starts
                        .iter()
                        .any(|&qs| qs <= s && s + window.len() <= qs + acc_window.len())
                })
        });
        if !covered {
            accepted.push((window, starts));
        }
    }
    accepted
}

fn greedy_occurrences(sigs: &[&Signature], window: &[&Signature]) -> Vec<usize> {
    let mut starts = Vec::new();
    let mut pos = 0;
    while pos + window.len() <= sigs.len() {
        if sigs[pos..pos + window.len()] == *window {
            starts.push(pos);
            pos += window.len();
        } else {
            pos += 1;
        }
    }
    starts
}

/// A distinct long-term snapshot with its accumulated dwell time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoolSnapshot {
    pub signature: Signature,
    pub movements: MovementVector,
    /// Total generations this signature was dominant for.
    pub dwell: usize,
    /// Index of the first sequence entry carrying this signature.
    pub first_entry: usize,
}

/// Distinct-by-signature snapshots across all entries, ordered by dwell
/// time descending then first appearance.
pub fn long_term_pool(sequence: &TrackerSequence) -> Vec<PoolSnapshot> {
    let mut by_sig: std::collections::HashMap<&Signature, usize> = std::collections::HashMap::new();
    let mut snapshots: Vec<PoolSnapshot> = Vec::new();
    for (idx, entry) in sequence.entries.iter().enumerate() {
        let dwell = entry.end - entry.start + 1;
        match by_sig.get(&entry.signature) {
            Some(&at) => snapshots[at].dwell += dwell,
            None => {
                by_sig.insert(&entry.signature, snapshots.len());
                snapshots.push(PoolSnapshot {
                    signature: entry.signature.clone(),
                    movements: entry.movements.clone(),
                    dwell,
                    first_entry: idx,
                });
            }
        }
    }
    snapshots.sort_by(|a, b| b.dwell.cmp(&a.dwell).then(a.first_entry.cmp(&b.first_entry)));
    snapshots
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::DominantCandidate;

    fn report_with(generation: usize, movements: Option<&[f64]>) -> GenerationReport {
        GenerationReport {
            generation,
            bind_records: vec![],
            clones_created: 0,
            deaths_apoptosis: 0,
            deaths_cap: 0,
            dominant: movements.map(|m| DominantCandidate {
                tracker_id: 1,
                lineage_id: 1,
                affinity: 1.0,
                clone_count: 3,
                movements: MovementVector::new(m.to_vec()).unwrap(),
            }),
        }
    }

    fn sig(values: &[i64]) -> Signature {
        Signature(values.to_vec())
    }

    #[test]
    fn signature_examples() {
        assert_eq!(signature(&[1.0, -0.9], 0.5).unwrap(), sig(&[2, -2]));
        assert_eq!(signature(&[0.0, 0.0, 0.0], 3.7).unwrap(), sig(&[0, 0, 0]));
        // Half rounds away from zero.
        assert_eq!(signature(&[0.25], 0.5).unwrap(), sig(&[1]));
        assert_eq!(signature(&[-0.25], 0.5).unwrap(), sig(&[-1]));
    }

    #[test]
    fn signature_rejects_bad_epsilon() {
        assert!(matches!(signature(&[1.0], 0.0), Err(MemoryError::BadEpsilon(_))));
        assert!(matches!(signature(&[1.0], -1.0), Err(MemoryError::BadEpsilon(_))));
    }

    #[test]
    fn promote_appends_collapses_and_gaps() {
        let mut seq = TrackerSequence::new();
        promote_dominant(&report_with(7, Some(&[1.0, 2.0])), &mut seq, 0.5).unwrap();
        assert_eq!(seq.entries.len(), 1);
        assert_eq!((seq.entries[0].start, seq.entries[0].end), (7, 7));

        // Same signature: the entry stretches instead of duplicating.
        promote_dominant(&report_with(8, Some(&[1.1, 2.1])), &mut seq, 0.5).unwrap();
        assert_eq!(seq.entries.len(), 1);
        assert_eq!((seq.entries[0].start, seq.entries[0].end), (7, 8));

        // No binder: gap, sequence unchanged.
        promote_dominant(&report_with(9, None), &mut seq, 0.5).unwrap();
        assert_eq!(seq.entries.len(), 1);
        assert_eq!(seq.entries[0].end, 8);

        // Different signature appends.
        promote_dominant(&report_with(10, Some(&[-3.0, 0.0])), &mut seq, 0.5).unwrap();
        assert_eq!(seq.entries.len(), 2);
        assert_eq!((seq.entries[1].start, seq.entries[1].end), (10, 10));

        // A repeated signature after a gap starts a fresh entry rather than
        // stretching the old one across generations it did not dominate.
        promote_dominant(&report_with(13, Some(&[-3.0, 0.0])), &mut seq, 0.5).unwrap();
        assert_eq!(seq.entries.len(), 3);
        assert_eq!((seq.entries[2].start, seq.entries[2].end), (13, 13));
    }

    #[test]
    fn promote_collapse_is_idempotent_over_a_run() {
        let mut seq = TrackerSequence::new();
        for g in 0..5 {
            promote_dominant(&report_with(g, Some(&[2.0])), &mut seq, 0.5).unwrap();
        }
        assert_eq!(seq.entries.len(), 1);
        assert_eq!((seq.entries[0].start, seq.entries[0].end), (0, 4));
    }

    #[test]
    fn promote_keeps_intervals_strictly_increasing() {
        let mut seq = TrackerSequence::new();
        let movements: [&[f64]; 4] = [&[1.0], &[2.0], &[1.0], &[3.0]];
        for (g, m) in movements.iter().enumerate() {
            promote_dominant(&report_with(g * 2, Some(m)), &mut seq, 0.5).unwrap();
        }
        for pair in seq.entries.windows(2) {
            assert!(pair[0].end < pair[1].start);
            assert!(pair[0].start <= pair[0].end);
        }
    }

    fn seq_of(signatures: &[&[i64]]) -> TrackerSequence {
        let entries = signatures
            .iter()
            .enumerate()
            .map(|(g, s)| SequenceEntry {
                start: g,
                end: g,
                signature: sig(s),
                movements: MovementVector::new(s.iter().map(|&v| v as f64).collect()).unwrap(),
                dominance: 1,
            })
            .collect();
        TrackerSequence { entries, patterns: vec![] }
    }

    #[test]
    fn generalize_alternating_pair() {
        // [A,B,A,B,A,B] -> (A,B) x3 at 0,2,4
        let mut seq = seq_of(&[&[1], &[2], &[1], &[2], &[1], &[2]]);
        generalize(&mut seq, 2, 10);
        let ab = seq
            .patterns
            .iter()
            .find(|p| p.signature_tuples == vec![sig(&[1]), sig(&[2])])
            .expect("(A,B) reported");
        assert_eq!(ab.count, 3);
        assert_eq!(ab.starts, vec![0, 2, 4]);
        // The singletons are fully covered by (A,B) and must be suppressed.
        assert!(seq.patterns.iter().all(|p| p.signature_tuples.len() > 1));
    }

    #[test]
    fn generalize_all_distinct_finds_nothing() {
        let mut seq = seq_of(&[&[1], &[2], &[3], &[4]]);
        generalize(&mut seq, 2, 10);
        assert!(seq.patterns.is_empty());
    }

    #[test]
    fn generalize_run_of_equal_signatures() {
        // [A,A,A,A], max len 2: (A,A) x2 reported, (A) x4 suppressed
        // because every occurrence is covered.
        let mut seq = seq_of(&[&[7], &[7], &[7], &[7]]);
        generalize(&mut seq, 2, 2);
        assert_eq!(seq.patterns.len(), 1);
        let p = &seq.patterns[0];
        assert_eq!(p.signature_tuples, vec![sig(&[7]), sig(&[7])]);
        assert_eq!(p.count, 2);
        assert_eq!(p.starts, vec![0, 2]);
    }

    #[test]
    fn generalize_uncovered_singleton_survives() {
        // [A,B,A,B,A]: (A,B) x2 at 0,2; (A) occurs at 0,2,4 and index 4 is
        // NOT inside any (A,B) occurrence, so (A) stays.
        let mut seq = seq_of(&[&[1], &[2], &[1], &[2], &[1]]);
        generalize(&mut seq, 2, 10);
        assert!(seq
            .patterns
            .iter()
            .any(|p| p.signature_tuples == vec![sig(&[1]), sig(&[2])] && p.count == 2));
        assert!(seq
            .patterns
            .iter()
            .any(|p| p.signature_tuples == vec![sig(&[1])] && p.count == 3));
    }

    #[test]
    fn long_term_pool_dedupes_and_sums_dwell() {
        let mut seq = seq_of(&[&[1], &[2], &[1]]);
        seq.entries[2].end = 5; // dwell 4 for the second [1] entry
        let pool = long_term_pool(&seq);
        assert_eq!(pool.len(), 2);
        // [1] has dwell 1 + 4 = 5, [2] has dwell 1; order by dwell desc.
        assert_eq!(pool[0].signature, sig(&[1]));
        assert_eq!(pool[0].dwell, 5);
        assert_eq!(pool[0].first_entry, 0);
        assert_eq!(pool[1].dwell, 1);

        assert!(long_term_pool(&TrackerSequence::new()).is_empty());

        let single = seq_of(&[&[9]]);
        let pool = long_term_pool(&single);
        assert_eq!(pool.len(), 1);
        assert_eq!(pool[0].dwell, 1);
    }
}
