//! Sequential pattern mining over per-phase behaviour sequences.
//!
//! Every utterance carries exactly one code, so sequence elements are single
//! items and PrefixSpan reduces to mining ordered subsequences (gaps allowed)
//! by pattern growth over pseudo-projected databases.

use std::collections::BTreeMap;
use std::hash::Hash;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::framework::{Condition, IndicatorCode, Phase};
use crate::ingest::SequenceDatabase;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpmError {
    #[error("sequence database has no non-empty sequences")]
    EmptyDatabase,
    #[error("min_support must lie in (0, 1], got {0}")]
    InvalidMinSupport(f64),
    #[error("no min_support on the grid yields a pattern of length 3")]
    NoQualifyingSupport,
}

/// Collapses runs of equal adjacent items: `<a, b, b, b, a>` becomes `<a, b, a>`.
pub fn merge_consecutive<T: PartialEq + Clone>(seq: &[T]) -> Vec<T> {
    let mut merged = seq.to_vec();
    merged.dedup();
    merged
}

/// Minimum number of supporting sequences for `min_support` over `n`
/// sequences: `ceil(min_support * n)`, at least 1.
///
/// The product is nudged down by 1e-9 before rounding up so that values such
/// as `0.3 * 10 = 3.0000000000000004` yield 3 rather than 4.
pub fn min_support_count(min_support: f64, n: usize) -> usize {
    ((min_support * n as f64 - 1e-9).ceil() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Pattern<T> {
    pub items: Vec<T>,
    /// Number of sequences containing the pattern.
    pub support: usize,
}

/// PrefixSpan miner configuration.
#[derive(Debug, Clone, Copy)]
pub struct PrefixSpan {
    min_support: f64,
    max_length: Option<usize>,
}

impl PrefixSpan {
    pub fn new(min_support: f64) -> Result<Self, SpmError> {
        if !(min_support > 0.0 && min_support <= 1.0) {
            return Err(SpmError::InvalidMinSupport(min_support));
        }
        Ok(PrefixSpan {
            min_support,
            max_length: None,
        })
    }

    /// Stops growing patterns beyond `len` items.
    pub fn max_length(mut self, len: usize) -> Self {
        self.max_length = Some(len);
        self
    }

    /// All patterns (length >= 1) contained in at least
    /// `ceil(min_support * n)` of the non-empty sequences, ordered by length
    /// and then lexicographically.
    pub fn mine<T>(&self, sequences: &[Vec<T>]) -> Result<Vec<Pattern<T>>, SpmError>
    where
        T: Ord + Copy + Send + Sync,
    {
        let n = sequences.iter().filter(|s| !s.is_empty()).count();
        if n == 0 {
            return Err(SpmError::EmptyDatabase);
        }
        let min_count = min_support_count(self.min_support, n);
        let max_length = self.max_length.unwrap_or(usize::MAX);
        if max_length == 0 {
            return Ok(Vec::new());
        }

        let root: Vec<(usize, usize)> = (0..sequences.len()).map(|i| (i, 0)).collect();
        let first_level = project(sequences, &root);
        let mut patterns: Vec<Pattern<T>> = first_level
            .into_par_iter()
            .filter(|(_, projected)| projected.len() >= min_count)
            .flat_map_iter(|(item, projected)| {
                let mut out = vec![Pattern {
                    items: vec![item],
                    support: projected.len(),
                }];
                let mut prefix = vec![item];
                grow(sequences, &projected, &mut prefix, min_count, max_length, &mut out);
                out
            })
            .collect();
        patterns.sort_by(|a, b| {
            a.items
                .len()
                .cmp(&b.items.len())
                .then_with(|| a.items.cmp(&b.items))
        });
        Ok(patterns)
    }
}

/// For each item appearing in the projected suffixes, the projection of the
/// database onto that item (the position just past its first occurrence in
/// each suffix). The projection's length is the item's support.
fn project<T: Ord + Copy>(
    sequences: &[Vec<T>],
    projected: &[(usize, usize)],
) -> BTreeMap<T, Vec<(usize, usize)>> {
    let mut next: BTreeMap<T, Vec<(usize, usize)>> = BTreeMap::new();
    for &(sid, start) in projected {
        let suffix = &sequences[sid][start..];
        for (offset, item) in suffix.iter().enumerate() {
            let entry = next.entry(*item).or_default();
            // only the first occurrence of an item within a suffix counts
            if entry.last().map(|&(s, _)| s) != Some(sid) {
                entry.push((sid, start + offset + 1));
            }
        }
    }
    next
}

fn grow<T: Ord + Copy>(
    sequences: &[Vec<T>],
    projected: &[(usize, usize)],
    prefix: &mut Vec<T>,
    min_count: usize,
    max_length: usize,
    out: &mut Vec<Pattern<T>>,
) {
    if prefix.len() >= max_length {
        return;
    }
    for (item, next) in project(sequences, projected) {
        if next.len() < min_count {
            continue;
        }
        prefix.push(item);
        out.push(Pattern {
            items: prefix.clone(),
            support: next.len(),
        });
        grow(sequences, &next, prefix, min_count, max_length, out);
        prefix.pop();
    }
}

/// Mines a sequence database as-is; callers merge repeated codes first.
pub fn prefix_span(db: &SequenceDatabase, min_support: f64) -> Result<Vec<Pattern<IndicatorCode>>, SpmError> {
    PrefixSpan::new(min_support)?.mine(&db.to_vecs())
}

/// Drops single-item patterns, keeping order.
pub fn filter_patterns<T>(patterns: Vec<Pattern<T>>) -> Vec<Pattern<T>> {
    patterns.into_iter().filter(|p| p.items.len() >= 2).collect()
}

/// Support used when automatic tuning is disabled.
pub const DEFAULT_MIN_SUPPORT: f64 = 0.30;

/// Candidate supports 0.95, 0.90, ..., 0.05.
pub fn min_support_grid() -> impl Iterator<Item = f64> {
    (1..=19).rev().map(|i| i as f64 / 20.0)
}

/// Largest grid support at which at least one pattern of length 3 is frequent.
pub fn auto_tune_min_support<T>(sequences: &[Vec<T>]) -> Result<f64, SpmError>
where
    T: Ord + Copy + Send + Sync,
{
    if sequences.iter().all(|s| s.is_empty()) {
        return Err(SpmError::EmptyDatabase);
    }
    for support in min_support_grid() {
        let patterns = PrefixSpan::new(support)?.max_length(3).mine(sequences)?;
        if patterns.iter().any(|p| p.items.len() >= 3) {
            return Ok(support);
        }
    }
    Err(SpmError::NoQualifyingSupport)
}

/// Disjoint occurrences of `pattern` in one sequence: match it greedily at
/// the leftmost positions, then restart on the remaining suffix.
pub fn count_in_sequence<T: PartialEq>(pattern: &[T], seq: &[T]) -> usize {
    if pattern.is_empty() {
        return 0;
    }
    let mut count = 0;
    let mut matched = 0;
    for item in seq {
        if *item == pattern[matched] {
            matched += 1;
            if matched == pattern.len() {
                count += 1;
                matched = 0;
            }
        }
    }
    count
}

/// Disjoint occurrences summed over every sequence.
pub fn count_occurrences<T: PartialEq>(pattern: &[T], sequences: &[Vec<T>]) -> usize {
    sequences
        .iter()
        .map(|s| count_in_sequence(pattern, s))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequentPattern {
    pub items: Vec<IndicatorCode>,
    pub support_count: usize,
    pub support_fraction: f64,
    pub occurrence_count: usize,
    pub student_pct: f64,
    /// Share of all occurrences within the same report.
    pub occurrence_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternReport {
    pub phase: Phase,
    pub condition: Condition,
    pub n_p: usize,
    pub min_support: f64,
    pub patterns: Vec<FrequentPattern>,
}

/// Merge repeats, mine, keep patterns of length >= 2, count occurrences and
/// attach percentages.
pub fn pattern_report(db: &SequenceDatabase, min_support: f64) -> Result<PatternReport, SpmError> {
    let merged = db.merged();
    let sequences = merged.to_vecs();
    let n_p = merged.n_p();
    let mined = filter_patterns(PrefixSpan::new(min_support)?.mine(&sequences)?);
    Ok(build_report(db.phase, db.condition, n_p, min_support, &sequences, mined))
}

pub(crate) fn build_report(
    phase: Phase,
    condition: Condition,
    n_p: usize,
    min_support: f64,
    sequences: &[Vec<IndicatorCode>],
    mined: Vec<Pattern<IndicatorCode>>,
) -> PatternReport {
    let counted: Vec<(Pattern<IndicatorCode>, usize)> = mined
        .into_iter()
        .map(|p| {
            let occurrences = count_occurrences(&p.items, sequences);
            (p, occurrences)
        })
        .collect();
    let total: usize = counted.iter().map(|(_, o)| o).sum();
    let patterns = counted
        .into_iter()
        .map(|(p, occurrence_count)| {
            let support_fraction = p.support as f64 / n_p as f64;
            FrequentPattern {
                items: p.items,
                support_count: p.support,
                support_fraction,
                occurrence_count,
                student_pct: 100.0 * support_fraction,
                occurrence_pct: 100.0 * occurrence_count as f64 / total as f64,
            }
        })
        .collect();
    PatternReport {
        phase,
        condition,
        n_p,
        min_support,
        patterns,
    }
}
