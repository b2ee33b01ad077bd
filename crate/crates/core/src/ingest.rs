//! Event-log ingestion: CSV parsing, phase alignment and per-phase sequence
//! databases.
//!
//! Three files make up a session:
//!
//! - `utterances.csv`: `student_id,triad_id,timestamp,indicator,text`
//! - `phase_log.csv`: `student_id,phase,entry_timestamp`
//! - `roster.csv`: `student_id,triad_id,condition`
//!
//! Records are sorted by timestamp after parsing, with ties broken by line
//! number, so row order within a file does not matter.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::Serialize;
use thiserror::Error;

use crate::framework::{
    phase_at, validate_dataset, CodedUtterance, Condition, IndicatorCode, Phase, PhaseEntry,
    RosterEntry, SessionDataset, StudentId, Timestamp, TriadId, ValidationReport,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{file}:{line}: {reason}")]
    MalformedRow {
        file: &'static str,
        line: u64,
        reason: String,
    },
    #[error("{file}:{line}: unknown indicator code {code:?}")]
    UnknownIndicator {
        file: &'static str,
        line: u64,
        code: String,
    },
    #[error("{file}:{line}: {student} enters {phase} more than once")]
    DuplicatePhaseEntry {
        file: &'static str,
        line: u64,
        student: StudentId,
        phase: Phase,
    },
    #[error("dataset failed validation:\n{0}")]
    Invalid(ValidationReport),
    #[error("{student} has utterances but no phase log entries")]
    MissingPhaseLog { student: StudentId },
    #[error("utterance by {student} at {at} precedes the first phase entry ({first_entry}) by more than 2000 ms")]
    UnalignedUtterance {
        student: StudentId,
        at: Timestamp,
        first_entry: Timestamp,
    },
    #[error("I/O error reading {file}: {source}")]
    Io {
        file: &'static str,
        #[source]
        source: std::io::Error,
    },
}

impl IngestError {
    /// True when the failure comes from the underlying reader rather than
    /// the content of the files.
    pub fn is_io(&self) -> bool {
        matches!(self, IngestError::Io { .. })
    }
}

const UTTERANCES: &str = "utterances.csv";
const PHASE_LOG: &str = "phase_log.csv";
const ROSTER: &str = "roster.csv";

/// Reads a CSV with an exact expected header. Yields `(line, record)` pairs.
fn read_rows<R: Read>(
    input: R,
    file: &'static str,
    header: &[&str],
) -> Result<Vec<(u64, csv::StringRecord)>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let malformed = |line: u64, reason: String| IngestError::MalformedRow { file, line, reason };
    let convert = |e: csv::Error| {
        let line = e.position().map(|p| p.line()).unwrap_or(0);
        match e.into_kind() {
            csv::ErrorKind::Io(source) => IngestError::Io { file, source },
            other => malformed(line, format!("{other:?}")),
        }
    };

    let found = reader.headers().map_err(convert)?.clone();
    let found: Vec<&str> = found.iter().map(str::trim).collect();
    if found != header {
        return Err(malformed(
            1,
            format!("expected header {:?}, found {:?}", header.join(","), found.join(",")),
        ));
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(convert)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != header.len() {
            return Err(malformed(
                line,
                format!("expected {} columns, found {}", header.len(), record.len()),
            ));
        }
        rows.push((line, record));
    }
    Ok(rows)
}

fn non_empty(
    field: &str,
    name: &str,
    file: &'static str,
    line: u64,
) -> Result<String, IngestError> {
    let value = field.trim();
    if value.is_empty() {
        return Err(IngestError::MalformedRow {
            file,
            line,
            reason: format!("empty {name}"),
        });
    }
    Ok(value.to_string())
}

fn timestamp(field: &str, file: &'static str, line: u64) -> Result<Timestamp, IngestError> {
    Timestamp::parse(field).ok_or_else(|| IngestError::MalformedRow {
        file,
        line,
        reason: format!("invalid timestamp {field:?}"),
    })
}

/// Parses the three session files into a validated, not yet aligned dataset.
pub fn parse_event_log<U: Read, P: Read, R: Read>(
    utterance_file: U,
    phase_log_file: P,
    roster_file: R,
) -> Result<SessionDataset, IngestError> {
    let mut roster = BTreeMap::new();
    for (line, row) in read_rows(roster_file, ROSTER, &["student_id", "triad_id", "condition"])? {
        let student = StudentId(non_empty(&row[0], "student_id", ROSTER, line)?);
        let triad_id = TriadId(non_empty(&row[1], "triad_id", ROSTER, line)?);
        let condition: Condition = row[2].parse().map_err(|e| IngestError::MalformedRow {
            file: ROSTER,
            line,
            reason: format!("{e}"),
        })?;
        if roster.contains_key(&student) {
            return Err(IngestError::MalformedRow {
                file: ROSTER,
                line,
                reason: format!("student {student} listed twice"),
            });
        }
        roster.insert(student, RosterEntry { triad_id, condition });
    }

    let mut phase_log = Vec::new();
    let mut seen = BTreeSet::new();
    for (line, row) in read_rows(phase_log_file, PHASE_LOG, &["student_id", "phase", "entry_timestamp"])? {
        let student = StudentId(non_empty(&row[0], "student_id", PHASE_LOG, line)?);
        let phase: Phase = row[1].parse().map_err(|e| IngestError::MalformedRow {
            file: PHASE_LOG,
            line,
            reason: format!("{e}"),
        })?;
        let entry = timestamp(&row[2], PHASE_LOG, line)?;
        if !seen.insert((student.clone(), phase)) {
            return Err(IngestError::DuplicatePhaseEntry {
                file: PHASE_LOG,
                line,
                student,
                phase,
            });
        }
        phase_log.push((entry, line, PhaseEntry { student_id: student, phase, entry }));
    }
    phase_log.sort_by_key(|(entry, line, _)| (*entry, *line));

    let mut utterances = Vec::new();
    for (line, row) in read_rows(
        utterance_file,
        UTTERANCES,
        &["student_id", "triad_id", "timestamp", "indicator", "text"],
    )? {
        let student_id = StudentId(non_empty(&row[0], "student_id", UTTERANCES, line)?);
        let triad_id = TriadId(non_empty(&row[1], "triad_id", UTTERANCES, line)?);
        let at = timestamp(&row[2], UTTERANCES, line)?;
        let indicator: IndicatorCode =
            row[3].parse().map_err(|_| IngestError::UnknownIndicator {
                file: UTTERANCES,
                line,
                code: row[3].to_string(),
            })?;
        let text = (!row[4].is_empty()).then(|| row[4].to_string());
        // Condition comes from the roster; orphans are caught by validation.
        let condition = roster
            .get(&student_id)
            .map(|r: &RosterEntry| r.condition)
            .unwrap_or(Condition::Minimal);
        utterances.push((
            at,
            line,
            CodedUtterance {
                student_id,
                triad_id,
                condition,
                timestamp: at,
                phase: None,
                indicator,
                text,
            },
        ));
    }
    utterances.sort_by_key(|(at, line, _)| (*at, *line));

    let dataset = SessionDataset {
        utterances: utterances.into_iter().map(|(_, _, u)| u).collect(),
        phase_log: phase_log.into_iter().map(|(_, _, e)| e).collect(),
        roster,
    };
    let report = validate_dataset(&dataset);
    if !report.is_ok() {
        return Err(IngestError::Invalid(report));
    }
    Ok(dataset)
}

/// A dataset in which every utterance carries the phase assigned from its
/// student's phase log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedDataset(SessionDataset);

impl AlignedDataset {
    pub fn dataset(&self) -> &SessionDataset {
        &self.0
    }

    pub fn into_inner(self) -> SessionDataset {
        self.0
    }

    /// Aligned utterances paired with their phase, in timestamp order.
    pub fn utterances(&self) -> impl Iterator<Item = (Phase, &CodedUtterance)> {
        self.0
            .utterances
            .iter()
            .map(|u| (u.phase.expect("aligned dataset"), u))
    }

    pub fn utterances_in(&self, condition: Condition) -> impl Iterator<Item = (Phase, &CodedUtterance)> {
        self.utterances().filter(move |(_, u)| u.condition == condition)
    }
}

/// Assigns each utterance the phase of the latest entry at or before its
/// timestamp. Utterances at most 2000 ms before the first entry fall into
/// that first phase. Alignment is recomputed from the log, so applying it to
/// an already aligned dataset gives the same result.
pub fn align_phases(d: &SessionDataset) -> Result<AlignedDataset, IngestError> {
    let mut entries: BTreeMap<&StudentId, Vec<&PhaseEntry>> = BTreeMap::new();
    for entry in &d.phase_log {
        entries.entry(&entry.student_id).or_default().push(entry);
    }
    for list in entries.values_mut() {
        list.sort_by_key(|e| e.entry);
    }

    let mut aligned = d.clone();
    for u in aligned.utterances.iter_mut() {
        let list = entries
            .get(&u.student_id)
            .ok_or_else(|| IngestError::MissingPhaseLog {
                student: u.student_id.clone(),
            })?;
        let phase = phase_at(list, u.timestamp).ok_or_else(|| IngestError::UnalignedUtterance {
            student: u.student_id.clone(),
            at: u.timestamp,
            first_entry: list[0].entry,
        })?;
        u.phase = Some(phase);
    }
    Ok(AlignedDataset(aligned))
}

/// Per (phase, condition) collection of student code sequences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SequenceDatabase {
    pub phase: Phase,
    pub condition: Condition,
    pub sequences: BTreeMap<StudentId, Vec<IndicatorCode>>,
}

impl SequenceDatabase {
    /// Number of students with a non-empty sequence.
    pub fn n_p(&self) -> usize {
        self.sequences.values().filter(|s| !s.is_empty()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.n_p() == 0
    }

    /// Sequences in student order.
    pub fn to_vecs(&self) -> Vec<Vec<IndicatorCode>> {
        self.sequences.values().cloned().collect()
    }

    /// Copy with runs of repeated adjacent codes collapsed.
    pub fn merged(&self) -> SequenceDatabase {
        SequenceDatabase {
            phase: self.phase,
            condition: self.condition,
            sequences: self
                .sequences
                .iter()
                .map(|(k, v)| (k.clone(), crate::spm::merge_consecutive(v)))
                .collect(),
        }
    }
}

/// One timestamp-ordered sequence per student of `condition` who spoke in
/// `phase`. Silent students are omitted.
pub fn build_sequences(d: &AlignedDataset, phase: Phase, condition: Condition) -> SequenceDatabase {
    let mut sequences: BTreeMap<StudentId, Vec<IndicatorCode>> = BTreeMap::new();
    for (p, u) in d.utterances_in(condition) {
        if p == phase {
            sequences
                .entry(u.student_id.clone())
                .or_default()
                .push(u.indicator);
        }
    }
    SequenceDatabase {
        phase,
        condition,
        sequences,
    }
}
