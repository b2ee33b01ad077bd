//! The collaborative problem solving coding framework and the dataset
//! container every other module consumes.
//!
//! The 50 indicator codes are a closed vocabulary embedded as a static
//! table. An [`IndicatorCode`] is an index into that table, so a value of the
//! type is always a valid code; unknown labels are rejected when parsed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dimension {
    ProblemSolving,
    Scripting,
    Other,
}

impl Dimension {
    pub fn label(self) -> &'static str {
        match self {
            Dimension::ProblemSolving => "Problem Solving",
            Dimension::Scripting => "Scripting",
            Dimension::Other => "Other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Subskill {
    SS1,
    SS2,
    SS3,
    SS4,
    SS5,
    SS6,
    SS7,
    SS8,
    SS9,
    SS10,
    SC11,
    SC12,
    Other,
}

impl Subskill {
    pub fn id(self) -> &'static str {
        match self {
            Subskill::SS1 => "SS1",
            Subskill::SS2 => "SS2",
            Subskill::SS3 => "SS3",
            Subskill::SS4 => "SS4",
            Subskill::SS5 => "SS5",
            Subskill::SS6 => "SS6",
            Subskill::SS7 => "SS7",
            Subskill::SS8 => "SS8",
            Subskill::SS9 => "SS9",
            Subskill::SS10 => "SS10",
            Subskill::SC11 => "SC11",
            Subskill::SC12 => "SC12",
            Subskill::Other => "Other",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Subskill::SS1 => "Sense-making",
            Subskill::SS2 => "Building shared understanding",
            Subskill::SS3 => "Formulating a solution",
            Subskill::SS4 => "Defining roles and responsibilities",
            Subskill::SS5 => "Reaching a solution",
            Subskill::SS6 => "Maintaining roles and responsibilities",
            Subskill::SS7 => "Maintaining shared understanding",
            Subskill::SS8 => "Evaluating the solution",
            Subskill::SS9 => "Reflecting",
            Subskill::SS10 => "Evaluating on group work",
            Subskill::SC11 => "Using scripting",
            Subskill::SC12 => "Regulating scripting",
            Subskill::Other => "Other engagements during task",
        }
    }
}

/// One row of the coding framework.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndicatorDef {
    pub code: &'static str,
    pub dimension: Dimension,
    pub subskill: Subskill,
    pub description: &'static str,
}

const fn def(
    code: &'static str,
    dimension: Dimension,
    subskill: Subskill,
    description: &'static str,
) -> IndicatorDef {
    IndicatorDef {
        code,
        dimension,
        subskill,
        description,
    }
}

use Dimension::{Other as OT, ProblemSolving as PS, Scripting as SC};

static FRAMEWORK: [IndicatorDef; 50] = [
    def("PS01", PS, Subskill::SS1, "Talking about the task questions in general terms to understand about the problem-solving task"),
    def("PS02", PS, Subskill::SS1, "Explaining ideas or concepts in the problem-solving task with reference to prior knowledge or definitions from information sources"),
    def("PS03", PS, Subskill::SS1, "Addressing difficulties or limitations that obstruct problem solving"),
    def("PS04", PS, Subskill::SS2, "Asking questions to clarify understanding, ideas or contributions"),
    def("PS05", PS, Subskill::SS2, "Answering questions to clarify understanding, ideas or contributions"),
    def("PS06", PS, Subskill::SS2, "Reiterating or paraphrasing oneself or others\u{2019} ideas or contributions"),
    def("PS07", PS, Subskill::SS2, "Adapting and building on the ideas or contributions of others"),
    def("PS08", PS, Subskill::SS2, "Stating agreement with others"),
    def("PS09", PS, Subskill::SS2, "Discovering perspectives and abilities of group members"),
    def("PS10", PS, Subskill::SS2, "Sharing information from sources which contribute to formulating the problem-solving task"),
    def("PS11", PS, Subskill::SS2, "Stating disagreement with others"),
    def("PS12", PS, Subskill::SS2, "Constructing arguments in favour of one's own ideas or contributions"),
    def("PS13", PS, Subskill::SS2, "Resolving differences"),
    def("PS14", PS, Subskill::SS2, "Reaching a compromise with others"),
    def("PS15", PS, Subskill::SS2, "Identifying and abstracting relevant information about the task context"),
    def("PS16", PS, Subskill::SS2, "Establishing connections and patterns between relevant information in the problem-solving task"),
    def("PS17", PS, Subskill::SS2, "Dissecting the problem into smaller tasks"),
    def("PS18", PS, Subskill::SS3, "Building a representation of the problem-solving task"),
    def("PS19", PS, Subskill::SS3, "Creating an ordered step-by-step plan"),
    def("PS20", PS, Subskill::SS3, "Proposing ideas or specific solution methods to solve the task questions"),
    def("PS21", PS, Subskill::SS4, "Discussing required roles and collaborative interaction to address the problem-solving task"),
    def("PS22", PS, Subskill::SS4, "Coordinating sub-tasks to be performed"),
    def("PS23", PS, Subskill::SS5, "Sharing contributions and findings of individual and group sub-tasks"),
    def("PS24", PS, Subskill::SS5, "Providing an answer to the task questions"),
    def("PS25", PS, Subskill::SS5, "Responding to or acknowledging the contributions of others"),
    def("PS26", PS, Subskill::SS6, "Discussing the progress and status of individual and group sub-tasks"),
    def("PS27", PS, Subskill::SS6, "Providing feedback on the progress and status of individual or group sub-tasks"),
    def("PS28", PS, Subskill::SS6, "Recognising strengths and weaknesses of self and others"),
    def("PS29", PS, Subskill::SS6, "Adapting group organisation to adjust individual and group sub-tasks"),
    def("PS30", PS, Subskill::SS7, "Providing feedback or instructional support to others"),
    def("PS31", PS, Subskill::SS7, "Using feedback provided to clarify or elaborate own ideas"),
    def("PS32", PS, Subskill::SS7, "Making iterative adaptations to the plan based on outcomes, new information and new ideas"),
    def("PS33", PS, Subskill::SS8, "Anticipating issues or errors"),
    def("PS34", PS, Subskill::SS8, "Testing to detect working order"),
    def("PS35", PS, Subskill::SS8, "Detecting and hypothesising issues or errors"),
    def("PS36", PS, Subskill::SS8, "Identifying the need for additional information, resources or tasks to address issues or fix errors"),
    def("PS37", PS, Subskill::SS8, "Addressing issues or fixing errors"),
    def("PS38", PS, Subskill::SS8, "Agreeing the sub-goals or goal-state have been effectively solved to answer the problem"),
    def("PS39", PS, Subskill::SS9, "Reusing, remixing, and integrating ideas to develop alternative strategies for flawed solutions"),
    def("PS40", PS, Subskill::SS9, "Building on others\u{2019} ideas to improve alternative strategies"),
    def("PS41", PS, Subskill::SS9, "Discussing the limitations of the current solution for future problem-solving tasks"),
    def("PS42", PS, Subskill::SS10, "Discussing group dynamics, effort, strengths and weakness"),
    def("S1", SC, Subskill::SC11, "Discussing understanding of script components"),
    def("S2", SC, Subskill::SC11, "Prompting responses or actions from others to script components"),
    def("S3", SC, Subskill::SC11, "Responding to script components"),
    def("S4", SC, Subskill::SC12, "Discussing work status and progress on script components"),
    def("S5", SC, Subskill::SC12, "Disconnecting with group progress and usage of script components"),
    def("OT1", OT, Subskill::Other, "Technical issues or logistical tasks related to the learning environment"),
    def("OT2", OT, Subskill::Other, "Socialising"),
    def("OT3", OT, Subskill::Other, "Refocusing to disrupt engagement in technical issues, logistical tasks or socialising"),
];

/// Returns the full coding framework in canonical order
/// (PS01..PS42, S1..S5, OT1..OT3).
pub fn load_framework() -> Vec<IndicatorCode> {
    IndicatorCode::all().collect()
}

/// Writes the framework as CSV with columns `code,dimension,subskill,description`.
pub fn write_framework_csv<W: std::io::Write>(out: W) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["code", "dimension", "subskill", "description"])?;
    for code in IndicatorCode::all() {
        writer.write_record([
            code.code(),
            code.dimension().label(),
            code.subskill().id(),
            code.description(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// A behavioural indicator from the 50-code vocabulary.
///
/// Ordering follows the framework table, which is also the order used for
/// "lexicographic" tie-breaking of mined patterns.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IndicatorCode(u8);

impl IndicatorCode {
    pub const COUNT: usize = 50;

    pub fn all() -> impl Iterator<Item = IndicatorCode> + Clone {
        (0..Self::COUNT as u8).map(IndicatorCode)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        (index < Self::COUNT).then_some(IndicatorCode(index as u8))
    }

    fn def(self) -> &'static IndicatorDef {
        &FRAMEWORK[self.0 as usize]
    }

    /// Canonical, zero-padded label (`PS04`, `S1`, `OT2`).
    pub fn code(self) -> &'static str {
        self.def().code
    }

    pub fn dimension(self) -> Dimension {
        self.def().dimension
    }

    pub fn subskill(self) -> Subskill {
        self.def().subskill
    }

    pub fn description(self) -> &'static str {
        self.def().description
    }
}

impl fmt::Debug for IndicatorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl fmt::Display for IndicatorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown indicator code {0:?}")]
pub struct UnknownIndicator(pub String);

impl FromStr for IndicatorCode {
    type Err = UnknownIndicator;

    /// Accepts canonical labels and the unpadded aliases (`PS4` for `PS04`),
    /// case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || UnknownIndicator(s.to_string());
        let upper = s.trim().to_ascii_uppercase();
        let (offset, max, digits) = if let Some(rest) = upper.strip_prefix("PS") {
            (0usize, 42usize, rest)
        } else if let Some(rest) = upper.strip_prefix("OT") {
            (47, 3, rest)
        } else if let Some(rest) = upper.strip_prefix('S') {
            (42, 5, rest)
        } else {
            return Err(err());
        };
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let number: usize = digits.parse().map_err(|_| err())?;
        if number == 0 || number > max {
            return Err(err());
        }
        Ok(IndicatorCode((offset + number - 1) as u8))
    }
}

impl Serialize for IndicatorCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for IndicatorCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A problem solving phase. Phases are totally ordered A1 < A2 < A3 < A4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    A1,
    A2,
    A3,
    A4,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::A1, Phase::A2, Phase::A3, Phase::A4];

    pub fn id(self) -> &'static str {
        match self {
            Phase::A1 => "A1",
            Phase::A2 => "A2",
            Phase::A3 => "A3",
            Phase::A4 => "A4",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Phase::A1 => "problem identification",
            Phase::A2 => "ideation, planning and decision making",
            Phase::A3 => "plan implementation and solution generation",
            Phase::A4 => "solution checking, problem extension and reflection",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown phase {0:?}")]
pub struct UnknownPhase(pub String);

impl FromStr for Phase {
    type Err = UnknownPhase;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A1" => Ok(Phase::A1),
            "A2" => Ok(Phase::A2),
            "A3" => Ok(Phase::A3),
            "A4" => Ok(Phase::A4),
            _ => Err(UnknownPhase(s.to_string())),
        }
    }
}

/// Scaffold condition a triad was allocated to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Minimal,
    Maximal,
}

impl Condition {
    pub const ALL: [Condition; 2] = [Condition::Minimal, Condition::Maximal];

    pub fn id(self) -> &'static str {
        match self {
            Condition::Minimal => "minimal",
            Condition::Maximal => "maximal",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown condition {0:?} (expected minimal or maximal)")]
pub struct UnknownCondition(pub String);

impl FromStr for Condition {
    type Err = UnknownCondition;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "minimal" => Ok(Condition::Minimal),
            "maximal" => Ok(Condition::Maximal),
            _ => Err(UnknownCondition(s.to_string())),
        }
    }
}

macro_rules! string_id {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }
    };
}

string_id!(StudentId);
string_id!(TriadId);

/// UTC instant with millisecond resolution, stored as milliseconds since the
/// Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn from_millis(ms: i64) -> Self {
        Timestamp(ms)
    }

    pub fn millis(self) -> i64 {
        self.0
    }

    /// Parses ISO-8601 / RFC 3339 (`2024-01-15T09:00:00.250Z`). A missing
    /// offset is read as UTC. Sub-millisecond digits are truncated.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(s) {
            return Some(Timestamp(dt.timestamp_millis()));
        }
        chrono::NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f")
            .ok()
            .map(|naive| Timestamp(naive.and_utc().timestamp_millis()))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match chrono::DateTime::from_timestamp_millis(self.0) {
            Some(dt) => write!(f, "{}", dt.format("%Y-%m-%dT%H:%M:%S%.3fZ")),
            None => write!(f, "{}ms", self.0),
        }
    }
}

/// One timestamped, coded dialogue event.
///
/// `phase` is `None` until the dataset has been aligned against the phase log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedUtterance {
    pub student_id: StudentId,
    pub triad_id: TriadId,
    pub condition: Condition,
    pub timestamp: Timestamp,
    pub phase: Option<Phase>,
    pub indicator: IndicatorCode,
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseEntry {
    pub student_id: StudentId,
    pub phase: Phase,
    pub entry: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RosterEntry {
    pub triad_id: TriadId,
    pub condition: Condition,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SessionDataset {
    pub utterances: Vec<CodedUtterance>,
    pub phase_log: Vec<PhaseEntry>,
    pub roster: BTreeMap<StudentId, RosterEntry>,
}

impl SessionDataset {
    /// Phase entries of one student, ordered by entry time.
    pub fn phase_entries(&self, student: &StudentId) -> Vec<&PhaseEntry> {
        let mut entries: Vec<_> = self
            .phase_log
            .iter()
            .filter(|e| &e.student_id == student)
            .collect();
        entries.sort_by_key(|e| e.entry);
        entries
    }
}

/// A single broken dataset invariant, carrying the offending record.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("phase log for {student} regresses: {previous} at {previous_at} then {phase} at {at}")]
    NonMonotonePhase {
        student: StudentId,
        previous: Phase,
        previous_at: Timestamp,
        phase: Phase,
        at: Timestamp,
    },
    #[error("utterance {index} by {student} has no roster entry")]
    OrphanStudent { index: usize, student: StudentId },
    #[error("phase log entry for {student} has no roster entry")]
    OrphanPhaseEntry { student: StudentId },
    #[error("triad {triad} mixes conditions")]
    MixedConditionTriad { triad: TriadId },
    #[error("utterance {index} by {student} disagrees with the roster on triad or condition")]
    RosterMismatch { index: usize, student: StudentId },
    #[error("utterance {index} by {student} is labelled {recorded} but the phase log places it in {expected:?}")]
    PhaseMismatch {
        index: usize,
        student: StudentId,
        recorded: Phase,
        expected: Option<Phase>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Tolerance for utterances logged shortly before a student's first phase
/// entry (clock skew between the transcript and the platform log).
pub const CLOCK_SKEW_TOLERANCE_MS: i64 = 2000;

/// Phase of an utterance at `at` given a student's entries sorted by time.
pub(crate) fn phase_at(entries: &[&PhaseEntry], at: Timestamp) -> Option<Phase> {
    let first = entries.first()?;
    match entries.iter().rev().find(|e| e.entry <= at) {
        Some(entry) => Some(entry.phase),
        None if first.entry.0 - at.0 <= CLOCK_SKEW_TOLERANCE_MS => Some(first.phase),
        None => None,
    }
}

/// Checks every dataset invariant and reports all violations found.
pub fn validate_dataset(d: &SessionDataset) -> ValidationReport {
    let mut violations = Vec::new();

    let mut triad_conditions: BTreeMap<&TriadId, BTreeSet<Condition>> = BTreeMap::new();
    for entry in d.roster.values() {
        triad_conditions
            .entry(&entry.triad_id)
            .or_default()
            .insert(entry.condition);
    }
    for (triad, conditions) in triad_conditions {
        if conditions.len() > 1 {
            violations.push(Violation::MixedConditionTriad {
                triad: triad.clone(),
            });
        }
    }

    let mut by_student: BTreeMap<&StudentId, Vec<&PhaseEntry>> = BTreeMap::new();
    for entry in &d.phase_log {
        by_student.entry(&entry.student_id).or_default().push(entry);
    }
    for (student, entries) in by_student.iter_mut() {
        if !d.roster.contains_key(*student) {
            violations.push(Violation::OrphanPhaseEntry {
                student: (*student).clone(),
            });
        }
        entries.sort_by_key(|e| e.entry);
        for pair in entries.windows(2) {
            let (prev, next) = (pair[0], pair[1]);
            if next.entry <= prev.entry || next.phase <= prev.phase {
                violations.push(Violation::NonMonotonePhase {
                    student: (*student).clone(),
                    previous: prev.phase,
                    previous_at: prev.entry,
                    phase: next.phase,
                    at: next.entry,
                });
            }
        }
    }

    for (index, u) in d.utterances.iter().enumerate() {
        match d.roster.get(&u.student_id) {
            None => violations.push(Violation::OrphanStudent {
                index,
                student: u.student_id.clone(),
            }),
            Some(r) if r.triad_id != u.triad_id || r.condition != u.condition => {
                violations.push(Violation::RosterMismatch {
                    index,
                    student: u.student_id.clone(),
                })
            }
            Some(_) => {}
        }
        if let Some(recorded) = u.phase {
            let entries = by_student
                .get(&u.student_id)
                .map(Vec::as_slice)
                .unwrap_or(&[]);
            let expected = phase_at(entries, u.timestamp);
            if expected != Some(recorded) {
                violations.push(Violation::PhaseMismatch {
                    index,
                    student: u.student_id.clone(),
                    recorded,
                    expected,
                });
            }
        }
    }

    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn framework_has_fifty_codes() {
        let codes = load_framework();
        assert_eq!(codes.len(), 50);
        let count = |d| codes.iter().filter(|c| c.dimension() == d).count();
        assert_eq!(count(Dimension::ProblemSolving), 42);
        assert_eq!(count(Dimension::Scripting), 5);
        assert_eq!(count(Dimension::Other), 3);
    }

    #[test]
    fn table_rows_match_reference() {
        let ps20: IndicatorCode = "PS20".parse().unwrap();
        assert_eq!(ps20.subskill(), Subskill::SS3);
        assert_eq!(
            ps20.description(),
            "Proposing ideas or specific solution methods to solve the task questions"
        );
        let ot2: IndicatorCode = "OT2".parse().unwrap();
        assert_eq!(ot2.dimension(), Dimension::Other);
        assert_eq!(ot2.description(), "Socialising");
        let s4: IndicatorCode = "S4".parse().unwrap();
        assert_eq!(s4.subskill(), Subskill::SC12);
        let ps42: IndicatorCode = "PS42".parse().unwrap();
        assert_eq!(ps42.subskill(), Subskill::SS10);
    }

    #[test]
    fn prefix_determines_dimension() {
        for code in IndicatorCode::all() {
            let expected = if code.code().starts_with("PS") {
                Dimension::ProblemSolving
            } else if code.code().starts_with("OT") {
                Dimension::Other
            } else {
                assert!(code.code().starts_with('S'));
                Dimension::Scripting
            };
            assert_eq!(code.dimension(), expected, "{code}");
        }
    }

    #[test]
    fn parse_round_trips_and_accepts_aliases() {
        for code in IndicatorCode::all() {
            assert_eq!(code.code().parse::<IndicatorCode>().unwrap(), code);
        }
        assert_eq!("PS4".parse::<IndicatorCode>().unwrap().code(), "PS04");
        assert_eq!(" ps1 ".parse::<IndicatorCode>().unwrap().code(), "PS01");
        assert_eq!("S01".parse::<IndicatorCode>().unwrap().code(), "S1");
        for bad in ["PS99", "PS0", "PS43", "S6", "OT4", "X1", "PS", "", "PS-1", "P S1"] {
            assert!(bad.parse::<IndicatorCode>().is_err(), "{bad}");
        }
    }

    #[test]
    fn framework_csv_has_header_and_rows() {
        let mut buf = Vec::new();
        write_framework_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "code,dimension,subskill,description");
        assert_eq!(lines.len(), 51);
        assert_eq!(lines[49], "OT2,Other,Other,Socialising");
    }

    #[test]
    fn timestamps_parse_with_and_without_offset() {
        let a = Timestamp::parse("2024-01-15T09:00:00.250Z").unwrap();
        let b = Timestamp::parse("2024-01-15T09:00:00.250").unwrap();
        let c = Timestamp::parse("2024-01-15T10:00:00.250+01:00").unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(a.to_string(), "2024-01-15T09:00:00.250Z");
        assert!(Timestamp::parse("not-a-time").is_none());
    }

    fn fixture() -> SessionDataset {
        let s1 = StudentId::from("s1");
        let t = TriadId::from("t1");
        let utt = |ms, code: &str| CodedUtterance {
            student_id: s1.clone(),
            triad_id: t.clone(),
            condition: Condition::Minimal,
            timestamp: Timestamp(ms),
            phase: None,
            indicator: code.parse().unwrap(),
            text: None,
        };
        SessionDataset {
            utterances: vec![utt(10_000, "PS04"), utt(20_000, "S4"), utt(70_000, "OT2")],
            phase_log: vec![
                PhaseEntry {
                    student_id: s1.clone(),
                    phase: Phase::A1,
                    entry: Timestamp(10_000),
                },
                PhaseEntry {
                    student_id: s1.clone(),
                    phase: Phase::A2,
                    entry: Timestamp(60_000),
                },
            ],
            roster: BTreeMap::from([(
                s1,
                RosterEntry {
                    triad_id: t,
                    condition: Condition::Minimal,
                },
            )]),
        }
    }

    #[test]
    fn well_formed_fixture_validates() {
        assert!(validate_dataset(&fixture()).is_ok());
    }

    #[test]
    fn regressing_phase_log_is_reported() {
        let mut d = fixture();
        let s1 = StudentId::from("s1");
        d.phase_log = vec![
            PhaseEntry {
                student_id: s1.clone(),
                phase: Phase::A1,
                entry: Timestamp(0),
            },
            PhaseEntry {
                student_id: s1.clone(),
                phase: Phase::A3,
                entry: Timestamp(1_000),
            },
            PhaseEntry {
                student_id: s1,
                phase: Phase::A2,
                entry: Timestamp(2_000),
            },
        ];
        let report = validate_dataset(&d);
        assert!(matches!(
            report.violations.as_slice(),
            [Violation::NonMonotonePhase {
                previous: Phase::A3,
                phase: Phase::A2,
                ..
            }]
        ));
    }

    #[test]
    fn orphans_and_mixed_triads_are_reported() {
        let mut d = fixture();
        d.utterances[1].student_id = StudentId::from("ghost");
        d.roster.insert(
            StudentId::from("s2"),
            RosterEntry {
                triad_id: TriadId::from("t1"),
                condition: Condition::Maximal,
            },
        );
        let report = validate_dataset(&d);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::OrphanStudent { index: 1, .. })));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::MixedConditionTriad { .. })));
    }

    #[test]
    fn inconsistent_phase_label_is_reported() {
        let mut d = fixture();
        d.utterances[0].phase = Some(Phase::A2);
        d.utterances[2].phase = Some(Phase::A2);
        let report = validate_dataset(&d);
        assert_eq!(report.violations.len(), 1);
        assert!(matches!(
            report.violations[0],
            Violation::PhaseMismatch {
                index: 0,
                expected: Some(Phase::A1),
                ..
            }
        ));
    }
}
