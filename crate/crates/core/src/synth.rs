//! Seeded synthetic sessions for end-to-end runs.
//!
//! Students are grouped into triads and triads are split evenly between the
//! two conditions at random. Each condition assigns every student a depth:
//! the number of leading phases in which they speak. Depth counts are fixed
//! by `active_fraction`, so the per-phase count of speaking students is
//! exact. Within a phase, utterances arrive as a Poisson process; each code
//! either repeats the previous one (with `repeat_probability`) or is drawn
//! from the condition × phase weight table.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::framework::{
    CodedUtterance, Condition, IndicatorCode, Phase, PhaseEntry, RosterEntry, SessionDataset,
    StudentId, Timestamp, TriadId,
};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid synthetic spec: {0}")]
pub struct InvalidSpec(pub String);

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionProfile {
    /// Relative code weights per phase.
    pub weights: [Vec<(IndicatorCode, f64)>; 4],
    /// Fraction of students speaking in each phase; non-increasing.
    pub active_fraction: [f64; 4],
    pub utterances_per_minute: f64,
    /// Chance that an utterance repeats the speaker's previous code in the
    /// same phase instead of drawing afresh. Coded talk comes in runs.
    pub repeat_probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub students_per_condition: usize,
    pub triad_size: usize,
    /// Uniform duration range of each phase, in minutes.
    pub phase_minutes: [(f64, f64); 4],
    pub minimal: ConditionProfile,
    pub maximal: ConditionProfile,
    pub session_start: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Identical behaviour in both conditions and full participation.
    Balanced,
    /// Participation counts, utterance totals and code mix shaped after the
    /// reference study (78 students, about 4821 maximal and 2433 minimal
    /// utterances).
    PaperShape,
}

impl std::str::FromStr for Profile {
    type Err = InvalidSpec;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "balanced" => Ok(Profile::Balanced),
            "paper-shape" => Ok(Profile::PaperShape),
            other => Err(InvalidSpec(format!("unknown profile {other:?}"))),
        }
    }
}

fn table(rows: &[(&str, f64)]) -> Vec<(IndicatorCode, f64)> {
    rows.iter()
        .map(|(code, w)| (code.parse().expect("static table"), *w))
        .collect()
}

// 2024-01-15T09:00:00Z
const DEFAULT_START: Timestamp = Timestamp(1_705_309_200_000);

impl SynthSpec {
    pub fn new(profile: Profile, seed: u64, students_per_condition: usize) -> Self {
        let phase_minutes = [(10.0, 14.0), (10.0, 14.0), (8.0, 12.0), (6.0, 10.0)];
        let (minimal, maximal) = match profile {
            Profile::PaperShape => (paper_minimal(), paper_maximal()),
            Profile::Balanced => (balanced(), balanced()),
        };
        SynthSpec {
            seed,
            students_per_condition,
            triad_size: 3,
            phase_minutes,
            minimal,
            maximal,
            session_start: DEFAULT_START,
        }
    }

    pub fn profile(&self, condition: Condition) -> &ConditionProfile {
        match condition {
            Condition::Minimal => &self.minimal,
            Condition::Maximal => &self.maximal,
        }
    }

    /// Mutable access to one condition's profile.
    pub fn profile_mut(&mut self, condition: Condition) -> &mut ConditionProfile {
        match condition {
            Condition::Minimal => &mut self.minimal,
            Condition::Maximal => &mut self.maximal,
        }
    }

    pub fn validate(&self) -> Result<(), InvalidSpec> {
        let fail = |msg: String| Err(InvalidSpec(msg));
        if self.students_per_condition == 0 || self.triad_size == 0 {
            return fail("students_per_condition and triad_size must be positive".into());
        }
        if !self.students_per_condition.is_multiple_of(self.triad_size) {
            return fail(format!(
                "{} students per condition do not split into triads of {}",
                self.students_per_condition, self.triad_size
            ));
        }
        for (phase, &(lo, hi)) in Phase::ALL.iter().zip(&self.phase_minutes) {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return fail(format!("bad duration range for {phase}: {lo}..{hi}"));
            }
        }
        for condition in Condition::ALL {
            let profile = self.profile(condition);
            if !(profile.utterances_per_minute > 0.0 && profile.utterances_per_minute.is_finite()) {
                return fail(format!("{condition}: utterance rate must be positive"));
            }
            for (phase, weights) in Phase::ALL.iter().zip(&profile.weights) {
                if weights.iter().any(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
                    return fail(format!("{condition}/{phase}: negative or non-finite weight"));
                }
                if !weights.iter().any(|(_, w)| *w > 0.0) {
                    return fail(format!("{condition}/{phase}: no positive weight"));
                }
            }
            let f = profile.active_fraction;
            if !(0.0..1.0).contains(&profile.repeat_probability) {
                return fail(format!("{condition}: repeat probability must lie in [0, 1)"));
            }
            if f.iter().any(|x| !(0.0..=1.0).contains(x)) || f.windows(2).any(|w| w[1] > w[0]) {
                return fail(format!("{condition}: active fractions must be non-increasing in [0, 1]"));
            }
        }
        Ok(())
    }
}

fn paper_maximal() -> ConditionProfile {
    ConditionProfile {
        weights: [
            table(&[
                ("S1", 18.0), ("S3", 16.0), ("S4", 14.0), ("OT2", 14.0), ("PS04", 6.0),
                ("PS05", 5.0), ("PS06", 4.0), ("PS15", 4.0), ("PS20", 6.0), ("OT1", 5.0),
                ("PS08", 4.0), ("PS25", 4.0),
            ]),
            table(&[
                ("S1", 24.0), ("S3", 22.0), ("S4", 20.0), ("OT2", 10.0), ("PS20", 6.0),
                ("PS19", 4.0), ("PS08", 4.0), ("PS25", 4.0), ("OT1", 3.0), ("PS22", 3.0),
            ]),
            table(&[
                ("S1", 20.0), ("S3", 20.0), ("S4", 18.0), ("OT2", 16.0), ("PS23", 5.0),
                ("PS24", 5.0), ("PS25", 4.0), ("OT1", 4.0), ("PS08", 4.0), ("PS30", 4.0),
            ]),
            table(&[
                ("S1", 18.0), ("S3", 18.0), ("S4", 16.0), ("OT2", 20.0), ("PS05", 8.0),
                ("PS38", 4.0), ("PS25", 4.0), ("OT1", 4.0), ("PS08", 4.0), ("PS41", 4.0),
            ]),
        ],
        // speaking students per phase: 29, 26, 25, 21 of 39
        active_fraction: [29.0 / 39.0, 26.0 / 39.0, 25.0 / 39.0, 21.0 / 39.0],
        utterances_per_minute: 4821.0 / 1078.0,
        repeat_probability: 0.7,
    }
}

fn paper_minimal() -> ConditionProfile {
    ConditionProfile {
        weights: [
            table(&[
                ("OT2", 23.0), ("OT1", 12.0), ("PS04", 10.0), ("S4", 10.0), ("PS20", 8.0),
                ("PS01", 3.5), ("S1", 6.0), ("PS05", 6.0), ("PS08", 6.0), ("PS25", 6.0),
                ("S3", 5.0), ("OT3", 4.5),
            ]),
            table(&[
                ("OT2", 22.0), ("PS20", 14.0), ("S4", 12.0), ("PS04", 10.0), ("OT1", 8.0),
                ("PS05", 8.0), ("PS08", 8.0), ("S1", 6.0), ("PS25", 6.0), ("PS19", 6.0),
            ]),
            table(&[
                ("S4", 14.0), ("PS20", 14.0), ("OT2", 16.0), ("PS04", 10.0), ("PS03", 8.0),
                ("PS26", 8.0), ("PS05", 8.0), ("PS08", 8.0), ("OT1", 7.0), ("PS24", 7.0),
            ]),
            table(&[
                ("OT2", 26.0), ("S4", 14.0), ("PS08", 10.0), ("OT1", 10.0), ("PS25", 10.0),
                ("PS05", 10.0), ("S3", 10.0), ("PS24", 10.0),
            ]),
        ],
        // speaking students per phase: 28, 21, 13, 8 of 39
        active_fraction: [28.0 / 39.0, 21.0 / 39.0, 13.0 / 39.0, 8.0 / 39.0],
        utterances_per_minute: 2433.0 / 782.0,
        repeat_probability: 0.7,
    }
}

fn balanced() -> ConditionProfile {
    let shared = table(&[
        ("PS04", 10.0), ("PS05", 10.0), ("PS08", 8.0), ("PS20", 10.0), ("PS25", 8.0),
        ("S1", 10.0), ("S3", 8.0), ("S4", 10.0), ("OT1", 6.0), ("OT2", 12.0),
    ]);
    ConditionProfile {
        weights: [shared.clone(), shared.clone(), shared.clone(), shared],
        active_fraction: [1.0; 4],
        utterances_per_minute: 3.0,
        repeat_probability: 0.6,
    }
}

/// Generates a dataset that satisfies every dataset invariant. Phases are
/// not pre-assigned; run alignment as for parsed data.
pub fn generate(spec: &SynthSpec) -> Result<SessionDataset, InvalidSpec> {
    spec.validate()?;
    let mut rng = SeededRng::new(spec.seed);

    let triads_per_condition = spec.students_per_condition / spec.triad_size;
    let mut allocation: Vec<Condition> = std::iter::repeat_n(Condition::Minimal, triads_per_condition)
        .chain(std::iter::repeat_n(Condition::Maximal, triads_per_condition))
        .collect();
    rng.shuffle(&mut allocation);

    let total_students = 2 * spec.students_per_condition;
    let id_width = total_students.to_string().len().max(3);
    let triad_width = allocation.len().to_string().len().max(2);
    let mut roster = BTreeMap::new();
    let mut members: BTreeMap<Condition, Vec<StudentId>> = BTreeMap::new();
    for (t, &condition) in allocation.iter().enumerate() {
        let triad_id = TriadId(format!("T{:0w$}", t + 1, w = triad_width));
        for m in 0..spec.triad_size {
            let student = StudentId(format!("S{:0w$}", t * spec.triad_size + m + 1, w = id_width));
            roster.insert(
                student.clone(),
                RosterEntry {
                    triad_id: triad_id.clone(),
                    condition,
                },
            );
            members.entry(condition).or_default().push(student);
        }
    }

    let mut utterances = Vec::new();
    let mut phase_log = Vec::new();
    for condition in Condition::ALL {
        let profile = spec.profile(condition);
        let students = &members[&condition];
        let mut depths = depth_assignment(profile.active_fraction, students.len());
        rng.shuffle(&mut depths);

        for (student, &depth) in students.iter().zip(&depths) {
            let entry = &roster[student];
            let mut at = spec.session_start.0 + rng.below(1500) as i64;
            for (p, phase) in Phase::ALL.into_iter().enumerate().take(depth.max(1)) {
                phase_log.push(PhaseEntry {
                    student_id: student.clone(),
                    phase,
                    entry: Timestamp(at),
                });
                let (lo, hi) = spec.phase_minutes[p];
                let duration_ms = (rng.uniform(lo, hi) * 60_000.0).round() as i64;
                if p < depth {
                    let weights: Vec<f64> = profile.weights[p].iter().map(|(_, w)| *w).collect();
                    let mut offsets = Vec::new();
                    let mut t = rng.exponential(profile.utterances_per_minute / 60_000.0);
                    while (t as i64) < duration_ms {
                        offsets.push(t as i64);
                        t += rng.exponential(profile.utterances_per_minute / 60_000.0);
                    }
                    if offsets.is_empty() {
                        offsets.push(duration_ms / 2);
                    }
                    let mut previous = None;
                    for offset in offsets {
                        let code = match previous {
                            Some(code) if rng.unit() < profile.repeat_probability => code,
                            _ => profile.weights[p][rng.weighted(&weights)].0,
                        };
                        previous = Some(code);
                        utterances.push(CodedUtterance {
                            student_id: student.clone(),
                            triad_id: entry.triad_id.clone(),
                            condition,
                            timestamp: Timestamp(at + offset),
                            phase: None,
                            indicator: code,
                            text: None,
                        });
                    }
                }
                at += duration_ms;
            }
        }
    }

    utterances.sort_by(|a, b| (a.timestamp, &a.student_id).cmp(&(b.timestamp, &b.student_id)));
    phase_log.sort_by(|a, b| (&a.student_id, a.phase).cmp(&(&b.student_id, b.phase)));
    Ok(SessionDataset {
        utterances,
        phase_log,
        roster,
    })
}

/// Depth per student such that exactly `round(fraction[p] * n)` students
/// speak in phase `p`.
fn depth_assignment(fraction: [f64; 4], n: usize) -> Vec<usize> {
    let counts: Vec<usize> = fraction
        .iter()
        .map(|f| (f * n as f64).round() as usize)
        .collect();
    let mut depths = Vec::with_capacity(n);
    let mut assigned = 0;
    for depth in (0..=4).rev() {
        let at_least = if depth == 0 { n } else { counts[depth - 1] };
        depths.extend(std::iter::repeat_n(depth, at_least - assigned));
        assigned = at_least;
    }
    depths
}

/// The three session files as CSV bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvFiles {
    pub utterances: Vec<u8>,
    pub phase_log: Vec<u8>,
    pub roster: Vec<u8>,
}

pub fn to_csv(d: &SessionDataset) -> csv::Result<CsvFiles> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["student_id", "triad_id", "timestamp", "indicator", "text"])?;
    for u in &d.utterances {
        w.write_record([
            u.student_id.as_str(),
            u.triad_id.as_str(),
            &u.timestamp.to_string(),
            u.indicator.code(),
            u.text.as_deref().unwrap_or(""),
        ])?;
    }
    let utterances = w.into_inner().map_err(|e| e.into_error())?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["student_id", "phase", "entry_timestamp"])?;
    for e in &d.phase_log {
        w.write_record([e.student_id.as_str(), e.phase.id(), &e.entry.to_string()])?;
    }
    let phase_log = w.into_inner().map_err(|e| e.into_error())?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["student_id", "triad_id", "condition"])?;
    for (student, entry) in &d.roster {
        w.write_record([student.as_str(), entry.triad_id.as_str(), entry.condition.id()])?;
    }
    let roster = w.into_inner().map_err(|e| e.into_error())?;

    Ok(CsvFiles {
        utterances,
        phase_log,
        roster,
    })
}
