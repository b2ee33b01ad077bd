//! A four-student session small enough to work out by hand.
//!
//! Minimal: s1 says PS04, PS04 in A1 and S1 in A2; s2 says OT2 in A1.
//! Maximal: s3 says PS04, S4, PS04, S4 in A1; s4 says S4 once in each phase.

use dialogic::ingest::{align_phases, parse_event_log, AlignedDataset};
use dialogic::pipeline::{analyze, AnalysisConfig, Metric, MinSupport, Tuning};
use dialogic::report::{render, RenderOptions};
use dialogic::stats::Method;
use dialogic::{Condition, IndicatorCode, Phase};

const UTTERANCES: &str = "\
student_id,triad_id,timestamp,indicator,text
s1,T1,2024-03-01T09:01:00.000Z,PS04,first idea
s1,T1,2024-03-01T09:02:00.000Z,PS04,
s1,T1,2024-03-01T09:11:00.000Z,S1,\"ok, next\"
s2,T1,2024-03-01T09:01:30.000Z,OT2,
s3,T2,2024-03-01T09:01:00.000Z,PS04,
s3,T2,2024-03-01T09:02:00.000Z,S4,
s3,T2,2024-03-01T09:03:00.000Z,PS04,
s3,T2,2024-03-01T09:04:00.000Z,S4,
s4,T2,2024-03-01T09:05:00.000Z,S4,
s4,T2,2024-03-01T09:06:30.000Z,S4,
s4,T2,2024-03-01T09:07:30.000Z,S4,
s4,T2,2024-03-01T09:08:30.000Z,S4,
";

const PHASE_LOG: &str = "\
student_id,phase,entry_timestamp
s1,A1,2024-03-01T09:00:00.000Z
s1,A2,2024-03-01T09:10:00.000Z
s2,A1,2024-03-01T09:00:00.000Z
s3,A1,2024-03-01T09:00:00.000Z
s4,A1,2024-03-01T09:00:00.000Z
s4,A2,2024-03-01T09:06:00.000Z
s4,A3,2024-03-01T09:07:00.000Z
s4,A4,2024-03-01T09:08:00.000Z
";

const ROSTER: &str = "\
student_id,triad_id,condition
s1,T1,minimal
s2,T1,Minimal
s3,T2,maximal
s4,T2,MAXIMAL
";

fn dataset() -> AlignedDataset {
    let d = parse_event_log(UTTERANCES.as_bytes(), PHASE_LOG.as_bytes(), ROSTER.as_bytes()).unwrap();
    align_phases(&d).unwrap()
}

fn code(s: &str) -> IndicatorCode {
    s.parse().unwrap()
}

#[test]
fn engagement_by_hand() {
    let a = analyze(&dataset(), &AnalysisConfig::default()).unwrap();
    assert_eq!(a.global_max_quantity, 4);
    let rows: Vec<(&str, u64, f64)> = a
        .engagement
        .iter()
        .map(|p| (p.student_id.as_str(), p.quantity, p.normalized_quantity))
        .collect();
    assert_eq!(rows, [("s1", 3, 0.75), ("s2", 1, 0.25), ("s3", 4, 1.0), ("s4", 4, 1.0)]);

    // s1 splits 2:1 over two phases: H = ln3 - (2/3) ln2, over ln4
    let expected = (3f64.ln() - 2.0 / 3.0 * 2f64.ln()) / 4f64.ln();
    assert!((a.engagement[0].diversity - expected).abs() < 1e-12);
    assert_eq!(a.engagement[1].diversity, 0.0);
    assert_eq!(a.engagement[2].diversity, 0.0);
    assert!((a.engagement[3].diversity - 1.0).abs() < 1e-12);
}

#[test]
fn comparison_by_hand() {
    let a = analyze(&dataset(), &AnalysisConfig::default()).unwrap();
    // maximal {1, 1} beats minimal {0.75, 0.25} in all four pairs
    let q = a.comparison(Metric::NormalizedQuantity);
    assert_eq!((q.u_statistic, q.u_b, q.n_a, q.n_b), (4.0, 0.0, 2, 2));
    assert_eq!(q.rbc, -1.0);
    // the tie between s3 and s4 forces the approximation
    assert_eq!(q.method, Method::NormalApproximation);
}

#[test]
fn networks_by_hand() {
    let a = analyze(&dataset(), &AnalysisConfig::default()).unwrap();
    let minimal = &a.networks[0];
    assert_eq!(minimal.condition, Condition::Minimal);
    assert_eq!((minimal.null.total_weight, minimal.null.cells), (4, 12));
    let edges: Vec<_> = minimal.edges.iter().map(|e| (e.behaviour, e.phase, e.weight)).collect();
    assert_eq!(
        edges,
        [(code("PS04"), Phase::A1, 2), (code("OT2"), Phase::A1, 1), (code("S1"), Phase::A2, 1)]
    );
    // Binomial(4, 1/12): P(X <= 0) = 0.706, P(X <= 1) = 0.963, so q = 1
    assert_eq!(minimal.null.threshold, 1);
    let kept: Vec<_> = minimal.significant().map(|e| e.behaviour).collect();
    assert_eq!(kept, [code("PS04")]);
}

#[test]
fn auto_tuned_patterns_by_hand() {
    let a = analyze(&dataset(), &AnalysisConfig::default()).unwrap();
    let r = a
        .patterns
        .iter()
        .find(|r| r.report.phase == Phase::A1 && r.report.condition == Condition::Maximal)
        .unwrap();
    // only s3 has a length-3 subsequence, so one supporter of two: 0.50
    assert_eq!(r.tuning, Tuning::Auto);
    assert_eq!(r.report.min_support, 0.5);
    assert_eq!(r.report.n_p, 2);

    // every subsequence of <PS04, S4, PS04, S4> of length >= 2, each in s3 only
    let (p, s) = (code("PS04"), code("S4"));
    let got: Vec<(Vec<IndicatorCode>, usize, f64)> = r
        .report
        .patterns
        .iter()
        .map(|f| (f.items.clone(), f.occurrence_count, f.student_pct))
        .collect();
    let mut expected = vec![
        (vec![p, p], 1),
        (vec![p, s], 2),
        (vec![s, p], 1),
        (vec![s, s], 1),
        (vec![p, p, s], 1),
        (vec![p, s, p], 1),
        (vec![p, s, s], 1),
        (vec![s, p, s], 1),
        (vec![p, s, p, s], 1),
    ];
    expected.sort_by(|x, y| (x.0.len(), &x.0).cmp(&(y.0.len(), &y.0)));
    let expected: Vec<_> = expected.into_iter().map(|(i, o)| (i, o, 50.0)).collect();
    assert_eq!(got, expected);
    let ps_s4 = r.report.patterns.iter().find(|f| f.items == [p, s]).unwrap();
    assert!((ps_s4.occurrence_pct - 20.0).abs() < 1e-12);
}

#[test]
fn merged_repeats_leave_nothing_to_mine() {
    let config = AnalysisConfig {
        alpha: 0.05,
        min_support: MinSupport::Fixed(0.5),
    };
    let a = analyze(&dataset(), &config).unwrap();
    // minimal A1 merges to <PS04> and <OT2>
    let r = a
        .patterns
        .iter()
        .find(|r| r.report.phase == Phase::A1 && r.report.condition == Condition::Minimal)
        .unwrap();
    assert_eq!(r.tuning, Tuning::Fixed);
    assert!(r.report.patterns.is_empty());
}

#[test]
fn rendering_is_repeatable() {
    let a = analyze(&dataset(), &AnalysisConfig::default()).unwrap();
    let b = analyze(&dataset(), &AnalysisConfig::default()).unwrap();
    assert_eq!(render(&a, &RenderOptions::default()), render(&b, &RenderOptions::default()));
}
