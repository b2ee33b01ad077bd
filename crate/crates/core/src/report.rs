//! Renders an [`Analysis`] into named output files.
//!
//! Everything is rendered in memory first; [`write_tree`] touches the disk
//! only once every file exists, so a failed run leaves nothing behind.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use crate::framework::{Condition, IndicatorCode, Phase};
use crate::hina::PrunedNetwork;
use crate::pipeline::{Analysis, PhaseReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Format {
    Json,
    Csv,
    Dot,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "dot" => Ok(Format::Dot),
            other => Err(format!("unknown output format {other:?}; expected json, csv or dot")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderOptions {
    pub emit: BTreeSet<Format>,
    /// Draw non-significant network edges too, dashed.
    pub keep_all: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            emit: [Format::Json, Format::Csv, Format::Dot].into(),
            keep_all: false,
        }
    }
}

/// File name to contents, in name order.
pub type OutputTree = BTreeMap<String, Vec<u8>>;

pub fn render(analysis: &Analysis, opts: &RenderOptions) -> OutputTree {
    let mut out = OutputTree::new();
    if opts.emit.contains(&Format::Csv) {
        out.insert("engagement.csv".into(), engagement_csv(analysis));
        out.insert("boxplots.csv".into(), boxplots_csv(analysis));
    }
    if opts.emit.contains(&Format::Json) {
        out.insert("stats.json".into(), to_json(&stats_json(analysis)));
        for net in &analysis.networks {
            out.insert(
                format!("network_{}.json", net.condition.id()),
                to_json(&network_json(net)),
            );
        }
        for r in &analysis.patterns {
            out.insert(pattern_file(r, "patterns", "json"), to_json(&pattern_json(r)));
        }
    }
    if opts.emit.contains(&Format::Dot) {
        for net in &analysis.networks {
            out.insert(
                format!("network_{}.dot", net.condition.id()),
                network_dot(net, opts.keep_all).into_bytes(),
            );
        }
        for r in &analysis.patterns {
            out.insert(pattern_file(r, "flow", "dot"), flow_dot(r).into_bytes());
        }
    }
    out
}

/// Creates `dir` if needed and writes every file of the tree into it.
pub fn write_tree(dir: &Path, tree: &OutputTree) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, bytes) in tree {
        std::fs::write(dir.join(name), bytes)?;
    }
    Ok(())
}

fn pattern_file(r: &PhaseReport, stem: &str, ext: &str) -> String {
    format!(
        "{stem}_{}_{}.{ext}",
        r.report.phase.id().to_ascii_lowercase(),
        r.report.condition.id()
    )
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("analysis values serialize");
    bytes.push(b'\n');
    bytes
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn engagement_csv(a: &Analysis) -> Vec<u8> {
    csv_bytes(
        &["student_id", "condition", "quantity", "normalized_quantity", "diversity"],
        a.engagement.iter().map(|p| {
            vec![
                p.student_id.to_string(),
                p.condition.id().to_string(),
                p.quantity.to_string(),
                p.normalized_quantity.to_string(),
                p.diversity.to_string(),
            ]
        }),
    )
}

fn boxplots_csv(a: &Analysis) -> Vec<u8> {
    csv_bytes(
        &[
            "metric", "condition", "q1", "median", "q3", "iqr", "lower_fence", "upper_fence",
            "outlier_ids",
        ],
        a.boxplots.iter().map(|b| {
            let s = &b.summary;
            let outliers: Vec<&str> = s.outlier_ids.iter().map(|id| id.as_str()).collect();
            vec![
                b.metric.id().to_string(),
                b.condition.id().to_string(),
                s.q1.to_string(),
                s.median.to_string(),
                s.q3.to_string(),
                s.iqr.to_string(),
                s.lower_fence.to_string(),
                s.upper_fence.to_string(),
                outliers.join(";"),
            ]
        }),
    )
}

fn stats_json(a: &Analysis) -> serde_json::Value {
    let tests: Vec<_> = a
        .comparisons
        .iter()
        .map(|c| {
            let r = &c.result;
            json!({
                "metric": c.metric,
                "u": r.u_statistic,
                "u_b": r.u_b,
                "u_min": r.u_min,
                "p": r.p_value,
                "method": r.method,
                "rbc": r.rbc,
                "n_a": r.n_a,
                "n_b": r.n_b,
            })
        })
        .collect();
    json!({
        "sample_a": Condition::Maximal,
        "sample_b": Condition::Minimal,
        "global_max_quantity": a.global_max_quantity,
        "tests": tests,
    })
}

fn network_json(net: &PrunedNetwork) -> serde_json::Value {
    let behaviours: BTreeSet<IndicatorCode> = net.edges.iter().map(|e| e.behaviour).collect();
    let nodes: Vec<_> = behaviours
        .iter()
        .map(|b| json!({"id": b, "kind": "behaviour"}))
        .chain(Phase::ALL.iter().map(|p| json!({"id": p, "kind": "phase"})))
        .collect();
    let edges: Vec<_> = net
        .edges
        .iter()
        .map(|e| {
            json!({
                "source": e.behaviour,
                "target": e.phase,
                "weight": e.weight,
                "p_value": e.p_value,
                "significant": e.significant,
            })
        })
        .collect();
    json!({
        "condition": net.condition,
        "null": net.null,
        "nodes": nodes,
        "edges": edges,
    })
}

fn pattern_json(r: &PhaseReport) -> serde_json::Value {
    let rep = &r.report;
    json!({
        "header": {
            "phase": rep.phase,
            "condition": rep.condition,
            "n_p": rep.n_p,
            "min_support": rep.min_support,
            "tuning": r.tuning,
        },
        "patterns": rep.patterns,
    })
}

fn network_dot(net: &PrunedNetwork, keep_all: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "graph \"network_{}\" {{", net.condition.id());
    let _ = writeln!(s, "  rankdir=LR;");
    let _ = writeln!(
        s,
        "  label=\"{} condition: W={}, K={}, threshold={}\";",
        net.condition.id(),
        net.null.total_weight,
        net.null.cells,
        net.null.threshold
    );
    let shown: Vec<_> = net.edges.iter().filter(|e| keep_all || e.significant).collect();
    let behaviours: BTreeSet<IndicatorCode> = shown.iter().map(|e| e.behaviour).collect();
    for b in &behaviours {
        let _ = writeln!(s, "  \"{b}\" [shape=ellipse];");
    }
    for p in Phase::ALL {
        let _ = writeln!(s, "  \"{p}\" [shape=box];");
    }
    for e in shown {
        let style = if e.significant { "" } else { ", style=dashed" };
        let _ = writeln!(
            s,
            "  \"{}\" -- \"{}\" [label=\"{}\", penwidth={:.2}{style}];",
            e.behaviour,
            e.phase,
            e.weight,
            1.0 + (e.weight as f64).ln_1p()
        );
    }
    s.push_str("}\n");
    s
}

/// One chain per pattern: a node for each step, edges between consecutive
/// steps labelled with the pattern's student and occurrence shares.
fn flow_dot(r: &PhaseReport) -> String {
    let rep = &r.report;
    let mut s = String::new();
    let name = format!("flow_{}_{}", rep.phase, rep.condition.id());
    let _ = writeln!(s, "digraph \"{name}\" {{");
    let _ = writeln!(s, "  rankdir=LR;");
    let _ = writeln!(
        s,
        "  label=\"{} {}: n_p={}, min_support={}\";",
        rep.phase,
        rep.condition.id(),
        rep.n_p,
        rep.min_support
    );
    for (i, p) in rep.patterns.iter().enumerate() {
        let _ = writeln!(s, "  subgraph \"cluster_{i}\" {{");
        let _ = writeln!(s, "    label=\"pattern {}\";", i + 1);
        for (j, item) in p.items.iter().enumerate() {
            let _ = writeln!(s, "    \"p{i}_{j}\" [label=\"{item}\"];");
        }
        for j in 1..p.items.len() {
            let _ = writeln!(
                s,
                "    \"p{i}_{}\" -> \"p{i}_{j}\" [label=\"{:.1}% / {:.1}%\"];",
                j - 1,
                p.student_pct,
                p.occurrence_pct
            );
        }
        s.push_str("  }\n");
    }
    s.push_str("}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::align_phases;
    use crate::pipeline::{analyze, AnalysisConfig};
    use crate::synth::{generate, Profile, SynthSpec};

    fn analysis() -> Analysis {
        let d = generate(&SynthSpec::new(Profile::Balanced, 11, 6)).unwrap();
        analyze(&align_phases(&d).unwrap(), &AnalysisConfig::default()).unwrap()
    }

    #[test]
    fn full_inventory() {
        let tree = render(&analysis(), &RenderOptions::default());
        let names: Vec<&str> = tree.keys().map(String::as_str).collect();
        assert_eq!(names.iter().filter(|n| n.starts_with("network_") && n.ends_with(".dot")).count(), 2);
        assert_eq!(names.iter().filter(|n| n.starts_with("patterns_")).count(), 8);
        assert_eq!(names.iter().filter(|n| n.starts_with("flow_")).count(), 8);
        assert!(names.contains(&"stats.json"));
        assert!(names.contains(&"engagement.csv"));
        assert!(names.contains(&"patterns_a3_maximal.json"));
        assert_eq!(tree.len(), 2 + 1 + 2 + 8 + 2 + 8);
    }

    #[test]
    fn emit_subset() {
        let opts = RenderOptions {
            emit: [Format::Csv].into(),
            keep_all: false,
        };
        let tree = render(&analysis(), &opts);
        assert_eq!(tree.keys().collect::<Vec<_>>(), ["boxplots.csv", "engagement.csv"]);
    }

    #[test]
    fn keep_all_draws_dashed_edges() {
        let a = analysis();
        let net = &a.networks[0];
        let pruned = network_dot(net, false);
        let full = network_dot(net, true);
        assert!(!pruned.contains("dashed"));
        let hidden = net.edges.iter().filter(|e| !e.significant).count();
        assert_eq!(full.matches("dashed").count(), hidden);
        assert_eq!(full.matches(" -- ").count(), net.edges.len());
    }

    #[test]
    fn engagement_csv_header() {
        let csv = String::from_utf8(engagement_csv(&analysis())).unwrap();
        assert!(csv.starts_with("student_id,condition,quantity,normalized_quantity,diversity\n"));
        assert_eq!(csv.lines().count(), 13);
    }

    #[test]
    fn pattern_json_shape() {
        let a = analysis();
        let v = pattern_json(&a.patterns[0]);
        assert_eq!(v["header"]["phase"], "A1");
        assert!(v["patterns"].is_array());
        if let Some(first) = v["patterns"].as_array().unwrap().first() {
            for key in ["items", "support_count", "student_pct", "occurrence_count", "occurrence_pct"] {
                assert!(first.get(key).is_some(), "{key}");
            }
        }
    }

    #[test]
    fn format_parsing() {
        assert_eq!("JSON".parse::<Format>(), Ok(Format::Json));
        assert!("svg".parse::<Format>().is_err());
    }
}
