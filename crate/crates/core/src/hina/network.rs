use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::HinaError;
use crate::framework::{Condition, IndicatorCode, Phase, StudentId};
use crate::ingest::AlignedDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LeftKind {
    Student,
    Behaviour,
}

/// Node type on the non-phase side of a network.
pub trait LeftNode: Ord + Clone + fmt::Display {
    const KIND: LeftKind;
}

impl LeftNode for StudentId {
    const KIND: LeftKind = LeftKind::Student;
}

impl LeftNode for IndicatorCode {
    const KIND: LeftKind = LeftKind::Behaviour;
}

/// Weighted two-mode graph between `L` nodes and the four phases. Edge
/// weights are co-occurrence counts and are always at least 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteNetwork<L: LeftNode> {
    pub condition: Condition,
    left_nodes: BTreeSet<L>,
    edges: BTreeMap<(L, Phase), u64>,
}

pub type StudentPhaseNetwork = BipartiteNetwork<StudentId>;
pub type BehaviourPhaseNetwork = BipartiteNetwork<IndicatorCode>;

impl<L: LeftNode> BipartiteNetwork<L> {
    /// Builds a network by counting one unit of weight per item.
    pub fn from_counts<I>(condition: Condition, items: I) -> Self
    where
        I: IntoIterator<Item = (L, Phase)>,
    {
        let mut edges = BTreeMap::new();
        for key in items {
            *edges.entry(key).or_insert(0u64) += 1;
        }
        let left_nodes = edges.keys().map(|(l, _)| l.clone()).collect();
        BipartiteNetwork {
            condition,
            left_nodes,
            edges,
        }
    }

    pub fn left_kind(&self) -> LeftKind {
        L::KIND
    }

    pub fn left_nodes(&self) -> &BTreeSet<L> {
        &self.left_nodes
    }

    pub fn right_nodes(&self) -> [Phase; 4] {
        Phase::ALL
    }

    /// Edges in (left, phase) order.
    pub fn edges(&self) -> impl Iterator<Item = (&L, Phase, u64)> {
        self.edges.iter().map(|((l, p), w)| (l, *p, *w))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn weight(&self, left: &L, phase: Phase) -> u64 {
        self.edges.get(&(left.clone(), phase)).copied().unwrap_or(0)
    }

    /// Per-phase weights of one left node, zero where there is no edge.
    pub fn phase_weights(&self, left: &L) -> [u64; 4] {
        let mut weights = [0; 4];
        for ((_, p), w) in self
            .edges
            .range((left.clone(), Phase::A1)..=(left.clone(), Phase::A4))
        {
            weights[p.index()] = *w;
        }
        weights
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.values().sum()
    }
}

/// Student–phase network: `w(s, p)` counts the utterances of `s` in `p`.
pub fn build_student_phase_network(
    d: &AlignedDataset,
    condition: Condition,
) -> Result<StudentPhaseNetwork, HinaError> {
    let network = BipartiteNetwork::from_counts(
        condition,
        d.utterances_in(condition)
            .map(|(p, u)| (u.student_id.clone(), p)),
    );
    if network.edge_count() == 0 {
        return Err(HinaError::EmptyCondition(condition));
    }
    Ok(network)
}

/// Behaviour–phase network: `w(b, p)` counts utterances coded `b` in `p`.
pub fn build_behaviour_phase_network(
    d: &AlignedDataset,
    condition: Condition,
) -> Result<BehaviourPhaseNetwork, HinaError> {
    let network = BipartiteNetwork::from_counts(
        condition,
        d.utterances_in(condition).map(|(p, u)| (u.indicator, p)),
    );
    if network.edge_count() == 0 {
        return Err(HinaError::EmptyCondition(condition));
    }
    Ok(network)
}
