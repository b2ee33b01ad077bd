//! Heterogeneous interaction networks over students or behaviours and the
//! four phases, with engagement metrics and null-model edge pruning.

mod engagement;
mod network;
mod prune;

pub use engagement::{diversity, engagement_profiles, global_max_quantity, EngagementProfile};
pub use network::{
    build_behaviour_phase_network, build_student_phase_network, BehaviourPhaseNetwork,
    BipartiteNetwork, LeftKind, LeftNode, StudentPhaseNetwork,
};
pub use prune::{prune_edges, Binomial, NullModel, PrunedEdge, PrunedNetwork};

use thiserror::Error;

use crate::framework::{Condition, StudentId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HinaError {
    #[error("no utterances for the {0} condition")]
    EmptyCondition(Condition),
    #[error("global maximum quantity is zero")]
    ZeroGlobalMax,
    #[error("global maximum quantity {given} is below the observed maximum {observed}")]
    MaxBelowObserved { given: u64, observed: u64 },
    #[error("student {0} has no edges in this network")]
    UnknownStudent(StudentId),
    #[error("network has no cells to randomize over")]
    DegenerateNetwork,
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
}
