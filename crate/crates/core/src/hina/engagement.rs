use serde::Serialize;

use super::{HinaError, StudentPhaseNetwork};
use crate::framework::{Condition, StudentId};

/// Node-level engagement of one student.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EngagementProfile {
    pub student_id: StudentId,
    pub condition: Condition,
    /// Total utterances across phases.
    pub quantity: u64,
    /// `quantity` divided by the largest quantity over every compared network.
    pub normalized_quantity: f64,
    /// Shannon entropy of the phase distribution in base 4, in [0, 1].
    pub diversity: f64,
}

/// Normalized entropy of a weight vector over the four phases.
///
/// Zero-weight phases contribute nothing. Returns 0 for an all-zero vector.
pub fn diversity(weights: &[u64; 4]) -> f64 {
    let total: u64 = weights.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    let entropy: f64 = weights
        .iter()
        .filter(|&&w| w > 0)
        .map(|&w| {
            let share = w as f64 / total;
            share * (1.0 / share).ln()
        })
        .sum();
    (entropy / 4f64.ln()).clamp(0.0, 1.0)
}

/// Largest student quantity across the given networks.
pub fn global_max_quantity<'a, I>(networks: I) -> u64
where
    I: IntoIterator<Item = &'a StudentPhaseNetwork>,
{
    networks
        .into_iter()
        .flat_map(|n| n.left_nodes().iter().map(move |s| n.phase_weights(s).iter().sum::<u64>()))
        .max()
        .unwrap_or(0)
}

/// Profiles for every student in the network, in student order.
pub fn engagement_profiles(
    network: &StudentPhaseNetwork,
    global_max_quantity: u64,
) -> Result<Vec<EngagementProfile>, HinaError> {
    if global_max_quantity == 0 {
        return Err(HinaError::ZeroGlobalMax);
    }
    let observed = self::global_max_quantity([network]);
    if observed > global_max_quantity {
        return Err(HinaError::MaxBelowObserved {
            given: global_max_quantity,
            observed,
        });
    }
    Ok(network
        .left_nodes()
        .iter()
        .map(|student| profile(network, student, global_max_quantity))
        .collect())
}

fn profile(network: &StudentPhaseNetwork, student: &StudentId, max: u64) -> EngagementProfile {
    let weights = network.phase_weights(student);
    let quantity: u64 = weights.iter().sum();
    EngagementProfile {
        student_id: student.clone(),
        condition: network.condition,
        quantity,
        normalized_quantity: quantity as f64 / max as f64,
        diversity: diversity(&weights),
    }
}

impl StudentPhaseNetwork {
    /// Profile of one student. Students without edges are an error rather
    /// than a zero profile.
    pub fn profile_of(
        &self,
        student: &StudentId,
        global_max_quantity: u64,
    ) -> Result<EngagementProfile, HinaError> {
        if !self.left_nodes().contains(student) {
            return Err(HinaError::UnknownStudent(student.clone()));
        }
        if global_max_quantity == 0 {
            return Err(HinaError::ZeroGlobalMax);
        }
        Ok(profile(self, student, global_max_quantity))
    }
}
