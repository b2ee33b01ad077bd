use serde::Serialize;

use super::{BehaviourPhaseNetwork, HinaError};
use crate::framework::{Condition, IndicatorCode, Phase};

/// Binomial distribution with its probability mass tabulated over `0..=n`.
///
/// Masses are built by the ratio recurrence outward from the mode and then
/// normalized, which stays finite for `n` in the tens of thousands where
/// direct products of powers would underflow.
#[derive(Debug, Clone)]
pub struct Binomial {
    cdf: Vec<f64>,
    upper: Vec<f64>,
}

impl Binomial {
    pub fn new(trials: u64, p: f64) -> Self {
        assert!((0.0..=1.0).contains(&p), "probability out of range: {p}");
        let n = trials as usize;
        let mut pmf = vec![0.0; n + 1];
        if p == 0.0 {
            pmf[0] = 1.0;
        } else if p == 1.0 {
            pmf[n] = 1.0;
        } else {
            let q = 1.0 - p;
            let mode = (((trials + 1) as f64 * p).floor() as usize).min(n);
            pmf[mode] = 1.0;
            for k in mode..n {
                pmf[k + 1] = pmf[k] * ((n - k) as f64 / (k + 1) as f64) * (p / q);
            }
            for k in (1..=mode).rev() {
                pmf[k - 1] = pmf[k] * (k as f64 / (n - k + 1) as f64) * (q / p);
            }
            let total: f64 = pmf.iter().sum();
            pmf.iter_mut().for_each(|m| *m /= total);
        }

        let mut cdf = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        for m in &pmf {
            acc += m;
            cdf.push(acc);
        }
        // Upper tails summed from the top so small tails keep their precision.
        let mut upper = vec![0.0; n + 1];
        let mut acc = 0.0;
        for k in (0..=n).rev() {
            acc += pmf[k];
            upper[k] = acc;
        }
        Binomial { cdf, upper }
    }

    pub fn trials(&self) -> u64 {
        (self.cdf.len() - 1) as u64
    }

    /// `P(X <= k)`.
    pub fn cdf(&self, k: u64) -> f64 {
        self.cdf
            .get(k as usize)
            .copied()
            .unwrap_or(1.0)
            .min(1.0)
    }

    /// `P(X >= k)`.
    pub fn upper_tail(&self, k: u64) -> f64 {
        self.upper.get(k as usize).copied().unwrap_or(0.0).min(1.0)
    }

    /// Smallest `q` with `P(X <= q) >= level`.
    pub fn quantile(&self, level: f64) -> u64 {
        self.cdf
            .iter()
            .position(|&c| c >= level)
            .unwrap_or(self.cdf.len() - 1) as u64
    }
}

/// Uniform null: all `total_weight` events are dropped independently into
/// `cells` equally likely (behaviour, phase) cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullModel {
    pub total_weight: u64,
    pub cells: u64,
    pub cell_probability: f64,
    pub alpha: f64,
    /// Smallest `q` with `P(X <= q) >= 1 - alpha`; retained edges exceed it.
    pub threshold: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrunedEdge {
    pub behaviour: IndicatorCode,
    pub phase: Phase,
    pub weight: u64,
    /// `P(X >= weight)` under the null.
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrunedNetwork {
    pub condition: Condition,
    pub null: NullModel,
    /// Every observed edge, ordered by (phase, behaviour).
    pub edges: Vec<PrunedEdge>,
}

impl PrunedNetwork {
    pub fn significant(&self) -> impl Iterator<Item = &PrunedEdge> {
        self.edges.iter().filter(|e| e.significant)
    }
}

/// Tests every behaviour–phase edge against a Binomial(W, 1/K) null, where
/// W is the network's total weight and K = |observed behaviours| × 4.
///
/// An edge is significant when its weight strictly exceeds the `1 - alpha`
/// quantile of the null. The reported `p_value` is the exact upper tail; on
/// a discrete null the two can disagree at the boundary and the quantile
/// rule decides.
pub fn prune_edges(network: &BehaviourPhaseNetwork, alpha: f64) -> Result<PrunedNetwork, HinaError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(HinaError::InvalidAlpha(alpha));
    }
    let cells = (network.left_nodes().len() * network.right_nodes().len()) as u64;
    if cells == 0 {
        return Err(HinaError::DegenerateNetwork);
    }
    let total_weight = network.total_weight();
    let cell_probability = 1.0 / cells as f64;
    let null = Binomial::new(total_weight, cell_probability);
    let threshold = null.quantile(1.0 - alpha);

    let mut edges: Vec<PrunedEdge> = network
        .edges()
        .map(|(behaviour, phase, weight)| PrunedEdge {
            behaviour: *behaviour,
            phase,
            weight,
            p_value: null.upper_tail(weight),
            significant: weight > threshold,
        })
        .collect();
    edges.sort_by_key(|e| (e.phase, e.behaviour));

    Ok(PrunedNetwork {
        condition: network.condition,
        null: NullModel {
            total_weight,
            cells,
            cell_probability,
            alpha,
            threshold,
        },
        edges,
    })
}
