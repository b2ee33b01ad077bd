//! End-to-end analysis of an aligned dataset: engagement, group comparison,
//! pruned behaviour networks and per-phase pattern reports.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::framework::{Condition, Phase};
use crate::hina::{
    build_behaviour_phase_network, build_student_phase_network, engagement_profiles,
    global_max_quantity, prune_edges, EngagementProfile, HinaError, PrunedNetwork,
};
use crate::ingest::{build_sequences, AlignedDataset};
use crate::spm::{auto_tune_min_support, pattern_report, PatternReport, SpmError, DEFAULT_MIN_SUPPORT};
use crate::stats::{boxplot_summary, mann_whitney, BoxplotSummary, StatsError, TestResult};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Hina(#[from] HinaError),
    #[error(transparent)]
    Spm(#[from] SpmError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MinSupport {
    Auto,
    Fixed(f64),
}

impl std::str::FromStr for MinSupport {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(MinSupport::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v <= 1.0 => Ok(MinSupport::Fixed(v)),
            _ => Err(format!("min support must be \"auto\" or a fraction in (0, 1], got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisConfig {
    pub alpha: f64,
    pub min_support: MinSupport,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            alpha: 0.05,
            min_support: MinSupport::Auto,
        }
    }
}

/// How a report's min_support was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tuning {
    Fixed,
    Auto,
    /// Tuning found no length-3 pattern; the default support was used.
    AutoFallback,
    /// Nobody spoke in this phase; nothing was mined.
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseReport {
    pub tuning: Tuning,
    pub report: PatternReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    NormalizedQuantity,
    Diversity,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::NormalizedQuantity, Metric::Diversity];

    pub fn id(self) -> &'static str {
        match self {
            Metric::NormalizedQuantity => "normalized_quantity",
            Metric::Diversity => "diversity",
        }
    }

    pub fn of(self, p: &EngagementProfile) -> f64 {
        match self {
            Metric::NormalizedQuantity => p.normalized_quantity,
            Metric::Diversity => p.diversity,
        }
    }
}

/// Maximal (sample A) against minimal (sample B).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub metric: Metric,
    pub result: TestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Boxplot {
    pub metric: Metric,
    pub condition: Condition,
    pub summary: BoxplotSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Analysis {
    pub config_alpha: f64,
    pub global_max_quantity: u64,
    /// Students with at least one utterance, minimal first, then by id.
    pub engagement: Vec<EngagementProfile>,
    pub comparisons: Vec<Comparison>,
    pub boxplots: Vec<Boxplot>,
    /// Minimal, then maximal.
    pub networks: Vec<PrunedNetwork>,
    /// Phase-major, minimal before maximal within a phase.
    pub patterns: Vec<PhaseReport>,
}

impl Analysis {
    pub fn engagement_in(&self, condition: Condition) -> impl Iterator<Item = &EngagementProfile> {
        self.engagement.iter().filter(move |p| p.condition == condition)
    }

    pub fn comparison(&self, metric: Metric) -> &TestResult {
        &self
            .comparisons
            .iter()
            .find(|c| c.metric == metric)
            .expect("both metrics are always compared")
            .result
    }
}

fn phase_report(
    d: &AlignedDataset,
    phase: Phase,
    condition: Condition,
    min_support: MinSupport,
) -> Result<PhaseReport, SpmError> {
    let db = build_sequences(d, phase, condition).merged();
    if db.is_empty() {
        let min_support = match min_support {
            MinSupport::Fixed(v) => v,
            MinSupport::Auto => DEFAULT_MIN_SUPPORT,
        };
        return Ok(PhaseReport {
            tuning: Tuning::Empty,
            report: PatternReport {
                phase,
                condition,
                n_p: 0,
                min_support,
                patterns: Vec::new(),
            },
        });
    }
    let (support, tuning) = match min_support {
        MinSupport::Fixed(v) => (v, Tuning::Fixed),
        MinSupport::Auto => match auto_tune_min_support(&db.to_vecs()) {
            Ok(v) => (v, Tuning::Auto),
            Err(SpmError::NoQualifyingSupport) => (DEFAULT_MIN_SUPPORT, Tuning::AutoFallback),
            Err(e) => return Err(e),
        },
    };
    Ok(PhaseReport {
        tuning,
        report: pattern_report(&db, support)?,
    })
}

pub fn analyze(d: &AlignedDataset, config: &AnalysisConfig) -> Result<Analysis, AnalysisError> {
    let student_networks = Condition::ALL
        .iter()
        .map(|&c| build_student_phase_network(d, c))
        .collect::<Result<Vec<_>, _>>()?;
    let max = global_max_quantity(&student_networks);

    let mut engagement = Vec::new();
    for network in &student_networks {
        engagement.extend(engagement_profiles(network, max)?);
    }

    let sample = |metric: Metric, condition: Condition| -> Vec<f64> {
        engagement
            .iter()
            .filter(|p| p.condition == condition)
            .map(|p| metric.of(p))
            .collect()
    };
    let mut comparisons = Vec::new();
    let mut boxplots = Vec::new();
    for metric in Metric::ALL {
        let result = mann_whitney(
            &sample(metric, Condition::Maximal),
            &sample(metric, Condition::Minimal),
        )?;
        comparisons.push(Comparison { metric, result });
        for condition in Condition::ALL {
            let values: Vec<_> = engagement
                .iter()
                .filter(|p| p.condition == condition)
                .map(|p| (p.student_id.clone(), metric.of(p)))
                .collect();
            boxplots.push(Boxplot {
                metric,
                condition,
                summary: boxplot_summary(&values)?,
            });
        }
    }

    let networks = Condition::ALL
        .iter()
        .map(|&c| prune_edges(&build_behaviour_phase_network(d, c)?, config.alpha))
        .collect::<Result<Vec<_>, HinaError>>()?;

    let cells: Vec<(Phase, Condition)> = Phase::ALL
        .iter()
        .flat_map(|&p| Condition::ALL.iter().map(move |&c| (p, c)))
        .collect();
    let patterns = cells
        .par_iter()
        .map(|&(p, c)| phase_report(d, p, c, config.min_support))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(Analysis {
        config_alpha: config.alpha,
        global_max_quantity: max,
        engagement,
        comparisons,
        boxplots,
        networks,
        patterns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::align_phases;
    use crate::synth::{generate, Profile, SynthSpec};

    fn analysed(seed: u64, min_support: MinSupport) -> Analysis {
        let d = generate(&SynthSpec::new(Profile::Balanced, seed, 6)).unwrap();
        let config = AnalysisConfig {
            alpha: 0.05,
            min_support,
        };
        analyze(&align_phases(&d).unwrap(), &config).unwrap()
    }

    #[test]
    fn inventory() {
        let a = analysed(1, MinSupport::Auto);
        assert_eq!(a.engagement.len(), 12);
        assert_eq!(a.comparisons.len(), 2);
        assert_eq!(a.boxplots.len(), 4);
        assert_eq!(a.networks.len(), 2);
        assert_eq!(a.patterns.len(), 8);
        let c = a.comparison(Metric::Diversity);
        assert_eq!((c.n_a, c.n_b), (6, 6));
    }

    #[test]
    fn reports_respect_their_support() {
        for ms in [MinSupport::Auto, MinSupport::Fixed(0.5)] {
            for r in analysed(2, ms).patterns {
                let total: f64 = r.report.patterns.iter().map(|p| p.occurrence_pct).sum();
                assert!(r.report.patterns.is_empty() || (total - 100.0).abs() < 0.01);
                for p in &r.report.patterns {
                    assert!(p.support_fraction >= r.report.min_support);
                }
            }
        }
    }

    #[test]
    fn silent_students_are_left_out() {
        let mut spec = SynthSpec::new(Profile::Balanced, 3, 6);
        spec.minimal.active_fraction = [0.5, 0.5, 0.5, 0.0];
        let a = analyze(
            &align_phases(&generate(&spec).unwrap()).unwrap(),
            &AnalysisConfig::default(),
        )
        .unwrap();
        assert_eq!(a.engagement_in(Condition::Minimal).count(), 3);
        assert!(a.engagement.iter().all(|p| p.quantity > 0));
        assert_eq!(a.comparison(Metric::Diversity).n_b, 3);
        let a4 = a
            .patterns
            .iter()
            .find(|r| r.report.phase == Phase::A4 && r.report.condition == Condition::Minimal)
            .unwrap();
        assert_eq!(a4.tuning, Tuning::Empty);
    }

    #[test]
    fn min_support_parsing() {
        assert_eq!("auto".parse::<MinSupport>(), Ok(MinSupport::Auto));
        assert_eq!("0.3".parse::<MinSupport>(), Ok(MinSupport::Fixed(0.3)));
        assert!("0".parse::<MinSupport>().is_err());
        assert!("1.5".parse::<MinSupport>().is_err());
    }
}
