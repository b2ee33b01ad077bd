//! Nonparametric statistics: Mann–Whitney U with rank-biserial effect size,
//! Cohen's kappa, and Tukey-fence boxplot summaries.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::framework::StudentId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("sample is empty")]
    EmptySample,
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("U = {u} lies outside [0, {max}]")]
    OutOfRangeU { u: f64, max: f64 },
    #[error("codings have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// Largest combined sample size for which the exact null distribution is used.
pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    NormalApproximation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    /// U for sample A: pairs with `a > b`, ties counting one half.
    pub u_statistic: f64,
    pub u_b: f64,
    pub u_min: f64,
    /// Two-sided.
    pub p_value: f64,
    pub method: Method,
    /// `1 - 2 U_A / (n_a n_b)`.
    pub rbc: f64,
    pub n_a: usize,
    pub n_b: usize,
}

/// Midranks (1-based) of the concatenation of `a` and `b`, plus the tie
/// group sizes.
fn midranks(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<(f64, usize)> = a.iter().chain(b).copied().zip(0..).collect();
    order.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut ranks = vec![0.0; order.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && order[end].0 == order[start].0 {
            end += 1;
        }
        // positions start..end share ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &(_, idx) in &order[start..end] {
            ranks[idx] = rank;
        }
        if end - start > 1 {
            ties.push(end - start);
        }
        start = end;
    }
    (ranks, ties)
}

/// Number of rank splits giving each value of U_A, for `n_a` + `n_b`
/// distinct values. Index is U_A; entries sum to C(n_a + n_b, n_a).
pub fn u_distribution(n_a: usize, n_b: usize) -> Vec<u64> {
    // counts[i][j] is the distribution for i A-values and j B-values. The
    // largest of the i + j values either belongs to A (beating all j B-values)
    // or to B (beating none).
    let mut counts: Vec<Vec<Vec<u64>>> = vec![vec![Vec::new(); n_b + 1]; n_a + 1];
    for i in 0..=n_a {
        for j in 0..=n_b {
            counts[i][j] = if i == 0 || j == 0 {
                vec![1]
            } else {
                let mut dist = vec![0u64; i * j + 1];
                for (u, c) in counts[i - 1][j].iter().enumerate() {
                    dist[u + j] += c;
                }
                for (u, c) in counts[i][j - 1].iter().enumerate() {
                    dist[u] += c;
                }
                dist
            };
        }
    }
    counts.swap_remove(n_a).swap_remove(n_b)
}

fn exact_two_sided(u_a: f64, n_a: usize, n_b: usize) -> f64 {
    let dist = u_distribution(n_a, n_b);
    let total: u64 = dist.iter().sum();
    let u = u_a.round() as usize;
    let lower: u64 = dist[..=u].iter().sum();
    let upper: u64 = dist[u..].iter().sum();
    (2.0 * lower.min(upper) as f64 / total as f64).min(1.0)
}

fn normal_two_sided(u_a: f64, n_a: usize, n_b: usize, ties: &[usize]) -> f64 {
    let (na, nb) = (n_a as f64, n_b as f64);
    let n = na + nb;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum();
    let variance = if n > 1.0 {
        na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)))
    } else {
        0.0
    };
    if variance <= 0.0 {
        return 1.0;
    }
    let mean = na * nb / 2.0;
    let z = ((u_a - mean).abs() - 0.5).max(0.0) / variance.sqrt();
    erfc(z / std::f64::consts::SQRT_2).clamp(f64::MIN_POSITIVE, 1.0)
}

/// Two-sided Mann–Whitney U test of `a` against `b`.
///
/// Uses the exact null when the combined size is at most [`EXACT_MAX_N`] and
/// there are no ties; otherwise the normal approximation with tie and
/// continuity corrections.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let (n_a, n_b) = (a.len(), b.len());
    let (ranks, ties) = midranks(a, b);
    let rank_sum_a: f64 = ranks[..n_a].iter().sum();
    let pairs = (n_a * n_b) as f64;
    let u_a = rank_sum_a - (n_a * (n_a + 1)) as f64 / 2.0;
    let u_b = pairs - u_a;

    let (p_value, method) = if n_a + n_b <= EXACT_MAX_N && ties.is_empty() {
        (exact_two_sided(u_a, n_a, n_b), Method::Exact)
    } else {
        (normal_two_sided(u_a, n_a, n_b, &ties), Method::NormalApproximation)
    };

    Ok(TestResult {
        u_statistic: u_a,
        u_b,
        u_min: u_a.min(u_b),
        p_value,
        method,
        rbc: 1.0 - 2.0 * u_a / pairs,
        n_a,
        n_b,
    })
}

/// Two-sided p-value of the normal approximation regardless of sample size.
pub fn mann_whitney_normal_p(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    let result = mann_whitney(a, b)?;
    let (_, ties) = midranks(a, b);
    Ok(normal_two_sided(result.u_statistic, result.n_a, result.n_b, &ties))
}

pub fn rank_biserial(u_a: f64, n_a: usize, n_b: usize) -> Result<f64, StatsError> {
    let max = (n_a * n_b) as f64;
    if max == 0.0 {
        return Err(StatsError::EmptySample);
    }
    if !(0.0..=max).contains(&u_a) {
        return Err(StatsError::OutOfRangeU { u: u_a, max });
    }
    Ok(1.0 - 2.0 * u_a / max)
}

/// Cohen's kappa between two codings of the same items.
pub fn cohens_kappa<T: Ord>(coder1: &[T], coder2: &[T]) -> Result<f64, StatsError> {
    if coder1.len() != coder2.len() {
        return Err(StatsError::LengthMismatch(coder1.len(), coder2.len()));
    }
    if coder1.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let n = coder1.len() as u128;
    let mut marginals: BTreeMap<&T, (u128, u128)> = BTreeMap::new();
    let mut agree = 0u128;
    for (x, y) in coder1.iter().zip(coder2) {
        marginals.entry(x).or_default().0 += 1;
        marginals.entry(y).or_default().1 += 1;
        if x == y {
            agree += 1;
        }
    }
    let chance: u128 = marginals.values().map(|(r, c)| r * c).sum();
    // kappa = (p_o - p_e) / (1 - p_e), scaled by n^2 to stay in integers
    if chance == n * n {
        return Ok(1.0);
    }
    let numerator = (n * agree) as i128 - chance as i128;
    Ok(numerator as f64 / (n * n - chance) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxplotSummary {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub iqr: f64,
    pub lower_fence: f64,
    pub upper_fence: f64,
    pub outlier_ids: Vec<StudentId>,
}

/// Quantile by linear interpolation between closest ranks, `h = (n - 1) p`.
/// `sorted` must be ascending and non-empty.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Quartiles, Tukey fences at 1.5 IQR, and the ids strictly outside them
/// (in input order).
pub fn boxplot_summary(values: &[(StudentId, f64)]) -> Result<BoxplotSummary, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if values.iter().any(|(_, v)| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut sorted: Vec<f64> = values.iter().map(|(_, v)| *v).collect();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile(&sorted, 0.25);
    let median = quantile(&sorted, 0.5);
    let q3 = quantile(&sorted, 0.75);
    let iqr = q3 - q1;
    let lower_fence = q1 - 1.5 * iqr;
    let upper_fence = q3 + 1.5 * iqr;
    let outlier_ids = values
        .iter()
        .filter(|(_, v)| *v < lower_fence || *v > upper_fence)
        .map(|(id, _)| id.clone())
        .collect();
    Ok(BoxplotSummary {
        q1,
        median,
        q3,
        iqr,
        lower_fence,
        upper_fence,
        outlier_ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn separated_pair_exact_p() {
        // C(4,2) = 6 equally likely splits; only {1,2} gives U_A = 0.
        let r = mann_whitney(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.u_statistic, 0.0);
        assert_eq!(r.u_b, 4.0);
        assert_eq!(r.method, Method::Exact);
        assert!((r.p_value - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.rbc, 1.0);
    }

    #[test]
    fn identical_samples_give_p_one() {
        let r = mann_whitney(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.u_statistic, 4.5);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.method, Method::NormalApproximation);
        assert_eq!(r.rbc, 0.0);
    }

    #[test]
    fn all_tied_samples() {
        let r = mann_whitney(&[5.0; 4], &[5.0; 9]).unwrap();
        assert_eq!(r.u_statistic, 18.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn empty_or_nan_samples_are_rejected() {
        assert_eq!(mann_whitney(&[], &[1.0]), Err(StatsError::EmptySample));
        assert_eq!(mann_whitney(&[1.0], &[]), Err(StatsError::EmptySample));
        assert_eq!(mann_whitney(&[f64::NAN], &[1.0]), Err(StatsError::NonFinite));
    }

    #[test]
    fn midranks_average_ties() {
        let (ranks, ties) = midranks(&[1.0, 2.0, 2.0, 4.0, 5.0], &[6.0, 7.0, 7.0, 9.0, 10.0]);
        assert_eq!(ranks, [1.0, 2.5, 2.5, 4.0, 5.0, 6.0, 7.5, 7.5, 9.0, 10.0]);
        assert_eq!(ties, [2, 2]);
    }

    #[test]
    fn u_distribution_small_cases() {
        assert_eq!(u_distribution(2, 2), [1, 1, 2, 1, 1]);
        assert_eq!(u_distribution(1, 3), [1, 1, 1, 1]);
        assert_eq!(u_distribution(6, 6).iter().sum::<u64>(), 924);
    }

    #[test]
    fn large_samples_use_normal_approximation() {
        let a: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let b: Vec<f64> = (10..30).map(|i| i as f64 + 0.5).collect();
        let r = mann_whitney(&a, &b).unwrap();
        assert_eq!(r.method, Method::NormalApproximation);
        assert!(r.p_value > 0.0 && r.p_value < 0.01);
    }

    #[test]
    fn rank_biserial_endpoints() {
        assert_eq!(rank_biserial(0.0, 2, 2), Ok(1.0));
        assert_eq!(rank_biserial(6.0, 3, 4), Ok(0.0));
        assert_eq!(rank_biserial(12.0, 3, 4), Ok(-1.0));
        assert!(matches!(rank_biserial(13.0, 3, 4), Err(StatsError::OutOfRangeU { .. })));
        assert!(matches!(rank_biserial(-1.0, 3, 4), Err(StatsError::OutOfRangeU { .. })));
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(cohens_kappa(&["PS04", "S1", "OT2"], &["PS04", "S1", "OT2"]), Ok(1.0));
        assert_eq!(cohens_kappa(&["S1", "S1"], &["S1", "S1"]), Ok(1.0));
        let k = cohens_kappa(&['A', 'A', 'B', 'B'], &['A', 'B', 'A', 'B']).unwrap();
        assert!(k.abs() < 1e-12);
        assert_eq!(cohens_kappa(&['A'], &['A', 'B']), Err(StatsError::LengthMismatch(1, 2)));
        assert_eq!(cohens_kappa::<char>(&[], &[]), Err(StatsError::EmptySample));
    }

    #[test]
    fn kappa_textbook_value() {
        // 50 items: both yes 20, both no 15, 5/10 disagreements.
        // p_o = 0.7, p_e = 0.5*0.6 + 0.5*0.4 = 0.5 => kappa = 0.4
        let mut c1 = vec![];
        let mut c2 = vec![];
        for (x, y, n) in [(1, 1, 20), (0, 0, 15), (1, 0, 5), (0, 1, 10)] {
            c1.extend(std::iter::repeat_n(x, n));
            c2.extend(std::iter::repeat_n(y, n));
        }
        assert!((cohens_kappa(&c1, &c2).unwrap() - 0.4).abs() < 1e-12);
    }

    fn ids(values: &[f64]) -> Vec<(StudentId, f64)> {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| (StudentId(format!("s{i}")), *v))
            .collect()
    }

    #[test]
    fn boxplot_examples() {
        let b = boxplot_summary(&ids(&[1.0, 2.0, 3.0, 4.0, 5.0])).unwrap();
        assert_eq!((b.q1, b.median, b.q3), (2.0, 3.0, 4.0));
        assert_eq!((b.lower_fence, b.upper_fence), (-1.0, 7.0));
        assert!(b.outlier_ids.is_empty());

        let b = boxplot_summary(&ids(&[4.2])).unwrap();
        assert_eq!((b.q1, b.median, b.q3), (4.2, 4.2, 4.2));
        assert!(b.outlier_ids.is_empty());

        let b = boxplot_summary(&ids(&[1.0, 1.0, 1.0, 1.0, 100.0])).unwrap();
        assert_eq!(b.outlier_ids, [StudentId::from("s4")]);

        assert_eq!(boxplot_summary(&[]), Err(StatsError::EmptySample));
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.25), 1.75);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
    }

    fn sample() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec((0u8..12).prop_map(f64::from), 1..15)
    }

    proptest! {
        #[test]
        fn swapping_samples_mirrors_u(a in sample(), b in sample()) {
            let ab = mann_whitney(&a, &b).unwrap();
            let ba = mann_whitney(&b, &a).unwrap();
            let pairs = (a.len() * b.len()) as f64;
            prop_assert_eq!(ab.u_statistic + ab.u_b, pairs);
            prop_assert_eq!(ab.u_statistic + ba.u_statistic, pairs);
            prop_assert_eq!(ab.p_value, ba.p_value);
            prop_assert!(ab.p_value > 0.0 && ab.p_value <= 1.0);
            prop_assert!((ab.rbc + ba.rbc).abs() < 1e-12);
        }

        #[test]
        fn monotone_transforms_leave_the_test_unchanged(a in sample(), b in sample(), scale in 0.01f64..100.0) {
            let f = |x: &f64| (x + 1.0).ln() * scale + x.powi(3);
            let ta: Vec<f64> = a.iter().map(f).collect();
            let tb: Vec<f64> = b.iter().map(f).collect();
            let before = mann_whitney(&a, &b).unwrap();
            let after = mann_whitney(&ta, &tb).unwrap();
            prop_assert_eq!(before.u_statistic, after.u_statistic);
            prop_assert_eq!(before.p_value, after.p_value);
        }

        #[test]
        fn kappa_symmetric_and_permutation_invariant(
            pairs in prop::collection::vec((0u8..4, 0u8..4), 1..40),
            rot in 0usize..40,
        ) {
            let (c1, c2): (Vec<u8>, Vec<u8>) = pairs.iter().copied().unzip();
            let k = cohens_kappa(&c1, &c2).unwrap();
            prop_assert_eq!(k, cohens_kappa(&c2, &c1).unwrap());
            let mut rotated = pairs.clone();
            rotated.rotate_left(rot % pairs.len());
            let (r1, r2): (Vec<u8>, Vec<u8>) = rotated.into_iter().unzip();
            prop_assert_eq!(k, cohens_kappa(&r1, &r2).unwrap());
            prop_assert!(k <= 1.0);
        }

        #[test]
        fn boxplot_invariants(values in prop::collection::vec(-50.0f64..50.0, 1..30)) {
            let b = boxplot_summary(&ids(&values)).unwrap();
            prop_assert!(b.q1 <= b.median && b.median <= b.q3);
            for (id, v) in ids(&values) {
                let outside = v < b.lower_fence || v > b.upper_fence;
                prop_assert_eq!(outside, b.outlier_ids.contains(&id));
            }
        }
    }
}
