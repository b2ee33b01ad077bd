//! Slow, obviously-correct reference implementations and the randomized
//! suites that compare them against the production code.
//!
//! Each oracle takes a different route from the code it checks: subsequence
//! enumeration instead of pattern growth, explicit rank-split enumeration
//! instead of the U recurrence, and exact big-integer CDF sums instead of the
//! floating-point pmf.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use itertools::Itertools;
use num_bigint::BigUint;

use crate::framework::{Condition, IndicatorCode, Phase};
use crate::hina::{prune_edges, BipartiteNetwork};
use crate::rng::SeededRng;
use crate::spm::PrefixSpan;
use crate::stats::{mann_whitney, mann_whitney_normal_p, Method};

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub trials: usize,
    pub matched: usize,
    /// First failure, minimized where the suite supports it.
    pub counterexample: Option<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.matched == self.trials
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}/{} match", self.name, self.matched, self.trials)?;
        if let Some(c) = &self.counterexample {
            write!(f, "\ncounterexample:\n{c}")?;
        }
        Ok(())
    }
}

struct Tally {
    report: SuiteReport,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Tally {
            report: SuiteReport {
                name,
                trials: 0,
                matched: 0,
                counterexample: None,
            },
        }
    }

    fn record(&mut self, failure: Option<String>) {
        self.report.trials += 1;
        match failure {
            None => self.report.matched += 1,
            Some(msg) => {
                self.report.counterexample.get_or_insert(msg);
            }
        }
    }
}

// ---------------------------------------------------------------- spm

/// Every distinct non-empty subsequence of every sequence, with the number
/// of sequences containing it, kept when that number reaches
/// `ceil(num * n / den)` (at least 1).
pub fn brute_force_patterns<T: Ord + Clone>(
    sequences: &[Vec<T>],
    support_num: usize,
    support_den: usize,
) -> BTreeMap<Vec<T>, usize> {
    assert!(sequences.iter().all(|s| s.len() <= 16), "enumeration is exponential");
    let mut counts: BTreeMap<Vec<T>, usize> = BTreeMap::new();
    for seq in sequences {
        let mut seen = BTreeSet::new();
        for mask in 1u32..(1 << seq.len()) {
            let sub: Vec<T> = (0..seq.len())
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| seq[i].clone())
                .collect();
            seen.insert(sub);
        }
        for sub in seen {
            *counts.entry(sub).or_default() += 1;
        }
    }
    let threshold = (support_num * sequences.len()).div_ceil(support_den).max(1);
    counts.retain(|_, c| *c >= threshold);
    counts
}

fn spm_mismatch(db: &[Vec<u8>], num: usize, den: usize) -> Option<String> {
    let expected = brute_force_patterns(db, num, den);
    let mined = match PrefixSpan::new(num as f64 / den as f64).and_then(|m| m.mine(db)) {
        Ok(m) => m,
        Err(e) => return Some(format!("miner failed: {e}")),
    };
    let canonical = mined
        .windows(2)
        .all(|w| (w[0].items.len(), &w[0].items) < (w[1].items.len(), &w[1].items));
    let got: BTreeMap<Vec<u8>, usize> = mined.into_iter().map(|p| (p.items, p.support)).collect();
    if got == expected && canonical {
        return None;
    }
    let missing: Vec<_> = expected.iter().filter(|(k, v)| got.get(*k) != Some(v)).collect();
    let extra: Vec<_> = got.iter().filter(|(k, v)| expected.get(*k) != Some(v)).collect();
    Some(format!(
        "min_support {num}/{den}, db {db:?}\n  expected but not mined: {missing:?}\n  mined but not expected: {extra:?}\n  canonical order: {canonical}"
    ))
}

/// Greedily drops whole sequences, then single items, while the mismatch
/// persists.
fn shrink_spm(mut db: Vec<Vec<u8>>, num: usize, den: usize) -> Vec<Vec<u8>> {
    loop {
        let mut progressed = false;
        for i in 0..db.len() {
            if db.len() == 1 {
                break;
            }
            let mut candidate = db.clone();
            candidate.remove(i);
            if spm_mismatch(&candidate, num, den).is_some() {
                db = candidate;
                progressed = true;
                break;
            }
        }
        'items: for i in 0..db.len() {
            for j in 0..db[i].len() {
                let mut candidate = db.clone();
                candidate[i].remove(j);
                if candidate.iter().any(|s| !s.is_empty()) && spm_mismatch(&candidate, num, den).is_some() {
                    db = candidate;
                    progressed = true;
                    break 'items;
                }
            }
        }
        if !progressed {
            return db;
        }
    }
}

/// Random databases of up to 8 sequences of length 1..=8 over 5 symbols,
/// mined at support 1/4 or 1/2.
pub fn spm_suite(trials: usize, seed: u64) -> SuiteReport {
    let mut rng = SeededRng::new(seed);
    let mut tally = Tally::new("spm");
    for t in 0..trials {
        let (num, den) = if t % 2 == 0 { (1, 4) } else { (1, 2) };
        let n = rng.range_inclusive(1, 8) as usize;
        let db: Vec<Vec<u8>> = (0..n)
            .map(|_| {
                let len = rng.range_inclusive(1, 8) as usize;
                (0..len).map(|_| rng.below(5) as u8).collect()
            })
            .collect();
        let failure = spm_mismatch(&db, num, den).map(|_| {
            let small = shrink_spm(db.clone(), num, den);
            spm_mismatch(&small, num, den).expect("shrinking keeps the failure")
        });
        tally.record(failure);
    }
    tally.report
}

// ---------------------------------------------------------------- mwu

/// Two-sided exact p for tie-free samples by listing every way of giving
/// `a.len()` of the pooled ranks to sample A.
pub fn enumerated_exact_p(a: &[f64], b: &[f64]) -> (f64, f64) {
    let u_observed: f64 = a
        .iter()
        .map(|x| b.iter().filter(|y| x > y).count() as f64)
        .sum();
    let n_a = a.len();
    let n = a.len() + b.len();
    let (mut lower, mut upper, mut total) = (0u64, 0u64, 0u64);
    for ranks_a in (1..=n).combinations(n_a) {
        let rank_sum: usize = ranks_a.iter().sum();
        let u = (rank_sum - n_a * (n_a + 1) / 2) as f64;
        total += 1;
        if u <= u_observed {
            lower += 1;
        }
        if u >= u_observed {
            upper += 1;
        }
    }
    let p = (2.0 * lower.min(upper) as f64 / total as f64).min(1.0);
    (u_observed, p)
}

/// Distinct values, shuffled, split into samples of the given sizes.
fn tie_free_samples(rng: &mut SeededRng, n_a: usize, n_b: usize) -> (Vec<f64>, Vec<f64>) {
    let mut values: Vec<f64> = (0..n_a + n_b).map(|i| i as f64 * 1.5 - 3.0).collect();
    rng.shuffle(&mut values);
    let b = values.split_off(n_a);
    (values, b)
}

/// Cycles through every size pair with `n_a + n_b <= 10`.
pub fn mwu_suite(trials: usize, seed: u64) -> SuiteReport {
    let sizes: Vec<(usize, usize)> = (1..=9)
        .flat_map(|a| (1..=10 - a).map(move |b| (a, b)))
        .collect();
    let mut rng = SeededRng::new(seed);
    let mut tally = Tally::new("mwu");
    for t in 0..trials {
        let (n_a, n_b) = sizes[t % sizes.len()];
        let (a, b) = tie_free_samples(&mut rng, n_a, n_b);
        let (u, p) = enumerated_exact_p(&a, &b);
        let failure = match mann_whitney(&a, &b) {
            Err(e) => Some(format!("a={a:?} b={b:?}: {e}")),
            Ok(r) => {
                let ok = r.method == Method::Exact
                    && r.u_statistic == u
                    && r.u_statistic + r.u_b == (n_a * n_b) as f64
                    && (r.p_value - p).abs() <= 1e-12;
                (!ok).then(|| {
                    format!(
                        "a={a:?} b={b:?}: expected U={u} p={p}, got U={} U_B={} p={} ({:?})",
                        r.u_statistic, r.u_b, r.p_value, r.method
                    )
                })
            }
        };
        tally.record(failure);
    }
    tally.report
}

/// Largest gap between the normal approximation and the enumerated exact p
/// over random tie-free 6-vs-6 samples, and the per-fixture agreement at
/// `tolerance`.
pub fn normal_agreement_suite(trials: usize, seed: u64, tolerance: f64) -> (SuiteReport, f64) {
    let mut rng = SeededRng::new(seed);
    let mut tally = Tally::new("mwu normal approximation");
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let (a, b) = tie_free_samples(&mut rng, 6, 6);
        let (u, exact) = enumerated_exact_p(&a, &b);
        let approx = mann_whitney_normal_p(&a, &b).expect("non-empty finite samples");
        let gap = (approx - exact).abs();
        worst = worst.max(gap);
        tally.record((gap > tolerance).then(|| {
            format!("a={a:?} b={b:?}: U={u} exact p={exact:.6} normal p={approx:.6} (gap {gap:.6})")
        }));
    }
    (tally.report, worst)
}

// ---------------------------------------------------------------- binomial

/// Smallest `q` with `P(X <= q) >= 1 - num/den` for X ~ Binomial(w, 1/k),
/// by exact integer summation of `C(w, j) (k - 1)^(w - j)` against
/// `(1 - num/den) k^w`.
pub fn exact_binomial_threshold(w: u64, k: u64, num: u64, den: u64) -> u64 {
    assert!(k >= 1 && num < den);
    let target = BigUint::from(k).pow(w as u32) * (den - num);
    // term_j = C(w, j) (k-1)^(w-j)
    let mut term = BigUint::from(k - 1).pow(w as u32);
    let mut cumulative = BigUint::from(0u32);
    for j in 0..=w {
        cumulative += &term;
        if &cumulative * den >= target {
            return j;
        }
        if j < w {
            if k == 1 {
                // all mass sits at j = w
                term = if j + 1 == w { BigUint::from(1u32) } else { BigUint::from(0u32) };
            } else {
                term = term * (w - j) / ((j + 1) * (k - 1));
            }
        }
    }
    w
}

/// Network with `m` behaviours and total weight `w >= m`: one unit per
/// behaviour, the rest spread at random.
fn network_with(rng: &mut SeededRng, m: usize, w: u64) -> BipartiteNetwork<IndicatorCode> {
    let code = |i: usize| IndicatorCode::from_index(i).expect("fewer than 50 behaviours");
    let mut items: Vec<(IndicatorCode, Phase)> = (0..m).map(|i| (code(i), Phase::A1)).collect();
    for _ in m as u64..w {
        let b = code(rng.below(m as u64) as usize);
        let p = Phase::ALL[rng.below(4) as usize];
        items.push((b, p));
    }
    BipartiteNetwork::from_counts(Condition::Maximal, items)
}

/// Pruning thresholds at alpha = 0.05 against exact sums, for W = 20 with
/// K = 4 and then random W <= 10000 with K = 4m.
pub fn binomial_suite(trials: usize, seed: u64) -> SuiteReport {
    let mut rng = SeededRng::new(seed);
    let mut tally = Tally::new("binomial");
    for t in 0..trials {
        let (m, w) = if t == 0 {
            (1, 20)
        } else {
            // every behaviour needs an edge; the framework has 50 codes
            let m = rng.range_inclusive(1, 50) as usize;
            (m, rng.range_inclusive(m as u64, 10_000))
        };
        let k = 4 * m as u64;
        let expected = exact_binomial_threshold(w, k, 1, 20);
        let net = network_with(&mut rng, m, w);
        let failure = match prune_edges(&net, 0.05) {
            Err(e) => Some(format!("W={w} K={k}: {e}")),
            Ok(p) if p.null.threshold == expected && p.null.cells == k && p.null.total_weight == w => None,
            Ok(p) => Some(format!(
                "W={w} K={k}: exact threshold {expected}, pruning used {} (W={}, K={})",
                p.null.threshold, p.null.total_weight, p.null.cells
            )),
        };
        tally.record(failure);
    }
    tally.report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_force_matches_the_worked_example() {
        let db = vec![vec!['a', 'b', 'c'], vec!['a', 'c'], vec!['b', 'c']];
        let got = brute_force_patterns(&db, 3, 5);
        let pairs: Vec<_> = got.iter().filter(|(k, _)| k.len() >= 2).collect();
        assert_eq!(pairs, [(&vec!['a', 'c'], &2), (&vec!['b', 'c'], &2)]);
    }

    #[test]
    fn enumeration_small_cases() {
        assert_eq!(enumerated_exact_p(&[1.0, 2.0], &[3.0, 4.0]), (0.0, 1.0 / 3.0));
        let (_, p) = enumerated_exact_p(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]);
        assert!((p - 0.1).abs() < 1e-15);
    }

    #[test]
    fn exact_threshold_for_20_draws_over_4_cells() {
        assert_eq!(exact_binomial_threshold(20, 4, 1, 20), 8);
        assert_eq!(exact_binomial_threshold(5, 1, 1, 20), 5);
        // P(X = 0) = 1/2 for one fair draw
        assert_eq!(exact_binomial_threshold(1, 2, 1, 2), 0);
    }

    #[test]
    fn suites_pass_on_small_runs() {
        for report in [spm_suite(60, 1), mwu_suite(90, 2), binomial_suite(8, 3)] {
            assert!(report.passed(), "{report}");
        }
    }

    #[test]
    fn shrinking_leaves_passing_input_alone() {
        let db = vec![vec![0u8, 1, 2], vec![1, 2]];
        assert!(spm_mismatch(&db, 1, 2).is_none());
        assert_eq!(shrink_spm(db.clone(), 1, 2), db);
    }
}
