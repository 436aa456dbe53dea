//! Wilcoxon rank-sum (Mann–Whitney U) test and the pairwise performance score.
//!
//! The performance score of system `i` counts the systems `j` whose run
//! sample is significantly lower than that of `i` under a one-sided rank-sum
//! test. Lower scores are better.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

/// Pooled sample size up to which the exact permutation distribution is used.
pub const EXACT_MAX_TOTAL: usize = 20;
/// Significance level of the performance score.
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("empty sample")]
    EmptySample,
    #[error("exact mode supports at most {EXACT_MAX_TOTAL} pooled observations, got {0}")]
    TooLargeForExact(usize),
    #[error("non-finite observation")]
    NonFinite,
    #[error("at least two systems are required")]
    TooFewSystems,
    #[error("system {index} has {got} runs, expected {expected}")]
    RunCountMismatch { index: usize, got: usize, expected: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// `a` tends to be smaller than `b`.
    Less,
    Greater,
    TwoSided,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMode {
    Exact,
    Normal,
    /// Exact up to [`EXACT_MAX_TOTAL`] pooled observations, normal beyond.
    Auto,
}

/// Midranks (1-based, ties averaged) of `values`.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Mann–Whitney `U` of `a` against `b` (midranks for ties).
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let na = a.len() as f64;
    ranks[..a.len()].iter().sum::<f64>() - na * (na + 1.0) / 2.0
}

fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Rank-sum test p-value for `alternative` about `a` relative to `b`.
pub fn rank_sum_test(a: &[f64], b: &[f64], alternative: Alternative, mode: TestMode) -> Result<f64, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let total = a.len() + b.len();
    let exact = match mode {
        TestMode::Exact if total > EXACT_MAX_TOTAL => return Err(StatsError::TooLargeForExact(total)),
        TestMode::Exact => true,
        TestMode::Normal => false,
        TestMode::Auto => total <= EXACT_MAX_TOTAL,
    };
    let p = if exact { exact_p(a, b, alternative) } else { normal_p(a, b, alternative) };
    Ok(p.clamp(0.0, 1.0))
}

/// Exact p-value from the permutation distribution of the rank sum of `a`.
///
/// Doubled midranks are integers, so the distribution is built by counting
/// subsets per doubled rank sum.
fn exact_p(a: &[f64], b: &[f64], alternative: Alternative) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let doubled: Vec<usize> = midranks(&pooled).iter().map(|r| (2.0 * r).round() as usize).collect();
    let na = a.len();
    let observed: usize = doubled[..na].iter().sum();
    let max_sum: usize = doubled.iter().sum();

    // counts[k][s]: number of k-subsets with doubled rank sum s.
    let mut counts = vec![vec![0f64; max_sum + 1]; na + 1];
    counts[0][0] = 1.0;
    for &r in &doubled {
        for k in (0..na).rev() {
            for s in (0..=max_sum - r).rev() {
                let c = counts[k][s];
                if c != 0.0 {
                    counts[k + 1][s + r] += c;
                }
            }
        }
    }
    let dist = &counts[na];
    let total: f64 = dist.iter().sum();
    let le: f64 = dist[..=observed].iter().sum();
    let ge: f64 = dist[observed..].iter().sum();
    let (p_less, p_greater) = (le / total, ge / total);
    match alternative {
        Alternative::Less => p_less,
        Alternative::Greater => p_greater,
        Alternative::TwoSided => (2.0 * p_less.min(p_greater)).min(1.0),
    }
}

/// Tie-corrected normal approximation with continuity correction.
fn normal_p(a: &[f64], b: &[f64], alternative: Alternative) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;
    let u = mann_whitney_u(a, b);
    let mean = na * nb / 2.0;

    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let mut ties = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i + 1;
        while j < pooled.len() && pooled[j] == pooled[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        ties += t * t * t - t;
        i = j;
    }
    let var = if n > 1.0 { na * nb / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0))) } else { 0.0 };
    if !(var > 0.0) {
        return 1.0;
    }
    let sd = var.sqrt();
    match alternative {
        Alternative::Less => standard_normal_cdf((u - mean + 0.5) / sd),
        Alternative::Greater => 1.0 - standard_normal_cdf((u - mean - 0.5) / sd),
        Alternative::TwoSided => {
            let z = ((u - mean).abs() - 0.5).max(0.0) / sd;
            (2.0 * (1.0 - standard_normal_cdf(z))).min(1.0)
        }
    }
}

/// Pairwise significance matrix and per-system scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonMatrix {
    pub systems: Vec<String>,
    /// `delta[i][j] == 1` iff system `j` is significantly better than system `i`.
    pub delta: Vec<Vec<u8>>,
    pub scores: Vec<usize>,
}

/// Performance scores of systems from their per-run samples (lower values = better runs).
pub fn performance_score(
    systems: &[String],
    samples: &[Vec<f64>],
    alpha: f64,
) -> Result<ComparisonMatrix, StatsError> {
    if samples.len() < 2 {
        return Err(StatsError::TooFewSystems);
    }
    let expected = samples[0].len();
    for (index, s) in samples.iter().enumerate() {
        if s.len() != expected {
            return Err(StatsError::RunCountMismatch { index, got: s.len(), expected });
        }
    }
    let l = samples.len();
    let mut delta = vec![vec![0u8; l]; l];
    for i in 0..l {
        for j in 0..l {
            if i == j {
                continue;
            }
            let p = rank_sum_test(&samples[j], &samples[i], Alternative::Less, TestMode::Auto)?;
            delta[i][j] = u8::from(p < alpha);
        }
    }
    let scores = delta.iter().map(|row| row.iter().map(|&d| d as usize).sum()).collect();
    let systems = if systems.len() == l {
        systems.to_vec()
    } else {
        (0..l).map(|i| format!("S{i}")).collect()
    };
    Ok(ComparisonMatrix { systems, delta, scores })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn identical_constant_samples() {
        for mode in [TestMode::Exact, TestMode::Normal] {
            for alt in [Alternative::Less, Alternative::Greater, Alternative::TwoSided] {
                assert_eq!(rank_sum_test(&[2.0; 4], &[2.0; 5], alt, mode).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn separated_five_by_five() {
        let a: Vec<f64> = (1..=5).map(f64::from).collect();
        let b: Vec<f64> = (6..=10).map(f64::from).collect();
        let p = rank_sum_test(&a, &b, Alternative::Less, TestMode::Exact).unwrap();
        assert!((p - 1.0 / 252.0).abs() < 1e-15);
        let p = rank_sum_test(&a, &b, Alternative::Greater, TestMode::Exact).unwrap();
        assert_eq!(p, 1.0);
        let p = rank_sum_test(&a, &b, Alternative::TwoSided, TestMode::Exact).unwrap();
        assert!((p - 2.0 / 252.0).abs() < 1e-15);
    }

    #[test]
    fn input_errors() {
        assert_eq!(rank_sum_test(&[], &[1.0], Alternative::Less, TestMode::Auto), Err(StatsError::EmptySample));
        let big = vec![0.0; 11];
        assert_eq!(
            rank_sum_test(&big, &big, Alternative::Less, TestMode::Exact),
            Err(StatsError::TooLargeForExact(22))
        );
        assert!(rank_sum_test(&big, &big, Alternative::Less, TestMode::Auto).is_ok());
    }

    #[test]
    fn scores_of_identical_and_separated_systems() {
        let same = vec![vec![1.0, 2.0, 3.0, 4.0, 5.0]; 3];
        let m = performance_score(&[], &same, DEFAULT_ALPHA).unwrap();
        assert_eq!(m.scores, vec![0, 0, 0]);
        assert!(m.delta.iter().enumerate().all(|(i, r)| r[i] == 0));

        let a: Vec<f64> = (0..31).map(|i| 1.0 + i as f64 * 0.01).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 10.0).collect();
        let c: Vec<f64> = a.iter().map(|v| v + 20.0).collect();
        let m = performance_score(&["A".into(), "B".into(), "C".into()], &[a, b, c], DEFAULT_ALPHA).unwrap();
        assert_eq!(m.scores, vec![0, 1, 2]);
        assert_eq!(m.delta[2], vec![1, 1, 0]);
    }

    #[test]
    fn overlapping_samples_are_not_significant() {
        let a = vec![1.0, 3.0, 5.0, 7.0, 9.0, 11.0];
        let b = vec![2.0, 4.0, 6.0, 8.0, 10.0, 12.0];
        let m = performance_score(&[], &[a, b], DEFAULT_ALPHA).unwrap();
        assert_eq!(m.scores, vec![0, 0]);
    }

    #[test]
    fn mismatched_run_counts() {
        assert!(matches!(
            performance_score(&[], &[vec![1.0, 2.0], vec![1.0]], DEFAULT_ALPHA),
            Err(StatsError::RunCountMismatch { index: 1, .. })
        ));
        assert_eq!(performance_score(&[], &[vec![1.0]], DEFAULT_ALPHA), Err(StatsError::TooFewSystems));
    }
}
