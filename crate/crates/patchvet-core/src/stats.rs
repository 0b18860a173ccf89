//! Paired significance testing for cross-tool comparisons.
//!
//! The Wilcoxon signed-rank test compares paired observations (for this
//! toolkit, per-tool accuracies of two approaches) without assuming
//! normality. Zero differences are discarded; absolute differences receive
//! average ranks under ties. For up to 20 non-zero pairs the two-sided
//! p-value is exact, computed by dynamic programming over the `2^n`
//! equally likely sign assignments; beyond that a normal approximation
//! with continuity and tie corrections is used.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;

/// Errors from the signed-rank test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StatsError {
    EmptyInput,
    /// Every pair is tied, leaving nothing to rank.
    AllZeroDifferences,
    /// The difference at this index is NaN or infinite.
    NonFiniteDifference(usize),
}

impl fmt::Display for StatsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatsError::EmptyInput => write!(f, "no pairs given"),
            StatsError::AllZeroDifferences => {
                write!(f, "all paired differences are zero")
            }
            StatsError::NonFiniteDifference(index) => {
                write!(f, "paired difference at index {index} is not finite")
            }
        }
    }
}

impl core::error::Error for StatsError {}

/// How the p-value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PMethod {
    /// Exhaustive over sign assignments (used for `n <= 20`).
    Exact,
    /// Normal approximation with continuity and tie corrections.
    NormalApprox,
}

/// Result of a two-sided Wilcoxon signed-rank test.
#[derive(Debug, Clone, PartialEq)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`: the smaller of the signed rank sums.
    pub statistic: f64,
    pub p_two_sided: f64,
    /// Pairs remaining after zero differences are dropped.
    pub n_nonzero: usize,
    pub method: PMethod,
}

/// Runs the test on `(left, right)` pairs, testing whether the median
/// difference `left - right` is zero.
pub fn wilcoxon_signed_rank(pairs: &[(f64, f64)]) -> Result<WilcoxonResult, StatsError> {
    if pairs.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let mut differences = Vec::new();
    for (index, (left, right)) in pairs.iter().enumerate() {
        let difference = left - right;
        if !difference.is_finite() {
            return Err(StatsError::NonFiniteDifference(index));
        }
        if difference != 0.0 {
            differences.push(difference);
        }
    }
    if differences.is_empty() {
        return Err(StatsError::AllZeroDifferences);
    }
    let n = differences.len();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| math::abs(differences[a]).total_cmp(&math::abs(differences[b])));
    let mut ranks = vec![0.0f64; n];
    let mut tie_groups: Vec<u64> = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n
            && math::abs(differences[order[end + 1]]) == math::abs(differences[order[start]])
        {
            end += 1;
        }
        let average_rank = (start + end + 2) as f64 / 2.0;
        for &index in &order[start..=end] {
            ranks[index] = average_rank;
        }
        tie_groups.push((end - start + 1) as u64);
        start = end + 1;
    }

    let mut w_plus = 0.0f64;
    let mut w_minus = 0.0f64;
    for (difference, rank) in differences.iter().zip(&ranks) {
        if *difference > 0.0 {
            w_plus += rank;
        } else {
            w_minus += rank;
        }
    }
    let statistic = if w_plus <= w_minus { w_plus } else { w_minus };

    if n <= 20 {
        let p_two_sided = exact_p(&ranks, w_plus);
        Ok(WilcoxonResult {
            statistic,
            p_two_sided,
            n_nonzero: n,
            method: PMethod::Exact,
        })
    } else {
        let p_two_sided = approximate_p(statistic, n, &tie_groups);
        Ok(WilcoxonResult {
            statistic,
            p_two_sided,
            n_nonzero: n,
            method: PMethod::NormalApprox,
        })
    }
}

/// Exact two-sided p-value: the fraction of the `2^n` sign assignments
/// whose rank sum `T` lies at least as far from the mean as the observed
/// one. Ranks are doubled so average ranks become integers, and subset
/// sums are counted by dynamic programming.
fn exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len();
    debug_assert!(n <= 20);
    let doubled: Vec<u64> = ranks.iter().map(|rank| (rank * 2.0) as u64).collect();
    let total: u64 = doubled.iter().sum();
    let mut counts = vec![0u64; (total + 1) as usize];
    counts[0] = 1;
    for &rank in &doubled {
        for sum in (rank..=total).rev() {
            counts[sum as usize] += counts[(sum - rank) as usize];
        }
    }
    // total == n(n+1), always even, so the doubled-scale mean is an integer.
    let mean = (total / 2) as i64;
    let observed = (w_plus * 2.0) as i64;
    let delta = (observed - mean).abs();
    let mut extreme = 0u64;
    for (sum, count) in counts.iter().enumerate() {
        if (sum as i64 - mean).abs() >= delta {
            extreme += count;
        }
    }
    extreme as f64 / (1u64 << n) as f64
}

/// Normal approximation for large `n`, with a 0.5 continuity correction
/// and the usual tie correction subtracted from the variance.
fn approximate_p(statistic: f64, n: usize, tie_groups: &[u64]) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = tie_groups
        .iter()
        .map(|&t| {
            let t = t as f64;
            (t * t * t - t) / 48.0
        })
        .sum();
    let variance = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    if variance <= 0.0 {
        return 1.0;
    }
    let sigma = math::sqrt(variance);
    let z = (statistic - mean + 0.5) / sigma;
    let p = 2.0 * math::normal_sf(-z);
    if p > 1.0 {
        1.0
    } else {
        p
    }
}
