//! Mann-Whitney U test and Bonferroni correction.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::AnalysisError;

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Largest number of sample splits for which the permutation distribution is
/// enumerated instead of approximated.
pub const EXACT_MAX_SPLITS: u64 = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// `U` of the first sample.
    pub u: f64,
    pub p_value: f64,
    pub n_a: usize,
    pub n_b: usize,
    /// Whether `p_value` comes from full enumeration of the permutation distribution.
    pub exact: bool,
    /// Rejection under the correction last applied; uncorrected at
    /// [`DEFAULT_ALPHA`] when freshly computed.
    pub rejected: bool,
}

/// 1-based midranks of `values`.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// `U` statistic of `a` against `b` from midranks.
pub fn u_statistic(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let r_a: f64 = ranks[..a.len()].iter().sum();
    let n_a = a.len() as f64;
    r_a - n_a * (n_a + 1.0) / 2.0
}

fn splits(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    let mut c: u64 = 1;
    for i in 0..k {
        c = c.saturating_mul((n - i) as u64) / (i as u64 + 1);
    }
    c
}

/// Two-sided permutation p-value: the share of all ways to split the pooled ranks
/// into groups of `n_a` and the rest whose `U` lies at least as far from its mean.
fn exact_p_value(ranks: &[f64], n_a: usize, u: f64) -> f64 {
    struct Walk<'a> {
        ranks: &'a [f64],
        offset: f64,
        mean: f64,
        observed: f64,
        hits: u64,
        total: u64,
    }
    impl Walk<'_> {
        fn go(&mut self, start: usize, left: usize, sum: f64) {
            if left == 0 {
                self.total += 1;
                if (sum - self.offset - self.mean).abs() >= self.observed - 1e-9 {
                    self.hits += 1;
                }
                return;
            }
            for i in start..=self.ranks.len() - left {
                self.go(i + 1, left - 1, sum + self.ranks[i]);
            }
        }
    }
    let n_b = ranks.len() - n_a;
    let mean = (n_a * n_b) as f64 / 2.0;
    let mut walk = Walk {
        ranks,
        offset: (n_a * (n_a + 1)) as f64 / 2.0,
        mean,
        observed: (u - mean).abs(),
        hits: 0,
        total: 0,
    };
    walk.go(0, n_a, 0.0);
    walk.hits as f64 / walk.total as f64
}

/// Two-sided test. Small samples, up to [`EXACT_MAX_SPLITS`] splits, use the exact
/// permutation distribution of the midranks; larger ones the normal approximation
/// of [`mann_whitney_u_normal`].
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<TestResult, AnalysisError> {
    rank_test(a, b, true)
}

/// Two-sided test via the normal approximation with tie and continuity
/// corrections. A sample with no variation in ranks gives `p = 1`.
pub fn mann_whitney_u_normal(a: &[f64], b: &[f64]) -> Result<TestResult, AnalysisError> {
    rank_test(a, b, false)
}

fn rank_test(a: &[f64], b: &[f64], allow_exact: bool) -> Result<TestResult, AnalysisError> {
    if a.is_empty() || b.is_empty() {
        return Err(AnalysisError::InsufficientData("both samples need at least one value".into()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(AnalysisError::InvalidArgument("NaN in rank test input".into()));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let n_a = a.len() as f64;
    let u = ranks[..a.len()].iter().sum::<f64>() - n_a * (n_a + 1.0) / 2.0;
    let exact = allow_exact && splits(pooled.len(), a.len()) <= EXACT_MAX_SPLITS;
    let p_value = if exact {
        exact_p_value(&ranks, a.len(), u)
    } else {
        normal_p_value(&pooled, a.len(), u)
    };
    Ok(TestResult {
        u,
        p_value,
        n_a: a.len(),
        n_b: b.len(),
        exact,
        rejected: p_value <= DEFAULT_ALPHA,
    })
}

fn normal_p_value(pooled: &[f64], n_a: usize, u: f64) -> f64 {
    let n = pooled.len() as f64;
    let (n_a, n_b) = (n_a as f64, n - n_a as f64);
    let mut sorted = pooled.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let variance = n_a * n_b / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)).max(1.0));
    if variance <= 0.0 {
        return 1.0;
    }
    let z = ((u - n_a * n_b / 2.0).abs() - 0.5).max(0.0) / variance.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * normal.sf(z)).min(1.0)
}

/// `p_i <= alpha / m`.
pub fn bonferroni_reject(p_values: &[f64], alpha: f64) -> Result<Vec<bool>, AnalysisError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(AnalysisError::InvalidArgument(format!("alpha {alpha} outside (0, 1)")));
    }
    let threshold = alpha / p_values.len() as f64;
    Ok(p_values.iter().map(|&p| p <= threshold).collect())
}
