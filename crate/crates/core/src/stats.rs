//! Wilcoxon signed-ranks test for paired samples.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

/// Largest sample size for which the null distribution is enumerated
/// exactly; larger samples use the normal approximation.
pub const EXACT_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PValueMethod {
    Exact,
    Normal,
    /// Every difference was zero.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedRankTest {
    /// Number of non-zero differences.
    pub n: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    /// One-sided: probability of a rank sum at least `w_plus` when positive
    /// and negative differences are equally likely.
    pub p_value: f64,
    pub method: PValueMethod,
}

/// Ranks of `values` (1-based), averaging the ranks of equal values.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// One-sided signed-ranks test that the differences tend to be positive.
/// Zero differences are dropped before ranking.
pub fn wilcoxon_greater(differences: &[f64]) -> SignedRankTest {
    let nonzero: Vec<f64> = differences.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nonzero.len();
    if n == 0 {
        return SignedRankTest {
            n,
            w_plus: 0.0,
            w_minus: 0.0,
            p_value: 1.0,
            method: PValueMethod::Degenerate,
        };
    }
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = ranks.iter().zip(&nonzero).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let (p_value, method) = if n <= EXACT_LIMIT {
        (exact_upper_tail(&ranks, w_plus), PValueMethod::Exact)
    } else {
        (normal_upper_tail(&abs, &ranks, w_plus), PValueMethod::Normal)
    };
    SignedRankTest {
        n,
        w_plus,
        w_minus: total - w_plus,
        p_value,
        method,
    }
}

/// `P(W+ >= observed)` by counting sign assignments. Average ranks are
/// multiples of 1/2, so doubled ranks give an integer subset-sum count.
fn exact_upper_tail(ranks: &[f64], observed: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; max + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    let threshold = (observed * 2.0).round() as usize;
    let tail: f64 = counts[threshold..].iter().sum();
    tail / 2f64.powi(ranks.len() as i32)
}

/// Normal approximation with tie-corrected variance and a continuity
/// correction.
fn normal_upper_tail(abs: &[f64], ranks: &[f64], observed: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = abs.to_vec();
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
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return if observed > mean { 0.0 } else { 1.0 };
    }
    let z = (observed - mean - 0.5) / var.sqrt();
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn average_ranks_share_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn all_zero_differences_report_p_one() {
        let t = wilcoxon_greater(&[0.0, 0.0]);
        assert_eq!(t.p_value, 1.0);
        assert_eq!(t.method, PValueMethod::Degenerate);
    }

    #[test]
    fn single_positive_difference() {
        let t = wilcoxon_greater(&[0.4]);
        assert_eq!(t.w_plus, 1.0);
        assert_eq!(t.p_value, 0.5);
    }

    #[test]
    fn all_positive_at_n24_is_significant() {
        let d: Vec<f64> = (1..=24).map(|i| i as f64 * 0.01).collect();
        let t = wilcoxon_greater(&d);
        assert_eq!(t.method, PValueMethod::Normal);
        assert_eq!(t.w_plus, 300.0);
        assert!(t.p_value < 0.001, "{}", t.p_value);
    }

    #[test]
    fn exact_all_positive_n12() {
        let d: Vec<f64> = (1..=12).map(f64::from).collect();
        assert_eq!(wilcoxon_greater(&d).p_value, 1.0 / 4096.0);
    }
}
