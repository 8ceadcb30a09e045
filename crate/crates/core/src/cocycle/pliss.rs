//! Pliss times of a finite real sequence, and the center-exponent budget
//! test for the Z_χ set.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlissError {
    #[error("need alpha1 < alpha2")]
    BadThresholds,
    #[error("sequence entry {0} at index {1} is not above alpha1")]
    EntryBelowAlpha1(f64, usize),
    #[error("empty sequence")]
    Empty,
}

/// Finite-window Pliss decomposition. `times` are the indices n with
/// (a_n + … + a_{m−1})/(m − n) ≤ α₂ + ε for every m in (n, len]; `density`
/// is count/len; `delta_bound` = ε/(α₂+ε−α₁). When `hypothesis_ok` (window
/// average ≤ α₂) the density exceeds the bound.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlissResult {
    pub times: Vec<usize>,
    pub density: f64,
    pub delta_bound: f64,
    /// False flags HypothesisViolated: the window average is above alpha2,
    /// so no density guarantee applies.
    pub hypothesis_ok: bool,
}

/// Suffix-maximum scan over S_n = Σ_{i<n} (a_i − α₂ − ε): index n is a Pliss
/// time iff S_n ≥ S_m for all m in (n, len]. O(len), in contrast with the
/// exhaustive oracle's O(len²).
pub fn pliss_times(seq: &[f64], alpha1: f64, alpha2: f64, epsilon: f64) -> Result<PlissResult, PlissError> {
    if !(alpha1 < alpha2) || !(epsilon > 0.0) {
        return Err(PlissError::BadThresholds);
    }
    if seq.is_empty() {
        return Err(PlissError::Empty);
    }
    for (i, a) in seq.iter().enumerate() {
        if !(*a > alpha1) {
            return Err(PlissError::EntryBelowAlpha1(*a, i));
        }
    }
    let len = seq.len();
    let shift = alpha2 + epsilon;
    // partial sums S_0..S_len
    let mut s = Vec::with_capacity(len + 1);
    s.push(0.0);
    let mut acc = 0.0;
    for a in seq {
        acc += a - shift;
        s.push(acc);
    }
    // scan from the right: n is a Pliss time iff S_n >= max of S over (n, len]
    let mut times_rev = Vec::new();
    let mut suffix_max = f64::NEG_INFINITY;
    for n in (0..len).rev() {
        suffix_max = suffix_max.max(s[n + 1]);
        if s[n] >= suffix_max {
            times_rev.push(n);
        }
    }
    times_rev.reverse();
    let mean = seq.iter().sum::<f64>() / len as f64;
    let density = times_rev.len() as f64 / len as f64;
    Ok(PlissResult {
        times: times_rev,
        density,
        delta_bound: epsilon / (alpha2 + epsilon - alpha1),
        hypothesis_ok: mean <= alpha2,
    })
}

/// True iff the partial sums of the log-expansion sequence stay below the
/// −nχ/2 budget for all 1 ≤ n ≤ n_max (finite truncation of the Z_χ
/// membership condition).
pub fn z_chi_test(seq: &[f64], chi: f64, n_max: usize) -> bool {
    let mut sum = 0.0;
    for (i, a) in seq.iter().take(n_max).enumerate() {
        sum += a;
        if !(sum < -((i + 1) as f64) * chi / 2.0) {
            return false;
        }
    }
    true
}

/// Fraction of sequences passing the Z_χ test, with a 1.96-sigma binomial
/// halfwidth.
pub fn z_chi_fraction<'a, I>(seqs: I, chi: f64, n_max: usize) -> (f64, f64)
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut pass = 0usize;
    let mut total = 0usize;
    for s in seqs {
        total += 1;
        if z_chi_test(s, chi, n_max) {
            pass += 1;
        }
    }
    if total == 0 {
        return (0.0, 0.0);
    }
    let p = pass as f64 / total as f64;
    (p, 1.96 * (p * (1.0 - p) / total as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_sequence_all_pliss() {
        let seq = vec![0.5; 64];
        let r = pliss_times(&seq, 0.0, 0.5, 0.1).unwrap();
        assert_eq!(r.times, (0..64).collect::<Vec<_>>());
        assert_eq!(r.density, 1.0);
        assert!(r.hypothesis_ok);
        assert!(r.density >= r.delta_bound - 1e-12);
    }

    #[test]
    fn violated_hypothesis_is_flagged() {
        let seq = vec![2.0; 16];
        let r = pliss_times(&seq, 0.0, 0.5, 0.1).unwrap();
        assert!(!r.hypothesis_ok);
    }

    #[test]
    fn z_chi_constant_budget() {
        let seq = vec![-0.4; 50];
        assert!(z_chi_test(&seq, 0.4, 50));
        // an early positive burst exceeding the budget
        let mut burst = vec![-0.4; 50];
        burst[1] = 5.0;
        assert!(!z_chi_test(&burst, 0.4, 50));
    }
}
