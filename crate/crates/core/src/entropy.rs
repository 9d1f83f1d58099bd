//! Class-count entropies and the information gain of a binary split.

use crate::alternating::leaf_counts;
use crate::dataset::SampleSet;
use crate::error::{Error, Result};
use crate::tree::Tree;

/// Entropy in nats of a class histogram, with `0 log 0 = 0`. Zero for an empty histogram.
pub fn entropy(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

/// `H(parent) − (N_L/N) H(left) − (N_R/N) H(right)` in nats.
pub fn information_gain(parent: &[usize], left: &[usize], right: &[usize]) -> Result<f64> {
    if left.len() != parent.len() || right.len() != parent.len() {
        return Err(Error::invalid("class histograms have different lengths"));
    }
    if parent.iter().zip(left).zip(right).any(|((p, l), r)| l + r != *p) {
        return Err(Error::invalid("child histograms do not add up to the parent"));
    }
    let n: usize = parent.iter().sum();
    if n == 0 {
        return Err(Error::invalid("parent histogram is empty"));
    }
    let nl: usize = left.iter().sum();
    let nr: usize = right.iter().sum();
    let n = n as f64;
    Ok(entropy(parent) - nl as f64 / n * entropy(left) - nr as f64 / n * entropy(right))
}

/// `Σ_ℓ (N_ℓ / N) H_ℓ` over the leaves of a deterministically routed tree,
/// with `H_ℓ` the entropy of the leaf's class counts.
pub fn weighted_leaf_entropy(tree: &Tree, data: &SampleSet) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("weighted leaf entropy of an empty set"));
    }
    let counts = leaf_counts(tree, data)?;
    let n = data.len() as f64;
    Ok(counts
        .per_leaf()
        .iter()
        .zip(counts.totals())
        .map(|(row, &total)| {
            let row: Vec<usize> = row.iter().map(|&c| c as usize).collect();
            total as f64 / n * entropy(&row)
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn perfect_split_gains_log_two() {
        let g = information_gain(&[5, 5], &[5, 0], &[0, 5]).unwrap();
        assert_abs_diff_eq!(g, std::f64::consts::LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(g, 0.693147, epsilon = 1e-6);
    }

    #[test]
    fn no_op_split_gains_nothing() {
        assert_eq!(information_gain(&[3, 4], &[3, 4], &[0, 0]).unwrap(), 0.0);
        let g = information_gain(&[4, 2], &[2, 1], &[2, 1]).unwrap();
        assert_abs_diff_eq!(g, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn gain_errors() {
        assert!(information_gain(&[0, 0], &[0, 0], &[0, 0]).is_err());
        assert!(information_gain(&[2, 2], &[1, 1], &[1, 0]).is_err());
        assert!(information_gain(&[2, 2], &[1, 1, 0], &[1, 1]).is_err());
    }

    #[test]
    fn leaf_entropy_cases() {
        let pure = Tree::stump(vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]).unwrap();
        let data = SampleSet::new(vec![-1.0, -2.0, 1.0, 3.0], vec![0, 0, 1, 1], 1, 2).unwrap();
        assert_eq!(weighted_leaf_entropy(&pure, &data).unwrap(), 0.0);
        let leaf = Tree::single_leaf(1, vec![0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(
            weighted_leaf_entropy(&leaf, &data).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
    }
}
