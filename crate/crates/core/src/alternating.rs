//! Alternating optimization: leaf distributions from hard-routed class counts,
//! split parameters by Adam on the soft log-likelihood.

use rayon::prelude::*;

use crate::dataset::SampleSet;
use crate::em::{e_step, log_likelihood, run_training, split_gradient};
use crate::error::{Error, Result};
use crate::inference::{route_unchecked, Steepness};
use crate::train::{Regularizer, Strategy, TrainConfig, TrainReport};
use crate::tree::Tree;

/// Class counts per leaf under deterministic routing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeafCounts {
    counts: Vec<Vec<u64>>,
    totals: Vec<u64>,
}

impl LeafCounts {
    pub fn count(&self, leaf: usize, class: usize) -> u64 {
        self.counts[leaf][class]
    }

    pub fn total(&self, leaf: usize) -> u64 {
        self.totals[leaf]
    }

    pub fn per_leaf(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn totals(&self) -> &[u64] {
        &self.totals
    }

    /// `N_{ℓ,k} / N_ℓ`, uniform for empty leaves.
    pub fn distributions(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .zip(&self.totals)
            .map(|(row, &total)| {
                if total == 0 {
                    vec![1.0 / row.len() as f64; row.len()]
                } else {
                    row.iter().map(|&c| c as f64 / total as f64).collect()
                }
            })
            .collect()
    }
}

/// Leaf index reached by each sample.
pub fn route_all(tree: &Tree, data: &SampleSet) -> Result<Vec<usize>> {
    if data.dim() != tree.feature_dim() {
        return Err(Error::invalid(format!(
            "data has dimension {} but the tree expects {}",
            data.dim(),
            tree.feature_dim()
        )));
    }
    Ok((0..data.len())
        .into_par_iter()
        .map(|n| route_unchecked(tree, data.row(n)))
        .collect())
}

pub fn leaf_counts(tree: &Tree, data: &SampleSet) -> Result<LeafCounts> {
    if data.num_classes() > tree.num_classes() {
        return Err(Error::invalid("data has more classes than the tree"));
    }
    let k = tree.num_classes();
    let mut counts = vec![vec![0u64; k]; tree.num_leaves()];
    for (leaf, &y) in route_all(tree, data)?.into_iter().zip(data.labels()) {
        counts[leaf][y] += 1;
    }
    let totals = counts.iter().map(|r| r.iter().sum()).collect();
    Ok(LeafCounts { counts, totals })
}

/// Leaf distributions from deterministic class counts; empty leaves become uniform.
pub fn hard_leaf_update(tree: &Tree, data: &SampleSet) -> Result<Vec<Vec<f64>>> {
    Ok(leaf_counts(tree, data)?.distributions())
}

/// Objective of the split update with fixed leaves:
/// `Σ_n log Σ_ℓ (π_ℓ)_{y_n} μ_ℓ(x_n)` minus the spatial penalty.
pub fn alternating_objective(
    tree: &Tree,
    data: &SampleSet,
    gamma: Steepness,
    reg: Option<&Regularizer>,
) -> Result<f64> {
    let ll = log_likelihood(tree, data, gamma)?.value;
    let pen = match reg {
        Some(r) if r.lambda > 0.0 => {
            r.lambda
                * (0..tree.num_splits())
                    .map(|i| r.roughness(tree.split_beta(i)))
                    .sum::<f64>()
        }
        _ => 0.0,
    };
    Ok(ll - pen)
}

/// Gradient of [`alternating_objective`]. Uses
/// `∂ log Σ_ℓ π μ_ℓ = Σ_ℓ h_ℓ ∂ log μ_ℓ` with `h` from the E-step at the
/// current parameters, so it shares the EM split-gradient kernel.
pub fn alternating_gradient(
    tree: &Tree,
    data: &SampleSet,
    gamma: Steepness,
    reg: Option<&Regularizer>,
) -> Result<Vec<Vec<f64>>> {
    let h = e_step(tree, data, gamma)?;
    split_gradient(tree, &h, data, gamma, reg)
}

/// Optimize `tree` in place with the alternating strategy. Leaf counts are
/// refreshed at the start of every epoch and once more after the last one.
pub fn fit_alternating(tree: &mut Tree, data: &SampleSet, config: &TrainConfig) -> Result<TrainReport> {
    run_training(tree, data, config, Strategy::Alternating)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::accuracy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_leaf_frequencies() {
        let t = Tree::single_leaf(1, vec![0.9, 0.1]).unwrap();
        let data = SampleSet::new(vec![0.0; 4], vec![0, 0, 1, 1], 1, 2).unwrap();
        assert_eq!(hard_leaf_update(&t, &data).unwrap(), vec![vec![0.5, 0.5]]);
    }

    #[test]
    fn empty_leaf_is_uniform() {
        let t = Tree::stump(vec![1.0, 0.0], vec![0.5, 0.5], vec![0.5, 0.5]).unwrap();
        let data = SampleSet::new(vec![-1.0, -2.0], vec![0, 1], 1, 2).unwrap();
        let counts = leaf_counts(&t, &data).unwrap();
        assert_eq!(counts.totals(), &[2, 0]);
        let pis = counts.distributions();
        assert_eq!(pis[1], vec![0.5, 0.5]);
    }

    #[test]
    fn idempotent_for_fixed_tree() {
        let mut t = Tree::stump(vec![1.0, -0.5], vec![0.5, 0.5], vec![0.5, 0.5]).unwrap();
        let data = SampleSet::new(vec![0.0, 1.0, 2.0, 0.2], vec![0, 1, 1, 1], 1, 2).unwrap();
        let first = hard_leaf_update(&t, &data).unwrap();
        t.set_leaf_pis(first.clone()).unwrap();
        assert_eq!(hard_leaf_update(&t, &data).unwrap(), first);
    }

    #[test]
    fn zero_epochs_is_identity() {
        let mut t = Tree::stump(vec![1.0, -0.5], vec![0.5, 0.5], vec![0.5, 0.5]).unwrap();
        let before = t.clone();
        let data = SampleSet::new(vec![0.0, 1.0], vec![0, 1], 1, 2).unwrap();
        fit_alternating(
            &mut t,
            &data,
            &TrainConfig {
                epochs: 0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(t, before);
    }

    #[test]
    fn separable_data_is_learned() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..200 {
            let a = (i as f64 * 0.91).sin() * 2.0;
            let b = (i as f64 * 0.29).cos() * 2.0;
            let y = usize::from(a - b > 0.2);
            let shift = if y == 1 { 0.25 } else { -0.25 };
            rows.push(vec![a + shift, b - shift]);
            labels.push(y);
        }
        let data = SampleSet::from_rows(&rows, labels, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut t = Tree::new_stump(2, 2, &mut rng).unwrap();
        let cfg = TrainConfig {
            epochs: 50,
            batch_size: 20,
            adam: crate::adam::AdamConfig {
                alpha: 0.05,
                ..Default::default()
            },
            seed: 5,
            ..Default::default()
        };
        fit_alternating(&mut t, &data, &cfg).unwrap();
        assert_eq!(accuracy(&t, &data).unwrap(), 1.0);
    }
}
