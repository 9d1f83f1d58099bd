//! Random trees and data for tests and benchmarks.

use rand::Rng;

use crate::dataset::SampleSet;
use crate::tree::{random_distribution, unit_sphere_sample, NodeId, Tree};

/// Tree whose leaves are expanded with probability 0.7 until `max_depth`;
/// the root is always a split when `max_depth > 0`.
pub fn random_tree<R: Rng + ?Sized>(rng: &mut R, p: usize, k: usize, max_depth: usize) -> Tree {
    let mut tree = Tree::single_leaf(p, random_distribution(k, rng)).expect("valid leaf");
    let mut frontier: Vec<(NodeId, usize)> = vec![(tree.root(), 0)];
    while let Some((leaf, depth)) = frontier.pop() {
        if depth >= max_depth || (depth > 0 && rng.gen::<f64>() > 0.7) {
            continue;
        }
        let stump = random_stump(rng, p, k);
        let (l, r) = tree.replace_leaf_with_stump(leaf, &stump).expect("leaf replacement");
        frontier.push((l, depth + 1));
        frontier.push((r, depth + 1));
    }
    tree
}

/// Complete tree of the given depth.
pub fn balanced_tree<R: Rng + ?Sized>(rng: &mut R, p: usize, k: usize, depth: usize) -> Tree {
    let mut tree = Tree::single_leaf(p, random_distribution(k, rng)).expect("valid leaf");
    let mut level = vec![tree.root()];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(level.len() * 2);
        for leaf in level {
            let stump = random_stump(rng, p, k);
            let (l, r) = tree.replace_leaf_with_stump(leaf, &stump).expect("leaf replacement");
            next.push(l);
            next.push(r);
        }
        level = next;
    }
    tree
}

/// Stump with a unit-sphere direction scaled by a random factor in `[0.5, 3)`.
pub fn random_stump<R: Rng + ?Sized>(rng: &mut R, p: usize, k: usize) -> Tree {
    let scale = rng.gen_range(0.5..3.0);
    let beta = unit_sphere_sample(p + 1, rng).into_iter().map(|v| v * scale).collect();
    Tree::stump(beta, random_distribution(k, rng), random_distribution(k, rng)).expect("valid stump")
}

/// Standard normal features with uniformly random labels.
pub fn random_samples<R: Rng + ?Sized>(rng: &mut R, n: usize, p: usize, k: usize) -> SampleSet {
    use rand_distr::{Distribution, StandardNormal};
    let features = (0..n * p).map(|_| StandardNormal.sample(rng)).collect();
    let labels = (0..n).map(|_| rng.gen_range(0..k)).collect();
    SampleSet::new(features, labels, p, k).expect("valid samples")
}
