//! Axis-aligned baseline: exhaustive threshold search by information gain.

use crate::dataset::SampleSet;
use crate::entropy::{entropy, information_gain};
use crate::error::{Error, Result};
use crate::tree::{axis_aligned_beta, NodeId, Tree};

/// Best split `x[axis] > threshold` of a subset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisSplit {
    pub axis: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Search every axis and every midpoint between consecutive distinct values.
/// Ties keep the first candidate in (axis, threshold) order.
/// `None` when no threshold separates the subset.
pub fn best_axis_split(data: &SampleSet, indices: &[usize]) -> Option<AxisSplit> {
    let k = data.num_classes();
    let mut parent = vec![0usize; k];
    for &i in indices {
        parent[data.label(i)] += 1;
    }
    let n = indices.len() as f64;
    let parent_entropy = entropy(&parent);
    let mut best: Option<AxisSplit> = None;
    let mut order: Vec<usize> = indices.to_vec();
    for axis in 0..data.dim() {
        order.sort_by(|&a, &b| data.row(a)[axis].total_cmp(&data.row(b)[axis]));
        let mut left = vec![0usize; k];
        let mut right = parent.clone();
        for w in 0..order.len().saturating_sub(1) {
            let y = data.label(order[w]);
            left[y] += 1;
            right[y] -= 1;
            let lo = data.row(order[w])[axis];
            let hi = data.row(order[w + 1])[axis];
            if lo == hi {
                continue;
            }
            let nl = (w + 1) as f64;
            let gain = parent_entropy - nl / n * entropy(&left) - (n - nl) / n * entropy(&right);
            if best.is_none_or(|b| gain > b.gain) {
                best = Some(AxisSplit {
                    axis,
                    threshold: lo + (hi - lo) / 2.0,
                    gain,
                });
            }
        }
    }
    best
}

fn counts_of(data: &SampleSet, indices: &[usize]) -> Vec<usize> {
    let mut c = vec![0usize; data.num_classes()];
    for &i in indices {
        c[data.label(i)] += 1;
    }
    c
}

fn frequencies(counts: &[usize]) -> Vec<f64> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return vec![1.0 / counts.len() as f64; counts.len()];
    }
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

/// Classic greedy axis-aligned tree grown level by level to `max_depth`,
/// with leaf distributions set to class frequencies.
pub fn grow_axis_aligned(data: &SampleSet, max_depth: usize, min_samples: usize) -> Result<Tree> {
    if data.is_empty() {
        return Err(Error::invalid("cannot grow a tree on an empty set"));
    }
    let all: Vec<usize> = (0..data.len()).collect();
    let mut tree = Tree::single_leaf(data.dim(), frequencies(&counts_of(data, &all)))?;
    let mut level: Vec<(NodeId, Vec<usize>)> = vec![(tree.root(), all)];
    for _ in 0..max_depth {
        let mut next = Vec::new();
        for (leaf, idx) in level {
            let counts = counts_of(data, &idx);
            if idx.len() < min_samples.max(2) || counts.iter().filter(|&&c| c > 0).count() < 2 {
                continue;
            }
            let Some(split) = best_axis_split(data, &idx) else {
                continue;
            };
            if split.gain < 1e-12 {
                continue;
            }
            let (l_idx, r_idx): (Vec<usize>, Vec<usize>) =
                idx.iter().partition(|&&i| !(data.row(i)[split.axis] > split.threshold));
            let l_counts = counts_of(data, &l_idx);
            let r_counts = counts_of(data, &r_idx);
            debug_assert!(information_gain(&counts, &l_counts, &r_counts).is_ok());
            let stump = Tree::stump(
                axis_aligned_beta(split.axis, split.threshold, data.dim())?,
                frequencies(&l_counts),
                frequencies(&r_counts),
            )?;
            let (l, r) = tree.replace_leaf_with_stump(leaf, &stump)?;
            next.push((l, l_idx));
            next.push((r, r_idx));
        }
        level = next;
    }
    Ok(tree)
}
