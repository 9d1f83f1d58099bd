//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use obliq::{Node, NodeId, SampleSet, Tree};

/// Position of a split node in creation order, which is the split index.
pub fn split_index(tree: &Tree, node: NodeId) -> usize {
    tree.split_order().iter().position(|&s| s == node).expect("split node")
}

/// Root-to-leaf paths from a recursive walk, leaves from left to right.
/// Each step is `(split index, went right)`.
pub fn walk_paths(tree: &Tree) -> Vec<(NodeId, Vec<(usize, bool)>)> {
    fn rec(tree: &Tree, id: NodeId, path: &mut Vec<(usize, bool)>, out: &mut Vec<(NodeId, Vec<(usize, bool)>)>) {
        match &tree.nodes()[id] {
            Node::Leaf { .. } => out.push((id, path.clone())),
            Node::Split { left, right, .. } => {
                let i = split_index(tree, id);
                path.push((i, false));
                rec(tree, *left, path, out);
                path.pop();
                path.push((i, true));
                rec(tree, *right, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(tree, tree.root(), &mut Vec::new(), &mut out);
    out
}

pub fn dot1(beta: &[f64], x: &[f64]) -> f64 {
    let mut s = beta[x.len()];
    for j in 0..x.len() {
        s += beta[j] * x[j];
    }
    s
}

fn gate(v: f64, gamma: Option<f64>) -> f64 {
    match gamma {
        Some(g) => 1.0 / (1.0 + (-g * v).exp()),
        None => f64::from(u8::from(v > 0.0)),
    }
}

/// Path probabilities as plain products; `None` is the hard step function.
pub fn brute_mu(tree: &Tree, x: &[f64], gamma: Option<f64>) -> Vec<f64> {
    walk_paths(tree)
        .iter()
        .map(|(_, path)| {
            path.iter()
                .map(|&(i, right)| {
                    let s = gate(dot1(tree.split_beta(i), x), gamma);
                    if right {
                        s
                    } else {
                        1.0 - s
                    }
                })
                .product()
        })
        .collect()
}

pub fn brute_proba(tree: &Tree, x: &[f64], gamma: Option<f64>) -> Vec<f64> {
    let mu = brute_mu(tree, x, gamma);
    (0..tree.num_classes())
        .map(|k| (0..mu.len()).map(|l| tree.leaf_pi(l)[k] * mu[l]).sum())
        .collect()
}

pub fn brute_log_likelihood(tree: &Tree, data: &SampleSet, gamma: Option<f64>) -> f64 {
    (0..data.len())
        .map(|n| brute_proba(tree, data.row(n), gamma)[data.label(n)].ln())
        .sum()
}

/// Leaf reached by walking the nodes directly.
pub fn brute_route(tree: &Tree, x: &[f64]) -> usize {
    let mut id = tree.root();
    loop {
        match &tree.nodes()[id] {
            Node::Leaf { .. } => {
                return walk_paths(tree).iter().position(|(leaf, _)| *leaf == id).unwrap();
            }
            Node::Split { beta, left, right } => id = if dot1(beta, x) > 0.0 { *right } else { *left },
        }
    }
}

pub fn brute_entropy(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    let mut h = 0.0;
    for &c in counts {
        if c > 0 {
            let p = c as f64 / n as f64;
            h -= p * p.ln();
        }
    }
    h
}

/// Hard-count leaf distributions by a scalar routing loop.
pub fn brute_hard_counts(tree: &Tree, data: &SampleSet) -> Vec<Vec<usize>> {
    let mut counts = vec![vec![0; tree.num_classes()]; tree.num_leaves()];
    for n in 0..data.len() {
        counts[brute_route(tree, data.row(n))][data.label(n)] += 1;
    }
    counts
}

pub fn counts_to_pis(counts: &[Vec<usize>]) -> Vec<Vec<f64>> {
    counts
        .iter()
        .map(|row| {
            let t: usize = row.iter().sum();
            if t == 0 {
                vec![1.0 / row.len() as f64; row.len()]
            } else {
                row.iter().map(|&c| c as f64 / t as f64).collect()
            }
        })
        .collect()
}

/// Best axis-aligned split by trying every axis and every observed value as
/// a `x[a] > t` threshold. Returns the largest gain.
pub fn brute_best_axis_gain(data: &SampleSet) -> Option<f64> {
    let k = data.num_classes();
    let mut parent = vec![0; k];
    for &y in data.labels() {
        parent[y] += 1;
    }
    let n = data.len() as f64;
    let mut best: Option<f64> = None;
    for a in 0..data.dim() {
        for t in data.rows().map(|r| r[a]) {
            let mut l = vec![0; k];
            let mut r = vec![0; k];
            for i in 0..data.len() {
                if data.row(i)[a] > t {
                    r[data.label(i)] += 1;
                } else {
                    l[data.label(i)] += 1;
                }
            }
            let (nl, nr): (usize, usize) = (l.iter().sum(), r.iter().sum());
            if nl == 0 || nr == 0 {
                continue;
            }
            let g = brute_entropy(&parent) - nl as f64 / n * brute_entropy(&l) - nr as f64 / n * brute_entropy(&r);
            if best.is_none_or(|b| g > b) {
                best = Some(g);
            }
        }
    }
    best
}
