//! Soft path probabilities, soft class prediction and hard routing.

use std::ops::Deref;

use crate::dataset::SampleSet;
use crate::error::{Error, Result};
use crate::tree::{augmented_dot, Node, Slot, Tree};

/// Split steepness: a finite positive scale for the sigmoid, or the step function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Steepness {
    Soft(f64),
    Hard,
}

impl Steepness {
    pub fn soft(gamma: f64) -> Result<Self> {
        if gamma.is_finite() && gamma > 0.0 {
            Ok(Steepness::Soft(gamma))
        } else if gamma == f64::INFINITY {
            Ok(Steepness::Hard)
        } else {
            Err(Error::invalid(format!("steepness must be positive, got {gamma}")))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Steepness::Soft(g) => g,
            Steepness::Hard => f64::INFINITY,
        }
    }
}

/// Path probabilities `μ_ℓ(x)`, one entry per leaf in left-to-right order.
#[derive(Clone, Debug, PartialEq)]
pub struct LeafProbabilities(Vec<f64>);

impl LeafProbabilities {
    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for LeafProbabilities {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// `log σ(z)`, stable for any finite `z`.
#[inline]
pub fn log_sigmoid(z: f64) -> f64 {
    z.min(0.0) - (-z.abs()).exp().ln_1p()
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Probability of being routed right given split feature `v`.
pub fn sigmoid_steep(v: f64, gamma: Steepness) -> f64 {
    match gamma {
        Steepness::Soft(g) => sigmoid(g * v),
        Steepness::Hard => {
            if v > 0.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

fn check_dim(tree: &Tree, x: &[f64]) -> Result<()> {
    if x.len() != tree.feature_dim() {
        return Err(Error::invalid(format!(
            "input has dimension {} but the tree expects {}",
            x.len(),
            tree.feature_dim()
        )));
    }
    Ok(())
}

/// Split features for every split, indexed by split index.
pub(crate) fn split_values_into(tree: &Tree, x: &[f64], out: &mut [f64]) {
    for (i, f) in out.iter_mut().enumerate() {
        *f = augmented_dot(tree.split_beta(i), x);
    }
}

/// `log μ_ℓ(x)` for every leaf, given precomputed split features.
/// `reach` is node-indexed scratch space.
pub(crate) fn log_mu_from_values(tree: &Tree, values: &[f64], gamma: Steepness, reach: &mut [f64], out: &mut [f64]) {
    let layout = tree.layout();
    reach[tree.root()] = 0.0;
    for &id in &layout.preorder {
        match (&tree.nodes()[id], layout.slots[id]) {
            (Node::Split { left, right, .. }, Slot::Split(i)) => {
                let base = reach[id];
                let f = values[i];
                match gamma {
                    Steepness::Soft(g) => {
                        reach[*right] = base + log_sigmoid(g * f);
                        reach[*left] = base + log_sigmoid(-g * f);
                    }
                    Steepness::Hard => {
                        let (r, l) = if f > 0.0 {
                            (0.0, f64::NEG_INFINITY)
                        } else {
                            (f64::NEG_INFINITY, 0.0)
                        };
                        reach[*right] = base + r;
                        reach[*left] = base + l;
                    }
                }
            }
            (Node::Leaf { .. }, Slot::Leaf(l)) => out[l] = reach[id],
            _ => unreachable!("layout slots agree with node kinds"),
        }
    }
}

/// Reusable buffers for per-sample evaluation.
pub(crate) struct Scratch {
    pub values: Vec<f64>,
    pub reach: Vec<f64>,
    pub log_mu: Vec<f64>,
}

impl Scratch {
    pub fn new(tree: &Tree) -> Self {
        Scratch {
            values: vec![0.0; tree.num_splits()],
            reach: vec![0.0; tree.nodes().len()],
            log_mu: vec![0.0; tree.num_leaves()],
        }
    }

    pub fn eval(&mut self, tree: &Tree, x: &[f64], gamma: Steepness) {
        split_values_into(tree, x, &mut self.values);
        log_mu_from_values(tree, &self.values, gamma, &mut self.reach, &mut self.log_mu);
    }
}

/// `μ_ℓ(x)` for all leaves, accumulated in log space.
pub fn path_probabilities(tree: &Tree, x: &[f64], gamma: Steepness) -> Result<LeafProbabilities> {
    check_dim(tree, x)?;
    let mut s = Scratch::new(tree);
    s.eval(tree, x, gamma);
    Ok(LeafProbabilities(s.log_mu.iter().map(|v| v.exp()).collect()))
}

/// `p(y | x) = Σ_ℓ (π_ℓ)_y μ_ℓ(x)` for every class.
pub fn predict_proba(tree: &Tree, x: &[f64], gamma: Steepness) -> Result<Vec<f64>> {
    let mu = path_probabilities(tree, x, gamma)?;
    let mut out = vec![0.0; tree.num_classes()];
    for (l, &m) in mu.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        for (o, &p) in out.iter_mut().zip(tree.leaf_pi(l)) {
            *o += p * m;
        }
    }
    Ok(out)
}

#[inline]
pub(crate) fn route_unchecked(tree: &Tree, x: &[f64]) -> usize {
    let mut id = tree.root();
    loop {
        match &tree.nodes()[id] {
            Node::Split { beta, left, right } => {
                id = if augmented_dot(beta, x) > 0.0 { *right } else { *left };
            }
            Node::Leaf { .. } => return tree.leaf_index_of(id).expect("leaf nodes have a leaf index"),
        }
    }
}

/// Leaf index reached by descending right iff the split feature is positive.
pub fn route_deterministic(tree: &Tree, x: &[f64]) -> Result<usize> {
    check_dim(tree, x)?;
    Ok(route_unchecked(tree, x))
}

/// Index of the largest entry; ties go to the smallest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Class predicted by the deterministic tree (0-based).
pub fn predict_class(tree: &Tree, x: &[f64]) -> Result<usize> {
    let leaf = route_deterministic(tree, x)?;
    Ok(argmax(tree.leaf_pi(leaf)))
}

/// Fraction of samples whose deterministic prediction equals the label.
pub fn accuracy(tree: &Tree, data: &SampleSet) -> Result<f64> {
    if data.dim() != tree.feature_dim() {
        return Err(Error::invalid(format!(
            "data has dimension {} but the tree expects {}",
            data.dim(),
            tree.feature_dim()
        )));
    }
    if data.is_empty() {
        return Err(Error::invalid("cannot compute accuracy of an empty set"));
    }
    let correct = data
        .rows()
        .zip(data.labels())
        .filter(|(x, &y)| argmax(tree.leaf_pi(route_unchecked(tree, x))) == y)
        .count();
    Ok(correct as f64 / data.len() as f64)
}
