//! Binary tree topology with oblique split parameters and categorical leaves.
//!
//! Nodes live in a flat arena and refer to their children by index. A tree
//! grows by turning a leaf slot into a split and appending two fresh leaves,
//! so node ids are stable across growth. Split indices follow creation order
//! (`split_order`), leaf indices follow the left-to-right order of the leaves.

use std::sync::{Arc, OnceLock};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type NodeId = usize;

/// Tolerance on the sum of a leaf distribution.
pub const PI_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    /// Oblique split with parameters of length `p + 1`; the last entry is the bias.
    Split {
        beta: Vec<f64>,
        left: NodeId,
        right: NodeId,
    },
    /// Categorical class distribution of length `K`.
    Leaf { pi: Vec<f64> },
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf { .. })
    }
}

/// Role of a node id within the derived layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Split(usize),
    Leaf(usize),
}

/// For every leaf, the splits on its root path that hold it in their right
/// subtree and those that hold it in their left subtree, in root-first order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathSets {
    right: Vec<Vec<usize>>,
    left: Vec<Vec<usize>>,
}

impl PathSets {
    pub fn num_leaves(&self) -> usize {
        self.right.len()
    }

    pub fn right_ancestors(&self, leaf: usize) -> &[usize] {
        &self.right[leaf]
    }

    pub fn left_ancestors(&self, leaf: usize) -> &[usize] {
        &self.left[leaf]
    }
}

/// Derived, read-only bookkeeping for a tree. Rebuilt after structural mutation.
#[derive(Clone, Debug)]
pub struct Layout {
    pub splits: Vec<NodeId>,
    pub leaves: Vec<NodeId>,
    pub slots: Vec<Slot>,
    /// Root first; every parent precedes its children.
    pub preorder: Vec<NodeId>,
    pub depth: Vec<usize>,
    pub parent: Vec<Option<NodeId>>,
    pub paths: PathSets,
}

#[derive(Clone, Debug)]
pub struct Tree {
    nodes: Vec<Node>,
    root: NodeId,
    num_classes: usize,
    feature_dim: usize,
    split_order: Vec<NodeId>,
    layout: OnceLock<Arc<Layout>>,
}

impl PartialEq for Tree {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.root == other.root
            && self.num_classes == other.num_classes
            && self.feature_dim == other.feature_dim
            && self.split_order == other.split_order
    }
}

/// Split feature of an oblique split: the augmented input `(x, 1)` dotted with `beta`.
pub fn oblique_feature(beta: &[f64], x: &[f64]) -> Result<f64> {
    if beta.len() != x.len() + 1 {
        return Err(Error::invalid(format!(
            "split parameters have length {} but input has dimension {}",
            beta.len(),
            x.len()
        )));
    }
    Ok(augmented_dot(beta, x))
}

#[inline]
pub(crate) fn augmented_dot(beta: &[f64], x: &[f64]) -> f64 {
    let p = x.len();
    let mut acc = beta[p];
    for (b, v) in beta[..p].iter().zip(x) {
        acc += b * v;
    }
    acc
}

/// Parameters of an axis-aligned split `x[axis] > threshold` (0-based axis).
pub fn axis_aligned_beta(axis: usize, threshold: f64, p: usize) -> Result<Vec<f64>> {
    if axis >= p {
        return Err(Error::invalid(format!("axis {axis} out of range for dimension {p}")));
    }
    let mut beta = vec![0.0; p + 1];
    beta[axis] = 1.0;
    beta[p] = -threshold;
    Ok(beta)
}

/// Direction drawn uniformly from the unit sphere in `dim` dimensions.
pub fn unit_sphere_sample<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|a| a / norm).collect();
        }
    }
}

/// Uniformly random entries, normalized to a distribution.
pub fn random_distribution<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let raw: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        if total > 1e-12 {
            return raw.into_iter().map(|a| a / total).collect();
        }
    }
}

fn check_distribution(pi: &[f64], k: usize) -> Result<()> {
    if pi.len() != k {
        return Err(Error::Structure(format!(
            "leaf distribution has length {} but K = {k}",
            pi.len()
        )));
    }
    if pi.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::Structure("leaf distribution entries must lie in [0, 1]".into()));
    }
    let sum: f64 = pi.iter().sum();
    if (sum - 1.0).abs() > PI_SUM_TOLERANCE {
        return Err(Error::Structure(format!("leaf distribution sums to {sum}")));
    }
    Ok(())
}

impl Tree {
    /// A tree made of a single leaf.
    pub fn single_leaf(feature_dim: usize, pi: Vec<f64>) -> Result<Self> {
        let num_classes = pi.len();
        Self::from_parts(vec![Node::Leaf { pi }], 0, num_classes, feature_dim, vec![])
    }

    /// One split with two leaves.
    pub fn stump(beta: Vec<f64>, left_pi: Vec<f64>, right_pi: Vec<f64>) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::invalid("split parameters must not be empty"));
        }
        let feature_dim = beta.len() - 1;
        let num_classes = left_pi.len();
        let nodes = vec![
            Node::Split {
                beta,
                left: 1,
                right: 2,
            },
            Node::Leaf { pi: left_pi },
            Node::Leaf { pi: right_pi },
        ];
        Self::from_parts(nodes, 0, num_classes, feature_dim, vec![0])
    }

    /// Randomly initialized stump: split direction from the unit sphere in
    /// `p + 1` dimensions, leaf distributions uniformly random then normalized.
    pub fn new_stump<R: Rng + ?Sized>(p: usize, k: usize, rng: &mut R) -> Result<Self> {
        if p == 0 {
            return Err(Error::invalid("feature dimension must be at least 1"));
        }
        if k < 2 {
            return Err(Error::invalid("a stump needs at least two classes"));
        }
        let beta = unit_sphere_sample(p + 1, rng);
        let left = random_distribution(k, rng);
        let right = random_distribution(k, rng);
        Self::stump(beta, left, right)
    }

    /// Assemble and validate a tree from raw parts.
    pub fn from_parts(
        nodes: Vec<Node>,
        root: NodeId,
        num_classes: usize,
        feature_dim: usize,
        split_order: Vec<NodeId>,
    ) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::invalid("number of classes must be positive"));
        }
        if feature_dim == 0 {
            return Err(Error::invalid("feature dimension must be positive"));
        }
        let tree = Tree {
            nodes,
            root,
            num_classes,
            feature_dim,
            split_order,
            layout: OnceLock::new(),
        };
        let layout = tree.build_layout()?;
        let _ = tree.layout.set(Arc::new(layout));
        Ok(tree)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Split node ids in creation order; position in this list is the split index.
    pub fn split_order(&self) -> &[NodeId] {
        &self.split_order
    }

    pub fn num_splits(&self) -> usize {
        self.split_order.len()
    }

    pub fn num_leaves(&self) -> usize {
        self.layout().leaves.len()
    }

    /// Maximum leaf depth; zero for a single leaf.
    pub fn depth(&self) -> usize {
        let layout = self.layout();
        layout.leaves.iter().map(|&id| layout.depth[id]).max().unwrap_or(0)
    }

    pub fn layout(&self) -> &Layout {
        self.layout.get_or_init(|| {
            Arc::new(
                self.build_layout()
                    .expect("tree invariants are maintained by every mutation"),
            )
        })
    }

    pub fn path_sets(&self) -> &PathSets {
        &self.layout().paths
    }

    /// Recompute path sets from scratch, validating the structure on the way.
    pub fn compute_path_sets(&self) -> Result<PathSets> {
        Ok(self.build_layout()?.paths)
    }

    pub fn split_beta(&self, split: usize) -> &[f64] {
        match &self.nodes[self.split_order[split]] {
            Node::Split { beta, .. } => beta,
            Node::Leaf { .. } => unreachable!("split_order only holds split nodes"),
        }
    }

    pub fn split_beta_mut(&mut self, split: usize) -> &mut [f64] {
        match &mut self.nodes[self.split_order[split]] {
            Node::Split { beta, .. } => beta,
            Node::Leaf { .. } => unreachable!("split_order only holds split nodes"),
        }
    }

    pub fn split_betas(&self) -> Vec<Vec<f64>> {
        (0..self.num_splits()).map(|i| self.split_beta(i).to_vec()).collect()
    }

    pub fn set_split_betas(&mut self, betas: &[Vec<f64>]) -> Result<()> {
        if betas.len() != self.num_splits() {
            return Err(Error::invalid("wrong number of split parameter vectors"));
        }
        for (i, b) in betas.iter().enumerate() {
            if b.len() != self.feature_dim + 1 {
                return Err(Error::invalid("split parameter vector has wrong length"));
            }
            self.split_beta_mut(i).copy_from_slice(b);
        }
        Ok(())
    }

    pub fn leaf_pi(&self, leaf: usize) -> &[f64] {
        match &self.nodes[self.layout().leaves[leaf]] {
            Node::Leaf { pi } => pi,
            Node::Split { .. } => unreachable!("layout leaves only hold leaf nodes"),
        }
    }

    pub fn leaf_pis(&self) -> Vec<Vec<f64>> {
        (0..self.num_leaves()).map(|l| self.leaf_pi(l).to_vec()).collect()
    }

    pub fn set_leaf_pi(&mut self, leaf: usize, pi: Vec<f64>) -> Result<()> {
        check_distribution(&pi, self.num_classes)?;
        let id = *self
            .layout()
            .leaves
            .get(leaf)
            .ok_or_else(|| Error::invalid(format!("leaf index {leaf} out of range")))?;
        self.nodes[id] = Node::Leaf { pi };
        Ok(())
    }

    pub fn set_leaf_pis(&mut self, pis: Vec<Vec<f64>>) -> Result<()> {
        if pis.len() != self.num_leaves() {
            return Err(Error::invalid("wrong number of leaf distributions"));
        }
        for pi in &pis {
            check_distribution(pi, self.num_classes)?;
        }
        let leaves = self.layout().leaves.clone();
        for (id, pi) in leaves.into_iter().zip(pis) {
            self.nodes[id] = Node::Leaf { pi };
        }
        Ok(())
    }

    pub fn leaf_index_of(&self, node: NodeId) -> Option<usize> {
        match self.layout().slots.get(node)? {
            Slot::Leaf(l) => Some(*l),
            Slot::Split(_) => None,
        }
    }

    pub fn leaf_node(&self, leaf: usize) -> NodeId {
        self.layout().leaves[leaf]
    }

    /// Depth of a node; the root has depth zero.
    pub fn node_depth(&self, node: NodeId) -> usize {
        self.layout().depth[node]
    }

    /// Replace the leaf at node id `leaf` by the split of `stump`, attaching
    /// the stump's two leaves as new nodes. Returns the new (left, right) leaf ids.
    pub fn replace_leaf_with_stump(&mut self, leaf: NodeId, stump: &Tree) -> Result<(NodeId, NodeId)> {
        match self.nodes.get(leaf) {
            Some(Node::Leaf { .. }) => {}
            Some(Node::Split { .. }) => return Err(Error::invalid(format!("node {leaf} is not a leaf"))),
            None => return Err(Error::invalid(format!("node {leaf} does not exist"))),
        }
        if stump.feature_dim != self.feature_dim || stump.num_classes != self.num_classes {
            return Err(Error::invalid("stump dimensions do not match the tree"));
        }
        let (beta, left_pi, right_pi) = match &stump.nodes[stump.root] {
            Node::Split { beta, left, right } => match (&stump.nodes[*left], &stump.nodes[*right]) {
                (Node::Leaf { pi: l }, Node::Leaf { pi: r }) => (beta.clone(), l.clone(), r.clone()),
                _ => return Err(Error::invalid("stump must have exactly one split")),
            },
            Node::Leaf { .. } => return Err(Error::invalid("stump has no split")),
        };
        let left = self.nodes.len();
        let right = left + 1;
        self.nodes.push(Node::Leaf { pi: left_pi });
        self.nodes.push(Node::Leaf { pi: right_pi });
        self.nodes[leaf] = Node::Split { beta, left, right };
        self.split_order.push(leaf);
        self.layout = OnceLock::new();
        Ok((left, right))
    }

    /// Check structure and parameter shapes.
    pub fn validate(&self) -> Result<()> {
        self.build_layout().map(|_| ())
    }

    fn build_layout(&self) -> Result<Layout> {
        let n = self.nodes.len();
        if self.root >= n {
            return Err(Error::Structure(format!("root {} out of range", self.root)));
        }
        let mut parent: Vec<Option<NodeId>> = vec![None; n];
        let mut depth = vec![0usize; n];
        let mut seen = vec![false; n];
        let mut preorder = Vec::with_capacity(n);
        let mut leaves = Vec::new();
        // Stack of (node, path so far as (split node id, went_right)).
        let mut stack: Vec<NodeId> = vec![self.root];
        seen[self.root] = true;
        while let Some(id) = stack.pop() {
            preorder.push(id);
            match &self.nodes[id] {
                Node::Split { beta, left, right } => {
                    if beta.len() != self.feature_dim + 1 {
                        return Err(Error::Structure(format!(
                            "split {id} has {} parameters, expected {}",
                            beta.len(),
                            self.feature_dim + 1
                        )));
                    }
                    for &child in [right, left] {
                        if child >= n {
                            return Err(Error::Structure(format!("node {id} points to missing child {child}")));
                        }
                        if seen[child] {
                            return Err(Error::Structure(format!("node {child} has more than one parent")));
                        }
                        seen[child] = true;
                        parent[child] = Some(id);
                        depth[child] = depth[id] + 1;
                    }
                    // Left pushed last so it is visited first: preorder is also
                    // left-to-right for the leaves.
                    stack.push(*right);
                    stack.push(*left);
                }
                Node::Leaf { pi } => {
                    check_distribution(pi, self.num_classes)
                        .map_err(|e| Error::Structure(format!("leaf {id}: {e}")))?;
                    leaves.push(id);
                }
            }
        }
        if preorder.len() != n {
            return Err(Error::Structure(format!(
                "{} of {n} nodes are unreachable from the root",
                n - preorder.len()
            )));
        }

        let mut slots = vec![Slot::Leaf(0); n];
        for (l, &id) in leaves.iter().enumerate() {
            slots[id] = Slot::Leaf(l);
        }
        let num_splits = n - leaves.len();
        if self.split_order.len() != num_splits {
            return Err(Error::Structure(format!(
                "split order lists {} splits, tree has {num_splits}",
                self.split_order.len()
            )));
        }
        let mut listed = vec![false; n];
        for (i, &id) in self.split_order.iter().enumerate() {
            if id >= n || self.nodes[id].is_leaf() || listed[id] {
                return Err(Error::Structure(format!(
                    "split order entry {id} is not a distinct split node"
                )));
            }
            listed[id] = true;
            slots[id] = Slot::Split(i);
        }

        let mut right_sets = Vec::with_capacity(leaves.len());
        let mut left_sets = Vec::with_capacity(leaves.len());
        for &leaf in &leaves {
            let mut r = Vec::new();
            let mut l = Vec::new();
            let mut child = leaf;
            while let Some(p) = parent[child] {
                let Slot::Split(si) = slots[p] else {
                    unreachable!("parents are splits")
                };
                match &self.nodes[p] {
                    Node::Split { right, .. } if *right == child => r.push(si),
                    _ => l.push(si),
                }
                child = p;
            }
            r.reverse();
            l.reverse();
            right_sets.push(r);
            left_sets.push(l);
        }

        Ok(Layout {
            splits: self.split_order.clone(),
            leaves,
            slots,
            preorder,
            depth,
            parent,
            paths: PathSets {
                right: right_sets,
                left: left_sets,
            },
        })
    }
}
