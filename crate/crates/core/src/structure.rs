//! Greedy structure learning.
//!
//! Every split is first trained as a stump on the samples that the already
//! installed splits route to its leaf. Leaves are expanded level by level
//! (`DepthFirst`) or in order of the realized information gain of their
//! trained candidate stump (`BestFirst`).

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::alternating::{fit_alternating, leaf_counts, route_all};
use crate::dataset::SampleSet;
use crate::em::fit_em;
use crate::entropy::information_gain;
use crate::error::{Error, Result};
use crate::train::{Strategy, TrainConfig, TrainReport};
use crate::tree::{random_distribution, unit_sphere_sample, NodeId, Tree};

/// Realized gain below which a trained stump is considered useless.
pub const MIN_GAIN: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpansionOrder {
    /// Level order: all leaves of one depth before the next.
    DepthFirst,
    /// Highest realized information gain first.
    BestFirst,
}

impl FromStr for ExpansionOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "depth-first" => Ok(ExpansionOrder::DepthFirst),
            "best-first" => Ok(ExpansionOrder::BestFirst),
            other => Err(Error::invalid(format!("unknown expansion order {other:?}"))),
        }
    }
}

impl fmt::Display for ExpansionOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExpansionOrder::DepthFirst => "depth-first",
            ExpansionOrder::BestFirst => "best-first",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthConfig {
    pub max_depth: Option<usize>,
    pub max_leaves: Option<usize>,
    /// Freeze a leaf once its majority class reaches this fraction.
    pub min_purity: Option<f64>,
    pub min_samples: usize,
    pub expansion: ExpansionOrder,
    pub strategy: Strategy,
    /// Training schedule of each stump. Its seed is mixed with the node id.
    pub stump: TrainConfig,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        GrowthConfig {
            max_depth: Some(4),
            max_leaves: None,
            min_purity: None,
            min_samples: 2,
            expansion: ExpansionOrder::DepthFirst,
            strategy: Strategy::Em,
            stump: TrainConfig::default(),
        }
    }
}

impl GrowthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth.is_none() && self.max_leaves.is_none() && self.min_purity.is_none() {
            return Err(Error::invalid(
                "set at least one of max depth, max leaves or min purity",
            ));
        }
        if self.max_leaves == Some(0) {
            return Err(Error::invalid("max leaves must be at least 1"));
        }
        if let Some(p) = self.min_purity {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid("min purity must lie in [0, 1]"));
            }
        }
        if self.min_samples == 0 {
            return Err(Error::invalid("min samples must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FreezeReason {
    MaxDepth,
    MaxLeaves,
    MinSamples,
    Purity,
    Degenerate,
}

impl fmt::Display for FreezeReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FreezeReason::MaxDepth => "max_depth",
            FreezeReason::MaxLeaves => "max_leaves",
            FreezeReason::MinSamples => "min_samples",
            FreezeReason::Purity => "purity",
            FreezeReason::Degenerate => "degenerate",
        })
    }
}

/// One decision of the growth loop.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthEvent {
    pub step: usize,
    pub leaf: NodeId,
    pub depth: usize,
    pub subset_size: usize,
    /// Realized gain of the trained stump, when one was trained.
    pub gain: Option<f64>,
    /// `None` when the leaf was expanded.
    pub frozen: Option<FreezeReason>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GrowthTrace {
    pub events: Vec<GrowthEvent>,
    /// Training reports of the installed stumps, keyed by the expanded node.
    pub stump_reports: Vec<(NodeId, TrainReport)>,
}

impl GrowthTrace {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "leaf", "depth", "subset_size", "gain", "frozen_reason"])?;
        for e in &self.events {
            w.write_record([
                e.step.to_string(),
                e.leaf.to_string(),
                e.depth.to_string(),
                e.subset_size.to_string(),
                e.gain.map(|g| g.to_string()).unwrap_or_default(),
                e.frozen.map(|f| f.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A trained stump together with its realized split quality on its data.
#[derive(Clone, Debug)]
pub struct StumpFit {
    pub tree: Tree,
    /// Single-class data or realized gain below [`MIN_GAIN`].
    pub degenerate: bool,
    pub gain: f64,
    pub left_counts: Vec<usize>,
    pub right_counts: Vec<usize>,
    pub report: Option<TrainReport>,
}

/// Seed for the stump trained at `node`.
pub fn stump_seed(base: u64, node: NodeId) -> u64 {
    // splitmix64 finalizer over the combined value.
    let mut z = base ^ (node as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Train a fresh stump on `data` with the given strategy.
pub fn fit_stump(data: &SampleSet, config: &TrainConfig, strategy: Strategy) -> Result<StumpFit> {
    if data.is_empty() {
        return Err(Error::invalid("cannot fit a stump to an empty set"));
    }
    let counts = data.class_counts();
    let k = data.num_classes();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        let n = data.len() as f64;
        let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
        let tree = Tree::stump(unit_sphere_sample(data.dim() + 1, &mut rng), freq.clone(), freq)?;
        return Ok(StumpFit {
            tree,
            degenerate: true,
            gain: 0.0,
            left_counts: counts,
            right_counts: vec![0; k],
            report: None,
        });
    }
    let mut tree = Tree::new_stump(data.dim(), k, &mut rng)?;
    let report = match strategy {
        Strategy::Em => fit_em(&mut tree, data, config)?,
        Strategy::Alternating => fit_alternating(&mut tree, data, config)?,
    };
    let hard = leaf_counts(&tree, data)?;
    let left_counts: Vec<usize> = hard.per_leaf()[0].iter().map(|&c| c as usize).collect();
    let right_counts: Vec<usize> = hard.per_leaf()[1].iter().map(|&c| c as usize).collect();
    let gain = information_gain(&counts, &left_counts, &right_counts)?;
    Ok(StumpFit {
        tree,
        degenerate: gain < MIN_GAIN,
        gain,
        left_counts,
        right_counts,
        report: Some(report),
    })
}

/// Indices of the samples that reach the leaf at node id `leaf`.
pub fn partition_indices(data: &SampleSet, tree: &Tree, leaf: NodeId) -> Result<Vec<usize>> {
    let target = tree
        .leaf_index_of(leaf)
        .ok_or_else(|| Error::invalid(format!("node {leaf} is not a leaf")))?;
    Ok(route_all(tree, data)?
        .into_iter()
        .enumerate()
        .filter(|&(_, l)| l == target)
        .map(|(i, _)| i)
        .collect())
}

/// The samples that reach the leaf at node id `leaf`, in data order.
pub fn partition(data: &SampleSet, tree: &Tree, leaf: NodeId) -> Result<SampleSet> {
    Ok(data.subset(&partition_indices(data, tree, leaf)?))
}

fn split_by_stump(data: &SampleSet, stump: &Tree, idx: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let beta = stump.split_beta(0);
    idx.iter()
        .partition(|&&i| !(crate::tree::augmented_dot(beta, data.row(i)) > 0.0))
}

fn freeze_reason(growth: &GrowthConfig, data: &SampleSet, idx: &[usize], depth: usize) -> Option<FreezeReason> {
    if growth.max_depth.is_some_and(|d| depth >= d) {
        return Some(FreezeReason::MaxDepth);
    }
    if idx.len() < growth.min_samples.max(2) {
        return Some(FreezeReason::MinSamples);
    }
    if let Some(purity) = growth.min_purity {
        let mut counts = vec![0usize; data.num_classes()];
        for &i in idx {
            counts[data.label(i)] += 1;
        }
        let top = counts.iter().copied().max().unwrap_or(0);
        if top as f64 >= purity * idx.len() as f64 {
            return Some(FreezeReason::Purity);
        }
    }
    None
}

struct Candidate {
    leaf: NodeId,
    depth: usize,
    idx: Vec<usize>,
    fit: StumpFit,
}

impl Candidate {
    fn train(data: &SampleSet, growth: &GrowthConfig, leaf: NodeId, depth: usize, idx: Vec<usize>) -> Result<Self> {
        let cfg = TrainConfig {
            seed: stump_seed(growth.stump.seed, leaf),
            ..growth.stump.clone()
        };
        let fit = fit_stump(&data.subset(&idx), &cfg, growth.strategy)?;
        Ok(Candidate { leaf, depth, idx, fit })
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // Max-heap: larger gain first, then the earlier created leaf.
    fn cmp(&self, other: &Self) -> Ordering {
        self.fit
            .gain
            .total_cmp(&other.fit.gain)
            .then_with(|| other.leaf.cmp(&self.leaf))
    }
}

struct Grower<'a> {
    data: &'a SampleSet,
    growth: &'a GrowthConfig,
    tree: Tree,
    trace: GrowthTrace,
}

impl Grower<'_> {
    fn record(&mut self, c: &Candidate, frozen: Option<FreezeReason>, gain: Option<f64>) {
        let step = self.trace.events.len();
        self.trace.events.push(GrowthEvent {
            step,
            leaf: c.leaf,
            depth: c.depth,
            subset_size: c.idx.len(),
            gain,
            frozen,
        });
    }

    fn record_frozen(&mut self, leaf: NodeId, depth: usize, size: usize, reason: FreezeReason) {
        let step = self.trace.events.len();
        self.trace.events.push(GrowthEvent {
            step,
            leaf,
            depth,
            subset_size: size,
            gain: None,
            frozen: Some(reason),
        });
    }

    fn at_leaf_limit(&self) -> bool {
        self.growth.max_leaves.is_some_and(|m| self.tree.num_leaves() >= m)
    }

    /// Install a trained stump and return the children (leaf, depth, subset).
    fn install(&mut self, c: Candidate) -> Result<[(NodeId, usize, Vec<usize>); 2]> {
        let (l_idx, r_idx) = split_by_stump(self.data, &c.fit.tree, &c.idx);
        let (l, r) = self.tree.replace_leaf_with_stump(c.leaf, &c.fit.tree)?;
        self.record(&c, None, Some(c.fit.gain));
        if let Some(report) = c.fit.report {
            self.trace.stump_reports.push((c.leaf, report));
        }
        Ok([(l, c.depth + 1, l_idx), (r, c.depth + 1, r_idx)])
    }

    fn grow_level_order(&mut self) -> Result<()> {
        let mut level = vec![(self.tree.root(), 0usize, (0..self.data.len()).collect::<Vec<_>>())];
        while !level.is_empty() {
            let mut open = Vec::new();
            for (leaf, depth, idx) in level {
                match freeze_reason(self.growth, self.data, &idx, depth) {
                    Some(reason) => self.record_frozen(leaf, depth, idx.len(), reason),
                    None => open.push((leaf, depth, idx)),
                }
            }
            let trained = open
                .into_par_iter()
                .map(|(leaf, depth, idx)| Candidate::train(self.data, self.growth, leaf, depth, idx))
                .collect::<Result<Vec<_>>>()?;
            let mut next = Vec::new();
            for c in trained {
                if self.at_leaf_limit() {
                    self.record(&c, Some(FreezeReason::MaxLeaves), Some(c.fit.gain));
                } else if c.fit.degenerate {
                    self.record(&c, Some(FreezeReason::Degenerate), Some(c.fit.gain));
                } else {
                    next.extend(self.install(c)?);
                }
            }
            level = next;
        }
        Ok(())
    }

    fn grow_best_first(&mut self) -> Result<()> {
        let mut heap = BinaryHeap::new();
        let mut pending = vec![(self.tree.root(), 0usize, (0..self.data.len()).collect::<Vec<_>>())];
        loop {
            let mut open = Vec::new();
            for (leaf, depth, idx) in pending.drain(..) {
                match freeze_reason(self.growth, self.data, &idx, depth) {
                    Some(reason) => self.record_frozen(leaf, depth, idx.len(), reason),
                    None => open.push((leaf, depth, idx)),
                }
            }
            let trained = open
                .into_par_iter()
                .map(|(leaf, depth, idx)| Candidate::train(self.data, self.growth, leaf, depth, idx))
                .collect::<Result<Vec<_>>>()?;
            for c in trained {
                if c.fit.degenerate {
                    self.record(&c, Some(FreezeReason::Degenerate), Some(c.fit.gain));
                } else {
                    heap.push(c);
                }
            }
            let Some(best) = heap.pop() else { break };
            if self.at_leaf_limit() {
                heap.push(best);
                break;
            }
            pending.extend(self.install(best)?);
        }
        for c in heap.into_sorted_vec().into_iter().rev() {
            self.record(&c, Some(FreezeReason::MaxLeaves), Some(c.fit.gain));
        }
        Ok(())
    }
}

/// Grow a tree greedily. Leaves that are never expanded keep the distribution
/// learned by the stump that created them.
pub fn grow_greedy(data: &SampleSet, growth: &GrowthConfig) -> Result<(Tree, GrowthTrace)> {
    growth.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("cannot grow a tree on an empty set"));
    }
    if data.num_classes() < 2 {
        return Err(Error::invalid("structure learning needs at least two classes"));
    }
    growth.stump.validate(data.dim())?;
    let counts = data.class_counts();
    let root_pi = if counts.iter().all(|&c| c == 0) {
        random_distribution(data.num_classes(), &mut ChaCha8Rng::seed_from_u64(growth.stump.seed))
    } else {
        counts.iter().map(|&c| c as f64 / data.len() as f64).collect()
    };
    let mut grower = Grower {
        data,
        growth,
        tree: Tree::single_leaf(data.dim(), root_pi)?,
        trace: GrowthTrace::default(),
    };
    match growth.expansion {
        ExpansionOrder::DepthFirst => grower.grow_level_order()?,
        ExpansionOrder::BestFirst => grower.grow_best_first()?,
    }
    Ok((grower.tree, grower.trace))
}

/// Jointly re-optimize all splits and leaves of a fixed topology with soft routing.
pub fn finetune(tree: &mut Tree, data: &SampleSet, config: &TrainConfig, strategy: Strategy) -> Result<TrainReport> {
    match strategy {
        Strategy::Em => fit_em(tree, data, config),
        Strategy::Alternating => fit_alternating(tree, data, config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adam::AdamConfig;
    use crate::inference::accuracy;

    fn blobs(n: usize) -> SampleSet {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let t = i as f64 * 0.618;
            let (cx, cy, y) = if i % 2 == 0 { (-2.0, 1.0, 0) } else { (2.0, -1.0, 1) };
            rows.push(vec![cx + 0.4 * t.sin(), cy + 0.4 * (1.7 * t).cos()]);
            labels.push(y);
        }
        SampleSet::from_rows(&rows, labels, 2).unwrap()
    }

    fn quick_config() -> TrainConfig {
        TrainConfig {
            epochs: 30,
            batch_size: 16,
            adam: AdamConfig {
                alpha: 0.05,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn stump_separates_blobs() {
        let data = blobs(100);
        let fit = fit_stump(&data, &quick_config(), Strategy::Em).unwrap();
        assert!(!fit.degenerate);
        assert!(accuracy(&fit.tree, &data).unwrap() >= 0.99);
        assert!((fit.gain - std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn pure_data_is_degenerate() {
        let data = SampleSet::new(vec![0.0, 1.0, 2.0], vec![1, 1, 1], 1, 2).unwrap();
        let fit = fit_stump(&data, &quick_config(), Strategy::Em).unwrap();
        assert!(fit.degenerate);
        assert!(fit.report.is_none());
    }

    #[test]
    fn partition_follows_routing() {
        let t = Tree::stump(vec![1.0, 0.0, 0.0], vec![0.5, 0.5], vec![0.5, 0.5]).unwrap();
        let data = SampleSet::new(vec![-1.0, 0.0, 2.0, 1.0, 0.0, 3.0], vec![0, 1, 0], 2, 2).unwrap();
        let left = partition_indices(&data, &t, t.leaf_node(0)).unwrap();
        let right = partition_indices(&data, &t, t.leaf_node(1)).unwrap();
        assert_eq!(left, vec![0, 2]);
        assert_eq!(right, vec![1]);
        assert!(partition_indices(&data, &t, t.root()).is_err());
    }

    #[test]
    fn depth_one_growth_is_a_stump() {
        let data = blobs(60);
        let growth = GrowthConfig {
            max_depth: Some(1),
            stump: quick_config(),
            ..Default::default()
        };
        let (tree, trace) = grow_greedy(&data, &growth).unwrap();
        assert_eq!(tree.num_splits(), 1);
        assert_eq!(trace.events[0].frozen, None);
        assert!(trace.events[1..].iter().all(|e| e.frozen.is_some()));
    }

    #[test]
    fn stopping_criteria_required() {
        let growth = GrowthConfig {
            max_depth: None,
            ..Default::default()
        };
        assert!(growth.validate().is_err());
    }

    #[test]
    fn seeds_differ_per_node() {
        assert_ne!(stump_seed(1, 0), stump_seed(1, 1));
        assert_ne!(stump_seed(1, 0), stump_seed(2, 0));
        assert_eq!(stump_seed(3, 5), stump_seed(3, 5));
    }
}
