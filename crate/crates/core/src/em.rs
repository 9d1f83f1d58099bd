//! EM-style optimization of a fixed tree topology.
//!
//! The E-step computes leaf responsibilities `h[n, ℓ]`, the leaf M-step is
//! closed form and the split M-step takes Adam steps on
//! `Σ_n Σ_ℓ h[n, ℓ] log μ_ℓ(x_n)` (minus the optional spatial penalty).
//! Steepness is raised after every epoch.
//!
//! All reductions over samples run on fixed-size chunks whose partial results
//! are combined in chunk order, so results do not depend on the thread count.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::adam::AdamState;
use crate::alternating::hard_leaf_update;
use crate::dataset::SampleSet;
use crate::error::{Error, Result};
use crate::inference::{accuracy, sigmoid, Scratch, Steepness};
use crate::train::{EpochRecord, Regularizer, Strategy, TrainConfig, TrainReport};
use crate::tree::{Node, Slot, Tree};

pub(crate) const CHUNK: usize = 128;

/// Responsibility mass below which a leaf keeps its previous distribution.
pub const EMPTY_LEAF_MASS: f64 = 1e-12;

/// Row-major `rows × leaves` matrix of responsibilities.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorMatrix {
    rows: usize,
    cols: usize,
    h: Vec<f64>,
    fallback_rows: usize,
}

impl PosteriorMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("posterior rows have differing lengths"));
        }
        Ok(PosteriorMatrix {
            rows: rows.len(),
            cols,
            h: rows.concat(),
            fallback_rows: 0,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.h[n * self.cols..(n + 1) * self.cols]
    }

    pub fn get(&self, n: usize, leaf: usize) -> f64 {
        self.h[n * self.cols + leaf]
    }

    /// Rows whose normalizer vanished and which were filled from `μ` alone.
    pub fn fallback_rows(&self) -> usize {
        self.fallback_rows
    }
}

fn check_shapes(tree: &Tree, batch: &SampleSet) -> Result<()> {
    if batch.dim() != tree.feature_dim() {
        return Err(Error::invalid(format!(
            "data has dimension {} but the tree expects {}",
            batch.dim(),
            tree.feature_dim()
        )));
    }
    if batch.num_classes() > tree.num_classes() {
        return Err(Error::invalid(format!(
            "data has {} classes but the tree only {}",
            batch.num_classes(),
            tree.num_classes()
        )));
    }
    Ok(())
}

fn normalize_log_row(log_w: &[f64], out: &mut [f64]) -> bool {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return false;
    }
    let mut total = 0.0;
    for (o, &w) in out.iter_mut().zip(log_w) {
        *o = (w - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
    true
}

/// Responsibilities `h[n, ℓ] ∝ (π_ℓ)_{y_n} μ_ℓ(x_n)`, normalized per row in log space.
pub fn e_step(tree: &Tree, batch: &SampleSet, gamma: Steepness) -> Result<PosteriorMatrix> {
    check_shapes(tree, batch)?;
    let cols = tree.num_leaves();
    let log_pi: Vec<Vec<f64>> = (0..cols)
        .map(|l| tree.leaf_pi(l).iter().map(|p| p.ln()).collect())
        .collect();
    let mut h = vec![0.0; batch.len() * cols];
    let fallback_rows: usize = h
        .par_chunks_mut(CHUNK * cols)
        .enumerate()
        .map(|(c, out)| {
            let mut scratch = Scratch::new(tree);
            let mut log_w = vec![0.0; cols];
            let mut fallbacks = 0;
            for (k, row) in out.chunks_exact_mut(cols).enumerate() {
                let n = c * CHUNK + k;
                let y = batch.label(n);
                scratch.eval(tree, batch.row(n), gamma);
                for l in 0..cols {
                    log_w[l] = log_pi[l][y] + scratch.log_mu[l];
                }
                if !normalize_log_row(&log_w, row) {
                    fallbacks += 1;
                    normalize_log_row(&scratch.log_mu, row);
                }
            }
            fallbacks
        })
        .sum();
    Ok(PosteriorMatrix {
        rows: batch.len(),
        cols,
        h,
        fallback_rows,
    })
}

/// Closed-form leaf update: the responsibility-weighted class histogram of each leaf.
/// Leaves with total responsibility below [`EMPTY_LEAF_MASS`] keep `previous`.
pub fn m_step_leaves(h: &PosteriorMatrix, labels: &[usize], previous: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if h.rows() != labels.len() {
        return Err(Error::invalid("responsibility rows do not match labels"));
    }
    if previous.len() != h.cols() {
        return Err(Error::invalid("previous leaf distributions do not match leaves"));
    }
    let k = previous.first().map(Vec::len).unwrap_or(0);
    let mut weighted = vec![vec![0.0; k]; h.cols()];
    for (n, &y) in labels.iter().enumerate() {
        if y >= k {
            return Err(Error::invalid(format!("label {y} out of range for {k} classes")));
        }
        for (l, &v) in h.row(n).iter().enumerate() {
            weighted[l][y] += v;
        }
    }
    Ok(weighted
        .into_iter()
        .zip(previous)
        .map(|(counts, prev)| {
            let mass: f64 = counts.iter().sum();
            if mass < EMPTY_LEAF_MASS {
                prev.clone()
            } else {
                counts.into_iter().map(|c| c / mass).collect()
            }
        })
        .collect())
}

fn penalty(tree: &Tree, reg: Option<&Regularizer>) -> f64 {
    match reg {
        Some(r) if r.lambda > 0.0 => {
            r.lambda
                * (0..tree.num_splits())
                    .map(|i| r.roughness(tree.split_beta(i)))
                    .sum::<f64>()
        }
        _ => 0.0,
    }
}

fn check_regularizer(tree: &Tree, reg: Option<&Regularizer>) -> Result<()> {
    if let Some(r) = reg {
        if r.laplacian.dim() != tree.feature_dim() {
            return Err(Error::invalid(format!(
                "regularizer covers {} pixels but the tree has {} features",
                r.laplacian.dim(),
                tree.feature_dim()
            )));
        }
    }
    Ok(())
}

/// Split objective `Σ_n Σ_ℓ h[n, ℓ] log μ_ℓ(x_n) − λ Σ_i β_iᵀ M β_i`, to be maximized.
/// Terms with zero responsibility contribute nothing.
pub fn split_objective(
    tree: &Tree,
    h: &PosteriorMatrix,
    batch: &SampleSet,
    gamma: Steepness,
    reg: Option<&Regularizer>,
) -> Result<f64> {
    check_shapes(tree, batch)?;
    check_regularizer(tree, reg)?;
    if h.rows() != batch.len() || h.cols() != tree.num_leaves() {
        return Err(Error::invalid("responsibility matrix does not match batch and tree"));
    }
    let partials: Vec<f64> = (0..batch.len())
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|idx| {
            let mut scratch = Scratch::new(tree);
            let mut acc = 0.0;
            for &n in idx {
                scratch.eval(tree, batch.row(n), gamma);
                for (&w, &lm) in h.row(n).iter().zip(&scratch.log_mu) {
                    if w != 0.0 {
                        acc += w * lm;
                    }
                }
            }
            acc
        })
        .collect();
    Ok(partials.iter().sum::<f64>() - penalty(tree, reg))
}

/// Gradient of [`split_objective`] with respect to every split's parameters.
///
/// For split `i`, with `A` and `B` the responsibility mass in its right and
/// left subtree, the data term contributes `γ (A (1 − s_i) − B s_i) (x, 1)`.
/// The penalty contributes `−2 λ M β_i` on the image-shaped components.
pub fn split_gradient(
    tree: &Tree,
    h: &PosteriorMatrix,
    batch: &SampleSet,
    gamma: Steepness,
    reg: Option<&Regularizer>,
) -> Result<Vec<Vec<f64>>> {
    check_shapes(tree, batch)?;
    check_regularizer(tree, reg)?;
    let g = match gamma {
        Steepness::Soft(g) => g,
        Steepness::Hard => return Err(Error::invalid("the hard split function has no gradient")),
    };
    if h.rows() != batch.len() || h.cols() != tree.num_leaves() {
        return Err(Error::invalid("responsibility matrix does not match batch and tree"));
    }
    let p = tree.feature_dim();
    let width = p + 1;
    let num_splits = tree.num_splits();
    let layout = tree.layout();
    let nodes = tree.nodes();

    let partials: Vec<Vec<f64>> = (0..batch.len())
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|idx| {
            let mut grad = vec![0.0; num_splits * width];
            let mut scratch = Scratch::new(tree);
            let mut mass = vec![0.0; nodes.len()];
            for &n in idx {
                let x = batch.row(n);
                crate::inference::split_values_into(tree, x, &mut scratch.values);
                let row = h.row(n);
                for &id in layout.preorder.iter().rev() {
                    match (&nodes[id], layout.slots[id]) {
                        (Node::Leaf { .. }, Slot::Leaf(l)) => mass[id] = row[l],
                        (Node::Split { left, right, .. }, Slot::Split(i)) => {
                            let a = mass[*right];
                            let b = mass[*left];
                            mass[id] = a + b;
                            let s = sigmoid(g * scratch.values[i]);
                            let coef = g * (a * (1.0 - s) - b * s);
                            if coef != 0.0 {
                                let gi = &mut grad[i * width..(i + 1) * width];
                                for (gv, xv) in gi[..p].iter_mut().zip(x) {
                                    *gv += coef * xv;
                                }
                                gi[p] += coef;
                            }
                        }
                        _ => unreachable!("layout slots agree with node kinds"),
                    }
                }
            }
            grad
        })
        .collect();

    let mut total = vec![0.0; num_splits * width];
    for part in &partials {
        for (t, v) in total.iter_mut().zip(part) {
            *t += v;
        }
    }
    let mut out: Vec<Vec<f64>> = total.chunks_exact(width).map(<[f64]>::to_vec).collect();
    if let Some(r) = reg.filter(|r| r.lambda > 0.0) {
        for (i, gi) in out.iter_mut().enumerate() {
            let mb = r.laplacian.apply(tree.split_beta(i));
            for (gv, m) in gi.iter_mut().zip(mb) {
                *gv -= 2.0 * r.lambda * m;
            }
        }
    }
    for (i, gi) in out.iter().enumerate() {
        if let Some(j) = gi.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "gradient of split {i} (node {}) is not finite at component {j}",
                tree.split_order()[i]
            )));
        }
    }
    Ok(out)
}

/// Full-data log-likelihood `Σ_n log p(y_n | x_n)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogLikelihood {
    /// `-∞` when some sample has zero probability.
    pub value: f64,
    /// First sample with zero probability, if any.
    pub impossible_sample: Option<usize>,
}

/// Per-sample `log p(y_n | x_n)`.
pub fn sample_log_likelihoods(tree: &Tree, data: &SampleSet, gamma: Steepness) -> Result<Vec<f64>> {
    check_shapes(tree, data)?;
    let leaves = tree.num_leaves();
    let log_pi: Vec<Vec<f64>> = (0..leaves)
        .map(|l| tree.leaf_pi(l).iter().map(|p| p.ln()).collect())
        .collect();
    let mut out = vec![0.0; data.len()];
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, vals)| {
        let mut scratch = Scratch::new(tree);
        for (k, v) in vals.iter_mut().enumerate() {
            let n = c * CHUNK + k;
            let y = data.label(n);
            scratch.eval(tree, data.row(n), gamma);
            let terms = (0..leaves).map(|l| log_pi[l][y] + scratch.log_mu[l]);
            let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
            *v = if max == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
            };
        }
    });
    Ok(out)
}

/// Compensated (Neumaier) sum.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn log_likelihood(tree: &Tree, data: &SampleSet, gamma: Steepness) -> Result<LogLikelihood> {
    let per_sample = sample_log_likelihoods(tree, data, gamma)?;
    if let Some(n) = per_sample.iter().position(|v| *v == f64::NEG_INFINITY) {
        return Ok(LogLikelihood {
            value: f64::NEG_INFINITY,
            impossible_sample: Some(n),
        });
    }
    Ok(LogLikelihood {
        value: compensated_sum(per_sample),
        impossible_sample: None,
    })
}

/// Optimize `tree` in place with the EM strategy.
pub fn fit_em(tree: &mut Tree, data: &SampleSet, config: &TrainConfig) -> Result<TrainReport> {
    run_training(tree, data, config, Strategy::Em)
}

pub(crate) fn run_training(
    tree: &mut Tree,
    data: &SampleSet,
    config: &TrainConfig,
    strategy: Strategy,
) -> Result<TrainReport> {
    check_shapes(tree, data)?;
    config.validate(tree.feature_dim())?;
    let mut report = TrainReport::new(strategy, config.seed);
    if config.epochs == 0 || data.is_empty() {
        return Ok(report);
    }
    let reg = config.regularizer()?;
    let reg = reg.as_ref();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut states = (0..tree.num_splits())
        .map(|_| AdamState::new(tree.feature_dim() + 1, config.adam))
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut gamma = config.gamma0;
    let started = Instant::now();

    for epoch in 1..=config.epochs {
        let steep = Steepness::Soft(gamma);
        if strategy == Strategy::Alternating {
            tree.set_leaf_pis(hard_leaf_update(tree, data)?)?;
        }
        order.shuffle(&mut rng);
        if tree.num_splits() > 0 {
            for idx in order.chunks(config.batch_size) {
                let batch = data.subset(idx);
                let h = e_step(tree, &batch, steep)?;
                report.fallback_rows += h.fallback_rows();
                let grads = split_gradient(tree, &h, &batch, steep, reg)?;
                if config.guarded {
                    if !guarded_update(tree, &mut states, &grads, &h, &batch, steep, reg)? {
                        report.skipped_steps += 1;
                    }
                } else {
                    for (i, (state, grad)) in states.iter_mut().zip(&grads).enumerate() {
                        let descent: Vec<f64> = grad.iter().map(|g| -g).collect();
                        state.step(tree.split_beta_mut(i), &descent)?;
                    }
                }
            }
        }
        if strategy == Strategy::Em {
            let h = e_step(tree, data, steep)?;
            report.fallback_rows += h.fallback_rows();
            let pis = m_step_leaves(&h, data.labels(), &tree.leaf_pis())?;
            tree.set_leaf_pis(pis)?;
        } else if epoch == config.epochs {
            tree.set_leaf_pis(hard_leaf_update(tree, data)?)?;
        }
        let ll = log_likelihood(tree, data, steep)?;
        if ll.value.is_nan() {
            return Err(Error::Numeric(format!(
                "log-likelihood became NaN in epoch {epoch} at steepness {gamma}"
            )));
        }
        report.epochs.push(EpochRecord {
            epoch,
            gamma,
            log_likelihood: ll.value,
            train_accuracy: accuracy(tree, data)?,
            wall_time_ms: started.elapsed().as_millis() as u64,
        });
        gamma += config.gamma_increment;
    }
    Ok(report)
}

/// Adam step on all splits, halved up to ten times until the split objective
/// does not decrease. Returns `false` when the step was rejected.
fn guarded_update(
    tree: &mut Tree,
    states: &mut [AdamState],
    grads: &[Vec<f64>],
    h: &PosteriorMatrix,
    batch: &SampleSet,
    gamma: Steepness,
    reg: Option<&Regularizer>,
) -> Result<bool> {
    let before = split_objective(tree, h, batch, gamma, reg)?;
    let old = tree.split_betas();
    let deltas = states
        .iter_mut()
        .zip(grads)
        .map(|(s, g)| s.step_delta(&g.iter().map(|v| -v).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    let mut scale = 1.0;
    for _ in 0..=10 {
        let candidate: Vec<Vec<f64>> = old
            .iter()
            .zip(&deltas)
            .map(|(b, d)| b.iter().zip(d).map(|(bv, dv)| bv + scale * dv).collect())
            .collect();
        tree.set_split_betas(&candidate)?;
        if split_objective(tree, h, batch, gamma, reg)? >= before {
            return Ok(true);
        }
        scale *= 0.5;
    }
    tree.set_split_betas(&old)?;
    Ok(false)
}
