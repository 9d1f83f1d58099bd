//! Data preparation and the grow-then-finetune training protocol.

use obliq::data::{apply_normalization, fit_normalization, split_train_val, NormalizationStats};
use obliq::{accuracy, finetune, grow_greedy, GrowthConfig, GrowthTrace, LabelMap, SampleSet, TrainReport, Tree};
use rayon::prelude::*;

use crate::args::DataArgs;
use crate::source::{align_labels, with_classes};

/// Normalized training and test data sharing one label map.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub train: SampleSet,
    pub test: SampleSet,
    pub labels: LabelMap,
    pub normalization: Option<NormalizationStats>,
}

pub fn prepare(args: &DataArgs, seed: u64) -> obliq::Result<Prepared> {
    let (train, labels) = args.dataset.load(None, args.samples, seed)?;
    let (train, test, labels) = match &args.test {
        Some(src) => {
            let (test, test_labels) = src.load(Some(&labels), args.samples, seed)?;
            let (test, merged) = align_labels(&test, &test_labels, &labels)?;
            (with_classes(&train, merged.len())?, test, merged)
        }
        None => {
            if !(args.holdout > 0.0 && args.holdout < 1.0) {
                return Err(obliq::Error::InvalidArgument(format!(
                    "holdout {} is not in (0, 1)",
                    args.holdout
                )));
            }
            let (train, test) = split_train_val(&train, 1.0 - args.holdout, seed)?;
            (train, test, labels)
        }
    };
    prepare_sets(train, test, labels, !args.no_normalize)
}

/// Standardize both sets with statistics of the training set.
pub fn prepare_sets(train: SampleSet, test: SampleSet, labels: LabelMap, normalize: bool) -> obliq::Result<Prepared> {
    if train.is_empty() || test.is_empty() {
        return Err(obliq::Error::InvalidArgument(
            "training and test sets must be non-empty".into(),
        ));
    }
    if train.dim() != test.dim() {
        return Err(obliq::Error::InvalidArgument(format!(
            "training data has {} features but test data has {}",
            train.dim(),
            test.dim()
        )));
    }
    if !normalize {
        return Ok(Prepared {
            train,
            test,
            labels,
            normalization: None,
        });
    }
    let stats = fit_normalization(&train)?;
    Ok(Prepared {
        train: apply_normalization(&train, &stats)?,
        test: apply_normalization(&test, &stats)?,
        labels,
        normalization: Some(stats),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Accuracies {
    pub train: f64,
    pub test: f64,
}

impl Accuracies {
    pub fn of(tree: &Tree, train: &SampleSet, test: &SampleSet) -> obliq::Result<Self> {
        Ok(Accuracies {
            train: accuracy(tree, train)?,
            test: accuracy(tree, test)?,
        })
    }
}

#[derive(Clone, Debug)]
pub struct Fit {
    pub tree: Tree,
    pub trace: GrowthTrace,
    pub greedy: Accuracies,
    /// Whole-tree training after growth, absent when skipped.
    pub finetune: Option<(TrainReport, Accuracies)>,
}

impl Fit {
    /// Accuracies of the returned tree.
    pub fn accuracies(&self) -> Accuracies {
        self.finetune.as_ref().map_or(self.greedy, |f| f.1)
    }
}

/// Grow greedily, then optionally finetune the whole tree with the stump
/// configuration and strategy.
pub fn fit(train: &SampleSet, test: &SampleSet, growth: &GrowthConfig, refine: bool) -> obliq::Result<Fit> {
    let (mut tree, trace) = grow_greedy(train, growth)?;
    let greedy = Accuracies::of(&tree, train, test)?;
    let finetune = if refine {
        let report = finetune(&mut tree, train, &growth.stump, growth.strategy)?;
        Some((report, Accuracies::of(&tree, train, test)?))
    } else {
        None
    };
    Ok(Fit {
        tree,
        trace,
        greedy,
        finetune,
    })
}

/// Validation accuracy of each candidate epoch count after fitting on the
/// first `ratio` of a seeded shuffle of `train`. Returns the best count
/// (earliest on ties) and all scores in candidate order.
pub fn select_epochs(
    train: &SampleSet,
    candidates: &[usize],
    growth: &GrowthConfig,
    refine: bool,
    ratio: f64,
) -> obliq::Result<(usize, Vec<(usize, f64)>)> {
    if candidates.is_empty() {
        return Err(obliq::Error::InvalidArgument(
            "epoch sweep needs at least one candidate".into(),
        ));
    }
    let (fit_part, val_part) = split_train_val(train, ratio, growth.stump.seed)?;
    if fit_part.is_empty() || val_part.is_empty() {
        return Err(obliq::Error::InvalidArgument(
            "validation split leaves an empty set".into(),
        ));
    }
    let scores = candidates
        .par_iter()
        .map(|&epochs| {
            let mut g = growth.clone();
            g.stump.epochs = epochs;
            let f = fit(&fit_part, &val_part, &g, refine)?;
            Ok((epochs, f.accuracies().test))
        })
        .collect::<obliq::Result<Vec<_>>>()?;
    let mut best = scores[0];
    for &s in &scores[1..] {
        if s.1 > best.1 {
            best = s;
        }
    }
    Ok((best.0, scores))
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub depth: usize,
    pub outcome: Result<(Accuracies, Accuracies), String>,
}

/// Greedy and finetuned accuracies for each maximum depth, in input order.
pub fn depth_sweep(train: &SampleSet, test: &SampleSet, depths: &[usize], growth: &GrowthConfig) -> Vec<SweepRow> {
    depths
        .par_iter()
        .map(|&depth| {
            let mut g = growth.clone();
            g.max_depth = Some(depth);
            let outcome = fit(train, test, &g, true)
                .map(|f| (f.greedy, f.accuracies()))
                .map_err(|e| e.to_string());
            SweepRow { depth, outcome }
        })
        .collect()
}
