//! Versioned plain-text model files.
//!
//! ```text
//! obliq-model v1
//! feature_dim 2
//! num_classes 2
//! labels 0 1
//! normalization none
//! root 0
//! split_order 0
//! node 0 split 1 2 0.5 -0.25 0.1
//! node 1 leaf 0.9 0.1
//! node 2 leaf 0.2 0.8
//! ```
//!
//! Floats use shortest round-trip formatting, so reading a written model
//! reproduces it exactly and writing it again reproduces the same bytes.
//! With normalization the line reads `normalization standard` and is followed
//! by `mean ...` and `std ...` lines.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::data::NormalizationStats;
use crate::dataset::{LabelMap, SampleSet};
use crate::error::{Error, Result};
use crate::tree::{Node, Tree};

pub const MAGIC: &str = "obliq-model v1";

/// A trained tree with everything needed to apply it to raw data.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub tree: Tree,
    pub labels: LabelMap,
    /// Statistics applied to raw features before routing.
    pub normalization: Option<NormalizationStats>,
}

impl Model {
    pub fn new(tree: Tree, labels: LabelMap, normalization: Option<NormalizationStats>) -> Result<Self> {
        if labels.len() != tree.num_classes() {
            return Err(Error::invalid(format!(
                "{} labels for a tree with {} classes",
                labels.len(),
                tree.num_classes()
            )));
        }
        if let Some(n) = &normalization {
            if n.dim() != tree.feature_dim() || n.std.len() != n.dim() {
                return Err(Error::invalid("normalization does not match the feature dimension"));
            }
        }
        Ok(Model {
            tree,
            labels,
            normalization,
        })
    }

    /// Normalize raw features the way the training data was.
    pub fn prepare(&self, raw: &SampleSet) -> Result<SampleSet> {
        if raw.dim() != self.tree.feature_dim() {
            return Err(Error::invalid(format!(
                "model expects {} features but the data has {}",
                self.tree.feature_dim(),
                raw.dim()
            )));
        }
        match &self.normalization {
            Some(n) => crate::data::apply_normalization(raw, n),
            None => Ok(raw.clone()),
        }
    }

    pub fn to_text(&self) -> String {
        let t = &self.tree;
        let mut s = String::new();
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, "{MAGIC}");
        let _ = writeln!(s, "feature_dim {}", t.feature_dim());
        let _ = writeln!(s, "num_classes {}", t.num_classes());
        let _ = writeln!(s, "labels {}", self.labels.tokens().join(" "));
        match &self.normalization {
            None => {
                let _ = writeln!(s, "normalization none");
            }
            Some(n) => {
                let _ = writeln!(s, "normalization standard");
                let _ = writeln!(s, "mean {}", join(&n.mean));
                let _ = writeln!(s, "std {}", join(&n.std));
            }
        }
        let _ = writeln!(s, "root {}", t.root());
        let order: Vec<String> = t.split_order().iter().map(|i| i.to_string()).collect();
        let _ = writeln!(s, "split_order {}", order.join(" "));
        for (id, node) in t.nodes().iter().enumerate() {
            match node {
                Node::Split { beta, left, right } => {
                    let _ = writeln!(s, "node {id} split {left} {right} {}", join(beta));
                }
                Node::Leaf { pi } => {
                    let _ = writeln!(s, "node {id} leaf {}", join(pi));
                }
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end()));
        let mut next = |key: &str| -> Result<(usize, Vec<&str>)> {
            let (no, line) = lines
                .next()
                .ok_or_else(|| Error::Format(format!("model file ends before {key:?}")))?;
            let mut parts = line.split(' ');
            match parts.next() {
                Some(k) if k == key => Ok((no, parts.filter(|p| !p.is_empty()).collect())),
                _ => Err(Error::parse(no, format!("expected {key:?}"))),
            }
        };
        let (no, rest) = next("obliq-model")?;
        if rest != ["v1"] {
            return Err(Error::parse(no, "unsupported model version"));
        }
        let int = |no: usize, v: &[&str]| -> Result<usize> {
            match v {
                [x] => x
                    .parse()
                    .map_err(|_| Error::parse(no, format!("invalid integer {x:?}"))),
                _ => Err(Error::parse(no, "expected one integer")),
            }
        };
        let floats = |no: usize, v: &[&str]| -> Result<Vec<f64>> {
            v.iter()
                .map(|x| x.parse().map_err(|_| Error::parse(no, format!("invalid number {x:?}"))))
                .collect()
        };
        let ints = |no: usize, v: &[&str]| -> Result<Vec<usize>> {
            v.iter()
                .map(|x| {
                    x.parse()
                        .map_err(|_| Error::parse(no, format!("invalid integer {x:?}")))
                })
                .collect()
        };
        let (no, v) = next("feature_dim")?;
        let p = int(no, &v)?;
        let (no, v) = next("num_classes")?;
        let k = int(no, &v)?;
        let (_, v) = next("labels")?;
        let labels = LabelMap::new(v.iter().map(|s| s.to_string()).collect())?;
        let (no, v) = next("normalization")?;
        let normalization = match v.as_slice() {
            ["none"] => None,
            ["standard"] => {
                let (no, m) = next("mean")?;
                let mean = floats(no, &m)?;
                let (no, s) = next("std")?;
                let std = floats(no, &s)?;
                if mean.len() != p || std.len() != p {
                    return Err(Error::parse(no, "normalization length differs from feature_dim"));
                }
                Some(NormalizationStats { mean, std })
            }
            _ => return Err(Error::parse(no, "expected \"none\" or \"standard\"")),
        };
        let (no, v) = next("root")?;
        let root = int(no, &v)?;
        let (no, v) = next("split_order")?;
        let split_order = ints(no, &v)?;
        let mut nodes = Vec::new();
        for (no, line) in lines {
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(' ').collect();
            if parts.len() < 3 || parts[0] != "node" {
                return Err(Error::parse(no, "expected a node record"));
            }
            if parts[1].parse::<usize>().ok() != Some(nodes.len()) {
                return Err(Error::parse(no, format!("expected node {}", nodes.len())));
            }
            let node = match parts[2] {
                "split" if parts.len() >= 5 => {
                    let ch = ints(no, &parts[3..5])?;
                    Node::Split {
                        beta: floats(no, &parts[5..])?,
                        left: ch[0],
                        right: ch[1],
                    }
                }
                "leaf" => Node::Leaf {
                    pi: floats(no, &parts[3..])?,
                },
                _ => return Err(Error::parse(no, "unknown node kind")),
            };
            nodes.push(node);
        }
        let tree = Tree::from_parts(nodes, root, k, p, split_order)?;
        Model::new(tree, labels, normalization)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}
