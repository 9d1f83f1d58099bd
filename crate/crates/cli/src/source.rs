//! Dataset specifications given on the command line.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use obliq::data::{load_idx, load_libsvm, LibsvmOptions};
use obliq::synthetic;
use obliq::{LabelMap, SampleSet};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DataSource {
    Synthetic(String),
    Idx { images: PathBuf, labels: PathBuf },
    Libsvm(PathBuf),
}

impl FromStr for DataSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(name) = s.strip_prefix("synthetic:") {
            if !synthetic::NAMES.contains(&name) {
                return Err(format!(
                    "unknown synthetic dataset {name:?}; available: {}",
                    synthetic::NAMES.join(", ")
                ));
            }
            return Ok(DataSource::Synthetic(name.to_string()));
        }
        if let Some(rest) = s.strip_prefix("idx:") {
            let (images, labels) = rest
                .split_once(',')
                .ok_or_else(|| format!("expected idx:IMAGES,LABELS, got {s:?}"))?;
            return Ok(DataSource::Idx {
                images: images.into(),
                labels: labels.into(),
            });
        }
        let path = s.strip_prefix("libsvm:").unwrap_or(s);
        if path.is_empty() {
            return Err("empty dataset path".into());
        }
        Ok(DataSource::Libsvm(path.into()))
    }
}

impl TryFrom<String> for DataSource {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl fmt::Display for DataSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataSource::Synthetic(name) => write!(f, "synthetic:{name}"),
            DataSource::Idx { images, labels } => write!(f, "idx:{},{}", images.display(), labels.display()),
            DataSource::Libsvm(path) => write!(f, "libsvm:{}", path.display()),
        }
    }
}

impl From<DataSource> for String {
    fn from(d: DataSource) -> String {
        d.to_string()
    }
}

impl DataSource {
    /// Files read by [`DataSource::load`].
    pub fn files(&self) -> Vec<&Path> {
        match self {
            DataSource::Synthetic(_) => Vec::new(),
            DataSource::Idx { images, labels } => vec![images, labels],
            DataSource::Libsvm(path) => vec![path],
        }
    }

    /// Load the samples with their label tokens. `known` fixes the label
    /// tokens of LIBSVM input; `samples` and `seed` drive synthetic generation.
    pub fn load(&self, known: Option<&LabelMap>, samples: usize, seed: u64) -> obliq::Result<(SampleSet, LabelMap)> {
        match self {
            DataSource::Synthetic(name) => {
                let data = synthetic::by_name(name, samples, seed)?;
                let k = data.num_classes();
                Ok((data, LabelMap::identity(k)))
            }
            DataSource::Idx { images, labels } => {
                let data = load_idx(images, labels)?;
                let k = data.num_classes();
                Ok((data, LabelMap::identity(k)))
            }
            DataSource::Libsvm(path) => load_libsvm(
                path,
                &LibsvmOptions {
                    dim: None,
                    labels: known.cloned(),
                },
            ),
        }
    }
}

/// Re-express `data` (labelled by `from`) in the classes of `to`, appending
/// tokens of `from` that `to` lacks.
pub fn align_labels(data: &SampleSet, from: &LabelMap, to: &LabelMap) -> obliq::Result<(SampleSet, LabelMap)> {
    let mut tokens: Vec<String> = to.tokens().to_vec();
    for t in from.tokens() {
        if !tokens.contains(t) {
            tokens.push(t.clone());
        }
    }
    let merged = LabelMap::new(tokens)?;
    let map: Vec<usize> = from
        .tokens()
        .iter()
        .map(|t| merged.index_of(t).expect("merged map holds every token"))
        .collect();
    let labels = data.labels().iter().map(|&y| map[y]).collect();
    let data = SampleSet::new(data.features().to_vec(), labels, data.dim(), merged.len())?;
    Ok((data, merged))
}

/// Widen the class count of `data` without changing any label.
pub fn with_classes(data: &SampleSet, k: usize) -> obliq::Result<SampleSet> {
    if data.num_classes() == k {
        return Ok(data.clone());
    }
    SampleSet::new(data.features().to_vec(), data.labels().to_vec(), data.dim(), k)
}
