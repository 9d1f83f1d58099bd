use crate::error::{Error, Result};

/// Dense feature matrix (row-major, `len × dim`) with 0-based class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    features: Vec<f64>,
    labels: Vec<usize>,
    dim: usize,
    num_classes: usize,
}

impl SampleSet {
    pub fn new(features: Vec<f64>, labels: Vec<usize>, dim: usize, num_classes: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("feature dimension must be positive"));
        }
        if num_classes == 0 {
            return Err(Error::invalid("number of classes must be positive"));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::invalid(format!(
                "{} feature values do not form {} rows of dimension {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= num_classes) {
            return Err(Error::invalid(format!(
                "sample {i} has label {y} but there are only {num_classes} classes"
            )));
        }
        Ok(SampleSet {
            features,
            labels,
            dim,
            num_classes,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("feature rows have differing dimensions"));
        }
        if rows.len() != labels.len() {
            return Err(Error::invalid("row and label counts differ"));
        }
        Self::new(rows.concat(), labels, dim, num_classes)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub(crate) fn features_mut(&mut self) -> &mut [f64] {
        &mut self.features
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.dim)
    }

    /// Copy of the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> SampleSet {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        SampleSet {
            features,
            labels,
            dim: self.dim,
            num_classes: self.num_classes,
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Concatenate two sets with matching shape.
    pub fn concat(&self, other: &SampleSet) -> Result<SampleSet> {
        if self.dim != other.dim || self.num_classes != other.num_classes {
            return Err(Error::invalid("cannot concatenate sets of different shape"));
        }
        let mut features = self.features.clone();
        features.extend_from_slice(&other.features);
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(SampleSet {
            features,
            labels,
            dim: self.dim,
            num_classes: self.num_classes,
        })
    }
}

/// Maps internal class indices `0..K` to the label tokens seen in input files.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    labels: Vec<String>,
}

impl LabelMap {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid("label map is empty"));
        }
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() || l.chars().any(char::is_whitespace) {
                return Err(Error::invalid(format!("label {l:?} is not a single token")));
            }
            if labels[..i].contains(l) {
                return Err(Error::invalid(format!("label {l:?} appears twice")));
            }
        }
        Ok(LabelMap { labels })
    }

    /// Labels `0..k` rendered as decimal integers.
    pub fn identity(k: usize) -> Self {
        LabelMap {
            labels: (0..k).map(|i| i.to_string()).collect(),
        }
    }

    /// Build a map from raw tokens, ordered by numeric value when every token
    /// parses as a number and lexicographically otherwise.
    pub fn from_tokens<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut uniq: Vec<String> = Vec::new();
        for t in tokens {
            if !uniq.iter().any(|u| u == t) {
                uniq.push(t.to_string());
            }
        }
        let numeric: Option<Vec<f64>> = uniq.iter().map(|u| u.parse::<f64>().ok()).collect();
        match numeric {
            Some(values) => {
                let mut pairs: Vec<(f64, String)> = values.into_iter().zip(uniq).collect();
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
                Self::new(pairs.into_iter().map(|p| p.1).collect())
            }
            None => {
                uniq.sort();
                Self::new(uniq)
            }
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == token)
    }

    pub fn token(&self, class: usize) -> &str {
        &self.labels[class]
    }

    pub fn tokens(&self) -> &[String] {
        &self.labels
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(SampleSet::new(vec![1.0; 5], vec![0, 1], 2, 2).is_err());
        assert!(SampleSet::new(vec![1.0; 4], vec![0, 2], 2, 2).is_err());
        let s = SampleSet::new(vec![1.0, 2.0, 3.0, 4.0], vec![0, 1], 2, 2).unwrap();
        assert_eq!(s.row(1), &[3.0, 4.0]);
        assert_eq!(s.subset(&[1, 1]).labels(), &[1, 1]);
        assert_eq!(s.class_counts(), vec![1, 1]);
    }

    #[test]
    fn label_map_orders_numerically() {
        let m = LabelMap::from_tokens(["10", "2", "-1", "2"]).unwrap();
        assert_eq!(m.tokens(), &["-1", "2", "10"]);
        assert_eq!(m.index_of("10"), Some(2));
        let m = LabelMap::from_tokens(["b", "a"]).unwrap();
        assert_eq!(m.tokens(), &["a", "b"]);
        assert!(LabelMap::new(vec!["a".into(), "a".into()]).is_err());
    }
}
