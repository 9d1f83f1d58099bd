//! Sparse `label idx:val ...` text format with 1-based feature indices.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::dataset::{LabelMap, SampleSet};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct LibsvmOptions {
    /// Fixed feature dimension. Defaults to the largest index observed.
    pub dim: Option<usize>,
    /// Known label tokens, e.g. those of the training file when reading a test file.
    pub labels: Option<LabelMap>,
}

struct Row {
    line: usize,
    label: String,
    entries: Vec<(usize, f64)>,
}

fn parse_line(line_no: usize, line: &str) -> Result<Option<Row>> {
    let content = line.split('#').next().unwrap_or("").trim();
    if content.is_empty() {
        return Ok(None);
    }
    let mut tokens = content.split_whitespace();
    let label = tokens.next().expect("non-empty line has a token");
    if label.contains(':') {
        return Err(Error::parse(line_no, format!("missing label before {label:?}")));
    }
    let mut entries = Vec::new();
    let mut last = 0usize;
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| Error::parse(line_no, format!("expected index:value, found {tok:?}")))?;
        let idx: usize = idx
            .parse()
            .map_err(|_| Error::parse(line_no, format!("invalid feature index {idx:?}")))?;
        if idx == 0 {
            return Err(Error::parse(line_no, "feature indices are 1-based"));
        }
        if idx <= last {
            return Err(Error::parse(line_no, format!("feature index {idx} is not increasing")));
        }
        last = idx;
        let val: f64 = val
            .parse()
            .map_err(|_| Error::parse(line_no, format!("invalid feature value {val:?}")))?;
        if !val.is_finite() {
            return Err(Error::parse(line_no, format!("feature value {val} is not finite")));
        }
        entries.push((idx, val));
    }
    Ok(Some(Row {
        line: line_no,
        label: label.to_string(),
        entries,
    }))
}

/// Parse LIBSVM text into a dense sample set and the label map used for it.
pub fn parse_libsvm(text: &str, options: &LibsvmOptions) -> Result<(SampleSet, LabelMap)> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(row) = parse_line(i + 1, line)? {
            rows.push(row);
        }
    }
    if rows.is_empty() {
        return Err(Error::Format("no samples".into()));
    }
    let observed = rows
        .iter()
        .filter_map(|r| r.entries.last().map(|e| e.0))
        .max()
        .unwrap_or(0);
    let dim = match options.dim {
        Some(d) => {
            if let Some(r) = rows.iter().find(|r| r.entries.last().is_some_and(|e| e.0 > d)) {
                return Err(Error::parse(
                    r.line,
                    format!("feature index {} exceeds dimension {d}", r.entries.last().unwrap().0),
                ));
            }
            d
        }
        None => observed,
    };
    if dim == 0 {
        return Err(Error::Format("no feature index observed and no dimension given".into()));
    }
    let map = match &options.labels {
        Some(m) => m.clone(),
        None => LabelMap::from_tokens(rows.iter().map(|r| r.label.as_str()))?,
    };
    let mut features = vec![0.0; rows.len() * dim];
    let mut labels = Vec::with_capacity(rows.len());
    for (n, row) in rows.iter().enumerate() {
        let y = map
            .index_of(&row.label)
            .ok_or_else(|| Error::parse(row.line, format!("unknown label {:?}", row.label)))?;
        labels.push(y);
        for &(idx, val) in &row.entries {
            features[n * dim + idx - 1] = val;
        }
    }
    let data = SampleSet::new(features, labels, dim, map.len())?;
    Ok((data, map))
}

pub fn load_libsvm(path: impl AsRef<Path>, options: &LibsvmOptions) -> Result<(SampleSet, LabelMap)> {
    parse_libsvm(&fs::read_to_string(path)?, options)
}

/// Write nonzero features with shortest round-trip formatting.
pub fn write_libsvm<W: Write>(mut out: W, data: &SampleSet, labels: &LabelMap) -> Result<()> {
    if labels.len() < data.num_classes() {
        return Err(Error::invalid("label map has fewer entries than the data has classes"));
    }
    for (n, row) in data.rows().enumerate() {
        write!(out, "{}", labels.token(data.label(n)))?;
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 {
                write!(out, " {}:{}", j + 1, v)?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}
