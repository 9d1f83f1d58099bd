//! Per-feature standardization with statistics from the training set.

use crate::dataset::SampleSet;
use crate::error::{Error, Result};

/// Feature means and population standard deviations. Features with zero
/// deviation are only shifted.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormalizationStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Indices of features with zero deviation.
    pub fn constant_features(&self) -> Vec<usize> {
        self.std
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    fn scale(&self, j: usize) -> f64 {
        if self.std[j] > 0.0 {
            self.std[j]
        } else {
            1.0
        }
    }

    pub fn apply_row(&self, row: &mut [f64]) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (*v - self.mean[j]) / self.scale(j);
        }
    }
}

pub fn fit_normalization(data: &SampleSet) -> Result<NormalizationStats> {
    if data.is_empty() {
        return Err(Error::invalid("cannot fit normalization to an empty set"));
    }
    let n = data.len() as f64;
    let p = data.dim();
    let mut mean = vec![0.0; p];
    for row in data.rows() {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; p];
    for row in data.rows() {
        for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
    Ok(NormalizationStats { mean, std })
}

fn check_dim(data: &SampleSet, stats: &NormalizationStats) -> Result<()> {
    if data.dim() != stats.dim() {
        return Err(Error::invalid(format!(
            "statistics have dimension {} but the data has {}",
            stats.dim(),
            data.dim()
        )));
    }
    Ok(())
}

pub fn apply_normalization(data: &SampleSet, stats: &NormalizationStats) -> Result<SampleSet> {
    check_dim(data, stats)?;
    let mut out = data.clone();
    for row in out.features_mut().chunks_exact_mut(stats.dim()) {
        stats.apply_row(row);
    }
    Ok(out)
}

pub fn invert_normalization(data: &SampleSet, stats: &NormalizationStats) -> Result<SampleSet> {
    check_dim(data, stats)?;
    let mut out = data.clone();
    for row in out.features_mut().chunks_exact_mut(stats.dim()) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = *v * stats.scale(j) + stats.mean[j];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sample() -> SampleSet {
        SampleSet::new(vec![1.0, 7.0, 2.0, 7.0, 6.0, 7.0], vec![0, 1, 0], 2, 2).unwrap()
    }

    #[test]
    fn constant_feature_becomes_zero() {
        let d = sample();
        let s = fit_normalization(&d).unwrap();
        assert_eq!(s.constant_features(), vec![1]);
        let z = apply_normalization(&d, &s).unwrap();
        assert!(z.rows().all(|r| r[1] == 0.0));
    }

    #[test]
    fn standardized_moments() {
        let d = sample();
        let z = apply_normalization(&d, &fit_normalization(&d).unwrap()).unwrap();
        let col: Vec<f64> = z.rows().map(|r| r[0]).collect();
        let mean = col.iter().sum::<f64>() / 3.0;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-9);
        assert_abs_diff_eq!(var, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn test_set_uses_train_statistics() {
        let s = fit_normalization(&sample()).unwrap();
        let test = SampleSet::new(vec![3.0, 7.0], vec![0], 2, 2).unwrap();
        let z = apply_normalization(&test, &s).unwrap();
        assert_abs_diff_eq!(z.row(0)[0], 0.0, epsilon = 1e-12);
        let back = invert_normalization(&z, &s).unwrap();
        assert_abs_diff_eq!(back.row(0)[0], 3.0, epsilon = 1e-9);
    }
}
