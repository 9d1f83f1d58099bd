//! Training configuration and per-epoch reports shared by both trainers.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::adam::AdamConfig;
use crate::error::{Error, Result};
use crate::laplacian::{laplacian_matrix, LaplacianMatrix};

/// How leaf distributions are updated between split updates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Closed-form update from soft responsibilities.
    Em,
    /// Hard counts of a deterministic routing.
    Alternating,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Em => "em",
            Strategy::Alternating => "alternating",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "em" => Ok(Strategy::Em),
            "alternating" | "alt" => Ok(Strategy::Alternating),
            other => Err(Error::invalid(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Steepness used in the first epoch.
    pub gamma0: f64,
    /// Added to the steepness after every epoch.
    pub gamma_increment: f64,
    /// Strength of the spatial smoothness penalty; requires `image_shape` when positive.
    pub lambda: f64,
    pub adam: AdamConfig,
    pub seed: u64,
    /// `(height, width)` of image-shaped features.
    pub image_shape: Option<(usize, usize)>,
    /// Accept a split update only if it does not decrease the batch split objective.
    pub guarded: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 1000,
            gamma0: 1.0,
            gamma_increment: 0.1,
            lambda: 0.0,
            adam: AdamConfig::default(),
            seed: 0,
            image_shape: None,
            guarded: false,
        }
    }
}

/// Spatial penalty `λ Σ_i β_iᵀ M β_i` over the image-shaped part of each split.
#[derive(Clone, Debug)]
pub struct Regularizer {
    pub lambda: f64,
    pub laplacian: LaplacianMatrix,
}

impl Regularizer {
    pub fn new(lambda: f64, height: usize, width: usize) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be non-negative, got {lambda}")));
        }
        Ok(Regularizer {
            lambda,
            laplacian: laplacian_matrix(height, width)?,
        })
    }

    /// Roughness `βᵀMβ` of one split, bias excluded.
    pub fn roughness(&self, beta: &[f64]) -> f64 {
        self.laplacian.quadratic_form(&beta[..self.laplacian.dim()])
    }
}

impl TrainConfig {
    pub fn validate(&self, feature_dim: usize) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if !(self.gamma0.is_finite() && self.gamma0 > 0.0) {
            return Err(Error::invalid(format!("gamma0 must be positive, got {}", self.gamma0)));
        }
        if !(self.gamma_increment.is_finite() && self.gamma_increment >= 0.0) {
            return Err(Error::invalid("gamma increment must be non-negative"));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        if let Some((h, w)) = self.image_shape {
            if h * w != feature_dim {
                return Err(Error::invalid(format!(
                    "image shape {h}x{w} does not match feature dimension {feature_dim}"
                )));
            }
        } else if self.lambda > 0.0 {
            return Err(Error::invalid("spatial regularization needs an image shape"));
        }
        self.adam.validate()
    }

    /// The penalty to apply, if any. `None` when `lambda` is zero.
    pub fn regularizer(&self) -> Result<Option<Regularizer>> {
        match self.image_shape {
            Some((h, w)) if self.lambda > 0.0 => Ok(Some(Regularizer::new(self.lambda, h, w)?)),
            _ => Ok(None),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub gamma: f64,
    pub log_likelihood: f64,
    pub train_accuracy: f64,
    pub wall_time_ms: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub strategy: Strategy,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    /// E-step rows whose responsibilities fell back to path probabilities only.
    pub fallback_rows: usize,
    /// Guarded updates rejected after all step halvings.
    pub skipped_steps: usize,
}

impl TrainReport {
    pub(crate) fn new(strategy: Strategy, seed: u64) -> Self {
        TrainReport {
            strategy,
            seed,
            epochs: Vec::new(),
            fallback_rows: 0,
            skipped_steps: 0,
        }
    }

    pub const CSV_HEADER: [&'static str; 7] = [
        "phase",
        "strategy",
        "epoch",
        "gamma",
        "log_likelihood",
        "train_accuracy",
        "wall_time_ms",
    ];

    /// Append rows to a training log. Wall time is written as 0 unless
    /// `with_timing`, which keeps repeated runs byte-identical.
    pub fn write_csv_rows<W: Write>(&self, writer: &mut csv::Writer<W>, phase: &str, with_timing: bool) -> Result<()> {
        for r in &self.epochs {
            writer.write_record([
                phase.to_string(),
                self.strategy.to_string(),
                r.epoch.to_string(),
                r.gamma.to_string(),
                r.log_likelihood.to_string(),
                r.train_accuracy.to_string(),
                if with_timing {
                    r.wall_time_ms.to_string()
                } else {
                    "0".into()
                },
            ])?;
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W, with_timing: bool) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(Self::CSV_HEADER)?;
        self.write_csv_rows(&mut writer, "train", with_timing)?;
        writer.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let c = TrainConfig::default();
        c.validate(4).unwrap();
        assert!(TrainConfig {
            batch_size: 0,
            ..c.clone()
        }
        .validate(4)
        .is_err());
        assert!(TrainConfig {
            gamma0: 0.0,
            ..c.clone()
        }
        .validate(4)
        .is_err());
        assert!(TrainConfig {
            lambda: 0.1,
            ..c.clone()
        }
        .validate(4)
        .is_err());
        let img = TrainConfig {
            lambda: 0.1,
            image_shape: Some((2, 2)),
            ..c.clone()
        };
        img.validate(4).unwrap();
        assert!(img.validate(5).is_err());
        assert!(img.regularizer().unwrap().is_some());
        assert!(TrainConfig { lambda: 0.0, ..img }.regularizer().unwrap().is_none());
    }

    #[test]
    fn csv_log_format() {
        let mut report = TrainReport::new(Strategy::Em, 7);
        report.epochs.push(EpochRecord {
            epoch: 1,
            gamma: 1.0,
            log_likelihood: -3.5,
            train_accuracy: 0.75,
            wall_time_ms: 12,
        });
        let mut buf = Vec::new();
        report.write_csv(&mut buf, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "phase,strategy,epoch,gamma,log_likelihood,train_accuracy,wall_time_ms\n\
             train,em,1,1,-3.5,0.75,0\n"
        );
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("em".parse::<Strategy>().unwrap(), Strategy::Em);
        assert_eq!("alternating".parse::<Strategy>().unwrap(), Strategy::Alternating);
        assert!("sgd".parse::<Strategy>().is_err());
    }
}
