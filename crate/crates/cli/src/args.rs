//! Command-line arguments. Every flag can also be set through an `OBLIQ_*`
//! environment variable; explicit flags take precedence.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use obliq::{AdamConfig, ExpansionOrder, GrowthConfig, Strategy, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::source::DataSource;

#[derive(Debug, Parser)]
#[command(
    name = "obliq",
    version,
    about = "Train and inspect probabilistic oblique decision trees"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Grow a tree greedily, finetune it and write the model with its logs.
    Train(TrainArgs),
    /// Deterministic-routing accuracy and confusion counts of a model.
    Eval(EvalArgs),
    /// Greedy and finetuned accuracies for a list of maximum depths.
    DepthSweep(SweepArgs),
    /// Split parameters as PGM images and leaf distributions as CSV.
    Visualize(VisualizeArgs),
    /// Re-run the command recorded in a manifest and compare checksums.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct DataArgs {
    /// Training data: `synthetic:NAME`, `idx:IMAGES,LABELS` or a LIBSVM file.
    #[arg(long, env = "OBLIQ_DATASET")]
    pub dataset: DataSource,
    /// Test data in the same forms; without it a holdout is split off.
    #[arg(long, env = "OBLIQ_TEST")]
    pub test: Option<DataSource>,
    /// Fraction of the training data held out as test set when `--test` is absent.
    #[arg(long, env = "OBLIQ_HOLDOUT", default_value_t = 0.2)]
    pub holdout: f64,
    /// Sample count of synthetic datasets.
    #[arg(long, env = "OBLIQ_SAMPLES", default_value_t = 1000)]
    pub samples: usize,
    /// Skip per-feature standardization.
    #[arg(long, env = "OBLIQ_NO_NORMALIZE")]
    pub no_normalize: bool,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    #[arg(long, env = "OBLIQ_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "OBLIQ_EPOCHS", default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, env = "OBLIQ_BATCH_SIZE", default_value_t = 1000)]
    pub batch_size: usize,
    /// Adam step size.
    #[arg(long, env = "OBLIQ_LEARNING_RATE", default_value_t = 0.001)]
    pub learning_rate: f64,
    #[arg(long, env = "OBLIQ_GAMMA0", default_value_t = 1.0)]
    pub gamma0: f64,
    /// Steepness increment per epoch.
    #[arg(long, env = "OBLIQ_GAMMA_STEP", default_value_t = 0.1)]
    pub gamma_step: f64,
    /// Weight of the spatial smoothness penalty; needs `--image-shape`.
    #[arg(long, env = "OBLIQ_LAMBDA", default_value_t = 0.0)]
    pub lambda: f64,
    /// Feature layout as an image, e.g. `28x28`.
    #[arg(long, env = "OBLIQ_IMAGE_SHAPE")]
    pub image_shape: Option<ImageShape>,
    #[arg(long, env = "OBLIQ_STRATEGY", default_value = "em")]
    pub strategy: StrategyArg,
    /// Maximum depth; 4 when neither this nor `--max-leaves` is given.
    #[arg(long, env = "OBLIQ_MAX_DEPTH")]
    pub max_depth: Option<usize>,
    #[arg(long, env = "OBLIQ_MAX_LEAVES")]
    pub max_leaves: Option<usize>,
    /// Leaves with fewer samples are not split.
    #[arg(long, env = "OBLIQ_MIN_SAMPLES", default_value_t = 2)]
    pub min_samples: usize,
    /// Leaves whose majority class reaches this fraction are not split.
    #[arg(long, env = "OBLIQ_MIN_PURITY")]
    pub min_purity: Option<f64>,
    #[arg(long, env = "OBLIQ_EXPANSION", default_value = "depth-first")]
    pub expansion: ExpansionArg,
    /// Full-batch EM with step halving so the likelihood never decreases.
    #[arg(long, env = "OBLIQ_GUARDED")]
    pub guarded: bool,
    /// Keep the greedy tree without whole-tree finetuning.
    #[arg(long, env = "OBLIQ_NO_FINETUNE")]
    pub no_finetune: bool,
    /// Record wall times in training logs (makes logs differ between runs).
    #[arg(long, env = "OBLIQ_TIMING")]
    pub timing: bool,
}

impl ModelArgs {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            gamma0: self.gamma0,
            gamma_increment: self.gamma_step,
            lambda: self.lambda,
            adam: AdamConfig {
                alpha: self.learning_rate,
                ..AdamConfig::default()
            },
            seed: self.seed,
            image_shape: self.image_shape.map(|s| (s.height, s.width)),
            guarded: self.guarded,
        }
    }

    pub fn growth_config(&self) -> GrowthConfig {
        let max_depth = match (self.max_depth, self.max_leaves) {
            (None, None) => Some(4),
            (d, _) => d,
        };
        GrowthConfig {
            max_depth,
            max_leaves: self.max_leaves,
            min_purity: self.min_purity,
            min_samples: self.min_samples,
            expansion: self.expansion.0,
            strategy: self.strategy.0,
            stump: self.train_config(),
        }
    }
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Candidate epoch counts, e.g. `20,35,50,65`; the best on a validation split is used.
    #[arg(long, env = "OBLIQ_EPOCHS_SWEEP", value_delimiter = ',')]
    pub epochs_sweep: Option<Vec<usize>>,
    /// Fraction of the training data kept for fitting during the epoch sweep.
    #[arg(long, env = "OBLIQ_VALIDATION_SPLIT", default_value_t = 0.8)]
    pub validation_split: f64,
    #[arg(long, env = "OBLIQ_OUT")]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long, env = "OBLIQ_MODEL")]
    pub model: PathBuf,
    /// Data in the forms accepted by `train --dataset`.
    #[arg(long, env = "OBLIQ_DATASET")]
    pub dataset: DataSource,
    #[arg(long, env = "OBLIQ_SAMPLES", default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, env = "OBLIQ_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Directory for `metrics.csv`, `confusion.csv` and the manifest.
    #[arg(long, env = "OBLIQ_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(
        long,
        env = "OBLIQ_DEPTHS",
        value_delimiter = ',',
        default_value = "2,4,6,8,10,12,14,16,18"
    )]
    pub depths: Vec<usize>,
    #[arg(long, env = "OBLIQ_OUT")]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct VisualizeArgs {
    #[arg(long, env = "OBLIQ_MODEL")]
    pub model: PathBuf,
    #[arg(long, env = "OBLIQ_IMAGE_SHAPE")]
    pub image_shape: ImageShape,
    /// Grayscale PGM whose pixels are routed through the model using
    /// square windows of the model's feature dimension.
    #[arg(long, env = "OBLIQ_LEAF_MAP")]
    pub leaf_map: Option<PathBuf>,
    #[arg(long, env = "OBLIQ_BORDER", default_value = "mirror")]
    pub border: String,
    #[arg(long, env = "OBLIQ_OUT")]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Directory for the replayed artifacts; must differ from the original.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageShape {
    pub height: usize,
    pub width: usize,
}

impl FromStr for ImageShape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (h, w) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("image shape {s:?} is not of the form HxW"))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| format!("invalid image dimension {v:?}"))
        };
        Ok(ImageShape {
            height: parse(h)?,
            width: parse(w)?,
        })
    }
}

impl fmt::Display for ImageShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct StrategyArg(pub Strategy);

impl FromStr for StrategyArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.parse().map(StrategyArg).map_err(|e: obliq::Error| e.to_string())
    }
}

impl TryFrom<String> for StrategyArg {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<StrategyArg> for String {
    fn from(s: StrategyArg) -> String {
        s.0.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ExpansionArg(pub ExpansionOrder);

impl FromStr for ExpansionArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.parse().map(ExpansionArg).map_err(|e: obliq::Error| e.to_string())
    }
}

impl TryFrom<String> for ExpansionArg {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<ExpansionArg> for String {
    fn from(e: ExpansionArg) -> String {
        e.0.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn image_shapes() {
        assert_eq!(
            "28x28".parse::<ImageShape>().unwrap(),
            ImageShape { height: 28, width: 28 }
        );
        assert_eq!("3X5".parse::<ImageShape>().unwrap().to_string(), "3x5");
        assert!("28".parse::<ImageShape>().is_err());
        assert!("0x4".parse::<ImageShape>().is_err());
    }

    #[test]
    fn defaults_follow_the_documented_protocol() {
        let cli = Cli::try_parse_from(["obliq", "train", "--dataset", "synthetic:xor-oblique", "--out", "o"]).unwrap();
        let Command::Train(t) = cli.command else { panic!() };
        let c = t.model.train_config();
        assert_eq!((c.epochs, c.batch_size), (50, 1000));
        assert_eq!((c.gamma0, c.gamma_increment, c.adam.alpha), (1.0, 0.1, 0.001));
        let g = t.model.growth_config();
        assert_eq!(g.max_depth, Some(4));
        assert_eq!(g.strategy, Strategy::Em);
        let cli = Cli::try_parse_from([
            "obliq",
            "train",
            "--dataset",
            "d.txt",
            "--out",
            "o",
            "--max-leaves",
            "8",
            "--epochs-sweep",
            "20,35,50,65",
        ])
        .unwrap();
        let Command::Train(t) = cli.command else { panic!() };
        assert_eq!(t.model.growth_config().max_depth, None);
        assert_eq!(t.epochs_sweep, Some(vec![20, 35, 50, 65]));
    }
}
