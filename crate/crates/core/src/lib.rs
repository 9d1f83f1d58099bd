//! Deterministic oblique decision trees trained end to end.
//!
//! Training relaxes every split into a sigmoid gate of steepness `γ` and
//! maximizes the log-likelihood of the resulting probabilistic tree with an
//! EM-style optimizer, while `γ` is raised epoch by epoch. Prediction always
//! routes samples deterministically. Trees are grown greedily stump by stump
//! and can then be finetuned as a whole.

pub mod adam;
pub mod alternating;
pub mod axis;
pub mod data;
pub mod dataset;
pub mod em;
pub mod entropy;
pub mod error;
pub mod inference;
pub mod laplacian;
pub mod model_file;
pub mod structure;
pub mod synthetic;
pub mod testutil;
pub mod train;
pub mod tree;

pub use adam::{AdamConfig, AdamState};
pub use dataset::{LabelMap, SampleSet};
pub use error::{Error, Result};
pub use inference::{
    accuracy, path_probabilities, predict_class, predict_proba, route_deterministic, sigmoid_steep, LeafProbabilities,
    Steepness,
};
pub use model_file::Model;
pub use structure::{finetune, grow_greedy, ExpansionOrder, GrowthConfig, GrowthTrace};
pub use train::{EpochRecord, Regularizer, Strategy, TrainConfig, TrainReport};
pub use tree::{axis_aligned_beta, oblique_feature, Node, NodeId, PathSets, Tree};
