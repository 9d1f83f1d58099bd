//! Dataset readers and writers, feature preprocessing and image export.

pub mod idx;
pub mod image;
pub mod libsvm;
pub mod normalize;
pub mod split;

pub use idx::{load_idx, read_idx, write_idx_images, write_idx_labels};
pub use image::{
    export_beta_image, export_leaf_map, leaf_map, read_pgm, sliding_window_features, write_pgm, Border, GrayImage,
};
pub use libsvm::{load_libsvm, parse_libsvm, write_libsvm, LibsvmOptions};
pub use normalize::{apply_normalization, fit_normalization, invert_normalization, NormalizationStats};
pub use split::split_train_val;
