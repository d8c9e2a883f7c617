//! Image datasets, occlusion, synthetic data and on-disk archives.

pub mod archive;
pub mod dataset;
pub mod occlusion;
pub mod synth;

pub use archive::{load_labeled, load_model, save_labeled, save_model};
pub use dataset::{
    load_dataset, split_images, split_train_test, DatasetManifest, Geometry, ImageDataset, LabeledDataset,
};
pub use occlusion::{block_side, builtin_patches, load_patches, occlude, OcclusionBlock};
pub use synth::{partner_class, plant_sparse_corruption, synth_multimodal, SynthDataset, SynthSpec};
