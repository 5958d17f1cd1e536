//! Images, degradation, the residual codec and dataset construction.

mod augment;
mod dataset;
mod image;
mod resample;
mod residual;
mod synth;

pub use augment::augment;
pub use dataset::{
    manifest_root, split, Dataset, DatasetManifest, ManifestEntry, PairedSample, Split, SplitTag,
};
pub use image::{
    denormalize, encode_png, mse, normalize, quantize, read_png, write_png, ImageRGB8,
};
pub use resample::{bicubic_resample, cubic_kernel, cubic_weights, degrade, sample_1d, CUBIC_A};
pub use residual::{
    decode_byte, decode_residual, encode_byte, encode_residual, is_lossless, NO_CHANGE,
};
pub use synth::{synth_generate, synth_image};
