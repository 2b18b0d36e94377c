//! Windowed spectral analysis and feature preparation: FFT, Hann window,
//! band powers over a channel subset, z-scoring, and sequence formation.

pub mod bands;
pub mod featfile;
pub mod features;
pub mod fft;
pub mod norm;
pub mod sequences;
pub mod spectrum;

pub use bands::{band_power, Band, BandTable, UpperEdge};
pub use featfile::{decode_feat, encode_feat, read_feat, write_feat};
pub use features::{extract_features, ChannelSubset, FeatureOptions, RawFeatures, SequenceMode, WindowPlan};
pub use fft::FftPlan;
pub use norm::{zscore_apply, zscore_apply_in_place, zscore_fit, NormStats};
pub use sequences::to_sequences;
pub use spectrum::{hann_window, rectangular_window, rfft_power, Spectrum};
