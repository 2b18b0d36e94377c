//! Dataset readers and writers, plus the synthetic EEG generator.

pub mod eegb;
pub mod npy;
pub mod synth;

pub use eegb::{decode_eegb, encode_eegb, read_eegb, write_eegb, EegbHeader};
pub use npy::{decode_npy, encode_npy, read_npy_pair, trial_set_from_npy, write_npy, NpyDtype, NpyMeta};
pub use synth::{synth_generate, SynthSpec};
