//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use std::panic::{catch_unwind, AssertUnwindSafe};

use eegemo::data_model::{FeatureDataset, LabelDim, TrialSet};
use eegemo::dsp::featfile::{decode_feat, encode_feat};
use eegemo::dsp::norm::NormStats;
use eegemo::ingest::npy::NpyDtype;
use eegemo::ingest::{decode_eegb, decode_npy, encode_eegb, encode_npy};
use eegemo::net::{init_params, ModelConfig};
use eegemo::rng::Prng;
use eegemo::train::{decode_checkpoint, encode_checkpoint, AdamHyper, AdamState, Checkpoint};

pub const PER_FORMAT: usize = 3_000;

pub fn eegb_bytes() -> Vec<u8> {
    let data = (0..2 * 3 * 8).map(|i| i as f32 * 0.25).collect();
    let ts = TrialSet::new(2, 3, 8, 128.0, data, vec![1.0, 5.0, 9.0, 3.0, 2.0, 2.0, 7.5, 4.0]).unwrap();
    encode_eegb(&ts).unwrap()
}

pub fn npy_bytes() -> Vec<u8> {
    let vals: Vec<f64> = (0..24).map(|i| i as f64).collect();
    encode_npy(&[2, 3, 4], &vals, NpyDtype::F64)
}

pub fn feat_bytes() -> Vec<u8> {
    let ds = FeatureDataset {
        n_samples: 3,
        seq_len: 4,
        input_dim: 2,
        features: (0..24).map(|i| i as f32).collect(),
        class_labels: vec![[0, 1, 2, 3], [8, 7, 6, 5], [4, 4, 4, 4]],
        label_dim: LabelDim::Valence,
        trial_ids: vec![0, 0, 1],
        feature_stats: Some(NormStats {
            mean: vec![0.5; 8],
            std: vec![2.0; 8],
        }),
    };
    encode_feat(&ds).unwrap()
}

pub fn emoc_bytes() -> Vec<u8> {
    let cfg = ModelConfig {
        seq_len: 3,
        input_dim: 2,
        bi_units: 2,
        lstm_units: vec![3, 2],
        dropout: vec![0.1, 0.2, 0.3],
        dense_units: vec![4],
        ..ModelConfig::default()
    };
    let params = init_params::<f32>(&cfg, 4).unwrap();
    let n = params.len();
    encode_checkpoint(&Checkpoint {
        params,
        label_dim: LabelDim::Liking,
        epoch: 3,
        test_accuracy: 0.5,
        adam: Some(AdamState::new(n, AdamHyper::default())),
    })
    .unwrap()
}

/// One random edit focused on the first `header` bytes: bit flips, byte
/// overwrites with boundary values, truncation, or extension.
pub fn mutate(orig: &[u8], header: usize, rng: &mut Prng) -> Vec<u8> {
    let mut b = orig.to_vec();
    for _ in 0..1 + rng.below(3) {
        if b.is_empty() {
            break;
        }
        let span = header.min(b.len());
        match rng.below(6) {
            0 => {
                let i = rng.below(span);
                b[i] ^= 1 << rng.below(8);
            }
            1 => {
                let i = rng.below(span);
                b[i] = [0x00, 0xff, 0x7f, 0x80, 0x01][rng.below(5)];
            }
            2 => {
                // A whole little-endian u32 set to an extreme.
                let i = rng.below(span.saturating_sub(3).max(1));
                let v: u32 = [0, 1, u32::MAX, 0x8000_0000, 0x7fff_ffff][rng.below(5)];
                for (k, byte) in v.to_le_bytes().iter().enumerate() {
                    if let Some(slot) = b.get_mut(i + k) {
                        *slot = *byte;
                    }
                }
            }
            3 => b.truncate(rng.below(b.len() + 1)),
            4 => b.extend((0..1 + rng.below(16)).map(|_| rng.below(256) as u8)),
            _ => {
                let i = rng.below(span);
                b[i] = rng.below(256) as u8;
            }
        }
    }
    b
}

pub fn fuzz(name: &str, orig: Vec<u8>, header: usize, seed: u64, decode: &dyn Fn(&[u8]) -> bool) -> usize {
    assert!(decode(&orig), "{name}: pristine bytes must decode");
    let mut rng = Prng::new(seed);
    let mut rejected = 0;
    for case in 0..PER_FORMAT {
        let bytes = mutate(&orig, header, &mut rng);
        match catch_unwind(AssertUnwindSafe(|| decode(&bytes))) {
            Ok(ok) => rejected += usize::from(!ok),
            Err(_) => panic!("{name}: decoder panicked on case {case}: {:02x?}", &bytes[..bytes.len().min(64)]),
        }
    }
    rejected
}

/// Every container with its pristine bytes, header span and decoder.
pub fn containers() -> Vec<(&'static str, Vec<u8>, usize, Box<dyn Fn(&[u8]) -> bool>)> {
    vec![
        ("eegb", eegb_bytes(), 28, Box::new(|b: &[u8]| decode_eegb(b, false).is_ok())),
        ("npy", npy_bytes(), 128, Box::new(|b: &[u8]| decode_npy(b).is_ok())),
        ("feat", feat_bytes(), 24, Box::new(|b: &[u8]| decode_feat(b).is_ok())),
        ("emoc", emoc_bytes(), 220, Box::new(|b: &[u8]| decode_checkpoint(b).is_ok())),
    ]
}

/// Runs `PER_FORMAT` mutations per container. Returns (cases, rejected).
pub fn fuzz_all() -> (usize, usize) {
    let mut total = 0;
    let mut rejected = 0;
    for (i, (name, bytes, header, decode)) in containers().into_iter().enumerate() {
        rejected += fuzz(name, bytes, header, 100 + i as u64, &*decode);
        total += PER_FORMAT;
    }
    (total, rejected)
}
