//! FEAT: the feature-tensor sidecar written by `eegemo features`.
//!
//! Little-endian layout:
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `"FEAT"`                          |
//! | 4      | 2    | version (u16) = 1                       |
//! | 6      | 2    | flags (u16): bit 0 stats, bit 1 trials  |
//! | 8      | 4    | n_samples (u32)                         |
//! | 12     | 4    | seq_len (u32)                           |
//! | 16     | 4    | input_dim (u32)                         |
//! | 20     | 4    | n_label_dims (u32) = 4                  |
//!
//! Payload, in order: features as f32 `(n_samples, seq_len, input_dim)`;
//! target class indices as u8 `(n_samples, n_label_dims)`; when flag bit 0
//! is set, the normalization mean then std as f32, each of length
//! `seq_len * input_dim`; when bit 1 is set, the source trial id of every
//! sample as u32.

use std::path::Path;

use crate::binio::{checked_product, put_f32s, read_file, write_file, Cursor};
use crate::data_model::{FeatureDataset, LabelDim, N_CLASSES, N_LABEL_DIMS};
use crate::dsp::norm::NormStats;
use crate::error::{bail, Error, Result};

pub const FEAT_MAGIC: &[u8; 4] = b"FEAT";
pub const FEAT_VERSION: u16 = 1;
pub const FEAT_HEADER_LEN: usize = 24;
const FLAG_STATS: u16 = 1;
const FLAG_TRIALS: u16 = 2;

pub fn encode_feat(ds: &FeatureDataset) -> Result<Vec<u8>> {
    ds.validate()?;
    let u32_of = |v: usize| {
        u32::try_from(v).map_err(|_| Error::InvalidArg(format!("dimension {v} exceeds u32")))
    };
    let flags = FLAG_TRIALS | if ds.feature_stats.is_some() { FLAG_STATS } else { 0 };
    let mut out = Vec::with_capacity(FEAT_HEADER_LEN + ds.features.len() * 4 + ds.n_samples * 8);
    out.extend_from_slice(FEAT_MAGIC);
    out.extend_from_slice(&FEAT_VERSION.to_le_bytes());
    out.extend_from_slice(&flags.to_le_bytes());
    for v in [ds.n_samples, ds.seq_len, ds.input_dim, N_LABEL_DIMS] {
        out.extend_from_slice(&u32_of(v)?.to_le_bytes());
    }
    put_f32s(&mut out, &ds.features);
    for labels in &ds.class_labels {
        out.extend_from_slice(labels);
    }
    if let Some(stats) = &ds.feature_stats {
        let narrow = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<_>>();
        put_f32s(&mut out, &narrow(&stats.mean));
        put_f32s(&mut out, &narrow(&stats.std));
    }
    for &t in &ds.trial_ids {
        out.extend_from_slice(&t.to_le_bytes());
    }
    Ok(out)
}

/// Decodes a FEAT image. The training target defaults to valence; pick
/// another with [`FeatureDataset::with_label_dim`].
pub fn decode_feat(bytes: &[u8]) -> Result<FeatureDataset> {
    let mut cur = Cursor::new(bytes, "FEAT");
    if cur.take(4)? != FEAT_MAGIC {
        bail!(Format, "FEAT: bad magic");
    }
    let version = cur.u16()?;
    if version != FEAT_VERSION {
        bail!(Format, "FEAT: unsupported version {version}");
    }
    let flags = cur.u16()?;
    if flags & !(FLAG_STATS | FLAG_TRIALS) != 0 {
        bail!(Format, "FEAT: unknown flags {flags:#06x}");
    }
    let n_samples = cur.u32()? as usize;
    let seq_len = cur.u32()? as usize;
    let input_dim = cur.u32()? as usize;
    let n_label_dims = cur.u32()? as usize;
    if n_samples == 0 || seq_len == 0 || input_dim == 0 {
        bail!(Format, "FEAT: zero dimension in header");
    }
    if n_label_dims != N_LABEL_DIMS {
        bail!(Format, "FEAT: expected 4 label dims, found {n_label_dims}");
    }
    let n_values = checked_product(&[n_samples, seq_len, input_dim], "FEAT")?;
    let features = cur.f32_vec(n_values)?;
    let raw_labels = cur.take(checked_product(&[n_samples, N_LABEL_DIMS], "FEAT")?)?;
    if let Some(&c) = raw_labels.iter().find(|&&c| c as usize >= N_CLASSES) {
        bail!(Format, "FEAT: class index {c} outside 0..9");
    }
    let class_labels = raw_labels
        .chunks_exact(N_LABEL_DIMS)
        .map(|c| c.try_into().unwrap())
        .collect();
    let feature_stats = if flags & FLAG_STATS != 0 {
        let widen = |v: Vec<f32>| v.into_iter().map(f64::from).collect::<Vec<_>>();
        let mean = widen(cur.f32_vec(seq_len * input_dim)?);
        let std = widen(cur.f32_vec(seq_len * input_dim)?);
        Some(NormStats { mean, std })
    } else {
        None
    };
    let trial_ids = if flags & FLAG_TRIALS != 0 {
        let raw = cur.take(checked_product(&[n_samples, 4], "FEAT")?)?;
        raw.chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect()
    } else {
        (0..n_samples as u32).collect()
    };
    cur.finish()?;
    let ds = FeatureDataset {
        n_samples,
        seq_len,
        input_dim,
        features,
        class_labels,
        label_dim: LabelDim::Valence,
        trial_ids,
        feature_stats,
    };
    ds.validate().map_err(|e| match e {
        Error::Numeric(m) => Error::Format(format!("FEAT: {m}")),
        other => other,
    })?;
    Ok(ds)
}

pub fn write_feat(ds: &FeatureDataset, path: &Path) -> Result<()> {
    write_file(path, &encode_feat(ds)?)
}

pub fn read_feat(path: &Path) -> Result<FeatureDataset> {
    decode_feat(&read_file(path)?)
}
