//! EEGB: the pipeline's raw-EEG interchange format.
//!
//! All fields little-endian:
//!
//! | offset | size | field                      |
//! |--------|------|----------------------------|
//! | 0      | 4    | magic `"EEGB"`             |
//! | 4      | 2    | version (u16) = 1          |
//! | 6      | 2    | flags (u16) = 0            |
//! | 8      | 4    | n_trials (u32)             |
//! | 12     | 4    | n_channels (u32)           |
//! | 16     | 4    | n_samples (u32)            |
//! | 20     | 4    | sample_rate_hz (f32)       |
//! | 24     | 4    | n_label_dims (u32) = 4     |
//!
//! followed by `n_trials * n_channels * n_samples` f32 values in
//! (trial, channel, sample) order and `n_trials * n_label_dims` f32 labels.

use std::path::Path;

use crate::binio::{checked_product, put_f32s, read_file, write_file, Cursor};
use crate::data_model::{TrialSet, N_LABEL_DIMS};
use crate::error::{bail, Error, Result};

pub const EEGB_MAGIC: &[u8; 4] = b"EEGB";
pub const EEGB_VERSION: u16 = 1;
pub const EEGB_HEADER_LEN: usize = 28;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EegbHeader {
    pub version: u16,
    pub flags: u16,
    pub n_trials: u32,
    pub n_channels: u32,
    pub n_samples: u32,
    pub sample_rate_hz: f32,
    pub n_label_dims: u32,
}

impl EegbHeader {
    pub fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(EEGB_MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&self.flags.to_le_bytes());
        out.extend_from_slice(&self.n_trials.to_le_bytes());
        out.extend_from_slice(&self.n_channels.to_le_bytes());
        out.extend_from_slice(&self.n_samples.to_le_bytes());
        out.extend_from_slice(&self.sample_rate_hz.to_le_bytes());
        out.extend_from_slice(&self.n_label_dims.to_le_bytes());
    }

    fn decode(cur: &mut Cursor<'_>) -> Result<Self> {
        if cur.take(4)? != EEGB_MAGIC {
            bail!(Format, "EEGB: bad magic");
        }
        let header = EegbHeader {
            version: cur.u16()?,
            flags: cur.u16()?,
            n_trials: cur.u32()?,
            n_channels: cur.u32()?,
            n_samples: cur.u32()?,
            sample_rate_hz: cur.f32()?,
            n_label_dims: cur.u32()?,
        };
        if header.version != EEGB_VERSION {
            bail!(Format, "EEGB: unsupported version {}", header.version);
        }
        if header.flags != 0 {
            bail!(Format, "EEGB: unknown flags {:#06x}", header.flags);
        }
        if header.n_trials == 0 || header.n_channels == 0 || header.n_samples == 0 {
            bail!(Format, "EEGB: zero dimension in header");
        }
        if header.n_label_dims as usize != N_LABEL_DIMS {
            bail!(Format, "EEGB: expected 4 label dims, found {}", header.n_label_dims);
        }
        if !(header.sample_rate_hz.is_finite() && header.sample_rate_hz > 0.0) {
            bail!(Format, "EEGB: invalid sample rate {}", header.sample_rate_hz);
        }
        Ok(header)
    }
}

pub fn encode_eegb(ts: &TrialSet) -> Result<Vec<u8>> {
    ts.validate()?;
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::InvalidArg(format!("{what} {v} exceeds u32")))
    };
    let header = EegbHeader {
        version: EEGB_VERSION,
        flags: 0,
        n_trials: to_u32(ts.n_trials, "n_trials")?,
        n_channels: to_u32(ts.n_channels, "n_channels")?,
        n_samples: to_u32(ts.n_samples, "n_samples")?,
        sample_rate_hz: ts.sample_rate_hz,
        n_label_dims: N_LABEL_DIMS as u32,
    };
    let mut out = Vec::with_capacity(EEGB_HEADER_LEN + 4 * (ts.data.len() + ts.labels.len()));
    header.encode(&mut out);
    put_f32s(&mut out, &ts.data);
    put_f32s(&mut out, &ts.labels);
    Ok(out)
}

/// Decodes an EEGB image. With `lenient`, out-of-range labels are clamped
/// to [1, 9] with a warning instead of failing.
pub fn decode_eegb(bytes: &[u8], lenient: bool) -> Result<TrialSet> {
    let mut cur = Cursor::new(bytes, "EEGB");
    let h = EegbHeader::decode(&mut cur)?;
    let n_data = checked_product(
        &[h.n_trials as usize, h.n_channels as usize, h.n_samples as usize],
        "EEGB",
    )?;
    let data = cur.f32_vec(n_data)?;
    let mut labels = cur.f32_vec(h.n_trials as usize * N_LABEL_DIMS)?;
    cur.finish()?;
    if lenient {
        let mut clamped = 0usize;
        for v in labels.iter_mut() {
            if !(1.0..=9.0).contains(v) {
                *v = if v.is_nan() { 5.0 } else { v.clamp(1.0, 9.0) };
                clamped += 1;
            }
        }
        if clamped > 0 {
            eprintln!("warning: clamped {clamped} out-of-range labels to [1, 9]");
        }
    }
    TrialSet::new(
        h.n_trials as usize,
        h.n_channels as usize,
        h.n_samples as usize,
        h.sample_rate_hz,
        data,
        labels,
    )
}

pub fn write_eegb(ts: &TrialSet, path: &Path) -> Result<()> {
    write_file(path, &encode_eegb(ts)?)
}

pub fn read_eegb(path: &Path, lenient: bool) -> Result<TrialSet> {
    decode_eegb(&read_file(path)?, lenient)
}
